"""Real roots of the monic quartic z^4 + a1 z^3 + a2 z^2 + a3 z + a4.

Two independent routes: a closed form in radicals (Ferrari / resolvent cubic)
and the eigenvalues of the companion matrix.  The companion route is the
production default; the closed form is kept as a cross-check.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuarticRoots",
    "QuarticError",
    "DegenerateBranch",
    "NonRealRoots",
    "coefficient_scale",
    "quartic_residuals",
    "solve_quartic_closed_form",
    "solve_quartic_companion",
    "solve_quartic",
    "vieta_errors",
]

RESIDUAL_TOL = 1e-9
IMAG_TOL = 1e-9
NONREAL_TOL = 1e-6
GAP_TOL = 1e-6
_BRANCH_EPS = 1e-12

_CUBE_ROOTS_OF_UNITY = (1.0, cmath.exp(2j * cmath.pi / 3), cmath.exp(-2j * cmath.pi / 3))


class QuarticError(ArithmeticError):
    pass


class DegenerateBranch(QuarticError):
    """The radical formula divides by a vanishing intermediate on every branch."""


class NonRealRoots(QuarticError):
    """A root has an imaginary part too large to be rounding noise."""


def coefficient_scale(a) -> float:
    return max(1.0, *(abs(float(x)) for x in a))


def root_scale(zeta) -> float:
    return max(1.0, float(np.max(np.abs(zeta))))


def quartic_residuals(a, zeta) -> np.ndarray:
    a1, a2, a3, a4 = a
    z = np.asarray(zeta)
    return np.abs((((z + a1) * z + a2) * z + a3) * z + a4)


@dataclass(frozen=True)
class QuarticRoots:
    zeta: np.ndarray  # ascending
    residuals: np.ndarray
    min_gap: float
    method: str  # "closed_form" | "companion_matrix"
    coefficients: tuple[float, float, float, float]

    @property
    def scale(self) -> float:
        return coefficient_scale(self.coefficients)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))

    @property
    def residuals_ok(self) -> bool:
        return self.max_residual <= RESIDUAL_TOL * self.scale

    @property
    def near_degenerate(self) -> bool:
        return self.min_gap < GAP_TOL * root_scale(self.zeta)


def _finish(a, roots: np.ndarray, method: str) -> QuarticRoots:
    zeta = np.sort(np.asarray(roots, dtype=float))
    gaps = np.diff(zeta)
    return QuarticRoots(
        zeta=zeta,
        residuals=quartic_residuals(a, zeta),
        min_gap=float(gaps.min()),
        method=method,
        coefficients=tuple(float(x) for x in a),
    )


def _radical_roots(a1, a2, a3, a4, d2, literal=False):
    """Four roots from one choice of the resolvent cube root ``d2``.

    Adjudicated reading of the nested radicals:

        z1 = sqrt(y2 + y1/(3 d2) + d2/3)
        z_{1,2} = -a1/4 - z1/2 -/+ (1/2) sqrt(z2 - z3/(4 z1))
        z_{3,4} = -a1/4 + z1/2 -/+ (1/2) sqrt(z2 + z3/(4 z1))

    ``literal=True`` drops the 1/2 in front of the inner radicals, which does
    not satisfy the quartic (kept only to demonstrate that).
    """
    y1 = 12 * a4 + a2 * a2 - 3 * a1 * a3
    y2 = -2 * a2 / 3 + a1 * a1 / 4
    z1 = cmath.sqrt(y2 + y1 / (3 * d2) + d2 / 3)
    if abs(z1) < _BRANCH_EPS * max(1.0, abs(a1)):
        return None
    z2 = 2 * y2 - y1 / (3 * d2) - d2 / 3
    z3 = -8 * a3 + 4 * a1 * a2 - a1**3
    inner = 1.0 if literal else 0.5
    r_minus = inner * cmath.sqrt(z2 - z3 / (4 * z1))
    r_plus = inner * cmath.sqrt(z2 + z3 / (4 * z1))
    base = -a1 / 4
    return np.array(
        [
            base - z1 / 2 - r_minus,
            base - z1 / 2 + r_minus,
            base + z1 / 2 - r_plus,
            base + z1 / 2 + r_plus,
        ]
    )


def _depress(a):
    """Shift s = -a1/4 and the coefficients of p(w + s), whose cubic term vanishes."""
    a1, a2, a3, a4 = a
    s = -a1 / 4
    b2 = a2 + 3 * a1 * s + 6 * s * s
    b3 = a3 + 2 * a2 * s + 3 * a1 * s * s + 4 * s**3
    b4 = a4 + a3 * s + a2 * s * s + a1 * s**3 + s**4
    return s, (0.0, b2, b3, b4)


def solve_quartic_closed_form(a1, a2, a3, a4, literal: bool = False) -> QuarticRoots:
    """Roots in radicals with complex intermediates.

    The principal cube root is tried first; if its residuals exceed tolerance
    the other square-root sign and the two other cube-root branches are tried
    and the branch with the smallest worst residual is kept.
    """
    a = (float(a1), float(a2), float(a3), float(a4))
    if not all(np.isfinite(a)):
        raise ValueError("quartic coefficients must be finite")
    # radicals are evaluated on the depressed quartic (cubic term removed by
    # the shift z = w - a1/4), which avoids cancellation for clustered roots
    shift, (b1, b2, b3, b4) = _depress(a)
    y1 = 12 * b4 + b2 * b2 - 3 * b1 * b3
    d1 = 27 * b3 * b3 - 72 * b2 * b4 + 2 * b2**3 - 9 * b1 * b2 * b3 + 27 * b1 * b1 * b4
    disc = cmath.sqrt(d1 * d1 - 4 * y1**3)
    tol = RESIDUAL_TOL * coefficient_scale(a)

    best = None
    best_res = np.inf
    for sign, omega in itertools.product((1.0, -1.0), _CUBE_ROOTS_OF_UNITY):
        base = (d1 + sign * disc) / 2
        if base == 0:
            continue
        d2 = omega * base ** (1.0 / 3.0)
        if abs(d2) < _BRANCH_EPS * max(1.0, abs(d1)) ** (1.0 / 3.0):
            continue
        roots = _radical_roots(b1, b2, b3, b4, d2, literal=literal)
        if roots is None or not np.all(np.isfinite(roots)):
            continue
        roots = roots + shift
        res = float(np.max(quartic_residuals(a, roots)))
        if res < best_res:
            best, best_res = roots, res
        if res <= tol:
            break
    if best is None:
        if y1 == 0 and d1 == 0:
            # quadruple root at -a1/4 (all resolvent quantities vanish)
            best = np.full(4, shift, dtype=complex)
        else:
            raise DegenerateBranch(f"no usable radical branch for coefficients {a}")
    if np.max(np.abs(best.imag)) > NONREAL_TOL * root_scale(best):
        raise NonRealRoots(f"closed form produced complex roots {best}")
    return _finish(a, best.real, "closed_form")


def companion_matrix(a1, a2, a3, a4) -> np.ndarray:
    m = np.zeros((4, 4))
    m[1:, :-1] = np.eye(3)
    m[:, -1] = [-a4, -a3, -a2, -a1]
    return m


def solve_quartic_companion(a1, a2, a3, a4) -> QuarticRoots:
    """Eigenvalues of the companion matrix; imaginary parts must be rounding noise."""
    a = (float(a1), float(a2), float(a3), float(a4))
    if not all(np.isfinite(a)):
        raise ValueError("quartic coefficients must be finite")
    roots = np.linalg.eigvals(companion_matrix(*a))
    scale = root_scale(roots)
    worst = float(np.max(np.abs(roots.imag)))
    if worst > NONREAL_TOL * scale:
        raise NonRealRoots(f"companion eigenvalues are not real: {roots}")
    return _finish(a, roots.real, "companion_matrix")


def solve_quartic(a, method: str = "companion") -> QuarticRoots:
    if method in ("companion", "companion_matrix"):
        return solve_quartic_companion(*a)
    if method == "closed_form":
        return solve_quartic_closed_form(*a)
    raise ValueError(f"unknown quartic method {method!r}")


def vieta_errors(roots: QuarticRoots) -> np.ndarray:
    """Relative errors of the four Vieta identities.

    Each elementary symmetric polynomial e_j is compared with (-1)^j a_j and
    the difference divided by max(1, sum of |products|), which is the scale at
    which e_j can be evaluated in floating point.
    """
    z = roots.zeta
    a = roots.coefficients
    errors = np.empty(4)
    for j in range(1, 5):
        terms = np.array([np.prod(c) for c in itertools.combinations(z, j)])
        target = (-1) ** j * a[j - 1]
        errors[j - 1] = abs(terms.sum() - target) / max(1.0, float(np.abs(terms).sum()), abs(target))
    return errors

"""Time evolution of every manifold: closed-form eigen-expansion and an RK4 oracle.

Amplitudes are stored per manifold as (A1, A2, A3, A4, A5) with A2 == A1; the
photon numbers paired with them are (n, n, n+k, n+2k, n+3k).
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from .model import (
    ManifoldCoefficients,
    ModelParams,
    build_manifold_coefficients,
    initial_manifold_weights,
)
from .quartic import QuarticRoots, solve_quartic

__all__ = [
    "DegenerateRoots",
    "StepSizeUnderflow",
    "ManifoldError",
    "ManifoldSolution",
    "StateTrajectory",
    "solve_manifold_closed_form",
    "evaluate_amplitudes",
    "integrate_manifold_ode",
    "integrate_manifolds_ode",
    "ode_step_size",
    "evolve_state",
    "uniform_grid",
]

log = logging.getLogger(__name__)

if "NUMBA_THREADING_LAYER" not in os.environ:
    # always available; avoids probing an incompatible TBB install
    numba.config.THREADING_LAYER = "workqueue"

MIN_STEP = 1e-12
MAX_STEP = 1e-3
STEP_FACTOR = 0.01


class DegenerateRoots(ArithmeticError):
    """Two eigenfrequencies (nearly) coincide, so the eigen-expansion is singular."""


class StepSizeUnderflow(ArithmeticError):
    pass


class ManifoldError(RuntimeError):
    def __init__(self, n: int, cause: Exception):
        super().__init__(f"manifold n={n}: {cause}")
        self.n = n
        self.cause = cause


@dataclass(frozen=True)
class ManifoldSolution:
    """Eigen-expansion of one manifold.

    ``modes[i, j]`` is the amplitude of (A1, A3, A4, A5)[i] carried by root j,
    already multiplied by B_j; ``method`` is "closed_form" or "trivial" (no
    coupling to level 5, pure Kerr phase).
    """

    n: int
    B: np.ndarray
    roots: QuarticRoots | None
    method: str
    modes: np.ndarray = field(repr=False)
    frequencies: np.ndarray = field(repr=False)


def _trivial_solution(coeffs: ManifoldCoefficients, initial_weight: complex) -> ManifoldSolution:
    # level 5 decoupled: A5 = q exp(-i alpha_5 t), written in the same
    # rotating-frame form as the expansion (zeta = -Gamma_3)
    modes = np.zeros((4, 4), dtype=complex)
    modes[3, 0] = initial_weight
    freqs = np.full(4, -coeffs.gamma[2])
    return ManifoldSolution(
        n=coeffs.n, B=np.zeros(4, dtype=complex), roots=None, method="trivial",
        modes=modes, frequencies=freqs,
    )


def solve_manifold_closed_form(
    coeffs: ManifoldCoefficients,
    initial_weight: complex,
    roots: QuarticRoots | None = None,
    root_method: str = "companion",
) -> ManifoldSolution:
    """B_j = -q v1 v3 v4 / prod_{k != j}(zeta_j - zeta_k) and the per-root mode vectors."""
    c = coeffs
    if c.v_4 == 0.0:
        return _trivial_solution(c, initial_weight)
    if c.v_1 == 0.0 or c.v_3 == 0.0:
        raise DegenerateRoots(f"manifold {c.n}: partial decoupling (v1 v3 = 0) is not expandable")
    if roots is None:
        roots = solve_quartic(c.a, method=root_method)
    if roots.near_degenerate:
        raise DegenerateRoots(f"manifold {c.n}: root gap {roots.min_gap:.3e}")

    z = roots.zeta
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    vvv = c.v_1 * c.v_3 * c.v_4
    B = -initial_weight * vvv / np.prod(diff, axis=1)

    g1, g2 = c.gamma[0], c.gamma[1]
    s1 = c.alpha_1 + z
    x4 = (g1 + z) * s1 - 2.0 * c.v_1**2
    x5 = s1 * (c.v_3**2 - (g1 + z) * (g2 + z)) + 2.0 * c.v_1**2 * (g2 + z)
    shape = np.vstack(
        [np.ones_like(z), -s1 / c.v_1, x4 / (c.v_1 * c.v_3), x5 / vvv]
    )
    return ManifoldSolution(
        n=c.n, B=B, roots=roots, method="closed_form",
        modes=shape * B[None, :], frequencies=z.copy(),
    )


def _frame_phases(coeffs: ManifoldCoefficients) -> np.ndarray:
    return np.array(
        [0.0, coeffs.delta_1, coeffs.delta_1 + coeffs.delta_3, coeffs.delta_sum]
    )


def evaluate_amplitudes(sol: ManifoldSolution, coeffs: ManifoldCoefficients, t):
    """(A1, A2, A3, A4, A5) at time(s) ``t``; shape (5,) for scalar t, else (len(t), 5)."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # exp(i (zeta_j + frame_i) t)
    root_phase = np.exp(1j * np.outer(t, sol.frequencies))  # (T, 4)
    folded = root_phase @ sol.modes.T  # (T, 4) over (A1, A3, A4, A5)
    folded *= np.exp(1j * np.outer(t, _frame_phases(coeffs)))
    out = np.empty((t.size, 5), dtype=complex)
    out[:, 0] = folded[:, 0]
    out[:, 1] = folded[:, 0]
    out[:, 2:] = folded[:, 1:]
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# RK4 oracle on the explicitly time-dependent system


def ode_step_size(coeffs_list, max_step: float = MAX_STEP, factor: float = STEP_FACTOR) -> float:
    """h = min(max_step, factor / rho), rho a Gershgorin bound of the system matrix."""
    rho = 0.0
    for c in coeffs_list:
        diag = np.abs(c.alphas)
        off = np.array(
            [c.v_1, 2 * c.v_1 + c.v_3, c.v_3 + c.v_4, c.v_4]
        )
        rho = max(rho, float(np.max(diag + off)), float(np.max(np.abs(c.detunings))))
    if rho == 0.0:
        return max_step
    h = min(max_step, factor / rho)
    if h < MIN_STEP:
        raise StepSizeUnderflow(f"required RK4 step {h:.3e} < {MIN_STEP}")
    return h


@numba.njit(cache=True, inline="always")
def _rhs(t, y, alpha, v1, v3, v4, d1, d3, d4, out):
    e1 = complex(math.cos(d1 * t), math.sin(d1 * t))
    e3 = complex(math.cos(d3 * t), math.sin(d3 * t))
    e4 = complex(math.cos(d4 * t), math.sin(d4 * t))
    # dy/dt = -i M(t) y
    out[0] = -1j * (alpha[0] * y[0] + v1 * e1.conjugate() * y[1])
    out[1] = -1j * (2.0 * v1 * e1 * y[0] + alpha[1] * y[1] + v3 * e3.conjugate() * y[2])
    out[2] = -1j * (v3 * e3 * y[1] + alpha[2] * y[2] + v4 * e4.conjugate() * y[3])
    out[3] = -1j * (v4 * e4 * y[2] + alpha[3] * y[3])


@numba.njit(cache=True, parallel=True)
def _rk4_kernel(alpha, v, det, y0, t_grid, h_max):
    n_man = y0.shape[0]
    n_t = t_grid.shape[0]
    out = np.empty((n_man, n_t, 4), dtype=np.complex128)
    d1, d3, d4 = det[0], det[1], det[2]
    for m in numba.prange(n_man):
        y = y0[m].copy()
        k1 = np.empty(4, dtype=np.complex128)
        k2 = np.empty(4, dtype=np.complex128)
        k3 = np.empty(4, dtype=np.complex128)
        k4 = np.empty(4, dtype=np.complex128)
        tmp = np.empty(4, dtype=np.complex128)
        a = alpha[m]
        v1, v3, v4 = v[m, 0], v[m, 1], v[m, 2]
        out[m, 0] = y
        for i in range(n_t - 1):
            t0 = t_grid[i]
            span = t_grid[i + 1] - t0
            n_sub = max(1, int(math.ceil(abs(span) / h_max - 1e-9)))
            h = span / n_sub
            for s in range(n_sub):
                t = t0 + s * h
                _rhs(t, y, a, v1, v3, v4, d1, d3, d4, k1)
                for j in range(4):
                    tmp[j] = y[j] + 0.5 * h * k1[j]
                _rhs(t + 0.5 * h, tmp, a, v1, v3, v4, d1, d3, d4, k2)
                for j in range(4):
                    tmp[j] = y[j] + 0.5 * h * k2[j]
                _rhs(t + 0.5 * h, tmp, a, v1, v3, v4, d1, d3, d4, k3)
                for j in range(4):
                    tmp[j] = y[j] + h * k3[j]
                _rhs(t + h, tmp, a, v1, v3, v4, d1, d3, d4, k4)
                for j in range(4):
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            out[m, i + 1] = y
    return out


def _set_threads():
    cap = os.environ.get("INVY_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


def integrate_manifolds_ode(
    coeffs_list,
    initial_states,
    t_grid,
    h_max: float | None = None,
    alpha5_third_row: bool = False,
) -> np.ndarray:
    """Classic RK4 for i dA/dt = M(t) A on many manifolds at once.

    ``initial_states`` has shape (N, 4) over (A1, A3, A4, A5).  ``t_grid`` may
    run backwards.  Returns folded amplitudes of shape (N, T, 4).
    ``alpha5_third_row`` puts alpha_5 in the (3,3) entry instead of alpha_4.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if h_max is None:
        h_max = ode_step_size(coeffs_list)
    if h_max < MIN_STEP:
        raise StepSizeUnderflow(f"RK4 step {h_max:.3e} < {MIN_STEP}")
    if not coeffs_list:
        return np.empty((0, t_grid.size, 4), dtype=complex)
    alpha = np.array([c.alphas for c in coeffs_list])
    if alpha5_third_row:
        alpha[:, 2] = alpha[:, 3]
    v = np.array([c.couplings for c in coeffs_list])
    det = coeffs_list[0].detunings
    for c in coeffs_list:
        if not np.array_equal(c.detunings, det):
            raise ValueError("all manifolds must share the same detunings")
    y0 = np.asarray(initial_states, dtype=complex).reshape(len(coeffs_list), 4)
    _set_threads()
    return _rk4_kernel(alpha, v, det, y0, t_grid, float(h_max))


def _unfold(folded: np.ndarray) -> np.ndarray:
    out = np.empty(folded.shape[:-1] + (5,), dtype=complex)
    out[..., 0] = folded[..., 0]
    out[..., 1] = folded[..., 0]
    out[..., 2:] = folded[..., 1:]
    return out


def integrate_manifold_ode(
    coeffs: ManifoldCoefficients,
    initial_weight: complex,
    t_grid,
    h_max: float | None = None,
    alpha5_third_row: bool = False,
) -> np.ndarray:
    """RK4 samples of (A1, A2, A3, A4, A5) on ``t_grid`` (ascending from 0), shape (T, 5)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending and start at 0")
    y0 = np.array([[0, 0, 0, initial_weight]], dtype=complex)
    folded = integrate_manifolds_ode([coeffs], y0, t_grid, h_max, alpha5_third_row)
    return _unfold(folded[0])


# ---------------------------------------------------------------------------
# Whole state


@dataclass(frozen=True)
class StateTrajectory:
    """Amplitudes of all manifolds on a time grid.

    ``amplitudes[n, i, :]`` are (A1, A2, A3, A4, A5) of manifold n at
    ``time_grid[i]``.
    """

    time_grid: np.ndarray
    amplitudes: np.ndarray = field(repr=False)
    params: ModelParams
    norm_history: np.ndarray = field(repr=False)
    norm_deficit: float
    methods: tuple[str, ...] = field(repr=False)
    min_root_gap: float = math.inf
    coefficients: tuple[ManifoldCoefficients, ...] = field(default=(), repr=False)
    roots: tuple[QuarticRoots | None, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def cutoff(self) -> int:
        return self.params.cutoff

    def index_of(self, tau: float) -> int:
        idx = int(np.argmin(np.abs(self.time_grid - tau)))
        if not math.isclose(self.time_grid[idx], tau, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"tau={tau} is not on the trajectory grid")
        return idx


def weighted_norms(amplitudes: np.ndarray) -> np.ndarray:
    """2|A1|^2 + |A3|^2 + |A4|^2 + |A5|^2 along the last axis."""
    p = np.abs(amplitudes) ** 2
    return 2.0 * p[..., 0] + p[..., 2] + p[..., 3] + p[..., 4]


def uniform_grid(tau_max: float, tau_step: float) -> np.ndarray:
    if tau_step <= 0 or tau_max < 0:
        raise ValueError("need tau_step > 0 and tau_max >= 0")
    n = int(round(tau_max / tau_step))
    return np.arange(n + 1) * tau_step


def evolve_state(
    params: ModelParams,
    t_grid,
    method: str = "closed_form",
    root_method: str = "companion",
    h_max: float | None = None,
) -> StateTrajectory:
    """Evolve the initial state |5> x coherent field over ``t_grid``.

    ``method="closed_form"`` uses the eigen-expansion per manifold and falls
    back to RK4 for manifolds with (near-)degenerate roots; ``method="ode"``
    integrates every manifold with RK4.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending and start at 0")
    if method not in ("closed_form", "ode"):
        raise ValueError(f"unknown method {method!r}")

    weights, deficit = initial_manifold_weights(params)
    n_man = params.n_manifolds
    coeffs = [build_manifold_coefficients(params, n) for n in range(n_man)]
    amps = np.empty((n_man, t_grid.size, 5), dtype=complex)
    methods = [""] * n_man
    roots: list[QuarticRoots | None] = [None] * n_man
    min_gap = math.inf
    needs_ode: list[int] = []

    for n, c in enumerate(coeffs):
        if method == "ode":
            needs_ode.append(n)
            continue
        try:
            sol = solve_manifold_closed_form(c, weights[n], root_method=root_method)
        except DegenerateRoots as exc:
            log.info("manifold %d routed to RK4: %s", n, exc)
            needs_ode.append(n)
            continue
        except Exception as exc:
            raise ManifoldError(n, exc) from exc
        roots[n] = sol.roots
        if sol.roots is not None:
            min_gap = min(min_gap, sol.roots.min_gap)
        methods[n] = sol.method
        amps[n] = evaluate_amplitudes(sol, c, t_grid)

    if needs_ode:
        y0 = np.zeros((len(needs_ode), 4), dtype=complex)
        y0[:, 3] = weights[needs_ode]
        sub = [coeffs[n] for n in needs_ode]
        try:
            folded = integrate_manifolds_ode(sub, y0, t_grid, h_max)
        except StepSizeUnderflow as exc:
            raise ManifoldError(needs_ode[0], exc) from exc
        amps[needs_ode] = _unfold(folded)
        for n in needs_ode:
            methods[n] = "ode"
        if method == "ode":
            for n, c in enumerate(coeffs):
                if c.v_4 > 0:
                    try:
                        r = solve_quartic(c.a, method=root_method)
                    except ArithmeticError:
                        continue
                    roots[n] = r
                    min_gap = min(min_gap, r.min_gap)

    norm = weighted_norms(amps).sum(axis=0)
    return StateTrajectory(
        time_grid=t_grid,
        amplitudes=amps,
        params=params,
        norm_history=norm,
        norm_deficit=deficit,
        methods=tuple(methods),
        min_root_gap=min_gap,
        coefficients=tuple(coeffs),
        roots=tuple(roots),
    )

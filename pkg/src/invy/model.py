"""Model parameters, per-manifold coefficients and the initial coherent field.

All rates are expressed in units of the coupling constant lambda and time is the
scaled time tau = lambda * t.  A manifold ``n`` is the invariant subspace

    {|1, n>, |2, n>, |3, n+k>, |4, n+2k>, |5, n+3k>}

and levels 1 and 2 carry identical amplitudes, so each manifold is described by
four amplitudes (A1, A3, A4, A5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "ModelParams",
    "ManifoldCoefficients",
    "CoherentWeights",
    "build_manifold_coefficients",
    "coherent_weights",
    "choose_cutoff",
    "effective_matrix",
    "DEFAULT_TAIL_TOL",
]

DEFAULT_TAIL_TOL = 1e-12
# factorial ratios stay exact (integer products) up to this photon number
MAX_PHOTON_NUMBER = 10**6


def choose_cutoff(n_bar: float, tail_tol: float = DEFAULT_TAIL_TOL, k: int = 1) -> int:
    """Smallest Fock cutoff whose Poisson tail is below ``tail_tol``, plus a 3k margin."""
    if not 0.0 < tail_tol < 1.0:
        raise ValueError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_bar == 0:
        return 3 * k
    n = max(int(math.floor(n_bar)), 0)
    # sf(n) = P(X > n)
    while stats.poisson.sf(n, n_bar) >= tail_tol:
        n += 1
    return n + 3 * k


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs of the five-level Kerr model.

    Rates are ratios to lambda.  With ``time_independent=True`` the coupling
    is constant: the couplings are doubled relative to the cos(mu t) case and
    ``mu`` is ignored entirely.  ``renormalize`` rescales the initial weights
    so the represented state has unit norm.
    """

    n_bar: float = 20.0
    k: int = 1
    mu: float = 0.0
    chi: float = 0.0
    delta_cap_1: float = 0.0
    delta_cap_3: float = 0.0
    delta_cap_4: float = 0.0
    lambda_1: float = 1.0
    lambda_2: float = 1.0
    lambda_3: float = 1.0
    lambda_4: float = 1.0
    cutoff: int | None = None
    time_independent: bool = False
    renormalize: bool = True

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if not self.n_bar >= 0:
            raise ValueError(f"n_bar must be >= 0, got {self.n_bar}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not self.chi >= 0:
            raise ValueError(f"chi must be >= 0, got {self.chi}")
        if self.lambda_1 != self.lambda_2:
            raise ValueError("lambda_1 must equal lambda_2 (levels 1 and 2 are folded)")
        for name in ("lambda_1", "lambda_3", "lambda_4"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
        for name in ("mu", "chi", "delta_cap_1", "delta_cap_3", "delta_cap_4", "n_bar"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        minimum = math.ceil(self.n_bar) + 3 * self.k + 1
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", max(choose_cutoff(self.n_bar, k=self.k), minimum))
        if int(self.cutoff) != self.cutoff or self.cutoff < minimum:
            raise ValueError(f"cutoff must be an integer >= {minimum}, got {self.cutoff}")
        if self.cutoff > MAX_PHOTON_NUMBER:
            raise ValueError(f"cutoff above {MAX_PHOTON_NUMBER} is not supported")

    @property
    def n_manifolds(self) -> int:
        return self.cutoff - 3 * self.k + 1

    @property
    def coupling_scale(self) -> float:
        """Prefactor turning lambda into the effective coupling (1/2, or 1 when constant)."""
        return 1.0 if self.time_independent else 0.5

    @property
    def effective_mu(self) -> float:
        return 0.0 if self.time_independent else self.mu

    @property
    def shifted_detunings(self) -> tuple[float, float, float]:
        mu = self.effective_mu
        return (self.delta_cap_1 - mu, self.delta_cap_3 - mu, self.delta_cap_4 - mu)


def _rising_product(start: int, count: int) -> int:
    """(start + count)! / start! as an exact integer."""
    return math.prod(range(start + 1, start + count + 1))


@dataclass(frozen=True)
class ManifoldCoefficients:
    n: int
    k: int
    alpha_1: float
    alpha_3: float
    alpha_4: float
    alpha_5: float
    v_1: float
    v_3: float
    v_4: float
    delta_1: float
    delta_3: float
    delta_4: float
    delta_sum: float
    gamma: tuple[float, ...]  # Gamma_1 .. Gamma_8
    a: tuple[float, float, float, float]  # quartic coefficients a_1 .. a_4

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha_1, self.alpha_3, self.alpha_4, self.alpha_5])

    @property
    def couplings(self) -> np.ndarray:
        return np.array([self.v_1, self.v_3, self.v_4])

    @property
    def detunings(self) -> np.ndarray:
        return np.array([self.delta_1, self.delta_3, self.delta_4])

    def gamma_(self, i: int) -> float:
        """Gamma_i with the 1-based index used in the formulas."""
        return self.gamma[i - 1]

    @property
    def photon_numbers(self) -> tuple[int, int, int, int, int]:
        """Photon number paired with levels 1..5 in this manifold."""
        n, k = self.n, self.k
        return (n, n, n + k, n + 2 * k, n + 3 * k)


def _quartic_coefficients(alpha_1, v_1, v_3, v_4, g1, g2, g3):
    g4 = alpha_1 + g1
    g5 = alpha_1 * g1 - 2.0 * v_1**2
    g6 = g2 + g4
    g7 = g5 + g2 * g4 - v_3**2
    g8 = g2 * g5 - alpha_1 * v_3**2
    a_1 = g3 + g6
    a_2 = g3 * g6 + g7 - v_4**2
    a_3 = g3 * g7 + g8 - v_4**2 * g4
    a_4 = g3 * g8 - alpha_1 * g1 * v_4**2 + 2.0 * v_1**2 * v_4**2
    return (g1, g2, g3, g4, g5, g6, g7, g8), (a_1, a_2, a_3, a_4)


def build_manifold_coefficients(params: ModelParams, n: int) -> ManifoldCoefficients:
    """Kerr shifts, couplings, Gamma_1..Gamma_8 and quartic coefficients of manifold ``n``."""
    k = params.k
    if n < 0 or int(n) != n:
        raise ValueError(f"manifold index must be a non-negative integer, got {n}")
    n = int(n)
    if n + 3 * k > params.cutoff:
        raise ValueError(f"manifold {n} needs photon number {n + 3 * k} > cutoff {params.cutoff}")

    chi = params.chi
    alpha_1 = chi * n * (n - 1)
    alpha_3 = chi * (n + k) * (n + k - 1)
    alpha_4 = chi * (n + 2 * k) * (n + 2 * k - 1)
    alpha_5 = chi * (n + 3 * k) * (n + 3 * k - 1)

    s = params.coupling_scale
    v_1 = s * params.lambda_1 * math.sqrt(_rising_product(n, k))
    v_3 = s * params.lambda_3 * math.sqrt(_rising_product(n + k, k))
    v_4 = s * params.lambda_4 * math.sqrt(_rising_product(n + 2 * k, k))

    delta_1, delta_3, delta_4 = params.shifted_detunings
    delta_sum = delta_1 + delta_3 + delta_4
    g1 = alpha_3 + delta_1
    g2 = alpha_4 + delta_1 + delta_3
    g3 = alpha_5 + delta_sum
    gamma, a = _quartic_coefficients(alpha_1, v_1, v_3, v_4, g1, g2, g3)

    return ManifoldCoefficients(
        n=n,
        k=k,
        alpha_1=alpha_1,
        alpha_3=alpha_3,
        alpha_4=alpha_4,
        alpha_5=alpha_5,
        v_1=v_1,
        v_3=v_3,
        v_4=v_4,
        delta_1=delta_1,
        delta_3=delta_3,
        delta_4=delta_4,
        delta_sum=delta_sum,
        gamma=gamma,
        a=a,
    )


def effective_matrix(coeffs: ManifoldCoefficients, symmetric: bool = False) -> np.ndarray:
    """Constant matrix K of the manifold in the co-rotating frame.

    Writing A1 = x1 e^{i z t}, A3 = x3 e^{i(z+d1)t}, A4 = x4 e^{i(z+d1+d3)t},
    A5 = x5 e^{i(z+d)t} turns the amplitude equations into K x = -z x, so the
    quartic roots are the negated eigenvalues of K.  Scaling x1 by sqrt(2)
    makes K real symmetric (``symmetric=True``).
    """
    c = coeffs
    g1, g2, g3 = c.gamma[:3]
    lower = math.sqrt(2.0) * c.v_1 if symmetric else 2.0 * c.v_1
    upper = math.sqrt(2.0) * c.v_1 if symmetric else c.v_1
    return np.array(
        [
            [c.alpha_1, upper, 0.0, 0.0],
            [lower, g1, c.v_3, 0.0],
            [0.0, c.v_3, g2, c.v_4],
            [0.0, 0.0, c.v_4, g3],
        ]
    )


@dataclass(frozen=True)
class CoherentWeights:
    q: np.ndarray = field(repr=False)
    norm_deficit: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.q) ** 2


def coherent_weights(params: ModelParams) -> CoherentWeights:
    """Poisson amplitudes q_m = exp(-n/2) alpha^m / sqrt(m!) for m = 0..cutoff, alpha = sqrt(n_bar)."""
    m = np.arange(params.cutoff + 1)
    if params.n_bar == 0:
        q = np.zeros(m.size)
        q[0] = 1.0
    else:
        log_q = -0.5 * params.n_bar + 0.5 * m * math.log(params.n_bar) - 0.5 * np.array(
            [math.lgamma(x + 1) for x in m]
        )
        q = np.exp(log_q)
    deficit = math.fsum((q[: 3 * params.k] ** 2).tolist())
    return CoherentWeights(q=q.astype(complex), norm_deficit=min(deficit, 1.0))


def initial_manifold_weights(params: ModelParams) -> tuple[np.ndarray, float]:
    """Initial level-5 amplitude q_{n+3k} of every manifold, and the norm deficit.

    With ``params.renormalize`` the weights are divided by sqrt(1 - deficit).
    """
    cw = coherent_weights(params)
    weights = cw.q[3 * params.k :].copy()
    if params.renormalize:
        kept = 1.0 - cw.norm_deficit
        if kept <= 0.0:
            raise ValueError(
                "initial field has no weight on photon numbers >= 3k; nothing to evolve"
            )
        weights /= math.sqrt(kept)
    return weights, cw.norm_deficit

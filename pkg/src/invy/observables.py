"""Population inversion, reduced field state and Pegg-Barnett phase statistics.

The phase window is fixed to [-pi, pi).  With d = m - m' and the coherence
sums c_d = sum_m rho[m + d, m], the phase density is

    P(theta) = (1 / 2 pi) [1 + 2 Re sum_{d >= 1} c_d exp(-i d theta)]

and the first two moments follow from the Fourier integrals over [-pi, pi]

    int theta   exp(-i d theta) dtheta / 2pi = i (-1)^d / d
    int theta^2 exp(-i d theta) dtheta / 2pi = 2 (-1)^d / d^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import StateTrajectory

__all__ = [
    "FieldDensityMatrix",
    "PhaseDistribution",
    "UnsupportedOrder",
    "population_inversion",
    "level_populations",
    "field_amplitudes",
    "reduced_field_density",
    "coherence_sums",
    "phase_density",
    "phase_distribution",
    "phase_moment",
    "phase_moments_from_coherences",
    "phase_variance",
    "phase_variance_series",
    "phase_distribution_series",
    "trajectory_coherences",
    "theta_grid",
    "CollapseRevival",
    "oscillation_envelope",
    "find_collapse_revival",
]

COHERENCE_FLOOR = 1e-14


class UnsupportedOrder(ValueError):
    pass


def population_inversion(traj: StateTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """W(tau) = sum_n |A5|^2 - 2 |A1|^2 (levels 3 and 4 do not enter)."""
    p = np.abs(traj.amplitudes) ** 2
    w = p[:, :, 4].sum(axis=0) - 2.0 * p[:, :, 0].sum(axis=0)
    return traj.time_grid.copy(), w


def level_populations(traj: StateTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Populations of levels 1..5, shape (T, 5); P1 == P2."""
    p = (np.abs(traj.amplitudes) ** 2).sum(axis=0)
    return traj.time_grid.copy(), p


def field_amplitudes(traj: StateTrajectory, index=slice(None)) -> np.ndarray:
    """Amplitude table c[..., level, m] over photon numbers m = 0..cutoff.

    Levels are (1, 2, 3, 4, 5); each level's amplitudes are shifted by the
    photon offset (0, 0, k, 2k, 3k) of that level within a manifold.
    """
    k = traj.k
    amps = traj.amplitudes[:, index, :]  # (N, ..., 5)
    amps = np.moveaxis(amps, 0, -1)  # (..., 5, N)
    n_man = amps.shape[-1]
    out = np.zeros(amps.shape[:-1] + (traj.cutoff + 1,), dtype=complex)
    for level, offset in enumerate((0, 0, k, 2 * k, 3 * k)):
        out[..., level, offset : offset + n_man] = amps[..., level, :]
    return out


@dataclass(frozen=True)
class FieldDensityMatrix:
    rho: np.ndarray = field(repr=False)
    tau: float

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho, self.rho)))

    @classmethod
    def from_pure(cls, psi, tau: float = 0.0) -> "FieldDensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(rho=np.outer(psi, psi.conj()), tau=tau)


def reduced_field_density(traj: StateTrajectory, tau: float) -> FieldDensityMatrix:
    """Trace over the atom: rho_F = sum over levels of c_level c_level^dagger."""
    idx = traj.index_of(tau)
    c = field_amplitudes(traj, idx)  # (5, M)
    rho = c.T @ c.conj()
    # exact Hermiticity: rebuild the lower triangle from the upper one
    upper = np.triu(rho, 1)
    rho = upper + upper.conj().T + np.diag(np.diag(rho).real)
    return FieldDensityMatrix(rho=rho, tau=float(traj.time_grid[idx]))


def coherence_sums(rho, d_max: int | None = None) -> np.ndarray:
    """c_d = sum_m rho[m + d, m] for d = 1..d_max (index 0 holds d = 1)."""
    rho = rho.rho if isinstance(rho, FieldDensityMatrix) else np.asarray(rho)
    dim = rho.shape[0]
    d_max = dim - 1 if d_max is None else min(d_max, dim - 1)
    return np.array([np.trace(rho, offset=-d) for d in range(1, d_max + 1)], dtype=complex)


def _coherence_sums_batch(c: np.ndarray, d_max: int) -> np.ndarray:
    """c_d for amplitude tables c[T, 5, M]; levels 1 and 2 are both present."""
    out = np.empty((c.shape[0], d_max), dtype=complex)
    for d in range(1, d_max + 1):
        prod = c[:, :, d:] * c[:, :, :-d].conj()
        out[:, d - 1] = prod.sum(axis=(1, 2))
    return out


def _truncate(cd: np.ndarray) -> np.ndarray:
    """Drop trailing offsets whose coherences are below the floor everywhere."""
    if cd.shape[-1] == 0:
        return cd
    mags = np.abs(cd).reshape(-1, cd.shape[-1]).max(axis=0)
    keep = np.nonzero(mags >= COHERENCE_FLOOR)[0]
    last = int(keep[-1]) + 1 if keep.size else 0
    return cd[..., :last]


def phase_density(cd: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """P(theta) from coherence sums; ``cd`` may be batched along leading axes."""
    cd = _truncate(np.asarray(cd))
    d = np.arange(1, cd.shape[-1] + 1)
    fourier = np.exp(-1j * np.outer(d, theta))  # (D, n_theta)
    return (1.0 + 2.0 * np.real(cd @ fourier)) / (2.0 * np.pi)


@dataclass(frozen=True)
class PhaseDistribution:
    theta_grid: np.ndarray
    p: np.ndarray
    tau: float
    theta_0: float = -math.pi

    def integral(self) -> float:
        # periodic grid: the rectangle rule equals the closed trapezoid
        return float(self.p.sum() * (2.0 * np.pi / self.p.size))


def theta_grid(size: int) -> np.ndarray:
    """Uniform periodic grid on [-pi, pi) containing theta = 0."""
    return -np.pi + 2.0 * np.pi * np.arange(size) / size


def phase_distribution(rho: FieldDensityMatrix, theta_grid_size: int = 512) -> PhaseDistribution:
    if theta_grid_size < 64:
        raise ValueError("theta grid needs at least 64 points")
    th = theta_grid(theta_grid_size)
    return PhaseDistribution(theta_grid=th, p=phase_density(coherence_sums(rho), th), tau=rho.tau)


def phase_moments_from_coherences(cd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(<phi>, <phi^2>) over [-pi, pi) from coherence sums (batched on leading axes)."""
    cd = np.asarray(cd)
    d = np.arange(1, cd.shape[-1] + 1)
    sign = (-1.0) ** d
    first = 2.0 * np.real(cd * (1j * sign / d)).sum(axis=-1)
    second = np.pi**2 / 3 + 2.0 * np.real(cd * (2.0 * sign / d**2)).sum(axis=-1)
    return first, second


def phase_moment(rho: FieldDensityMatrix, order: int) -> float:
    """Analytic <phi^order> for order 1 or 2."""
    if order not in (1, 2):
        raise UnsupportedOrder(f"phase moments are available for orders 1 and 2, got {order}")
    first, second = phase_moments_from_coherences(coherence_sums(rho))
    return float(first if order == 1 else second)


def phase_variance(rho: FieldDensityMatrix) -> float:
    first, second = phase_moments_from_coherences(coherence_sums(rho))
    return float(second - first**2)


def trajectory_coherences(traj: StateTrajectory, d_max: int | None = None) -> np.ndarray:
    """Coherence sums c_d(tau) for every grid time, shape (T, d_max)."""
    c = field_amplitudes(traj)  # (T, 5, M)
    d_max = traj.cutoff if d_max is None else min(d_max, traj.cutoff)
    return _coherence_sums_batch(c, d_max)


def phase_variance_series(traj: StateTrajectory) -> tuple[np.ndarray, np.ndarray]:
    first, second = phase_moments_from_coherences(trajectory_coherences(traj))
    return traj.time_grid.copy(), second - first**2


def phase_distribution_series(traj: StateTrajectory, theta_grid_size: int = 512):
    """(tau, theta, P[T, n_theta]) for the whole trajectory."""
    if theta_grid_size < 64:
        raise ValueError("theta grid needs at least 64 points")
    th = theta_grid(theta_grid_size)
    return traj.time_grid.copy(), th, phase_density(trajectory_coherences(traj), th)


# ---------------------------------------------------------------------------
# collapse / revival detection


def oscillation_envelope(tau: np.ndarray, w: np.ndarray, width: float = 2.0) -> np.ndarray:
    """Half the peak-to-peak range of w in a centred window of the given width."""
    tau = np.asarray(tau)
    w = np.asarray(w)
    half = width / 2.0
    lo = np.searchsorted(tau, tau - half, side="left")
    hi = np.searchsorted(tau, tau + half, side="right")
    return np.array([0.5 * (w[a:b].max() - w[a:b].min()) for a, b in zip(lo, hi)])


@dataclass(frozen=True)
class CollapseRevival:
    collapse_start: float
    collapse_end: float
    revival_center: float
    revival_peak: float


def find_collapse_revival(
    tau, w, width: float = 2.0, collapse_below: float = 0.1, revival_above: float = 0.3
) -> CollapseRevival | None:
    """First window where the envelope drops below ``collapse_below`` and then
    the first later window where it exceeds ``revival_above``.

    Only windows lying fully inside the sampled range are considered.
    """
    tau = np.asarray(tau)
    env = oscillation_envelope(tau, w, width)
    inside = (tau - width / 2 >= tau[0]) & (tau + width / 2 <= tau[-1])
    collapsed = np.nonzero(inside & (env < collapse_below))[0]
    if collapsed.size == 0:
        return None
    start = collapsed[0]
    after = np.nonzero(inside & (env > revival_above) & (np.arange(tau.size) > start))[0]
    if after.size == 0:
        return None
    first = after[0]
    end = first
    while end + 1 < tau.size and inside[end + 1] and env[end + 1] > revival_above:
        end += 1
    seg = slice(first, end + 1)
    peak = first + int(np.argmax(env[seg]))
    collapse_end = tau[first - 1]
    return CollapseRevival(
        collapse_start=float(tau[start]),
        collapse_end=float(collapse_end),
        revival_center=float(0.5 * (tau[first] + tau[end])),
        revival_peak=float(env[peak]),
    )

"""Two qubits in a common zero-temperature bosonic reservoir.

With rotating-wave coupling the excitation number is conserved, so a state
with one excitation stays in the span of

    |A excited>, |B excited>, |mode k occupied>   (k = 1..N)

and the dynamics reduces to an (N+2)-dimensional Schrodinger equation.
The reservoir is a Lorentzian spectral density sampled on a uniform
frequency grid.

Normalisation: the coupling profile is

    J(w) = (W^2 lam / pi) / ((w - w0)^2 + lam^2),    W = R * lam,

so the total coupling sum_k g_k^2 approaches W^2 (the vacuum Rabi
frequency squared) and R is the ratio of Rabi frequency to spectral width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HermitianOperator, SiteRegistry
from .errors import ConvergenceError, FlowRequestError, StateError
from .flow import FlowSeries, rate_from_cumulative

SECTOR_LABEL = "sector"
NORM_TOL = 1e-10
DEFAULT_MODES = 401
DEFAULT_CUTOFF = 40.0  # in units of lam
QUADRATURE_TOL = 0.02


@dataclass(frozen=True)
class ReservoirSpec:
    omegas: np.ndarray
    couplings: np.ndarray
    omega0: float
    lam: float
    big_r: float

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        g = np.asarray(self.couplings, dtype=float)
        if omegas.ndim != 1 or omegas.size == 0 or omegas.shape != g.shape:
            raise ValueError("need matching, nonempty mode frequency and coupling arrays")
        if np.any(g < 0):
            raise ValueError("mode couplings must be nonnegative")
        if not np.all(np.isfinite(g)) or not np.isfinite(np.sum(g**2)):
            raise ValueError("mode couplings must be finite")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "couplings", g)

    @property
    def n_modes(self) -> int:
        return self.omegas.size


def lorentzian_density(omega, lam: float, big_r: float, omega0: float = 0.0):
    rabi = big_r * lam
    return (rabi**2 * lam / np.pi) / ((np.asarray(omega) - omega0) ** 2 + lam**2)


def discretize_lorentzian(
    lam: float,
    big_r: float,
    omega0: float = 0.0,
    n_modes: int = DEFAULT_MODES,
    cutoff_width: float | None = None,
) -> ReservoirSpec:
    """Sample a Lorentzian reservoir on ``n_modes`` uniform frequencies.

    Modes span ``omega0 +- cutoff_width`` with ``g_k^2 = J(w_k) dw``. The
    discrete sum of ``g_k^2`` is checked against the exact integral of
    ``J`` over the window; a mismatch above 2% means the grid cannot resolve
    the line shape and raises :class:`ConvergenceError`.
    """
    if lam <= 0:
        raise ValueError("spectral width must be positive")
    if big_r < 0:
        raise ValueError("coupling strength R must be nonnegative")
    if cutoff_width is None:
        cutoff_width = DEFAULT_CUTOFF * lam
    if n_modes < 8:
        raise ValueError("need at least 8 reservoir modes")
    if cutoff_width < 10 * lam:
        raise ValueError("cutoff window must be at least 10 spectral widths")
    omegas = np.linspace(omega0 - cutoff_width, omega0 + cutoff_width, n_modes)
    dw = omegas[1] - omegas[0]
    g2 = lorentzian_density(omegas, lam, big_r, omega0) * dw
    if big_r > 0:
        exact = (big_r * lam) ** 2 * (2 / np.pi) * np.arctan(cutoff_width / lam)
        rel = abs(g2.sum() - exact) / exact
        if rel > QUADRATURE_TOL:
            raise ConvergenceError(
                f"{n_modes} modes reproduce the coupling integral only to {rel:.1%}; "
                "increase n_modes"
            )
    return ReservoirSpec(omegas, np.sqrt(g2), float(omega0), float(lam), float(big_r))


def normalized_alphas(ratio: float) -> tuple[float, float]:
    """``(alpha_a, alpha_b)`` with ``alpha_a / alpha_b = ratio`` and unit norm."""
    if ratio < 0:
        raise ValueError("coupling ratio must be nonnegative")
    norm = np.hypot(ratio, 1.0)
    return ratio / norm, 1.0 / norm


@dataclass(frozen=True)
class SingleExcitationState:
    """Amplitudes of the one-excitation sector (qubit A, qubit B, modes)."""

    c_a: complex
    c_b: complex
    c_modes: np.ndarray

    def __post_init__(self):
        modes = np.asarray(self.c_modes, dtype=complex)
        object.__setattr__(self, "c_modes", modes)
        object.__setattr__(self, "c_a", complex(self.c_a))
        object.__setattr__(self, "c_b", complex(self.c_b))
        norm = abs(self.c_a) ** 2 + abs(self.c_b) ** 2 + float(np.sum(np.abs(modes) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"sector state has norm^2 {norm:.12g}")

    @classmethod
    def qubits(cls, c_a: complex, c_b: complex, n_modes: int) -> "SingleExcitationState":
        """Excitation shared by the qubits only, reservoir in vacuum."""
        return cls(c_a, c_b, np.zeros(n_modes, dtype=complex))

    @classmethod
    def from_vector(cls, vec) -> "SingleExcitationState":
        vec = np.asarray(vec, dtype=complex)
        return cls(vec[0], vec[1], vec[2:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.c_a, self.c_b], self.c_modes])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def default_initial_state(n_modes: int) -> SingleExcitationState:
    """``(|01> + sqrt2 |10>)/sqrt3`` with the first label on qubit A."""
    return SingleExcitationState.qubits(np.sqrt(2 / 3), np.sqrt(1 / 3), n_modes)


def sector_hamiltonian(reservoir: ReservoirSpec, alpha_a: float, alpha_b: float) -> HermitianOperator:
    """Single-excitation Hamiltonian in the basis (A, B, mode 1..N).

    Any real couplings are accepted so that one of them can be zeroed for a
    frozen branch; the physical runs use :func:`normalized_alphas`.
    """
    n = reservoir.n_modes
    h = np.zeros((n + 2, n + 2))
    h[0, 0] = h[1, 1] = reservoir.omega0
    h[2:, 2:] = np.diag(reservoir.omegas)
    h[0, 2:] = h[2:, 0] = alpha_a * reservoir.couplings
    h[1, 2:] = h[2:, 1] = alpha_b * reservoir.couplings
    return HermitianOperator(SiteRegistry(((SECTOR_LABEL, n + 2),)), h)


def evolve_sector(psi0: SingleExcitationState, h: HermitianOperator, t: float) -> SingleExcitationState:
    vec = psi0.vector
    if vec.size != h.registry.dim:
        raise StateError("state and sector Hamiltonian sizes differ")
    if t == 0:
        return psi0
    eig = h.eigensystem
    v = eig.eigenvectors
    out = v @ (np.exp(-1j * eig.eigenvalues * t) * (v.conj().T @ vec))
    return SingleExcitationState.from_vector(out)


def sector_trajectory(psi0: SingleExcitationState, h: HermitianOperator, times) -> np.ndarray:
    """Amplitude vectors on a time grid, shape ``(len(times), N + 2)``."""
    eig = h.eigensystem
    v = eig.eigenvectors
    coeffs = v.conj().T @ psi0.vector
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), eig.eigenvalues))
    return (phases * coeffs) @ v.T


def binary_entropy(p) -> np.ndarray:
    """Entropy in bits of a qubit with diagonal populations ``(1 - p, p)``."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        hq = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return hp + hq


_INDEX = {"A": 0, "B": 1}


def bath_flow(
    psi0: SingleExcitationState,
    reservoir: ReservoirSpec,
    alpha_a: float,
    alpha_b: float,
    source: str,
    target: str,
    t_max: float,
    steps: int,
) -> FlowSeries:
    """Cumulative flow between the two qubits.

    The sector state is globally pure and each qubit's marginal is diagonal,
    so a qubit's entropy is the binary entropy of its excited population.
    The frozen branch drops the source's reservoir coupling.
    """
    if source not in _INDEX or target not in _INDEX:
        raise FlowRequestError("bath flows run between qubits 'A' and 'B'")
    if source == target:
        raise FlowRequestError("source and target must differ")
    if steps < 2 or not t_max > 0:
        raise FlowRequestError("need t_max > 0 and at least 2 steps")
    times = np.linspace(0.0, float(t_max), int(steps) + 1)
    alphas = {"A": alpha_a, "B": alpha_b}
    full = sector_trajectory(psi0, sector_hamiltonian(reservoir, alpha_a, alpha_b), times)
    alphas[source] = 0.0
    frozen_h = sector_hamiltonian(reservoir, alphas["A"], alphas["B"])
    frozen = sector_trajectory(psi0, frozen_h, times)
    k = _INDEX[target]
    s_full = binary_entropy(np.abs(full[:, k]) ** 2)
    s_frozen = binary_entropy(np.abs(frozen[:, k]) ** 2)
    cumulative = (s_full - s_full[0]) - (s_frozen - s_frozen[0])
    return FlowSeries(
        times, s_full, s_frozen, cumulative, rate_from_cumulative(times, cumulative),
        sources=(source,), target=(target,), meta={"rate_mode": "from_start", "model": "bath"},
    )

"""Dense linear algebra on labeled multi-site Hilbert spaces.

Everything here works with small, explicit matrices: a :class:`SiteRegistry`
fixes the site order (and hence the Kronecker order), density matrices and
Hermitian operators carry their registry along, and time evolution uses an
eigendecomposition that is computed once per operator and reused for every
time point.

Conventions
-----------
- hbar = 1, time is dimensionless.
- Entropies are in bits (log base 2).
- Computational basis ``|0>, |1>, ...`` per site, first registry site is the
  most significant Kronecker factor.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from functools import reduce
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionCapError, NonHermitianError, RegistryError, StateError

DEFAULT_DIM_CAP = 2**14
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
# eigenvalues below this contribute nothing to the entropy (0 log 0 := 0)
ENTROPY_CLIP = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_+ = (sigma_x + i sigma_y) / 2
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


def dim_cap() -> int:
    """Return the total-dimension cap, honouring ``QLIANG_DIM_CAP``."""
    raw = os.environ.get("QLIANG_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"QLIANG_DIM_CAP must be an integer, got {raw!r}") from exc
    if value < 2:
        raise ValueError("QLIANG_DIM_CAP must be at least 2")
    return value


@dataclass(frozen=True)
class SiteRegistry:
    """Ordered sites ``(label, dimension)`` spanning a tensor-product space."""

    sites: tuple[tuple[str, int], ...]

    def __post_init__(self):
        sites = tuple((str(label), int(d)) for label, d in self.sites)
        object.__setattr__(self, "sites", sites)
        labels = [label for label, _ in sites]
        if len(set(labels)) != len(labels):
            raise RegistryError(f"duplicate site labels in {labels}")
        for label, d in sites:
            if d < 2:
                raise RegistryError(f"site {label!r} has dimension {d} < 2")
        cap = dim_cap()
        if self.dim > cap:
            raise DimensionCapError(f"total dimension {self.dim} exceeds cap {cap}")

    @classmethod
    def qubits(cls, labels: Iterable[str]) -> "SiteRegistry":
        return cls(tuple((label, 2) for label in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.sites)

    @property
    def dim(self) -> int:
        return prod(self.dims) if self.sites else 1

    def __len__(self):
        return len(self.sites)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise RegistryError(f"unknown site label {label!r}") from None

    def site_dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def check_labels(self, labels: Iterable[str]) -> None:
        for label in labels:
            self.index(label)

    def subset(self, keep: Iterable[str]) -> "SiteRegistry":
        """Sub-registry of ``keep`` in this registry's order."""
        keep = set(keep)
        self.check_labels(keep)
        return SiteRegistry(tuple(s for s in self.sites if s[0] in keep))


def _check_square(matrix: np.ndarray, dim: int, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (dim, dim):
        raise RegistryError(f"{what} has shape {matrix.shape}, expected ({dim}, {dim})")
    return matrix


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def propagator(self, t: float) -> np.ndarray:
        """``exp(-i H t)`` assembled from the spectral decomposition."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix on a registry's full space.

    The eigensystem is computed lazily and cached on the instance; the cache
    is guarded by a lock so concurrent readers share one decomposition.
    """

    registry: SiteRegistry
    matrix: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        matrix = _check_square(self.matrix, self.registry.dim, "operator")
        err = hermiticity_error(matrix)
        if err > HERMITIAN_TOL:
            raise NonHermitianError(f"operator deviates from Hermitian by {err:.3g}")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def eigensystem(self) -> EigenSystem:
        eig = self._cache.get("eig")
        if eig is None:
            with self._lock:
                eig = self._cache.get("eig")
                if eig is None:
                    eig = hermitian_eig(self)
                    self._cache["eig"] = eig
        return eig

    def propagator(self, t: float) -> np.ndarray:
        return self.eigensystem.propagator(t)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one, Hermitian, positive semidefinite state on a registry.

    Construction checks Hermiticity and trace; the (more expensive)
    positivity check is left to :func:`validate_state` and
    :func:`von_neumann_entropy`.
    """

    registry: SiteRegistry
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _check_square(self.matrix, self.registry.dim, "density matrix")
        herm = hermiticity_error(matrix)
        if herm > HERMITIAN_TOL:
            raise StateError(f"density matrix deviates from Hermitian by {herm:.3g}")
        tr = np.trace(matrix).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"density matrix has trace {tr:.12g}")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_pure(cls, registry: SiteRegistry, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(registry, np.outer(psi, psi.conj()))

    @classmethod
    def product(cls, registry: SiteRegistry, local: dict[str, np.ndarray]) -> "DensityMatrix":
        """Tensor product of per-site states; every site must be given."""
        missing = set(registry.labels) - set(local)
        if missing:
            raise RegistryError(f"no local state for sites {sorted(missing)}")
        registry.check_labels(local)
        factors = [_check_square(local[lab], d, f"state of {lab}") for lab, d in registry.sites]
        return cls(registry, reduce(np.kron, factors))

    @property
    def labels(self):
        return self.registry.labels


def embed(factors: Sequence[tuple[str, np.ndarray]], registry: SiteRegistry) -> np.ndarray:
    """Kronecker product of single-site factors, identity on unlisted sites.

    Repeated labels multiply in the order given.
    """
    local: dict[str, np.ndarray] = {}
    for label, mat in factors:
        d = registry.site_dim(label)
        mat = _check_square(mat, d, f"factor on {label!r}")
        local[label] = local[label] @ mat if label in local else mat
    mats = [local.get(label, np.eye(d, dtype=complex)) for label, d in registry.sites]
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def embed_operator(matrix: np.ndarray, sites: Sequence[str], registry: SiteRegistry) -> np.ndarray:
    """Place a multi-site matrix acting on ``sites`` (in that order) into the full space."""
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise RegistryError(f"repeated sites {sites}")
    registry.check_labels(sites)
    dims = registry.dims
    idx = [registry.index(s) for s in sites]
    rest = [i for i in range(len(dims)) if i not in idx]
    sub = prod(dims[i] for i in idx)
    matrix = _check_square(matrix, sub, "operator")
    other = prod(dims[i] for i in rest) if rest else 1
    full = np.kron(matrix, np.eye(other, dtype=complex))
    order = idx + rest
    shape = [dims[i] for i in order]
    n = len(dims)
    tensor = full.reshape(shape + shape)
    # axis k of ``tensor`` holds site order[k]; move it back to registry position
    inv = np.argsort(order)
    tensor = tensor.transpose(list(inv) + [n + i for i in inv])
    return tensor.reshape(registry.dim, registry.dim)


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Reduce ``rho`` onto ``keep``; the result keeps registry order."""
    keep = set(keep)
    if not keep:
        raise RegistryError("keep must name at least one site")
    reg = rho.registry
    reg.check_labels(keep)
    if keep == set(reg.labels):
        return rho
    dims = reg.dims
    n = len(dims)
    kept = [i for i, lab in enumerate(reg.labels) if lab in keep]
    traced = [i for i in range(n) if i not in kept]
    tensor = rho.matrix.reshape(dims + dims)
    dk = prod(dims[i] for i in kept)
    dt = prod(dims[i] for i in traced)
    perm = kept + traced + [n + i for i in kept] + [n + i for i in traced]
    tensor = tensor.transpose(perm).reshape(dk, dt, dk, dt)
    return DensityMatrix(reg.subset(keep), np.einsum("ajbj->ab", tensor))


def spectrum(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """Eigenvalues of a state, with round-off negatives clipped and renormalised."""
    matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    w = np.linalg.eigvalsh(matrix)
    if w.size and w[0] < -PSD_TOL:
        raise StateError(f"state has negative eigenvalue {w[0]:.3g}")
    if w.size and w[0] < 0:
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
    return w


def von_neumann_entropy(rho: DensityMatrix | np.ndarray, clip: float | None = None) -> float:
    """``-Tr rho log2 rho`` in bits."""
    if clip is None:
        clip = ENTROPY_CLIP
    w = spectrum(rho)
    w = w[w > clip]
    return float(-np.sum(w * np.log2(w)))


def hermitian_eig(h: HermitianOperator | np.ndarray) -> EigenSystem:
    matrix = h.matrix if isinstance(h, HermitianOperator) else np.asarray(h, dtype=complex)
    err = hermiticity_error(matrix)
    if err > HERMITIAN_TOL:
        raise NonHermitianError(f"matrix deviates from Hermitian by {err:.3g}")
    w, v = np.linalg.eigh(matrix)
    return EigenSystem(w, v)


def evolve(rho0: DensityMatrix, h: HermitianOperator, t: float) -> DensityMatrix:
    """``U rho0 U^dagger`` with ``U = exp(-i h t)``."""
    if rho0.registry != h.registry:
        raise RegistryError("state and Hamiltonian live on different registries")
    if t == 0:
        return rho0
    u = h.propagator(t)
    return DensityMatrix(rho0.registry, u @ rho0.matrix @ u.conj().T)


def evolve_unitary(rho0: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    u = _check_square(u, rho0.registry.dim, "unitary")
    return DensityMatrix(rho0.registry, u @ rho0.matrix @ u.conj().T)


@dataclass
class StateReport:
    hermiticity: float
    trace_deviation: float
    min_eigenvalue: float
    tol: float
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_state(rho: DensityMatrix | np.ndarray, tol: float = 1e-10) -> StateReport:
    """Diagnose a candidate state; never raises."""
    matrix = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    herm = hermiticity_error(matrix)
    trace_dev = float(abs(np.trace(matrix) - 1.0))
    herm_part = 0.5 * (matrix + matrix.conj().T)
    min_eig = float(np.linalg.eigvalsh(herm_part)[0]) if matrix.size else 0.0
    failures = []
    if herm > tol:
        failures.append("hermiticity")
    if trace_dev > tol:
        failures.append("trace")
    if min_eig < -max(tol, PSD_TOL):
        failures.append("positivity")
    return StateReport(herm, trace_dev, min_eig, tol, failures)


def basis_projector(d: int, k: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[k, k] = 1.0
    return p


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d

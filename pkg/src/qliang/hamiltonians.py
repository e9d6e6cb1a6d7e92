"""Term-level Hamiltonian construction and the frozen-site transform.

A Hamiltonian is kept as a list of :class:`OperatorTerm` objects, each a
real coefficient times a product of single-site factors. Because the support
of every term is explicit, removing a site from the dynamics is a filter over
terms and needs no matrix arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

from . import core
from .core import HermitianOperator, SiteRegistry
from .errors import NonHermitianError, RegistryError

NAMED_FACTORS = {
    "x": core.SIGMA_X,
    "y": core.SIGMA_Y,
    "z": core.SIGMA_Z,
    "+": core.SIGMA_PLUS,
    "-": core.SIGMA_MINUS,
}
_NAMED_DAGGER = {"x": "x", "y": "y", "z": "z", "+": "-", "-": "+"}

# When True, terms acting only on frozen sites survive freezing. Off by
# default: local unitaries on frozen sites never change an entropy.
KEEP_FROZEN_LOCAL_TERMS = False

Factor = Union[str, np.ndarray]


def _resolve(factor: Factor) -> np.ndarray:
    if isinstance(factor, str):
        try:
            return NAMED_FACTORS[factor]
        except KeyError:
            raise ValueError(f"unknown factor name {factor!r}") from None
    return np.asarray(factor, dtype=complex)


def _same_factor(a: Factor, b: Factor) -> bool:
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    ma, mb = _resolve(a), _resolve(b)
    return ma.shape == mb.shape and np.allclose(ma, mb, rtol=0, atol=1e-14)


def _dagger(factor: Factor) -> Factor:
    if isinstance(factor, str):
        return _NAMED_DAGGER[factor]
    return _resolve(factor).conj().T


@dataclass(frozen=True, eq=False)
class OperatorTerm:
    """``coefficient * prod_site factor[site]``.

    ``factors`` is a tuple of ``(label, factor)`` with distinct labels, where a
    factor is one of ``"x" "y" "z" "+" "-"`` or an explicit ``d x d`` matrix.
    An empty factor tuple is only allowed for an identity shift.
    """

    coefficient: float
    factors: tuple[tuple[str, Factor], ...] = ()
    identity_shift: bool = False

    def __post_init__(self):
        coeff = self.coefficient
        if isinstance(coeff, complex) or np.iscomplexobj(coeff):
            if abs(np.imag(coeff)) > 0:
                raise ValueError("term coefficients must be real")
            coeff = np.real(coeff)
        object.__setattr__(self, "coefficient", float(coeff))
        factors = tuple((str(label), f) for label, f in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise RegistryError(f"term repeats a site: {labels}")
        for _, f in factors:
            _resolve(f)
        if not factors and not self.identity_shift:
            raise ValueError("term has empty support; flag it as an identity shift")
        if factors and self.identity_shift:
            raise ValueError("identity-shift terms carry no factors")
        object.__setattr__(self, "factors", factors)

    @property
    def support(self) -> frozenset[str]:
        return frozenset(label for label, _ in self.factors)

    @property
    def is_hermitian(self) -> bool:
        for _, f in self.factors:
            m = _resolve(f)
            if not np.allclose(m, m.conj().T, rtol=0, atol=core.HERMITIAN_TOL):
                return False
        return True

    def dagger(self) -> "OperatorTerm":
        return OperatorTerm(
            self.coefficient,
            tuple((label, _dagger(f)) for label, f in self.factors),
            self.identity_shift,
        )

    def same_operator(self, other: "OperatorTerm") -> bool:
        """Equal up to the coefficient."""
        if self.identity_shift != other.identity_shift or self.support != other.support:
            return False
        theirs = dict(other.factors)
        return all(_same_factor(f, theirs[label]) for label, f in self.factors)

    def __eq__(self, other):
        if not isinstance(other, OperatorTerm):
            return NotImplemented
        return self.coefficient == other.coefficient and self.same_operator(other)

    def __hash__(self):
        return hash((self.coefficient, self.support, self.identity_shift))

    def matrix(self, registry: SiteRegistry) -> np.ndarray:
        if self.identity_shift:
            return self.coefficient * np.eye(registry.dim, dtype=complex)
        pairs = [(label, _resolve(f)) for label, f in self.factors]
        return self.coefficient * core.embed(pairs, registry)

    def __repr__(self):
        if self.identity_shift:
            return f"OperatorTerm({self.coefficient:g} * I)"
        body = " ".join(
            f"{f if isinstance(f, str) else 'M'}_{label}" for label, f in self.factors
        )
        return f"OperatorTerm({self.coefficient:g} * {body})"


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """An immutable sum of terms on a registry."""

    registry: SiteRegistry
    terms: tuple[OperatorTerm, ...] = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            self.registry.check_labels(term.support)
            for label, f in term.factors:
                d = self.registry.site_dim(label)
                if _resolve(f).shape != (d, d):
                    raise RegistryError(f"factor on {label!r} is not {d}x{d}")
        object.__setattr__(self, "terms", terms)

    def __eq__(self, other):
        if not isinstance(other, HamiltonianSpec):
            return NotImplemented
        return self.registry == other.registry and self.terms == other.terms

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if self.registry != other.registry:
            raise RegistryError("cannot add specs on different registries")
        return HamiltonianSpec(self.registry, self.terms + other.terms)

    def with_terms(self, terms: Iterable[OperatorTerm]) -> "HamiltonianSpec":
        return HamiltonianSpec(self.registry, self.terms + tuple(terms))

    @property
    def support(self) -> frozenset[str]:
        return frozenset().union(*(t.support for t in self.terms))

    def materialize(self) -> HermitianOperator:
        op = self._cache.get("op")
        if op is None:
            op = materialize(self)
            self._cache["op"] = op
        return op


def check_conjugate_pairs(spec: HamiltonianSpec) -> None:
    """Every non-Hermitian term needs its Hermitian-conjugate partner."""
    for term in spec.terms:
        if term.is_hermitian:
            continue
        partner = term.dagger()
        if not any(partner == other for other in spec.terms):
            raise NonHermitianError(f"{term!r} has no Hermitian-conjugate partner")


def materialize(spec: HamiltonianSpec) -> HermitianOperator:
    check_conjugate_pairs(spec)
    reg = spec.registry
    total = np.zeros((reg.dim, reg.dim), dtype=complex)
    for term in spec.terms:
        total += term.matrix(reg)
    return HermitianOperator(reg, total)


def build_xy_coupling(i: str, j: str, eta: float) -> list[OperatorTerm]:
    """``eta (s+_i s-_j + s-_i s+_j)``."""
    if i == j:
        raise RegistryError(f"XY coupling needs two distinct sites, got {i!r} twice")
    return [
        OperatorTerm(eta, ((i, "+"), (j, "-"))),
        OperatorTerm(eta, ((i, "-"), (j, "+"))),
    ]


def build_field_z(site: str, b: float, registry: SiteRegistry | None = None) -> OperatorTerm:
    """``b * sigma_z`` on ``site``."""
    if registry is not None:
        registry.check_labels([site])
    return OperatorTerm(b, ((site, "z"),))


def build_star(
    center: str,
    leaves: Sequence[tuple[str, float]],
    registry: SiteRegistry | None = None,
) -> HamiltonianSpec:
    """XY couplings between ``center`` and every leaf.

    Without an explicit registry, qubits are laid out as the leaves in order
    followed by the center.
    """
    labels = [label for label, _ in leaves]
    if len(set(labels)) != len(labels):
        raise RegistryError(f"duplicate leaf labels {labels}")
    if center in labels:
        raise RegistryError(f"center {center!r} also listed as a leaf")
    if registry is None:
        registry = SiteRegistry.qubits(labels + [center])
    terms = [t for label, eta in leaves for t in build_xy_coupling(label, center, eta)]
    return HamiltonianSpec(registry, tuple(terms))


def add_coupling(spec: HamiltonianSpec, i: str, j: str, eta: float) -> HamiltonianSpec:
    return spec.with_terms(build_xy_coupling(i, j, eta))


def xy_chain(registry: SiteRegistry, couplings: Iterable[tuple[str, str, float]]) -> HamiltonianSpec:
    terms = [t for i, j, eta in couplings for t in build_xy_coupling(i, j, eta)]
    return HamiltonianSpec(registry, tuple(terms))


def freeze(
    spec: HamiltonianSpec,
    frozen: Iterable[str],
    keep_local: bool | None = None,
) -> HamiltonianSpec:
    """Remove every term touching a frozen site.

    The result acts as the identity on the frozen sites, so its propagator
    factorises as ``V (rest) x I (frozen)``. Identity shifts are dropped too
    (they are a global phase). With ``keep_local`` the frozen sites' own free
    terms (support entirely inside ``frozen``) are retained.
    """
    frozen = frozenset(frozen)
    spec.registry.check_labels(frozen)
    if keep_local is None:
        keep_local = KEEP_FROZEN_LOCAL_TERMS
    kept = []
    for term in spec.terms:
        if term.identity_shift:
            continue
        hit = term.support & frozen
        if not hit or (keep_local and term.support <= frozen):
            kept.append(term)
    return HamiltonianSpec(spec.registry, tuple(kept))


_PAULI_BASIS = (("I", np.eye(2, dtype=complex)), ("x", core.SIGMA_X), ("y", core.SIGMA_Y), ("z", core.SIGMA_Z))


def terms_from_matrix(matrix: np.ndarray, sites: Sequence[str], atol: float = 1e-14) -> list[OperatorTerm]:
    """Expand a Hermitian operator on qubit ``sites`` into Pauli-product terms."""
    sites = list(sites)
    k = len(sites)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (2**k, 2**k):
        raise RegistryError(f"matrix shape {matrix.shape} does not match {k} qubits")
    if core.hermiticity_error(matrix) > core.HERMITIAN_TOL:
        raise NonHermitianError("only Hermitian matrices have a real Pauli expansion")
    terms = []
    for combo in itertools.product(_PAULI_BASIS, repeat=k):
        pauli = reduce(np.kron, [m for _, m in combo])
        coeff = np.trace(pauli @ matrix).real / 2**k
        if abs(coeff) <= atol:
            continue
        factors = tuple((s, name) for s, (name, _) in zip(sites, combo) if name != "I")
        terms.append(OperatorTerm(coeff, factors, identity_shift=not factors))
    return terms


_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
GATES = {"CNOT": _CNOT, "SWAP": _SWAP}


def gate_unitary(
    name: str,
    sites: Sequence[str],
    registry: SiteRegistry,
    matrix: np.ndarray | None = None,
) -> np.ndarray:
    """Full-space unitary of a gate acting on ``sites`` (control first for CNOT).

    ``name="custom"`` takes an explicit ``matrix`` on ``sites``.
    """
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise RegistryError(f"gate sites must be distinct, got {sites}")
    if name == "custom":
        if matrix is None:
            raise ValueError("custom gate needs a matrix")
        local = np.asarray(matrix, dtype=complex)
    else:
        try:
            local = GATES[name.upper()]
        except KeyError:
            raise ValueError(f"unknown gate {name!r}") from None
        if len(sites) != 2 or any(registry.site_dim(s) != 2 for s in sites):
            raise RegistryError(f"{name} acts on two qubits")
    if not np.allclose(local.conj().T @ local, np.eye(len(local)), rtol=0, atol=1e-12):
        raise ValueError("gate matrix is not unitary")
    return core.embed_operator(local, sites, registry)

"""Quantum Liang information flow on small quantum networks."""

from .core import (
    DensityMatrix,
    EigenSystem,
    HermitianOperator,
    SiteRegistry,
    embed,
    evolve,
    hermitian_eig,
    partial_trace,
    validate_state,
    von_neumann_entropy,
)
from .flow import (
    FlowRequest,
    FlowSeries,
    cumulative_flow,
    discrete_map_flow,
    instantaneous_rate,
    pairwise_flow_matrix,
    superadditivity_report,
)
from .hamiltonians import (
    HamiltonianSpec,
    OperatorTerm,
    add_coupling,
    build_field_z,
    build_star,
    build_xy_coupling,
    freeze,
    gate_unitary,
    materialize,
)

__version__ = "0.1.0"

"""Effective dynamics of coarse-grained quantum systems."""

from .channels import (
    Dilation,
    KrausChannel,
    apply,
    apply_dilation,
    blurred_detector_channel,
    choi,
    dilation_from_kraus,
    kraus_equivalent,
    kraus_from_choi,
    verify_cptp,
)
from .effective import (
    build_virtual_state,
    correlation_matrix,
    decompose,
    effective_components,
    effective_evolve,
    effective_kraus,
    intermediate_map,
    intertwined_unitary,
    zeta,
)
from .gamma import convexity_probe, effective_state_from_gamma, hyperplanes, in_domain, parallel_move, perpendicular_move
from .linalg import Bipartition, complete_to_unitary, eig_hermitian, kron, matrix_exp_hermitian_generator, partial_trace, trace_norm
from .states import bloch_vector, from_bloch, gell_mann_basis, purity, random_pure_state, trace_distance

__version__ = "0.1.0"

"""Exact simulation of post-selected linear-optical two-qubit gates on dual-rail Fock states."""

from .circuits import (
    CircuitProgram,
    GateRunResult,
    SourceSettings,
    build_inputs,
    classify_branches_scheme_ii,
    list_schemes,
    load_scheme,
    parse_scheme,
    run,
    scheme_i_chi_generation,
    scheme_i_cnot,
    scheme_ii_cs,
    scheme_iswap,
)
from .detection import DetectorParams, measure, measure_number_resolving, povm_weights
from .elements import ElementKind, ElementSpec, apply_element, matrix_of
from .fock import (
    PureFockState,
    RailIndex,
    StateEnsemble,
    apply_diagonal,
    apply_rail_swap,
    apply_two_rail_unitary,
    inner_product,
    tensor,
    trace_out_rails,
)
from .kernels import BACKEND
from .sources import (
    SPDCParams,
    TwoQubitAmplitudes,
    bell_psi_plus,
    chi_state,
    epr_pair,
    ghz_state,
    input_state,
    spdc_pair,
)

__version__ = "0.1.0"

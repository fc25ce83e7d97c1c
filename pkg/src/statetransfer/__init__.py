"""Measurement-only quantum computation by state transfer.

Circuits over {H, T, CNOT} are lowered to sequences of one- and two-qubit
projective measurements using a single auxiliary qubit, executed on a
dense state-vector simulator, and checked against direct simulation.
"""

from .automaton import (
    PauliFrame,
    StepResult,
    conjugate_for_frame,
    correction_pattern,
    execute_program,
    frame_update,
    full_step,
    logical_output,
)
from .compiler import (
    O1,
    O2,
    CircuitIR,
    MeasurementProgram,
    ObservableFamily,
    compile_circuit,
    direct_simulate,
    observables_report,
    parse_circuit,
    resource_report,
)
from .observables import Axis, Observable, born_probabilities, force_outcome, measure
from .patterns import (
    MeasurementPattern,
    PauliOp,
    byproduct,
    cnot_pattern,
    generalized_transfer_pattern,
    run_pattern,
    teleport_pattern,
    transfer_pattern,
)
from .statevec import (
    GateMatrix,
    StateVector,
    apply_gate,
    detach_qubit,
    fidelity_mod_phase,
    make_basis_state,
    make_state,
)

__version__ = "0.1.0"

"""Pulse synthesis for a non-holonomic three-atom cell and a 9-qubit tree device."""

from .cell_model import CellParams, HamiltonianTriple, basis_index, default_params
from .control_solver import (
    ControlSchedule,
    SearchConfig,
    SynthesisOptions,
    SynthesisTarget,
    solve_identity_seed,
    synthesize,
)
from .device import DeviceTopology, dft_reference, program_unitary, qft_program
from .gates import Gate, gate_from_name

__all__ = [
    "CellParams", "HamiltonianTriple", "basis_index", "default_params", "ControlSchedule",
    "SearchConfig", "SynthesisOptions", "SynthesisTarget", "solve_identity_seed", "synthesize",
    "DeviceTopology", "dft_reference", "program_unitary", "qft_program", "Gate", "gate_from_name",
]

"""Nine-qubit tree device: three child cells joined by a parent cell.

Atoms 3, 6 and 7 belong both to their child cell and to the parent cell; moving
a qubit state onto one of them is an in-cell swap. Within a cell the lowest atom
index is the least-significant qubit of the cell's 8x8 operator.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gates as gl
from .control_solver import ControlSchedule, phase_invariant_infidelity
from .errors import AtomNotInCell, MissingSchedule

N_QUBITS = 9
DIM = 2**N_QUBITS


@dataclass(frozen=True)
class DeviceTopology:
    cells: dict = field(default_factory=lambda: {
        "C1": (1, 2, 3), "C2": (4, 5, 6), "C3": (7, 8, 9), "P": (3, 6, 7),
    })
    parent: str = "P"
    n_qubits: int = N_QUBITS

    @property
    def child_cells(self):
        return [name for name in self.cells if name != self.parent]

    def child_of(self, atom: int) -> str:
        for name in self.child_cells:
            if atom in self.cells[name]:
                return name
        raise AtomNotInCell(f"atom {atom} is in no child cell")

    def joint_atom(self, child: str) -> int:
        (atom,) = set(self.cells[child]) & set(self.cells[self.parent])
        return atom

    def validate(self):
        seen = [a for c in self.child_cells for a in self.cells[c]]
        assert sorted(seen) == list(range(1, self.n_qubits + 1))
        assert all(len(set(self.cells[c]) & set(self.cells[self.parent])) == 1
                   for c in self.child_cells)


@dataclass(frozen=True, eq=False)
class CellOp:
    cell: str
    gate: np.ndarray
    label: str
    gate_name: str = ""


@dataclass
class CompiledProgram:
    ops: list = field(default_factory=list)
    annotations: list = field(default_factory=list)

    def extend(self, ops, note=None):
        start = len(self.ops)
        self.ops.extend(ops)
        if note is not None and ops:
            self.annotations.append((start, len(self.ops), note))

    def gate_names(self):
        return sorted({op.gate_name for op in self.ops})

    def to_json(self):
        return [{"cell": op.cell, "gate_name": op.gate_name, "label": op.label} for op in self.ops]


def _cell_positions(topology, cell, atoms):
    members = topology.cells[cell]
    pos = []
    for a in atoms:
        if a not in members:
            raise AtomNotInCell(f"atom {a} is not in cell {cell} {members}")
        pos.append(sorted(members).index(a) + 1)
    return pos


def _cell_op(topology, cell, gate_spec, atoms, label):
    pos = _cell_positions(topology, cell, atoms)
    name = f"{gate_spec}@{','.join(map(str, pos))}"
    return CellOp(cell, gl.gate_from_name(name).unitary, label, name)


def exchange_op(cell, atom_a, atom_b, topology: DeviceTopology | None = None) -> CellOp:
    topology = topology or DeviceTopology()
    if cell not in topology.cells:
        raise AtomNotInCell(f"unknown cell {cell!r}")
    a, b = sorted((atom_a, atom_b))
    return _cell_op(topology, cell, "swap", (a, b), f"exchange {cell}:{a}<->{b}")


def route_pair(topology: DeviceTopology, i: int, j: int):
    """Bring qubits i and j into one cell.

    Returns (prologue, host_cell, host_positions, epilogue), where
    host_positions are the atoms now carrying the states of i and j.
    """
    if i == j:
        raise ValueError("need two distinct qubits")
    for name, members in topology.cells.items():
        if name != topology.parent and i in members and j in members:
            return [], name, (i, j), []
    prologue, host = [], []
    for q in (i, j):
        child = topology.child_of(q)
        joint = topology.joint_atom(child)
        if q != joint:
            prologue.append(exchange_op(child, q, joint, topology))
        host.append(joint)
    return prologue, topology.parent, tuple(host), list(reversed(prologue))


def dft_reference(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(2j * np.pi * np.outer(idx, idx) / n) / math.sqrt(n)


def _pair_gate(topology, spec, i, j, label):
    pro, host, atoms, epi = route_pair(topology, i, j)
    # both two-qubit gates used here are symmetric in their qubits
    return pro + [_cell_op(topology, host, spec, sorted(atoms), label)] + epi


def bit_reversal_program(topology: DeviceTopology | None = None) -> CompiledProgram:
    topology = topology or DeviceTopology()
    prog = CompiledProgram()
    n = topology.n_qubits
    for q in range(1, n // 2 + 1):
        prog.extend(_pair_gate(topology, "swap", q, n + 1 - q, f"reverse {q}<->{n + 1 - q}"),
                    note=f"bit reversal {q}<->{n + 1 - q}")
    return prog


def qft_program(topology: DeviceTopology | None = None) -> CompiledProgram:
    """Bit reversal, then for i = 1..n: phases B(pi/2^(i-j)) on (i, j), j < i, then split on i."""
    topology = topology or DeviceTopology()
    prog = bit_reversal_program(topology)
    for i in range(1, topology.n_qubits + 1):
        ops = []
        for j in range(1, i):
            ops += _pair_gate(topology, f"phase(pi/{2 ** (i - j)})", i, j, f"B{i}{j}")
        cell = topology.child_of(i)
        ops.append(_cell_op(topology, cell, "split", (i,), f"A{i}"))
        prog.extend(ops, note=f"step {i}")
    return prog


def _apply_cell(state, gate, atoms, n):
    """Apply an 8x8 gate to a batch of register vectors (columns of ``state``)."""
    k = len(atoms)
    axes = [n - a for a in reversed(sorted(atoms))]
    psi = state.reshape([2] * n + [-1])
    out = np.tensordot(gate.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(state.shape)


class PhysicalGates:
    """Resolves cell operations to pulse-level unitaries U(C)^{n*}.

    Idle cells run the identity schedule for the same number of periods.
    """

    def __init__(self, triple, tau, schedules: dict, topology: DeviceTopology | None = None):
        self.triple, self.tau = triple, tau
        self.schedules = schedules
        self.topology = topology or DeviceTopology()
        if "identity" not in schedules:
            raise MissingSchedule("identity")
        self._cache = {}

    def _unitary(self, name):
        if name not in self._cache:
            if name not in self.schedules:
                raise MissingSchedule(name)
            self._cache[name] = self.schedules[name].unitary(self.triple, self.tau)
        return self._cache[name]

    def expand(self, op: CellOp):
        sched = self.schedules.get(op.gate_name)
        if sched is None:
            raise MissingSchedule(op.gate_name)
        steps = [(op.cell, self._unitary(op.gate_name))]
        idle = np.linalg.matrix_power(self._unitary("identity"), sched.n_star)
        steps += [(c, idle) for c in self.topology.cells if c != op.cell]
        return steps

    def error_budget(self, program) -> float:
        """Sum of phase-invariant infidelities of every cell unitary applied, idle cells included."""
        total = 0.0
        for op in program.ops:
            for cell, u in self.expand(op):
                total += phase_invariant_infidelity(u, op.gate if cell == op.cell else np.eye(8))
        return total

    def missing(self, program):
        need = set(program.gate_names()) | {"identity"}
        return sorted(need - set(self.schedules))


def _steps(program, mode, physical, topology):
    for op in program.ops:
        if mode == "ideal":
            yield op.cell, op.gate
        elif mode == "physical":
            yield from physical.expand(op)
        else:
            raise ValueError(f"unknown mode {mode!r}")


def apply_program(state, program: CompiledProgram, mode="ideal", physical: PhysicalGates | None = None,
                  topology: DeviceTopology | None = None):
    topology = topology or DeviceTopology()
    if mode == "physical" and physical is None:
        raise MissingSchedule("physical mode needs schedules")
    psi = np.array(state, dtype=complex)
    single = psi.ndim == 1
    psi = psi.reshape(DIM, -1)
    for cell, gate in _steps(program, mode, physical, topology):
        psi = _apply_cell(psi, gate, topology.cells[cell], topology.n_qubits)
    return psi[:, 0] if single else psi


def program_unitary(program: CompiledProgram, mode="ideal", physical=None, topology=None):
    return apply_program(np.eye(DIM, dtype=complex), program, mode, physical, topology)


def state_fidelity(psi, phi) -> float:
    return float(abs(np.vdot(psi, phi)))


def load_state(path) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    psi = np.array([complex(re, im) for re, im in data])
    if psi.shape != (DIM,):
        raise ValueError(f"state file must hold {DIM} amplitudes")
    if abs(np.linalg.norm(psi) - 1) > 1e-9:
        raise ValueError("state is not normalized")
    return psi


def save_state(psi, path):
    Path(path).write_text(json.dumps([[float(a.real), float(a.imag)] for a in psi]) + "\n")


def load_schedules(directory) -> dict:
    out = {}
    for p in sorted(Path(directory).glob("*.json")):
        sched = ControlSchedule.load(p)
        out[sched.target_name] = sched
    return out


def schedule_filename(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "@,.-" else "_" for ch in name) + ".json"


__all__ = [
    "DeviceTopology", "CellOp", "CompiledProgram", "PhysicalGates", "exchange_op", "route_pair",
    "bit_reversal_program", "qft_program", "dft_reference", "apply_program", "program_unitary",
    "state_fidelity", "phase_invariant_infidelity", "load_state", "save_state", "load_schedules",
    "schedule_filename",
]

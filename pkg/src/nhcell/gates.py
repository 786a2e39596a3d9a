"""Named gates with their Hermitian generators, and register embedding.

Qubit q (1-based) is binary digit q-1 of the basis index in every register.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BadPositions, BranchAmbiguity

BRANCH_WINDOW = 1e-6


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    arity: int
    unitary: np.ndarray
    generator: np.ndarray
    epsilon: float

    def check(self, tol=1e-12):
        n = 2**self.arity
        assert self.unitary.shape == (n, n)
        err_u = np.abs(self.unitary.conj().T @ self.unitary - np.eye(n)).max()
        err_g = np.abs(scipy.linalg.expm(-1j * self.epsilon * self.generator) - self.unitary).max()
        return max(err_u, err_g) <= tol


def toffoli() -> Gate:
    u = np.eye(8, dtype=complex)
    u[[6, 7]] = u[[7, 6]]
    h = np.zeros((8, 8), dtype=complex)
    h[6:, 6:] = 0.5 * np.array([[1, -1], [-1, 1]])
    return Gate("toffoli", 3, u, h, math.pi)


def split_gate() -> Gate:
    s2 = math.sqrt(2.0)
    u = np.array([[1, 1], [1, -1]], dtype=complex) / s2
    # exp(-i pi/sqrt(8) M) with M = [[1-sqrt2, 1], [1, -1-sqrt2]]
    h = np.array([[1 - s2, 1], [1, -1 - s2]], dtype=complex) / math.sqrt(8.0)
    return Gate("split", 1, u, h, math.pi)


def phase_gate(phi: float) -> Gate:
    phi = float(phi)
    u = np.diag([1, 1, 1, np.exp(1j * phi)])
    h = np.diag([0, 0, 0, -1]).astype(complex)
    return Gate(f"phase({phi!r})", 2, u, h, phi)


def swap_gate() -> Gate:
    u = np.eye(4, dtype=complex)
    u[[1, 2]] = u[[2, 1]]
    return Gate("swap", 2, u, generator_of(u), 1.0)


def identity_gate(arity: int = 3) -> Gate:
    n = 2**arity
    return Gate("identity", arity, np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex), 0.0)


def generator_of(u: np.ndarray) -> np.ndarray:
    """Hermitian H with exp(-i H) = u on the principal branch.

    Eigenphases are taken in (-pi, pi]; phases numerically at -pi are moved to +pi.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if np.abs(u.conj().T @ u - np.eye(n)).max() > 1e-8:
        raise ValueError("input is not unitary within 1e-8")
    t, z = scipy.linalg.schur(u, output="complex")
    lam = np.diag(t)
    phases = np.angle(lam)
    near_cut = np.abs(np.abs(phases) - math.pi) < BRANCH_WINDOW
    if near_cut.sum() > 1:
        # a cluster at -1 is harmless only if it is numerically a single eigenvalue
        spread = np.abs(lam[near_cut] + 1.0).max()
        if spread > 1e-9:
            raise BranchAmbiguity(
                "near-degenerate eigenvalues straddle the branch cut", eigenvalues=lam
            )
    phases = np.where(near_cut, math.pi, phases)
    h = -(z * phases) @ z.conj().T
    return 0.5 * (h + h.conj().T)


def embed_matrix(m: np.ndarray, positions, n: int) -> np.ndarray:
    """Act with m on the listed qubits of an n-qubit register, identity elsewhere.

    positions[0] is m's least-significant qubit. The map is linear, so it embeds
    Hermitian generators as well as unitaries.
    """
    positions = [int(p) for p in positions]
    k = len(positions)
    if m.shape != (2**k, 2**k):
        raise BadPositions(f"{k} positions given for a {m.shape[0]}x{m.shape[0]} matrix")
    if len(set(positions)) != k or any(p < 1 or p > n for p in positions):
        raise BadPositions(f"invalid positions {positions} for {n} qubits")
    # tensor axes are ordered most-significant first: axis n-q holds qubit q
    axes_in = [n - p for p in reversed(positions)]
    full = np.eye(2**n, dtype=complex).reshape([2] * n + [2**n])
    g = m.reshape([2] * (2 * k))
    out = np.tensordot(g, full, axes=(list(range(k, 2 * k)), axes_in))
    out = np.moveaxis(out, list(range(k)), axes_in)
    return out.reshape(2**n, 2**n)


def embed(g: Gate, positions, n: int) -> np.ndarray:
    if len(positions) != g.arity:
        raise BadPositions(f"gate {g.name} has arity {g.arity}, got {len(positions)} positions")
    return embed_matrix(g.unitary, positions, n)


def embed_gate(g: Gate, positions, n: int = 3) -> Gate:
    """Lift a small gate to a full n-qubit gate, generator included."""
    if len(positions) != g.arity:
        raise BadPositions(f"gate {g.name} has arity {g.arity}, got {len(positions)} positions")
    name = g.name if g.arity == n and list(positions) == list(range(1, n + 1)) else (
        f"{g.name}@{','.join(str(p) for p in positions)}"
    )
    return Gate(
        name, n, embed_matrix(g.unitary, positions, n), embed_matrix(g.generator, positions, n),
        g.epsilon,
    )


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_angle(text: str) -> float:
    """Evaluate a small arithmetic expression such as 'pi/32' or '2*pi/3'."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            return -ev(node.operand) if isinstance(node.op, ast.USub) else ev(node.operand)
        raise ValueError(f"unsupported angle expression: {text!r}")

    return ev(ast.parse(text.replace("^", "**"), mode="eval"))


def gate_from_name(spec: str) -> Gate:
    """Look up a catalog gate: 'toffoli', 'split', 'swap', 'identity', 'phase(<angle>)'.

    An optional '@p1,p2' suffix embeds the gate into a 3-qubit cell at those
    positions; arity-1 and arity-2 gates default to positions 1 and (1, 2).
    The returned gate carries ``spec`` as its name.
    """
    spec = spec.strip()
    base, _, pos = spec.partition("@")
    base = base.strip()
    if base == "toffoli":
        g = toffoli()
    elif base == "split":
        g = split_gate()
    elif base == "swap":
        g = swap_gate()
    elif base == "identity":
        g = identity_gate(3)
    elif base.startswith("phase(") and base.endswith(")"):
        g = phase_gate(parse_angle(base[len("phase("):-1]))
    else:
        raise KeyError(f"unknown gate {spec!r}")
    if pos:
        positions = [int(p) for p in pos.split(",")]
    else:
        positions = list(range(1, g.arity + 1))
    cell = embed_gate(g, positions, 3)
    return Gate(spec, 3, cell.unitary, cell.generator, cell.epsilon)

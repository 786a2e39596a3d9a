"""Three-atom unit cell: principal Hamiltonian and the two control perturbations.

Basis states are |x2 x1 x0> with index x = x0 + 2*x1 + 4*x2; atom i holds bit i-1.
Energies are in units of E_u and times in hbar/E_u (hbar = 1).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_INTERVALS = 64
DIM = 8


def basis_index(x2: int, x1: int, x0: int) -> int:
    for b in (x2, x1, x0):
        if b not in (0, 1):
            raise ValueError(f"bits must be 0 or 1, got {(x2, x1, x0)}")
    return x0 + 2 * x1 + 4 * x2


@dataclass(frozen=True)
class CellParams:
    """Physical parameters of one cell.

    ``dipole_couplings`` is ordered (D12, D23, D13). ``stark_shifts_unit`` and
    ``em_couplings_unit`` are the perturbation amplitudes at unit control strength.
    """

    dipole_couplings: tuple[float, float, float]
    detunings: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stark_shifts_unit: tuple[float, float, float] = (0.0, 0.0, 0.0)
    em_couplings_unit: tuple[float, float, float] = (0.0, 0.0, 0.0)
    period: float = 250.0

    def __post_init__(self):
        for name in ("dipole_couplings", "detunings", "stark_shifts_unit", "em_couplings_unit"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs exactly 3 values")
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "period", float(self.period))
        if not (math.isfinite(self.period) and self.period > 0):
            raise ValueError("period must be positive")

    @property
    def tau(self) -> float:
        return self.period / N_INTERVALS

    @staticmethod
    def _pair_sums(a):
        # ordered to match basis indices 3, 5, 6 and 7
        return a[0] + a[1], a[0] + a[2], a[1] + a[2], a[0] + a[1] + a[2]

    @property
    def pair_detunings(self):
        """(A12, A13, A23, A_sigma)."""
        return self._pair_sums(self.detunings)

    @property
    def pair_stark_shifts(self):
        """(Delta12, Delta13, Delta23, Delta_sigma)."""
        return self._pair_sums(self.stark_shifts_unit)

    def to_dict(self) -> dict:
        return {
            "D": list(self.dipole_couplings),
            "A": list(self.detunings),
            "Delta": list(self.stark_shifts_unit),
            "V": list(self.em_couplings_unit),
            "T": self.period,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellParams":
        missing = {"D", "Delta", "V", "T"} - set(d)
        if missing:
            raise ValueError(f"cell parameter file missing keys: {sorted(missing)}")
        return cls(
            dipole_couplings=tuple(d["D"]),
            detunings=tuple(d.get("A", (0.0, 0.0, 0.0))),
            stark_shifts_unit=tuple(d["Delta"]),
            em_couplings_unit=tuple(d["V"]),
            period=d["T"],
        )

    def digest(self) -> str:
        """Stable hash of the parameter set, used to tie schedules to a cell."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def default_params() -> CellParams:
    return CellParams(
        dipole_couplings=(1.1, 0.946, 0.86),
        stark_shifts_unit=(0.1, 0.11, 0.312),
        em_couplings_unit=(0.3, 0.33, 0.24),
        period=250.0,
    )


def load_params(path) -> CellParams:
    # Decimal literals are parsed by float(), which is correctly rounded.
    with open(path) as fh:
        return CellParams.from_dict(json.load(fh))


def save_params(params: CellParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def build_h0(params: CellParams) -> np.ndarray:
    d12, d23, d13 = params.dipole_couplings
    a1, a2, a3 = params.detunings
    a12, a13, a23, asig = params.pair_detunings
    h = np.diag([0.0, a1, a2, a12, a3, a13, a23, asig]).astype(complex)
    # single-excitation block {1, 2, 4} and double-excitation block {3, 5, 6}
    for i, j, v in [(1, 2, d12), (1, 4, d13), (2, 4, d23), (3, 5, d23), (3, 6, d13), (5, 6, d12)]:
        h[i, j] = h[j, i] = v
    return h


def build_p_s(params: CellParams) -> np.ndarray:
    s1, s2, s3 = params.stark_shifts_unit
    s12, s13, s23, ssig = params.pair_stark_shifts
    return np.diag([0.0, s1, s2, s12, s3, s13, s23, ssig]).astype(complex)


def build_p_omega(params: CellParams) -> np.ndarray:
    """Single-photon couplings: V_i connects states differing only in atom i."""
    p = np.zeros((DIM, DIM), dtype=complex)
    for x in range(DIM):
        for i, v in enumerate(params.em_couplings_unit):
            p[x, x ^ (1 << i)] = v
    return p


@dataclass(frozen=True)
class HamiltonianTriple:
    h0: np.ndarray
    p_s: np.ndarray
    p_omega: np.ndarray

    @classmethod
    def from_params(cls, params: CellParams) -> "HamiltonianTriple":
        return cls(build_h0(params), build_p_s(params), build_p_omega(params))

    def perturbation(self, k: int) -> np.ndarray:
        """Perturbation for 1-based interval k: static field on odd k, EM field on even k."""
        return self.p_s if k % 2 else self.p_omega

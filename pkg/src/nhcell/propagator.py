"""Piecewise-constant evolution over the control intervals and its exact gradient.

Ordering convention: interval k = 1 acts first, so its factor is rightmost,
U = F_n ... F_2 F_1 with F_k = exp(-i (H0 + C_k P_k) tau).
"""
from __future__ import annotations

import numpy as np

from .cell_model import DIM, N_INTERVALS, HamiltonianTriple
from .errors import NotHermitianError

HERMITIAN_TOL = 1e-12
SEED_LENGTH = 8


def perturbation_kind(k: int) -> str:
    return "S" if k % 2 else "omega"


def _check_hermitian(h):
    if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise NotHermitianError("matrix is not Hermitian within 1e-12")


def _eig(h):
    _check_hermitian(h)
    return np.linalg.eigh(h)


def step_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h, via eigendecomposition."""
    if t < 0:
        raise ValueError("duration must be non-negative")
    w, v = _eig(np.asarray(h))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _interval_hamiltonians(triple, c):
    kinds = np.arange(1, len(c) + 1) % 2 == 1
    p = np.where(kinds[:, None, None], triple.p_s, triple.p_omega)
    return triple.h0 + c[:, None, None] * p, p


def _batched_eig(hs):
    if np.max(np.abs(hs - np.conj(np.swapaxes(hs, -1, -2))), initial=0.0) > HERMITIAN_TOL:
        raise NotHermitianError("matrix is not Hermitian within 1e-12")
    return np.linalg.eigh(hs)


def _factors(triple, c, tau, with_derivatives=False):
    """Per-interval exponentials, and optionally their derivatives along P_k.

    The derivative uses the eigenbasis divided difference
    (e^{-i w_a t} - e^{-i w_b t}) / (w_a - w_b), written with sinc so that
    (near-)degenerate eigenvalues need no special casing.
    """
    hs, ps = _interval_hamiltonians(triple, c)
    w, v = _batched_eig(hs)
    vh = np.conj(np.swapaxes(v, -1, -2))
    f = (v * np.exp(-1j * w * tau)[:, None, :]) @ vh
    if not with_derivatives:
        return f
    gap = w[:, :, None] - w[:, None, :]
    mean = 0.5 * (w[:, :, None] + w[:, None, :])
    dd = -1j * tau * np.exp(-1j * mean * tau) * np.sinc(gap * tau / (2 * np.pi))
    df = v @ (dd * (vh @ ps @ v)) @ vh
    return f, df


def _as_controls(c, length):
    c = np.asarray(c, dtype=float)
    if c.shape != (length,):
        raise ValueError(f"expected {length} control values, got shape {c.shape}")
    return c


def _product(triple, c, tau):
    u = np.eye(DIM, dtype=complex)
    for f in _factors(triple, c, tau):
        u = f @ u
    return u


def sequence_unitary(triple: HamiltonianTriple, c, tau: float) -> np.ndarray:
    return _product(triple, _as_controls(c, N_INTERVALS), tau)


def seed_product(triple: HamiltonianTriple, c, tau: float) -> np.ndarray:
    """The eight-interval product whose eighth power is the full period."""
    return _product(triple, _as_controls(c, SEED_LENGTH), tau)


def partial_unitary(triple: HamiltonianTriple, c, tau: float, first: int = 1) -> np.ndarray:
    """Product over an arbitrary run of intervals; ``first`` is the index of c[0]."""
    u = np.eye(DIM, dtype=complex)
    for k, ck in enumerate(np.asarray(c, dtype=float), start=first):
        u = step_unitary(triple.h0 + ck * triple.perturbation(k), tau) @ u
    return u


def expand_seed(seed) -> np.ndarray:
    """Repeat an 8-value seed to fill all 64 intervals."""
    return np.tile(_as_controls(seed, SEED_LENGTH), N_INTERVALS // SEED_LENGTH)


def unitary_and_derivatives(triple: HamiltonianTriple, c, tau: float):
    """Return U(C) and the list of dU/dC_k, k = 1..64.

    dU/dC_k = (F_64 ... F_{k+1}) dF_k (F_{k-1} ... F_1).
    """
    c = _as_controls(c, N_INTERVALS)
    factors, dfactors = _factors(triple, c, tau, with_derivatives=True)

    n = len(factors)
    right = [np.eye(DIM, dtype=complex)]
    for f in factors:
        right.append(f @ right[-1])
    left = [np.eye(DIM, dtype=complex)]
    for f in reversed(factors):
        left.append(left[-1] @ f)
    derivs = np.array(left[n - 1::-1]) @ dfactors @ np.array(right[:n])
    return right[-1], derivs


def unitary_derivatives(triple: HamiltonianTriple, c, tau: float) -> np.ndarray:
    """Array of shape (64, 8, 8); entry k-1 is dU/dC_k."""
    return unitary_and_derivatives(triple, c, tau)[1]

"""Control synthesis for one cell.

First an eight-interval seed is found whose product has eigenvalues on the
eighth roots of a unit phase, so that repeating it over the 64 intervals gives
the identity up to a global phase. Targets exp(-i H eps) are then reached by
Newton iteration from that identity vector, split into n* equal repetitions.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from .cell_model import DIM, N_INTERVALS, HamiltonianTriple
from .errors import IllConditioned, NoConvergence
from .propagator import (
    SEED_LENGTH,
    expand_seed,
    perturbation_kind,
    seed_product,
    sequence_unitary,
    unitary_and_derivatives,
)

log = logging.getLogger(__name__)

DEFAULT_RNG_SEED = 20240611


def char_poly(m: np.ndarray) -> np.ndarray:
    """Coefficients a_0..a_n of det(lambda I - m), so a[j] multiplies lambda**j.

    Built from the eigenvalues by product expansion.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    a = np.zeros(n + 1, dtype=complex)
    a[0] = 1.0  # a holds coefficients highest-degree first while expanding
    for lam in np.linalg.eigvals(m):
        a[1:] = a[1:] - lam * a[:-1]
    return a[::-1].copy()


def identity_functional(triple: HamiltonianTriple, c, tau: float) -> float:
    a = char_poly(seed_product(triple, c, tau))
    return float(np.sum(np.abs(a) ** 2))


def _seed_residuals(c, triple, tau, phase_penalty):
    a = char_poly(seed_product(triple, c, tau))
    inner = a[1:SEED_LENGTH]
    r = [inner.real, inner.imag]
    if phase_penalty:
        # pins the global phase of the period product to theta = 0
        w = math.sqrt(phase_penalty)
        r.append(w * np.array([(a[0] + 1).real, (a[0] + 1).imag]))
    return np.concatenate(r)


@dataclass
class SearchConfig:
    restarts: int = 32
    rng_seed: int = DEFAULT_RNG_SEED
    bounds: tuple[float, float] = (0.2, 2.0)
    tol: float = 1e-9
    max_nfev: int = 400
    phase_penalty: float = 0.0


@dataclass
class IdentitySeed:
    seed: np.ndarray
    functional: float
    phase: float
    restart: int
    conditioning: float = float("nan")

    @property
    def controls(self) -> np.ndarray:
        return expand_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "seed": [float(v) for v in self.seed],
            "controls": [float(v) for v in self.controls],
            "functional": self.functional,
            "phase_theta": self.phase,
            "restart": self.restart,
            "conditioning": self.conditioning,
        }

    @classmethod
    def from_dict(cls, d) -> "IdentitySeed":
        return cls(np.array(d["seed"], dtype=float), float(d["functional"]),
                   float(d["phase_theta"]), int(d.get("restart", -1)),
                   float(d.get("conditioning", "nan")))


def seed_phase(triple, seed, tau) -> float:
    """Global phase theta with W^8 = exp(i theta) I, from W's constant coefficient."""
    a0 = char_poly(seed_product(triple, seed, tau))[0]
    return float(np.angle(-a0))


def jacobian_conditioning(triple, c, tau) -> float:
    """Ratio of smallest to largest singular value of the flattened dU/dC."""
    _, derivs = unitary_and_derivatives(triple, c, tau)
    s = np.linalg.svd(_real_system(derivs), compute_uv=False)
    return float(s[-1] / s[0])


def solve_identity_seed(triple: HamiltonianTriple, tau: float, config: SearchConfig | None = None):
    """Multi-start minimization of the characteristic-polynomial functional.

    Each restart drives a_1..a_7 to zero with a Levenberg-Marquardt least-squares
    solve (finite-difference Jacobian), which minimizes the functional minus its
    floor of 2. Restarts whose functional is within ``tol`` of 2 all count as
    solutions; among them the one whose 64-interval Jacobian is best conditioned
    is kept, ties going to the lower restart index.
    """
    config = config or SearchConfig()
    rng = np.random.default_rng(config.rng_seed)
    lo, hi = config.bounds
    starts = rng.uniform(lo, hi, size=(config.restarts, SEED_LENGTH))

    best, solved = None, []
    for i, x0 in enumerate(starts):
        fit = least_squares(
            _seed_residuals, x0, args=(triple, tau, config.phase_penalty), method="lm",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=config.max_nfev * SEED_LENGTH,
        )
        f = identity_functional(triple, fit.x, tau)
        log.debug("restart %d: functional - 2 = %.3e", i, f - 2)
        if best is None or f < best[0]:
            best = (f, i, fit.x)
        if f <= 2.0 + config.tol:
            solved.append((jacobian_conditioning(triple, expand_seed(fit.x), tau), i, fit.x, f))

    if not solved:
        f, _, x = best
        raise NoConvergence(
            f"identity seed search: best functional {f!r} exceeds 2 + {config.tol}",
            best_value=f, best_x=x,
        )
    cond, i, x, f = max(solved, key=lambda t: (t[0], -t[1]))
    log.info("identity seed: restart %d of %d solved, conditioning %.3e",
             i, len(solved), cond)
    return IdentitySeed(seed=x, functional=f, phase=seed_phase(triple, x, tau), restart=i,
                        conditioning=cond)


@dataclass(frozen=True, eq=False)
class SynthesisTarget:
    generator: np.ndarray
    epsilon: float
    name: str = ""
    # exact full unitary when known (e.g. a permutation); used for the final residual
    exact: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=complex)
        if np.abs(g - g.conj().T).max() > 1e-12:
            raise ValueError("target generator is not Hermitian")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        object.__setattr__(self, "generator", g)

    @classmethod
    def from_gate(cls, gate) -> "SynthesisTarget":
        return cls(gate.generator, gate.epsilon, gate.name, gate.unitary)

    def unitary(self, fraction: float = 1.0) -> np.ndarray:
        if fraction == 1.0 and self.exact is not None:
            return self.exact
        return scipy.linalg.expm(-1j * self.generator * self.epsilon * fraction)

    def scaled(self, fraction: float) -> "SynthesisTarget":
        return SynthesisTarget(self.generator, self.epsilon * fraction, self.name)


@dataclass
class SynthesisOptions:
    tol: float = 1e-6
    n_star: int | None = None
    theta_max: float = math.pi / 8
    max_iter: int = 40
    newton_tol: float = 1e-11
    rcond: float = 1e-8
    min_damping: float = 1.0 / 1024
    min_stage: float = 1.0 / 16
    arc_steps: int = 250
    # global-phase offsets (per unit step angle) tried as alternative homotopy paths
    phase_shifts: tuple = (0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5)


@dataclass
class ControlSchedule:
    base: np.ndarray
    n_star: int
    residual: float
    iterations: int
    phase: float = 0.0
    target_name: str = ""
    cell_hash: str = ""
    # Newton residual norms, one list per continuation stage
    history: list = field(default_factory=list)

    def unitary(self, triple, tau) -> np.ndarray:
        return np.linalg.matrix_power(sequence_unitary(triple, self.base, tau), self.n_star)

    def to_dict(self) -> dict:
        return {
            "target_name": self.target_name,
            "n_star": self.n_star,
            "base_controls": [float(v) for v in self.base],
            "phase_theta": self.phase,
            "residual": self.residual,
            "iterations": self.iterations,
            "cell_params_hash": self.cell_hash,
        }

    @classmethod
    def from_dict(cls, d) -> "ControlSchedule":
        base = np.array(d["base_controls"], dtype=float)
        if base.shape != (N_INTERVALS,):
            raise ValueError("base_controls must hold 64 values")
        return cls(
            base=base, n_star=int(d["n_star"]), residual=float(d["residual"]),
            iterations=int(d.get("iterations", 0)), phase=float(d.get("phase_theta", 0.0)),
            target_name=d.get("target_name", ""), cell_hash=d.get("cell_params_hash", ""),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ControlSchedule":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write_csv(self, path, identity_controls):
        """Pulse table: interval, perturbation kind, strength, offset from the identity vector."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "kind", "C_k", "delta_C_k"])
            for k, (ck, c0) in enumerate(zip(self.base, identity_controls), start=1):
                w.writerow([k, perturbation_kind(k), repr(float(ck)), repr(float(ck - c0))])


def phase_invariant_infidelity(u: np.ndarray, v: np.ndarray) -> float:
    n = u.shape[0]
    return max(0.0, 1.0 - abs(np.trace(u.conj().T @ v)) / n)


def choose_repetitions(target: SynthesisTarget, options: SynthesisOptions | None = None) -> int:
    """Smallest n* with eps * ||H||_2 / n* <= theta_max, unless overridden."""
    options = options or SynthesisOptions()
    if options.n_star is not None:
        if options.n_star < 1:
            raise ValueError("n_star must be positive")
        return int(options.n_star)
    angle = target.epsilon * np.linalg.norm(target.generator, 2)
    # slack absorbs roundoff when angle is an exact multiple of theta_max
    return max(1, math.ceil(angle / options.theta_max - 1e-9))


def _flatten(m):
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def _real_system(derivs):
    """Stack dU/dC_k as columns of the 128 x 64 real system."""
    d = np.asarray(derivs)
    return np.concatenate([d.real.reshape(len(d), -1), d.imag.reshape(len(d), -1)], axis=1).T


def _solve_linearized(derivs, rhs, rcond):
    u, s, vt = np.linalg.svd(_real_system(derivs), full_matrices=False)
    if s[-1] < rcond * s[0]:
        raise IllConditioned(
            f"smallest singular value {s[-1]:.3e} below {rcond:g} x largest {s[0]:.3e}",
            singular_values=s,
        )
    return vt.T @ ((u.T @ _flatten(rhs)) / s)


def newton_step(triple, c, target: SynthesisTarget, tau, *, phase=0.0, first_order=False,
                rcond=1e-8) -> np.ndarray:
    """Minimum-norm least-squares solution of sum_k dU/dC_k dC_k = R.

    ``target`` is the per-repetition step. With ``first_order`` the right-hand
    side is the linearized target exp(i phase)(-i H eps), valid at an identity
    vector; otherwise it is exp(i phase) exp(-i H eps) - U(c).
    """
    u, derivs = unitary_and_derivatives(triple, c, tau)
    ph = np.exp(1j * phase)
    if first_order:
        rhs = ph * (-1j * target.generator * target.epsilon)
    else:
        rhs = ph * target.unitary() - u
    return _solve_linearized(derivs, rhs, rcond)


def newton_refine(triple, c, goal: np.ndarray, tau, options: SynthesisOptions):
    """Damped Newton iteration on U(c) = goal; returns (c, residual history)."""
    c = np.array(c, dtype=float)
    u, derivs = unitary_and_derivatives(triple, c, tau)
    r = np.linalg.norm(goal - u)
    history = [r]
    for _ in range(options.max_iter):
        if r <= options.newton_tol:
            break
        try:
            dc = _solve_linearized(derivs, goal - u, options.rcond)
        except IllConditioned:
            break
        lam = 1.0
        while True:
            trial = c + lam * dc
            u_t, d_t = unitary_and_derivatives(triple, trial, tau)
            r_t = np.linalg.norm(goal - u_t)
            if r_t < r or lam <= options.min_damping:
                break
            lam *= 0.5
        if not r_t < r:
            break
        c, u, derivs, r = trial, u_t, d_t, r_t
        history.append(r)
        log.debug("newton: residual %.3e (damping %g)", r, lam)
    return c, history


_IU = np.triu_indices(DIM, 1)


def _skew_coords(x):
    """64 real coordinates of the anti-Hermitian part of x (zero iff x is Hermitian)."""
    a = 0.5 * (x - np.conj(np.swapaxes(x, -1, -2)))
    diag = np.diagonal(a, axis1=-2, axis2=-1).imag
    return np.concatenate([a[..., _IU[0], _IU[1]].real, a[..., _IU[0], _IU[1]].imag, diag],
                          axis=-1)


class _Homotopy:
    """Target path G(s) = exp(i phase) exp(-i H eps s), 0 <= s <= 1."""

    def __init__(self, triple, tau, generator, epsilon, phase):
        self.triple, self.tau = triple, tau
        self.h_eps = generator * epsilon
        self.w, self.v = np.linalg.eigh(self.h_eps)
        self.phase = phase

    def goal(self, s):
        return np.exp(1j * self.phase) * (self.v * np.exp(-1j * self.w * s)) @ self.v.conj().T

    def system(self, c, s):
        """Tangent-space residual of G(s)^dag U(c) and its Jacobian in (c, s)."""
        gh = self.goal(s).conj().T
        u, derivs = unitary_and_derivatives(self.triple, c, self.tau)
        x = gh @ u
        f = _skew_coords(x)
        jc = _skew_coords(gh @ derivs).T
        js = _skew_coords(1j * self.h_eps @ x)
        return f, np.column_stack([jc, js])


def _natural_continuation(path, c0, options, log_to=None):
    """Newton continuation in s with stage halving; returns c at s = 1 or None.

    Residual histories of accepted stages are appended to ``log_to``.
    """
    c, done, ds = c0.copy(), 0.0, 1.0
    while done < 1.0:
        s = min(1.0, done + ds)
        goal = path.goal(s)
        u, derivs = unitary_and_derivatives(path.triple, c, path.tau)
        try:
            # first-order predictor: G(s) - G(done) ~ -i H eps (s - done) G(done)
            pred = c + _solve_linearized(derivs, -1j * (s - done) * path.h_eps @ path.goal(done),
                                         options.rcond)
        except IllConditioned:
            return None
        if np.linalg.norm(goal - sequence_unitary(path.triple, pred, path.tau)) > np.linalg.norm(
                goal - u):
            pred = c
        trial, hist = newton_refine(path.triple, pred, goal, path.tau, options)
        if hist[-1] <= options.newton_tol:
            c, done, ds = trial, s, min(2 * ds, 1.0)
            if log_to is not None:
                log_to.append(hist)
        else:
            ds *= 0.5
            log.debug("continuation stalled at s=%.4f (residual %.2e)", s, hist[-1])
            if ds < options.min_stage:
                return None
    return c


def _tangent(jac, previous=None):
    t = np.linalg.svd(jac)[2][-1]
    ref = previous if previous is not None else np.eye(len(t))[-1]
    return -t if t @ ref < 0 else t


def _corrector(path, y, tol=1e-12, max_iter=12):
    for _ in range(max_iter):
        f, jac = path.system(y[:-1], y[-1])
        if np.linalg.norm(f) < tol:
            return y, jac
        dy = np.linalg.lstsq(jac, f, rcond=None)[0]
        y = y - dy
        if np.linalg.norm(dy) > 1.0:
            return None, None
    f, jac = path.system(y[:-1], y[-1])
    return (y, jac) if np.linalg.norm(f) < tol else (None, None)


def _arclength_continuation(path, c0, options, log_to=None, h_max=0.5):
    """Follow the solution curve of G(s)^dag U(c) = I through folds in s.

    Minimum-norm (Moore-Penrose) corrections keep the iterate on the curve;
    once s passes 1 the endpoint is solved with s pinned.
    """
    y = np.append(c0, 0.0)
    _, jac = path.system(c0, 0.0)
    t = _tangent(jac)
    h = 0.1
    for _ in range(options.arc_steps):
        y_new, jac_new = _corrector(path, y + h * t)
        if y_new is None:
            h *= 0.5
            if h < 1e-6:
                return None
            continue
        if y_new[-1] >= 1.0:
            return y_new[:-1]
        y, t = y_new, _tangent(jac_new, t)
        h = min(h_max, 1.5 * h)
    return None


def _continuation(triple, c0, step, phase, tau, options):
    """Reach exp(i phase') exp(-i H eps) from the identity vector.

    Tries natural continuation, then arclength continuation, along paths that
    differ only in how the unobservable global phase is distributed over s.
    Returns the controls and the list of Newton residual histories.
    """
    angle = step.epsilon
    for shift in options.phase_shifts:
        gen = step.generator + shift * np.eye(DIM)
        path = _Homotopy(triple, tau, gen, angle, phase)
        end_phase = phase - shift * angle
        goal = np.exp(1j * end_phase) * step.unitary()
        for method in (_natural_continuation, _arclength_continuation):
            stages = []
            c = method(path, c0, options, log_to=stages)
            if c is None:
                continue
            c, final = newton_refine(triple, c, goal, tau, options)
            if final[-1] <= options.newton_tol:
                log.info("reached target via %s (phase shift %g)", method.__name__, shift)
                return c, stages + [final]

        log.debug("phase shift %g failed", shift)
    return None, None


def synthesize(triple, target: SynthesisTarget, tau, options: SynthesisOptions | None = None,
               identity: IdentitySeed | None = None, cell_hash: str = "") -> ControlSchedule:
    """Controls whose n*-fold repetition realizes the target up to global phase."""
    options = options or SynthesisOptions()
    if identity is None:
        identity = solve_identity_seed(triple, tau)
    c0 = identity.controls
    n_star = choose_repetitions(target, options)
    step = target.scaled(1.0 / n_star)
    # carry the identity vector's global phase into every residual
    phase = float(np.angle(np.trace(sequence_unitary(triple, c0, tau)) / DIM))

    if step.epsilon == 0 or not np.any(step.generator):
        c, stages = c0.copy(), [[0.0]]
    else:
        c, stages = _continuation(triple, c0, step, phase, tau, options)
        if c is None:
            raise NoConvergence(f"synthesis of {target.name or 'target'}: no continuation path "
                                "reached the target")

    u_step = sequence_unitary(triple, c, tau)
    u_full = np.linalg.matrix_power(u_step, n_star)
    infid = phase_invariant_infidelity(u_full, target.unitary())
    theta = float(np.angle(np.trace(step.unitary().conj().T @ u_step) / DIM))
    sched = ControlSchedule(
        base=c, n_star=n_star, residual=infid, iterations=sum(len(h) - 1 for h in stages),
        phase=theta, target_name=target.name, cell_hash=cell_hash,
        history=stages,
    )
    if not infid <= options.tol:
        raise NoConvergence(
            f"synthesis of {target.name or 'target'}: infidelity {infid:.3e} > {options.tol:g}",
            best_value=infid, best_x=c,
        )
    return sched


def identity_schedule(identity: IdentitySeed, triple, tau, cell_hash="") -> ControlSchedule:
    c0 = identity.controls
    u = sequence_unitary(triple, c0, tau)
    return ControlSchedule(
        base=c0, n_star=1, residual=phase_invariant_infidelity(u, np.eye(DIM)), iterations=0,
        phase=float(np.angle(np.trace(u) / DIM)), target_name="identity", cell_hash=cell_hash,
    )

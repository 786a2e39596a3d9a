"""Command-line front end.

Exit codes: 0 success, 1 I/O or format error, 2 convergence or threshold
failure, 3 dependency mismatch (cell hash, missing schedule). Each command
prints one JSON report on stdout; logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import device as dev
from .cell_model import CellParams, HamiltonianTriple, default_params, load_params
from .control_solver import (
    DEFAULT_RNG_SEED,
    ControlSchedule,
    IdentitySeed,
    SearchConfig,
    SynthesisOptions,
    SynthesisTarget,
    identity_schedule,
    phase_invariant_infidelity,
    solve_identity_seed,
    synthesize,
)
from .errors import IllConditioned, MissingSchedule, NoConvergence
from .gates import gate_from_name

log = logging.getLogger("nhcell")

EXIT_OK, EXIT_IO, EXIT_CONVERGENCE, EXIT_MISMATCH = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _report(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)


def _cell(args) -> CellParams:
    if not args.cell:
        return default_params()
    try:
        return load_params(args.cell)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise CliError(f"bad cell parameter file {args.cell}: {exc}", EXIT_IO)


def _load_seed(path, params) -> IdentitySeed:
    data = _read_json(path)
    if data.get("cell_params_hash") != params.digest():
        raise CliError(f"seed file {path} was solved for a different cell", EXIT_MISMATCH)
    try:
        return IdentitySeed.from_dict(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"malformed seed file {path}: {exc}", EXIT_IO)


def _seed_or_solve(args, params, triple) -> IdentitySeed:
    if args.seed:
        return _load_seed(args.seed, params)
    log.info("no --seed given; solving for the identity seed")
    return solve_identity_seed(triple, params.tau, SearchConfig(restarts=args.restarts,
                                                                rng_seed=args.rng_seed))


def cmd_solve_identity(args):
    params = _cell(args)
    triple = HamiltonianTriple.from_params(params)
    config = SearchConfig(restarts=args.restarts, rng_seed=args.rng_seed, tol=args.tol)
    try:
        ident = solve_identity_seed(triple, params.tau, config)
    except NoConvergence as exc:
        _report({"command": "solve-identity", "status": "no_convergence",
                 "best_functional": exc.best_value})
        return EXIT_CONVERGENCE
    out = dict(ident.to_dict(), cell_params_hash=params.digest(), rng_seed=args.rng_seed,
               restarts=args.restarts)
    if args.out:
        _write_json(args.out, out)
    _report({"command": "solve-identity", "status": "ok", "functional": ident.functional,
             "phase_theta": ident.phase, "restart": ident.restart})
    return EXIT_OK


def _synthesize_gate(name, params, triple, ident, tol, n_star=None):
    try:
        gate = gate_from_name(name)
    except (KeyError, ValueError) as exc:
        raise CliError(str(exc), EXIT_IO)
    opts = SynthesisOptions(tol=tol, n_star=n_star)
    if name == "identity" and n_star is None:
        return identity_schedule(ident, triple, params.tau, params.digest())
    return synthesize(triple, SynthesisTarget.from_gate(gate), params.tau, opts,
                      identity=ident, cell_hash=params.digest())


def cmd_synthesize(args):
    params = _cell(args)
    triple = HamiltonianTriple.from_params(params)
    ident = _seed_or_solve(args, params, triple)
    try:
        sched = _synthesize_gate(args.gate, params, triple, ident, args.tol, args.n_star)
    except (NoConvergence, IllConditioned) as exc:
        _report({"command": "synthesize", "gate": args.gate, "status": "no_convergence",
                 "detail": str(exc)})
        return EXIT_CONVERGENCE
    if args.out:
        sched.save(args.out)
    if args.csv:
        sched.write_csv(args.csv, ident.controls)
    _report({"command": "synthesize", "gate": args.gate, "status": "ok", "n_star": sched.n_star,
             "residual": sched.residual, "iterations": sched.iterations})
    return EXIT_OK


def cmd_schedules(args):
    """Synthesize every gate the compiled QFT uses, plus the identity."""
    params = _cell(args)
    triple = HamiltonianTriple.from_params(params)
    ident = _seed_or_solve(args, params, triple)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = ["identity"] + dev.qft_program().gate_names()
    worst = 0.0
    for name in names:
        try:
            sched = _synthesize_gate(name, params, triple, ident, args.tol)
        except (NoConvergence, IllConditioned) as exc:
            _report({"command": "schedules", "status": "no_convergence", "gate": name,
                     "detail": str(exc)})
            return EXIT_CONVERGENCE
        sched.save(out / dev.schedule_filename(name))
        worst = max(worst, sched.residual)
        log.info("%s: n*=%d residual %.2e", name, sched.n_star, sched.residual)
    _report({"command": "schedules", "status": "ok", "count": len(names),
             "max_residual": worst})
    return EXIT_OK


def cmd_qft(args):
    params = _cell(args)
    if args.input:
        try:
            psi = dev.load_state(args.input)
        except (OSError, ValueError, TypeError) as exc:
            raise CliError(f"bad state file {args.input}: {exc}", EXIT_IO)
    else:
        psi = np.zeros(dev.DIM, dtype=complex)
        psi[0] = 1.0
    program = dev.qft_program()
    physical = None
    if args.mode == "physical":
        if not args.schedules:
            raise CliError("physical mode needs --schedules", EXIT_MISMATCH)
        try:
            scheds = dev.load_schedules(args.schedules)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot load schedules: {exc}", EXIT_IO)
        digest = params.digest()
        stale = sorted(n for n, s in scheds.items() if s.cell_hash and s.cell_hash != digest)
        if stale:
            raise CliError(f"schedules solved for a different cell: {stale}", EXIT_MISMATCH)
        triple = HamiltonianTriple.from_params(params)
        try:
            physical = dev.PhysicalGates(triple, params.tau, scheds)
        except MissingSchedule as exc:
            raise CliError(f"missing schedule {exc}", EXIT_MISMATCH)
        missing = physical.missing(program)
        if missing:
            raise CliError(f"missing schedules: {missing}", EXIT_MISMATCH)

    out = dev.apply_program(psi, program, args.mode, physical)
    oracle = dev.dft_reference(dev.DIM) @ psi
    fid = dev.state_fidelity(oracle, out)
    overlap = np.vdot(oracle, out)
    if args.out:
        dev.save_state(out, args.out)
    report = {"fidelity": fid, "phase": float(np.angle(overlap)), "op_count": len(program.ops),
              "mode": args.mode}
    if args.report:
        _write_json(args.report, report)
    _report(dict(report, command="qft"))
    return EXIT_OK


def cmd_verify(args):
    params = _cell(args)
    try:
        sched = ControlSchedule.load(args.schedule)
    except OSError as exc:
        raise CliError(f"cannot read {args.schedule}: {exc}", EXIT_IO)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"malformed schedule {args.schedule}: {exc}", EXIT_IO)
    if sched.cell_hash and sched.cell_hash != params.digest():
        raise CliError("schedule was synthesized for a different cell", EXIT_MISMATCH)
    name = args.gate or sched.target_name
    try:
        target = gate_from_name(name).unitary
    except (KeyError, ValueError) as exc:
        raise CliError(str(exc), EXIT_IO)
    # independent re-derivation: propagator and gate catalog only
    triple = HamiltonianTriple.from_params(params)
    infid = phase_invariant_infidelity(sched.unitary(triple, params.tau), target)
    ok = infid <= sched.residual * 1.1
    _report({"command": "verify", "gate": name, "infidelity": infid,
             "declared_residual": sched.residual, "status": "ok" if ok else "failed"})
    return EXIT_OK if ok else EXIT_CONVERGENCE


def build_parser():
    parser = argparse.ArgumentParser(prog="nhcell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--cell", help="cell parameter JSON (default: built-in parameter set)")
        if seed:
            p.add_argument("--seed", help="identity seed file from solve-identity")
            p.add_argument("--restarts", type=int, default=32)
            p.add_argument("--rng-seed", type=int, default=DEFAULT_RNG_SEED)

    p = sub.add_parser("solve-identity", help="find the identity control vector")
    common(p)
    p.add_argument("--out", help="seed file to write")
    p.add_argument("--tol", type=float, default=1e-9, help="functional tolerance above 2")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--rng-seed", type=int, default=DEFAULT_RNG_SEED)
    p.set_defaults(func=cmd_solve_identity)

    p = sub.add_parser("synthesize", help="synthesize a control schedule for one gate")
    p.add_argument("gate", help="toffoli | split | swap | identity | phase(<angle>), "
                                "optionally with @positions, e.g. 'phase(pi/32)@1,2'")
    common(p, seed=True)
    p.add_argument("--out", help="schedule JSON to write")
    p.add_argument("--csv", help="pulse table CSV to write")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--n-star", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("schedules", help="synthesize all gates needed by the QFT program")
    common(p, seed=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_schedules)

    p = sub.add_parser("qft", help="run the 9-qubit Fourier transform")
    common(p)
    p.add_argument("--mode", choices=["ideal", "physical"], default="ideal")
    p.add_argument("--input", help="input state JSON (default |0>)")
    p.add_argument("--schedules", help="schedule directory (physical mode)")
    p.add_argument("--out", help="output state JSON")
    p.add_argument("--report", help="report JSON")
    p.set_defaults(func=cmd_qft)

    p = sub.add_parser("verify", help="re-derive a schedule's infidelity from the propagator")
    common(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--gate", help="target gate (default: the schedule's target_name)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
        level=logging.WARNING - 10 * min(args.verbose, 2),
    )
    try:
        return args.func(args)
    except CliError as exc:
        log.error("%s", exc)
        _report({"command": args.command, "status": "error", "detail": str(exc)})
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point ``tcpgds``.

Exit codes: 0 success, 1 a run did not converge / the check failed,
2 bad input or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import kernels
from .dynamics import IntegratorConfig
from .errors import ConfigurationError, TcpInputError
from .harness import (
    ExperimentConfig,
    default_seed,
    parse_vector,
    report_table,
    resolve_problem,
    run_experiment,
    sweep_activations,
)
from .ncp import verify_solution
from .tensor import p_tensor_sample_check

log = logging.getLogger("tcpgds")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _add_problem_args(p):
    p.add_argument(
        "--problem", required=True,
        help="builtin:eg1|eg2|eg3, file:<path.json> or diag:m=4,n=3,seed=42",
    )
    p.add_argument("--q", help="comma-separated q vector (overrides the default/file q)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcpgds",
        description="Solve tensor complementarity problems with a gradient dynamical system.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="integrate the flow for one or more activations")
    _add_problem_args(solve)
    solve.add_argument("--act", help='activation list, e.g. "lin;bs:q=7;ps:p=5,q=7" (default: all four)')
    solve.add_argument("--gamma", type=float, default=1e6)
    solve.add_argument("--x0", help='initial state "v1,...,vn" or "seed:N" (default: seed from TCPGDS_SEED or 0)')
    solve.add_argument("--tol", type=float, default=1e-8, help="stopping residual ||Phi(x)||")
    solve.add_argument("--tmax", type=float, default=100.0, help="horizon in scaled time tau = gamma t")
    solve.add_argument("--method", choices=["rk45_adaptive", "rk4_fixed"], default="rk45_adaptive")
    solve.add_argument("--step", type=float, default=1e-2, help="initial (adaptive) or fixed step in tau")
    solve.add_argument("--rtol", type=float, default=1e-10)
    solve.add_argument("--atol", type=float, default=1e-12)
    solve.add_argument("--max-steps", type=int, default=1_000_000)
    solve.add_argument("--record-every", type=int, default=1)
    solve.add_argument("--out", help="directory for <label>.csv trajectories and summary.json")
    solve.add_argument("--jobs", type=int, default=1, help="parallel runs within the sweep")
    solve.add_argument("--backend", choices=sorted(kernels.BACKENDS), help="kernel backend")

    verify = sub.add_parser("verify", help="check whether x solves TCP(A, q)")
    _add_problem_args(verify)
    verify.add_argument("--x", required=True, help='candidate "v1,...,vn"')
    verify.add_argument("--tol", type=float, default=1e-8)

    check = sub.add_parser("check-ptensor", help="sample for P-tensor counterexamples (heuristic)")
    _add_problem_args(check)
    check.add_argument("--trials", type=int, default=10000)
    check.add_argument("--seed", type=int)
    return parser


def _x0(text, cfg_seed):
    if text is None:
        return None, cfg_seed
    if text.startswith("seed:"):
        try:
            return None, int(text[5:])
        except ValueError:
            raise TcpInputError(f"bad seed in {text!r}") from None
    return parse_vector(text), cfg_seed


def cmd_solve(args) -> int:
    q = parse_vector(args.q) if args.q else None
    source = resolve_problem(args.problem, q)
    acts = sweep_activations(source, args.act)
    integrator = IntegratorConfig(
        method=args.method,
        step=args.step,
        t_max=args.tmax,
        res_tol=args.tol,
        max_steps=args.max_steps,
        record_every=args.record_every,
        rtol=args.rtol,
        atol=args.atol,
    )
    if not args.gamma > 0:
        raise ConfigurationError("gamma must be positive")
    x0, seed = _x0(args.x0, default_seed())
    cfg = ExperimentConfig(
        source=source,
        activations=acts,
        gamma=args.gamma,
        integrator=integrator,
        x0=x0,
        seed=seed,
        out_dir=Path(args.out) if args.out else None,
        jobs=args.jobs,
        backend=args.backend,
    )
    log.info("backend=%s x0=%s", args.backend or kernels.BACKEND, list(cfg.initial_state()))
    summaries = run_experiment(cfg)
    print(report_table(summaries))
    if source.known_solution is not None:
        print("known solution:", ", ".join(f"{v:.10g}" for v in source.known_solution))
    return EXIT_OK if all(s.converged for s in summaries) else EXIT_FAIL


def cmd_verify(args) -> int:
    q = parse_vector(args.q) if args.q else None
    source = resolve_problem(args.problem, q)
    verdict = verify_solution(source.problem, parse_vector(args.x), args.tol)
    print(verdict)
    return EXIT_OK if verdict.is_solution else EXIT_FAIL


def cmd_check_ptensor(args) -> int:
    q = parse_vector(args.q) if args.q else None
    source = resolve_problem(args.problem, q)
    seed = args.seed if args.seed is not None else default_seed()
    verdict = p_tensor_sample_check(source.problem.tensor, args.trials, seed)
    if verdict.found:
        print(json.dumps({
            "verdict": "counterexample",
            "x": [float(v) + 0.0 for v in verdict.counterexample],  # no -0.0
            "max_xi_Axi": float(verdict.score) + 0.0,
            "trials_used": verdict.trials,
        }))
        return EXIT_FAIL
    print(json.dumps({"verdict": "no-counterexample-found", "trials": verdict.trials, "seed": seed}))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "check-ptensor": cmd_check_ptensor}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (TcpInputError, ConfigurationError) as exc:
        print(f"tcpgds: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

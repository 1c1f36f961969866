"""Experiment harness: built-in problems, activation sweeps, output files."""
from __future__ import annotations

import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activation import ActivationSpec, Family, parse_activation_list
from .dynamics import GdsModel, IntegratorConfig, Trajectory, integrate, random_diagonal_problem
from .errors import TcpInputError
from .ncp import TcpProblem, load_problem, verify_solution
from .tensor import DenseTensor

# nonzero entries (1-based) of the built-in example tensors
BUILTIN_ENTRIES = {
    "eg1": (4, 2, [
        (1, 1, 1, 1, 1.0),
        (1, 2, 2, 2, -1.0),
        (1, 1, 2, 2, 1.0),
        (2, 2, 2, 2, 1.0),
        (2, 1, 1, 1, -1.0),
        (2, 2, 1, 1, 1.0),
    ]),
    "eg2": (5, 3, [
        (1, 1, 1, 1, 1, 1.0),
        (2, 2, 2, 2, 2, 2.0),
        (3, 3, 3, 3, 3, 3.0),
    ]),
    "eg3": (4, 2, [
        (1, 1, 1, 1, 1.0),
        (1, 1, 1, 2, -2.0),
        (1, 1, 2, 2, 1.0),
        (2, 2, 2, 2, 1.0),
    ]),
}

DEFAULT_Q = {"eg1": (-5.0, -3.0), "eg2": (1.0, 2.0, 3.0), "eg3": (0.0, -1.0)}

# activation parameters used with each example
ACTIVATION_DEFAULTS = {
    "eg1": {
        Family.BIPOLAR_SIGMOID: {"q": 5},
        Family.POWER_SIGMOID: {"p": 3, "q": 5},
        Family.SMOOTH_POWER_SIGMOID: {"p": 3, "q": 7},
    },
    "eg2": {
        Family.BIPOLAR_SIGMOID: {"q": 7},
        Family.POWER_SIGMOID: {"p": 5, "q": 7},
        Family.SMOOTH_POWER_SIGMOID: {"p": 5, "q": 9},
    },
    "eg3": {
        Family.BIPOLAR_SIGMOID: {"q": 7},
        Family.POWER_SIGMOID: {"p": 5, "q": 9},
        Family.SMOOTH_POWER_SIGMOID: {"p": 7, "q": 11},
    },
}

DEFAULT_SWEEP = "lin;bs;ps;sps"


def builtin_tensor(name: str) -> DenseTensor:
    try:
        order, dim, entries = BUILTIN_ENTRIES[name]
    except KeyError:
        raise TcpInputError(f"unknown builtin {name!r}; choose from {sorted(BUILTIN_ENTRIES)}") from None
    return DenseTensor.from_entries(order, dim, entries)


def load_builtin(name: str, q=None) -> TcpProblem:
    """One of the example problems ``eg1``, ``eg2``, ``eg3`` with the given q."""
    tensor = builtin_tensor(name)
    if q is None:
        q = DEFAULT_Q[name]
    q = np.asarray(q, dtype=float)
    if q.shape != (tensor.dim,):
        raise TcpInputError(f"{name} needs q of length {tensor.dim}, got {q.size}")
    return TcpProblem(tensor, q)


def parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.replace(" ", "").strip("()[]").split(",") if v]
    except ValueError:
        raise TcpInputError(f"cannot parse vector {text!r}") from None
    if not vals:
        raise TcpInputError("empty vector")
    return np.array(vals)


def _parse_kv(text: str) -> dict:
    out = {}
    for item in text.split(","):
        key, eq, val = item.partition("=")
        if not eq:
            raise TcpInputError(f"expected key=value, got {item!r}")
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise TcpInputError(f"expected an integer in {item!r}") from None
    return out


@dataclass
class ProblemSource:
    """A resolved ``--problem`` argument."""

    spec: str
    problem: TcpProblem
    defaults_key: str = "eg2"
    known_solution: np.ndarray | None = None


def resolve_problem(spec: str, q=None) -> ProblemSource:
    """Resolve ``builtin:egN``, ``file:path`` or ``diag:m=..,n=..,seed=..``."""
    kind, sep, rest = spec.partition(":")
    if not sep:
        kind, rest = ("builtin", spec) if spec in BUILTIN_ENTRIES else ("file", spec)
    if kind == "builtin":
        return ProblemSource(spec, load_builtin(rest, q), defaults_key=rest)
    if kind == "file":
        problem = load_problem(rest)
        if q is not None:
            problem = problem.with_q(q)
        return ProblemSource(spec, problem)
    if kind == "diag":
        params = _parse_kv(rest)
        unknown = set(params) - {"m", "n", "seed"}
        if unknown or not {"m", "n"} <= set(params):
            raise TcpInputError(f"diag source needs m=, n= and optional seed=, got {rest!r}")
        if q is not None:
            raise TcpInputError("q cannot be overridden for a generated diag problem")
        problem, sol = random_diagonal_problem(params["m"], params["n"], params.get("seed", 0))
        return ProblemSource(spec, problem, known_solution=sol)
    raise TcpInputError(f"unknown problem source kind {kind!r}")


def default_seed() -> int:
    env = os.environ.get("TCPGDS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise TcpInputError(f"TCPGDS_SEED must be an integer, got {env!r}") from None


def random_x0(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n)


@dataclass
class ExperimentConfig:
    source: ProblemSource
    activations: list[ActivationSpec]
    gamma: float = 1e6
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    x0: np.ndarray | None = None
    seed: int = 0
    out_dir: Path | None = None
    jobs: int = 1
    backend: str | None = None

    def __post_init__(self):
        if not self.activations:
            raise TcpInputError("at least one activation is required")

    def initial_state(self) -> np.ndarray:
        n = self.source.problem.dim
        if self.x0 is None:
            return random_x0(n, self.seed)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n,):
            raise TcpInputError(f"x0 has length {x0.size}, problem dimension is {n}")
        return x0

    def resolved(self) -> dict:
        pb = self.source.problem
        out = {
            "problem": self.source.spec,
            "order": pb.order,
            "dim": pb.dim,
            "q": [float(v) for v in pb.q],
            "activations": [a.label for a in self.activations],
            "gamma": float(self.gamma),
            "integrator": self.integrator.to_dict(),
            "x0": [float(v) for v in self.initial_state()],
            "x0_source": "explicit" if self.x0 is not None else f"seed:{self.seed}",
        }
        if self.source.known_solution is not None:
            out["known_solution"] = [float(v) for v in self.source.known_solution]
        return out


@dataclass
class RunSummary:
    label: str
    status: str
    converged: bool
    final_residual: float
    steps: int
    tau_to_tol: float | None
    t_to_tol: float | None
    final_state: list[float]
    verified: bool
    verification: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(label: str, problem: TcpProblem, traj: Trajectory, res_tol: float) -> RunSummary:
    x = traj.final_state
    verdict = verify_solution(problem, x, 10.0 * res_tol)
    return RunSummary(
        label=label,
        status=traj.status.value,
        converged=traj.converged,
        final_residual=traj.final_residual,
        steps=traj.steps,
        tau_to_tol=float(traj.tau[-1]) if traj.converged else None,
        t_to_tol=float(traj.t[-1]) if traj.converged else None,
        final_state=[float(v) for v in x],
        verified=verdict.is_solution,
        verification=str(verdict),
    )


def file_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label.replace("=", "")).strip("_")


def _one_run(problem, activation, gamma, integrator, x0, backend):
    traj = integrate(GdsModel(problem, activation, gamma), x0, integrator, backend=backend)
    return summarize(activation.label, problem, traj, integrator.res_tol), traj.to_csv()


def run_experiment(cfg: ExperimentConfig) -> list[RunSummary]:
    """Integrate once per activation from a shared x0.

    With ``cfg.out_dir`` set, writes ``<label>.csv`` per run and a
    ``summary.json`` holding the resolved config and every summary.
    """
    problem = cfg.source.problem
    x0 = cfg.initial_state()
    args = [(problem, a, cfg.gamma, cfg.integrator, x0, cfg.backend) for a in cfg.activations]
    if cfg.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_one_run, *zip(*args)))
    else:
        results = [_one_run(*a) for a in args]
    summaries = [s for s, _ in results]

    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            names = []
            for (summary, csv_text) in results:
                name = file_label(summary.label)
                while name in names:
                    name += "_"
                names.append(name)
                (out / f"{name}.csv").write_text(csv_text)
            doc = {
                "config": cfg.resolved(),
                "runs": [dict(s.to_dict(), csv=f"{n}.csv") for s, n in zip(summaries, names)],
                "all_converged": all(s.converged for s in summaries),
            }
            (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise TcpInputError(f"cannot write output to {out}: {exc}") from exc
    return summaries


def report_table(summaries: list[RunSummary]) -> str:
    if not summaries:
        raise TcpInputError("no runs to report")
    header = ("activation", "converged", "steps", "tau_to_tol", "final_res")
    rows = [
        (
            s.label,
            "true" if s.converged else "false",
            str(s.steps),
            f"{s.tau_to_tol:.4g}" if s.tau_to_tol is not None else "-",
            f"{s.final_residual:.3e}",
        )
        for s in summaries
    ]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]

    def line(cells):
        # activation left-aligned, numbers right-aligned
        first = cells[0].ljust(widths[0])
        return "  ".join([first, *(c.rjust(w) for c, w in zip(cells[1:], widths[1:]))])

    lines = [line(header), "  ".join("-" * w for w in widths)]
    lines += [line(r) for r in rows]
    return "\n".join(lines)


def sweep_activations(source: ProblemSource, text: str | None = None) -> list[ActivationSpec]:
    """Parse an activation list, filling missing parameters per example."""
    defaults = ACTIVATION_DEFAULTS.get(source.defaults_key, ACTIVATION_DEFAULTS["eg2"])
    return parse_activation_list(text or DEFAULT_SWEEP, defaults)

"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from tcpgds import kernels
from tcpgds.activation import parse_activation
from tcpgds.dynamics import GdsModel, IntegratorConfig, integrate, random_diagonal_problem
from tcpgds.harness import load_builtin, random_x0
from tcpgds.ncp import TcpProblem
from tcpgds.tensor import DenseTensor

SIZES = [(4, 2), (5, 3), (4, 10), (6, 6), (3, 40)]


def best_rate(fn, number, repeat):
    """Calls per second, best of ``repeat`` batches."""
    return number / min(timeit.repeat(fn, number=number, repeat=repeat))


def bench_flow(repeat):
    print("flow evaluations per second (sps activation)")
    print(f"{'m':>3} {'n':>4}" + "".join(f"{b:>14}" for b in sorted(kernels.BACKENDS)) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    act = parse_activation("sps:p=5,q=9")
    for m, n in SIZES:
        pb = TcpProblem(DenseTensor(rng.normal(size=(n,) * m) / n ** (m - 1)), rng.normal(size=n))
        x = rng.uniform(0, 1, size=n)
        rates = {}
        for name in sorted(kernels.BACKENDS):
            kern = GdsModel(pb, act).kernel(name)
            number = max(20, int(2e5 / n ** m))
            rates[name] = best_rate(lambda: kern.rhs(x), number, repeat)
        speed = rates["cython"] / rates["python"] if "cython" in rates else float("nan")
        print(f"{m:>3} {n:>4}" + "".join(f"{rates[b]:>14.0f}" for b in sorted(rates)) + f"{speed:>9.1f}x")


def _diag_suite(backend):
    acts = [parse_activation(a) for a in ("lin", "bs:q=7", "ps:p=5,q=7", "sps:p=5,q=9")]
    for s in range(50):
        pb, _ = random_diagonal_problem(4, 1 + s % 4, s)
        integrate(GdsModel(pb, acts[s % 4], 1e6), random_x0(pb.dim, 1000 + s), backend=backend)


def _eg2_sweep(backend):
    pb = load_builtin("eg2", (-3, -2, -3))
    for a in ("lin", "bs:q=7", "ps:p=5,q=7", "sps:p=5,q=9"):
        for seed in range(5):
            integrate(GdsModel(pb, parse_activation(a), 1e6), random_x0(3, seed), backend=backend)


def _eg3_slow(backend):
    pb = load_builtin("eg3", (0, -1))
    integrate(GdsModel(pb), (1.5, 1.1), IntegratorConfig(t_max=2000.0), backend=backend)


def bench_integrate(repeat):
    print("\nfull integrations, wall seconds (best of repeats)")
    jobs = [
        ("50 diagonal problems", _diag_suite),
        ("eg2, 4 activations x 5 starts", _eg2_sweep),
        ("eg3 slow basin, tau=2000", _eg3_slow),
    ]
    print(f"{'workload':<32}" + "".join(f"{b:>10}" for b in sorted(kernels.BACKENDS)) + f"{'speedup':>10}")
    for label, fn in jobs:
        secs = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=repeat)) for b in sorted(kernels.BACKENDS)}
        speed = secs["python"] / secs["cython"] if "cython" in secs else float("nan")
        print(f"{label:<32}" + "".join(f"{secs[b]:>10.3f}" for b in sorted(secs)) + f"{speed:>9.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in kernels.BACKENDS:
        print("compiled kernels not built; only the numpy backend is timed")
    bench_flow(args.repeat)
    bench_integrate(args.repeat)


if __name__ == "__main__":
    main()

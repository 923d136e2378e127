"""Compare the numba and numpy kernel backends on the two hot paths.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--rays 10000] [--samples 100000]

Reports the best wall time per backend and checks both give the same numbers.
"""

import argparse
import timeit

import numpy as np

from gptlab import _kernels
from gptlab.fidelity import fidelity
from gptlab.models import bloch_ball


def _lp_workload(n_rays: int, n_pairs: int):
    B = bloch_ball(n_rays)
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((2 * n_pairs, 3))
    pts *= (rng.random((2 * n_pairs, 1)) ** (1 / 3)) / np.linalg.norm(pts, axis=1, keepdims=True)
    states = [B.state(x) for x in pts]

    def run():
        return np.array([fidelity(states[2 * k], states[2 * k + 1]).value for k in range(n_pairs)])
    return run


def _grouped_workload(n_samples: int, n_outcomes: int, n_groups: int):
    rng = np.random.default_rng(8)
    p = rng.random((n_samples, n_outcomes))
    q = rng.random((n_samples, n_outcomes))
    groups = rng.integers(0, n_groups, size=(n_samples, n_outcomes))

    def run():
        return _kernels.grouped_bhattacharyya(p, q, groups, n_groups)
    return run


def bench(name: str, fn, repeat: int) -> None:
    results, times = {}, {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            continue
        with _kernels.use_backend(backend):
            _kernels.warmup()
            results[backend] = fn()
            times[backend] = min(timeit.repeat(fn, number=1, repeat=repeat))
    line = f"{name:<28} numpy {times['numpy'] * 1e3:9.1f} ms"
    if "numba" in times:
        diff = float(np.abs(results["numba"] - results["numpy"]).max())
        line += (f"   numba {times['numba'] * 1e3:9.1f} ms   speedup {times['numpy'] / times['numba']:5.1f}x"
                 f"   max |diff| {diff:.1e}")
    print(line)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rays", type=int, default=10_000)
    ap.add_argument("--pairs", type=int, default=10)
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args()
    bench(f"fidelity LP ({args.rays} rays)", _lp_workload(args.rays, args.pairs), args.repeat)
    bench(f"grouped sum ({args.samples}x64)", _grouped_workload(args.samples, 64, 8), args.repeat)


if __name__ == "__main__":
    main()

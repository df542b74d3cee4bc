"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 15 90 300]

Each kernel is run once per backend before timing so numba compilation is
excluded. Results are checked for agreement before being reported.
"""

import argparse
import json
import time

import numpy as np

from skewlens import kernels


def problem(n, scenes, rng):
    fill = np.stack([rng.choice(n, 2, replace=False) for _ in range(scenes)]).astype(np.int64)
    role = np.stack([rng.permutation(2) for _ in range(scenes)]).astype(np.int64)
    return fill, role


def cases(n, rng):
    scenes = n * (n - 1) // 2
    fill, role = problem(n, scenes, rng)
    add_f, add_r = problem(n, scenes, rng)
    t_cpl, t_blc = np.array([1.0, 0.5]), 0.63
    counts = kernels.numpy_backend.count_matrix(fill, role, n, 2)
    crops = rng.integers(0, 256, (n, 32, 32)).astype(np.float64)
    glyphs = rng.integers(0, 256, (n, 32, 32)).astype(np.float64)
    return {
        "count_matrix": lambda b: b.count_matrix(fill, role, n, 2),
        "swap_objectives": lambda b: b.swap_objectives(counts, fill[0], role[0], add_f, add_r,
                                                       t_cpl, t_blc, 1.0, 1.0),
        "flip_objectives": lambda b: b.flip_objectives(counts, fill, role, t_cpl, t_blc, 1.0, 1.0),
        "ncc_scores": lambda b: b.ncc_scores(crops, glyphs),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[15, 90, 300], help="concept counts N")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="emit JSON rows instead of a table")
    args = ap.parse_args(argv)

    if kernels.numba_backend is None:
        raise SystemExit("numba is not installed; nothing to compare")
    backends = {"numpy": kernels.numpy_backend, "numba": kernels.numba_backend}
    rng = np.random.default_rng(0)
    rows = []
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            ref = fn(backends["numpy"])
            got = fn(backends["numba"])  # also triggers compilation
            if not np.allclose(ref, got, atol=1e-9):
                raise SystemExit(f"{name} N={n}: backends disagree")
            t_np = best_of(lambda: fn(backends["numpy"]), args.repeat)
            t_nb = best_of(lambda: fn(backends["numba"]), args.repeat)
            rows.append({"kernel": name, "N": n, "numpy_ms": 1e3 * t_np, "numba_ms": 1e3 * t_nb,
                         "speedup": t_np / t_nb if t_nb else float("inf")})

    if args.json:
        for r in rows:
            print(json.dumps(r))
        return
    print(f"{'kernel':<18}{'N':>6}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['N']:>6}{r['numpy_ms']:>12.3f}{r['numba_ms']:>12.3f}{r['speedup']:>9.1f}x")


if __name__ == "__main__":
    main()

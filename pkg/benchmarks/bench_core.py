"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 5] [--points 200000]
"""

import argparse
import timeit

import numpy as np

from toric_szego import _backend
from toric_szego.polytope import cube, simplex


def _case(P, n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(0, 2, size=(n, P.dim)), P.points.astype(float), 2 * np.log(P.weight_vector)


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()
    if _backend.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    backends = {"cython": _backend.compiled, "python": _backend.pure}

    rows = []
    for P in (simplex(2), cube(2), simplex(3)):
        rho, B, logw = _case(P, args.points)
        alpha = np.ones(P.dim)
        times = {
            name: bench(lambda k=k: k.norm_log_integrand(rho, B, logw, alpha, 4.0), args.repeat)
            for name, k in backends.items()
        }
        rows.append((f"norm_log_integrand {P.name} n={args.points}", times))
        times = {
            name: bench(lambda k=k: k.potential_derivs(rho, B, logw), args.repeat) for name, k in backends.items()
        }
        rows.append((f"potential_derivs {P.name} n={args.points}", times))

    # partition DP step on the square at N=200: one shift-add pass
    side = 401
    src = np.random.default_rng(1).integers(0, 1000, size=(side, side, 1)).astype(np.int64)
    shifts = cube(2).points.astype(np.int64)
    shifts = np.concatenate([shifts, np.zeros((len(shifts), 1), dtype=np.int64)], axis=1)

    def conv(k):
        dst = np.zeros_like(src)
        k.convolve_shift_add(src, dst, shifts)

    times = {name: bench(lambda k=k: conv(k), args.repeat) for name, k in backends.items()}
    rows.append((f"convolve_shift_add {side}x{side}", times))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'cython':>10}  {'python':>10}  {'speedup':>8}")
    for label, t in rows:
        print(f"{label:<{width}}  {t['cython'] * 1e3:9.2f}ms  {t['python'] * 1e3:9.2f}ms  {t['python'] / t['cython']:7.2f}x")


if __name__ == "__main__":
    main()

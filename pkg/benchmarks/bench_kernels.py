"""Compiled vs pure-Python TSR kernels, plus one end-to-end run for scale.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit

from tadsim import _kernels_py, kernels
from tadsim.harness import run_experiment
from tadsim.scenario import star_scenario


def bench(mod, masks, length, repeat):
    fn = mod.update_factor

    def loop():
        for m in masks:
            fn(m, length, 0.5)

    return min(timeit.repeat(loop, number=1, repeat=repeat)) / len(masks)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--calls", type=int, default=200_000)
    args = ap.parse_args()

    rng = random.Random(0)
    print(f"active backend: {kernels.BACKEND}")
    impls = {"python": _kernels_py}
    try:
        from tadsim import _kernels

        impls["cython"] = _kernels
    except ImportError:
        print("compiled kernel not built; timing the Python fallback only")

    for length in (8, 32):
        masks = [rng.getrandbits(length) for _ in range(args.calls)]
        times = {name: bench(mod, masks, length, args.repeat) for name, mod in impls.items()}
        row = "  ".join(f"{name} {t * 1e9:7.1f} ns/call" for name, t in times.items())
        if len(times) == 2:
            row += f"  speedup {times['python'] / times['cython']:.2f}x"
        print(f"update_factor L={length:2d}: {row}")

    sc = star_scenario("tadmac", horizon_s=200.0)
    t = min(timeit.repeat(lambda: run_experiment(sc), number=1, repeat=3))
    wakeups = run_experiment(sc).node(0)["counters"]["wakeups"]
    print(f"star5 TAD-MAC, 200 s simulated: {t:.2f} s wall, {wakeups} kernel calls "
          f"({wakeups / t:.0f}/s; kernel share is small, event dispatch dominates)")


if __name__ == "__main__":
    main()

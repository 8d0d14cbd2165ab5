"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on
both backends with identical inputs, and the outputs are compared.
"""

import argparse
import timeit

import numpy as np

from gspec import _kernels_py, kernels

try:
    from gspec import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases(rng):
    a = np.where(rng.random((48, 48)) < 0.3, rng.random((48, 48)), 0.0)
    b = rng.random((48, 48))
    coeffs = rng.choice([-1.0, 0.0, 1.0], size=(729, 6)).astype(complex)
    phase = np.angle(np.exp(1j * rng.normal(size=(96, 96)).cumsum(axis=0)))
    mask = rng.random((96, 96)) < 0.8
    return {
        "direct_convolve 48x48": lambda impl: kernels.direct_convolve(a, b, impl=impl),
        "torus_lp_norms 729x6, p=3": lambda impl: kernels.torus_lp_norms(coeffs, 3.0, 4096, impl=impl),
        "unwrap_phase 96x96": lambda impl: kernels.unwrap_phase(phase, mask, (48, 48), impl=impl)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    impls = [("python", _kernels_py)] + ([("cython", _kernels_c)] if _kernels_c else [])
    if _kernels_c is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n, _ in impls) + ("    speedup" if len(impls) == 2 else ""))
    for name, fn in cases(rng).items():
        outs, times = [], []
        for _, impl in impls:
            outs.append(fn(impl))
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        line = f"{name:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(impls) == 2:
            assert np.allclose(outs[0], outs[1], rtol=1e-12, atol=1e-12), name
            line += f"{times[0] / times[1]:10.1f}x"
        print(line)


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the Wigner symbol sweep (one operator on a calibrated grid) and a batch
of displacement matrices, reports the best of ``--repeat`` runs per backend
after a warm-up call, and checks that both backends agree.
"""
from __future__ import annotations

import argparse
import json
import platform
import time

import numpy as np

from qhist import kernels
from qhist._accel import NUMBA_AVAILABLE
from qhist.hilbert import random_hermitian
from qhist.phasespace import FockSpec
from qhist.wigner import _node_alphas, calibrated_grid


def best_of(fn, repeat):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    for ncut, npts in ((40, 65), (60, 65), (60, 129)):
        spec = FockSpec(ncut)
        a = np.zeros((ncut, ncut), dtype=np.complex128)
        a[:8, :8] = random_hermitian(rng, 8)
        alphas = _node_alphas(calibrated_grid(spec, npts), spec).ravel()
        yield (f"wigner ncut={ncut} grid={npts}x{npts}",
               lambda b, a=a, al=alphas: kernels.wigner_symbol_values(a, al, backend=b))
    betas = rng.normal(size=200) + 1j * rng.normal(size=200)
    yield ("displacement x200 ncut=60",
           lambda b: np.stack([kernels.displacement_matrix(x, 60, backend=b) for x in betas]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    backends = [b for b in kernels.BACKENDS if b != "numba" or NUMBA_AVAILABLE]
    rng = np.random.default_rng(0)
    rows = []
    print(f"python {platform.python_version()}, numpy {np.__version__}")
    print(f"{'case':<34}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>11}")
    for name, fn in cases(rng):
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        diff = float(np.max(np.abs(fn(backends[0]) - fn(backends[-1]))))
        speed = t["numpy"] / t["numba"] if "numba" in t else float("nan")
        rows.append({"case": name, "seconds": t, "speedup": speed, "max_abs_diff": diff})
        print(f"{name:<34}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in backends)
              + f"{speed:>9.2f}x{diff:>11.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()

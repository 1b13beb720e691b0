"""Benchmark the numba kernels against their pure-numpy fallbacks.

The numpy path is selected by the environment flag KOOPSOS_NO_NUMBA=1, which
must be set before koopsos is imported.  This script therefore times both
paths from a single process by calling the private implementations directly,
after warming up the jitted variants so compilation time is excluded.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from koopsos import _kernels
from koopsos.polybasis import total_degree_dictionary


def bench(label, fn_np, fn_nb, args, repeats=5):
    if fn_nb is not None:
        fn_nb(*args)  # warm-up triggers jit compilation
    rows = []
    for name, fn in (("numpy", fn_np), ("numba", fn_nb)):
        if fn is None:
            rows.append((name, None))
            continue
        best = min(_time_once(fn, args) for _ in range(repeats))
        rows.append((name, best))
    t_np = rows[0][1]
    for name, t in rows:
        speed = "" if (t is None or name == "numpy") else f"  {t_np / t:5.2f}x"
        t_str = "unavailable" if t is None else f"{t * 1e3:9.3f} ms"
        print(f"{label:28s} {name:6s} {t_str}{speed}")


def _time_once(fn, args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


def main():
    rng = np.random.default_rng(0)

    n = 2_000_000
    lams = rng.uniform(0.0, 4.0, n)
    bench("logistic_trajectory n=2e6",
          _kernels._logistic_trajectory_np,
          getattr(_kernels, "_logistic_trajectory_nb", None),
          (0.51, lams))

    x0 = np.array([0.1, 0.2])
    bench("rk4_trajectory n=2e5",
          _kernels._rk4_trajectory_np,
          getattr(_kernels, "_rk4_trajectory_nb", None),
          (_kernels.VDP, x0, 1e-3, 200_000, 0.1))

    X = rng.uniform(-1.0, 1.0, size=(200_000, 2))
    mono = total_degree_dictionary("monomial", 2, 10)
    expo = np.array(mono.indices, dtype=np.int64)
    bench("monomial_eval 2e5 x 66",
          _kernels._monomial_eval_np,
          getattr(_kernels, "_monomial_eval_nb", None),
          (X, expo))

    Z = rng.uniform(-1.0, 1.0, size=(200_000, 2))
    cheb = total_degree_dictionary("chebyshev", 2, 10,
                                   ((-1.0, 1.0), (-1.0, 1.0)))
    cexpo = np.array(cheb.indices, dtype=np.int64)
    bench("chebyshev_eval 2e5 x 66",
          _kernels._chebyshev_eval_np,
          getattr(_kernels, "_chebyshev_eval_nb", None),
          (Z, cexpo))

    if not _kernels.USE_NUMBA:
        print("note: KOOPSOS_NO_NUMBA is set; jitted kernels were still "
              "timed directly when importable")


if __name__ == "__main__":
    main()

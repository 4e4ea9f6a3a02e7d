"""Time the compiled kernels against the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Each kernel is
called on identical inputs for every available backend; the best of
``--repeat`` runs is reported with the speedup over the Python path.
"""
import argparse
import time

import numpy as np

from fasmodel import covariance
from fasmodel._backend import available_backends
from fasmodel.covariance import FasConfig


def cases():
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.uniform(0, 60, 20000))
    a = np.ascontiguousarray(rng.uniform(0, 30, 5000))
    b = np.ascontiguousarray(rng.uniform(0, 30, 5000))
    jake = np.ascontiguousarray(covariance.build_jake_covariance(FasConfig(60, 2.0, 1.0)))
    rows = np.ascontiguousarray(covariance.plane_wave_factor(FasConfig(60, 2.0, 1.0)).T)
    n = 20
    tau = np.ascontiguousarray(rng.uniform(0.02, 1.5, n))
    m = np.ascontiguousarray(rng.uniform(0.1, 3.0, n))
    r = np.ascontiguousarray(np.linspace(0.0, 6.0, 64))
    nu = np.ascontiguousarray(rng.rayleigh(1.0, (256, n)))
    gx, gw = (np.ascontiguousarray(v) for v in np.polynomial.legendre.leggauss(96))

    def stage1(k):
        acc, acc2 = np.zeros(r.size), np.zeros(r.size)
        return k.stage1_accumulate(nu, tau, r, 1e-16, 500, acc, acc2)

    return {
        "j0_array (20000)": lambda k: k.j0_array(x),
        "marcum_q1_array (5000)": lambda k: k.marcum_q1_array(a, b, 1e-16, 500),
        "jacobi_eigh (60x60)": lambda k: k.jacobi_eigh(jake.copy(), np.eye(60), 50, 1e-14),
        "hestenes_sweeps (60 ports)": lambda k: k.hestenes_sweeps(
            rows.copy(), np.eye(rows.shape[0]), 60, 1e-15),
        "stage1_accumulate (256 draws)": stage1,
        "stage2_log_factors_window (R=5)": lambda k: k.stage2_log_factors_window(
            m, tau, r, 5, gx, gw, 1e-16, 500),
    }


def best_of(fn, kernels, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(kernels)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    names = sorted(backends, key=lambda s: s != "python")
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases().items():
        t = {n: best_of(fn, backends[n], args.repeat) for n in names}
        speed = t["python"] / t["compiled"] if "compiled" in t else float("nan")
        print(f"{label:34s}" + "".join(f"{t[n]:11.4f}s" for n in names) + f"{speed:9.1f}x")
    if "compiled" not in backends:
        print("compiled extension not built; only the Python path was timed")


if __name__ == "__main__":
    main()

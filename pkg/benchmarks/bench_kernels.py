"""Compare the jitted and pure-numpy kernel backends on real workloads.

Runs each workload under both backends, checks the outputs agree, and
prints a timing table.  Usage:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from qnc.adversary import keep_and_send_phi0, random_isometry
from qnc.kernels import available_backends, set_backend
from qnc.protocol import VARIANT_WEAK, ProtocolConfig, branch_table
from qnc.security import analyze


def workloads():
    yield (
        "branch table, honest run (3^9 branches)",
        lambda: branch_table(ProtocolConfig(p=3)),
        lambda r: np.concatenate(r),
    )
    yield (
        "branch table, 9-dim tap on edge 9",
        lambda: branch_table(
            ProtocolConfig(p=3, attack=random_isometry(9, 3, 9, seed=1))
        ),
        lambda r: np.concatenate(r),
    )
    yield (
        "wiretap analysis, weak pad keep attack (3^8 records)",
        lambda: analyze(
            ProtocolConfig(
                p=3, attack=keep_and_send_phi0(11, 3), variant=VARIANT_WEAK
            ),
            with_fidelity=False,
        ),
        lambda r: np.array([r.product_deviation, r.record_uniformity]),
    )


def best_time(fn, repeats):
    fn()  # warm up: jit compilation and caches stay out of the measurement
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print(f"only {backends[0]} is available; timing it alone")

    width = max(len(name) for name, _, _ in workloads())
    header = f"{'workload':<{width}}" + "".join(f"  {b:>10}" for b in backends)
    print(header)
    print("-" * len(header))

    try:
        for name, fn, digest in workloads():
            row = f"{name:<{width}}"
            baseline = None
            for backend in backends:
                set_backend(backend)
                elapsed = best_time(fn, args.repeats)
                row += f"  {elapsed * 1e3:>8.1f}ms"
                summary = digest(fn())
                if baseline is None:
                    baseline = summary
                elif not np.allclose(summary, baseline, atol=1e-12):
                    raise AssertionError(f"backends disagree on {name!r}")
            print(row)
    finally:
        set_backend(None)
    print("backend outputs agree within 1e-12 on every workload")


if __name__ == "__main__":
    main()

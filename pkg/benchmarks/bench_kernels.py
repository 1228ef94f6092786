"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from matterwave import kernels


def _best(fn, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        t.append(time.perf_counter() - t0)
    return min(t), out


def cases():
    rng = np.random.default_rng(0)
    x_out = np.linspace(-5e-6, 5e-6, 2000)
    x_in = np.linspace(-2e-6, 2e-6, 4000)
    f_in = np.exp(1j * rng.uniform(0, 2 * np.pi, x_in.size))
    yield "fresnel_sum 2000x4000", lambda: kernels.fresnel_sum(x_out, x_in, f_in, 3.1e12)

    n, period, width = 40, 265e-9, 90e-9
    first = -(n - 1) / 2 * period - width / 2
    x_det = np.linspace(-2 * period, 2 * period, 161)
    x_src = rng.uniform(-n / 2 * period, n / 2 * period, 1000)
    scale = np.full(x_src.size, np.sqrt(2 * 0.155 / 3.4e-12))
    yield "slit_source_intensity 161x1000x40", lambda: kernels.slit_source_intensity(
        x_det, x_src, scale, np.ones(x_src.size), first, period, width, np.ones(n), 0.5
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    have = kernels.available_backends()
    print(f"backends: {', '.join(have)}; threads: {kernels.threads()}")
    for name, fn in cases():
        row = {}
        for b in have:
            with kernels.using(b):
                row[b], out = _best(fn, args.repeat)
                if b == "python":
                    ref = out
                else:
                    dev = np.max(np.abs(out - ref)) / np.max(np.abs(ref))
        line = "  ".join(f"{b} {t * 1e3:9.1f} ms" for b, t in row.items())
        if "cython" in row:
            line += f"  speedup {row['python'] / row['cython']:5.1f}x  max rel dev {dev:.1e}"
        print(f"{name:36s} {line}")


if __name__ == "__main__":
    main()

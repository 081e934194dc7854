"""Numba vs numpy timings for every kernel in radioforge.kernels.

Both implementations are called directly on identical inputs, so one
process covers both paths whatever ``RADIOFORGE_NUMBA`` says. The first
numba call (JIT compile or cache load) is excluded.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]
"""

import argparse
import timeit

import numpy as np

from radioforge import kernels as K


def cases(scale):
    rng = np.random.default_rng(0)
    n_bits = int(2_000_000 * scale)
    taps = np.array([22, 17], dtype=np.int64)  # x^23 + x^18 + 1
    t = np.arange(int(20_000 * scale)) / 3200.0
    freqs, phases = rng.uniform(-100, 100, 256), rng.uniform(-np.pi, np.pi, 256)
    n = int(1_000_000 * scale)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    h = rng.normal(size=n // 750 + 2) + 1j * rng.normal(size=n // 750 + 2)
    m = int(4000 * scale)
    p0 = np.column_stack([rng.uniform(-200, 200, (m, 2)), rng.uniform(1, 30, m)])
    p1 = np.column_stack([rng.uniform(-200, 200, (m, 2)), rng.uniform(1, 30, m)])
    xy = rng.uniform(-200, 200, (400, 2))
    walls = np.column_stack([xy, xy + rng.uniform(-20, 20, (400, 2)), rng.uniform(5, 60, 400)])
    skip = np.full((m, 2), -1, dtype=np.int64)

    def mac(fn):
        def run():
            out = np.zeros(n, complex)
            fn(out, x, h, 750.0)
        return run

    return [
        (f"lfsr_bits ({n_bits:.0e} bits)", lambda: K._lfsr_numba(taps, 23, 1, n_bits),
         lambda: K._lfsr_numpy(taps, 23, 1, n_bits)),
        (f"sum_of_sinusoids (256 x {t.size})", lambda: K._sos_numba(freqs, phases, t),
         lambda: K._sos_numpy(freqs, phases, t)),
        (f"tv_accumulate ({n:.0e} samples)", mac(K._tv_mac_numba), mac(K._tv_mac_numpy)),
        (f"segments_blocked ({m} x 400 walls)", lambda: K._blocked_numba(p0, p1, walls, skip, 1e-9),
         lambda: K._blocked_numpy(p0, p1, walls, skip, 1e-9)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="problem size multiplier")
    args = ap.parse_args(argv)
    print(f"{'kernel':<38} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, nb, npf in cases(args.scale):
        nb()  # compile / load cache
        t_nb = min(timeit.repeat(nb, number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(npf, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<38} {t_nb:10.2f} {t_np:10.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()

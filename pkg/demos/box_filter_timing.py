"""Show that summed-area-table box filtering is flat in the kernel size
while the direct shift-and-add implementation grows ~k^2.

Prints a small CSV; feed it to any plotter.
"""

import time

import numpy as np

from qfca.pooling import box_average, naive_box_average


def median_ms(fn, reps=5):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def main():
    rng = np.random.default_rng(0)
    plane = rng.random((512, 512)).astype(np.float32)
    print("kernel,sat_ms,naive_ms")
    for k in (3, 5, 9, 15, 21, 31):
        sat = median_ms(lambda: box_average(plane, k, "zero"))
        naive = median_ms(lambda: naive_box_average(plane, k, "zero"))
        print(f"{k},{sat:.3f},{naive:.3f}")


if __name__ == "__main__":
    main()

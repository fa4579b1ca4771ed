"""Time the compiled and pure-Python backends on the same workloads.

    python benchmarks/bench_kernels.py --size 256 --repeat 3 --threads 1
"""
import argparse
import statistics
import time

import numpy as np

from radiolith import _backend, denoise, edges, kernels, morphology, segmentation


def workloads(img):
    se = morphology.StructuringElement.disk(2)
    grad = morphology.morph_gradient(img, morphology.StructuringElement.disk(1))
    markers = segmentation.auto_markers(img)
    return {
        "gaussian 7x7": lambda: kernels.correlate(img, kernels.gaussian_kernel(1.5, 3)),
        "median r=2": lambda: denoise.median_blur(img, 2),
        "bilateral": lambda: denoise.bilateral(img, denoise.BilateralParams(2.0, 0.1)),
        "dilate disk(2)": lambda: morphology.dilate(img, se),
        "canny": lambda: edges.canny(img, 1.0, 0.05, 0.15),
        "watershed": lambda: segmentation.watershed(grad, markers),
        "slic": lambda: segmentation.slic(img, segmentation.SlicParams(n_segments=64)),
        "felzenszwalb": lambda: segmentation.felzenszwalb(img),
    }


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    y, x = np.mgrid[0:args.size, 0:args.size]
    img = 0.5 + 0.3 * np.sin(x / 9.0) * np.cos(y / 13.0) + 0.05 * rng.random((args.size, args.size))

    backends = _backend.available()
    print(f"image {args.size}x{args.size}, threads {args.threads}, best of {args.repeat}")
    print(f"{'workload':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name in workloads(img):
        row = {}
        for b in backends:
            with _backend.use_backend(b), _backend.threads(args.threads):
                row[b] = best_time(workloads(img)[name], args.repeat)[0]
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{name:<16}" + "".join(f"{row[b] * 1e3:>10.1f}ms" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()

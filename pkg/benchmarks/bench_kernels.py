"""Time the compiled kernels against the numpy fallback (and the torch warp for scale).

    python3 benchmarks/bench_kernels.py [--repeat N] [--sizes 64 256 480x854]

Each row reports the best-of-N wall time per call and checks that both
backends return identical results on the same inputs.
"""
import argparse
import timeit

import numpy as np
import torch

from vidcolor import kernels
from vidcolor.kernels import _fallback
from vidcolor.warp import warp as torch_warp


def parse_size(text):
    h, _, w = text.partition("x")
    return int(h), int(w or h)


def best(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10 ** 4:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", nargs="+", default=["64", "256", "480x854"])
    args = parser.parse_args()
    torch.set_num_threads(1)

    compiled = None if kernels.BACKEND == "python" else kernels._impl
    print(f"compiled backend: {kernels.BACKEND}")
    header = f"{'kernel':<18}{'size':>10}{'numpy ms':>12}{'compiled ms':>13}{'speedup':>9}{'torch ms':>10}  agree"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for size in args.sizes:
        h, w = parse_size(size)
        a = rng.uniform(0, 1, (3, h, w))
        b = rng.uniform(0, 1, (3, h, w))
        flow = rng.uniform(-3, 3, (2, h, w))
        mask = (rng.uniform(0, 1, (h, w)) > 0.2).astype(np.float64)
        cases = {
            "warp": (lambda impl: kernels.warp(a, flow, impl=impl),
                     lambda: torch_warp(torch.from_numpy(a), torch.from_numpy(flow))),
            "sq_error_map": (lambda impl: kernels.sq_error_map(a, b, impl=impl), None),
            "masked_sq_error": (lambda impl: kernels.masked_sq_error(a, b, mask, impl=impl), None),
        }
        for name, (call, torch_call) in cases.items():
            t_np = best(lambda: call(_fallback), args.repeat)
            t_c = best(lambda: call(compiled), args.repeat) if compiled else float("nan")
            t_t = best(torch_call, args.repeat) if torch_call else float("nan")
            agree = "-" if not compiled else str(np.array_equal(np.asarray(call(_fallback)),
                                                                np.asarray(call(compiled))))
            print(f"{name:<18}{f'{h}x{w}':>10}{t_np * 1e3:>12.3f}{t_c * 1e3:>13.3f}"
                  f"{t_np / t_c:>9.2f}{t_t * 1e3:>10.3f}  {agree}")


if __name__ == "__main__":
    main()

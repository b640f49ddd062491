"""Time one Picard step of each kernel backend.

Usage: python benchmarks/bench_kernels.py [--sizes 128 256 1024] [--repeat 50]
"""

import argparse
import timeit

from nsac import _pykernels
from nsac.eos import PhysParams
from nsac.grid import Grid, SinePerturb, make_initial
from nsac.solver_euler import RHO_CEIL_GUARD, RHO_FLOOR

try:
    from nsac import _kernels
except ImportError:
    _kernels = None

PARAMS = PhysParams(0.1, 0.05, 0.9, 0.1)


def bench(module, n, repeat):
    grid = Grid(1.0, n)
    s = make_initial(SinePerturb(0.5, 0.1, 1, chi_mean=0.0, chi_amplitude=0.5), grid)
    dt = 0.5 * grid.dx / 2.0
    args = (s.rho, s.u, s.chi, grid.dx, dt, PARAMS.nu, PARAMS.eps, PARAMS.theta, True, 1e-10, 50,
            RHO_FLOOR, RHO_CEIL_GUARD)
    iters = module.euler_step(*args)[3]
    best = min(timeit.repeat(lambda: module.euler_step(*args), number=1, repeat=repeat))
    return best, iters


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024, 4096])
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()

    backends = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels is not None else [])
    print(f"{'N':>6} {'sweeps':>6} " + " ".join(f"{name + ' [ms]':>12}" for name, _ in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        times = []
        for _, module in backends:
            t, iters = bench(module, n, args.repeat)
            times.append(t)
        row = f"{n:>6} {iters:>6} " + " ".join(f"{1e3 * t:12.3f}" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:7.1f}x"
        print(row)
    if _kernels is None:
        print("compiled kernels not built; only the NumPy fallback was timed")


if __name__ == "__main__":
    main()

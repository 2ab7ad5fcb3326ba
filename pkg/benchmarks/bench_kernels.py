"""Compare the compiled and pure-numpy geometric kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times point location, curve/mesh clipping and the full adaptive build (which
runs the near-curve test) on the octagon experiment's mesh, checks that both variants agree, and prints one
line per kernel.
"""

import argparse
import time

import numpy as np

from mstrack import _kernels as kern
from mstrack import bulk, shapes


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    curve = shapes.faceted_octagon_star(512)
    mesh = bulk.build_adaptive(curve, 4.0, 256, 32)
    x0, cell, nx, ptr, ctris = mesh.grid
    V, T = mesh.vertices, mesh.triangles
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3.9, 3.9, size=(20000, 2))
    p0 = np.ascontiguousarray(curve.points[curve.edges[:, 0]])
    p1 = np.ascontiguousarray(curve.points[curve.edges[:, 1]])
    eps = kern.INSIDE_EPS * 5.0


    cases = {
        "locate": (
            lambda: kern.locate_nb(pts, V, T, x0, cell, nx, ptr, ctris, kern.BARY_EPS),
            lambda: kern.locate_np(pts, V, T, x0, cell, nx, ptr, ctris, kern.BARY_EPS),
        ),
        "clip": (
            lambda: kern.clip_nb(p0, p1, V, T, x0, cell, nx, ptr, ctris, eps, kern.T_EPS),
            lambda: kern.clip_np(p0, p1, V, T, x0, cell, nx, ptr, ctris, eps, kern.T_EPS),
        ),
        "build_adaptive": (None, None),
    }
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles; "
          f"{len(pts)} query points; {curve.n_elements} curve elements")
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, (fnb, fnp) in cases.items():
        if name == "build_adaptive":
            from mstrack import _accel

            saved = _accel.USE_NUMBA
            try:
                _accel.USE_NUMBA = True
                bulk.build_adaptive(curve, 4.0, 256, 32)
                tnb, mnb = best_of(lambda: bulk.build_adaptive(curve, 4.0, 256, 32), args.repeat)
                _accel.USE_NUMBA = False
                tnp, mnp = best_of(lambda: bulk.build_adaptive(curve, 4.0, 256, 32), args.repeat)
            finally:
                _accel.USE_NUMBA = saved
            agree = np.array_equal(mnb.triangles, mnp.triangles)
        else:
            fnb()  # compile
            tnb, onb = best_of(fnb, args.repeat)
            tnp, onp = best_of(fnp, args.repeat)
            agree = all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(onb, onp))
        print(f"{name:<16}{1e3 * tnb:>12.3f}{1e3 * tnp:>12.3f}{tnp / tnb:>10.2f}  {agree}")


if __name__ == "__main__":
    main()

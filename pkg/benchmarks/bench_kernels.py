"""Timing comparison of the jit and plain-numpy assembly kernels.

Runs both implementations of each hot kernel (element matrices, load
vectors, field evaluation at quadrature points) on one large mesh and
reports best-of-k wall times plus the max output deviation between
backends. The jit side is warmed up before timing so compilation cost
is excluded; set RRHDIV_NUMBA=0 to check which backend the package
itself would pick.

Usage: python benchmarks/bench_kernels.py [--m 256] [--repeats 5]
"""

import argparse
import time

import numpy as np

from rr_hdiv import _kernels
from rr_hdiv.mesh import build_unit_square_mesh
from rr_hdiv.verify import manufactured_case


def _best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _inputs(m):
    mesh = build_unit_square_mesh(m)
    coords = mesh.tri_coords()
    lengths = mesh.edge_len[mesh.tri_edges]
    signs = mesh.tri_signs.astype(float)
    areas = mesh.tri_area
    bary = _kernels.QUAD4_BARY
    weights = _kernels.QUAD4_W
    pts = np.einsum("qj,tjd->tqd", bary, coords)
    load = manufactured_case().load
    fx, fy = load(pts[:, :, 0], pts[:, :, 1])
    fvals = np.stack([fx, fy], axis=-1)
    rng = np.random.default_rng(0)
    dofs = rng.standard_normal(coords.shape[0] * 3).reshape(-1, 3)
    return {
        "element_matrices": (coords, lengths, signs, areas),
        "load_vectors": (coords, lengths, signs, areas, fvals, bary, weights),
        "rt0_values": (coords, lengths, signs, areas, dofs, bary),
    }


def _deviation(a, b):
    if isinstance(a, tuple):
        return max(_deviation(x, y) for x, y in zip(a, b))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=256,
                        help="mesh resolution (2 m^2 triangles)")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    inputs = _inputs(args.m)
    print(f"mesh m={args.m}: {2 * args.m ** 2} triangles, "
          f"package backend would be '{_kernels.BACKEND}'")
    if _kernels.NUMBA_IMPLS is None:
        print("numba unavailable or disabled; timing the numpy kernels only")

    header = f"{'kernel':<18}{'numpy':>12}{'numba':>12}{'speedup':>10}{'max|diff|':>12}"
    print(header)
    print("-" * len(header))
    for name, kernel_args in inputs.items():
        np_fn = _kernels.NUMPY_IMPLS[name]
        t_np = _best_of(np_fn, kernel_args, args.repeats)
        if _kernels.NUMBA_IMPLS is None:
            print(f"{name:<18}{t_np * 1e3:>10.2f}ms{'-':>12}{'-':>10}{'-':>12}")
            continue
        nb_fn = _kernels.NUMBA_IMPLS[name]
        nb_fn(*kernel_args)  # compile before timing
        t_nb = _best_of(nb_fn, kernel_args, args.repeats)
        dev = _deviation(np_fn(*kernel_args), nb_fn(*kernel_args))
        print(f"{name:<18}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms"
              f"{t_np / t_nb:>9.1f}x{dev:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Element-level numeric kernels with a numba fast path.

The kernels below are the only dense inner loops that do not already live
inside LAPACK or SuperLU: per-triangle element matrices, quadrature of load
vectors, and pointwise evaluation of lowest-order Raviart-Thomas fields.
Each kernel has a vectorized numpy implementation and a loop implementation
that numba compiles. The active backend is chosen once at import time from
the RRHDIV_NUMBA environment variable ("0"/"false"/"off" selects numpy; any
other value, or an absent variable, selects numba when it is importable).
"""

from __future__ import annotations

import os

import numpy as np

# Midpoint rule on a triangle, exact for quadratics. Point k is the midpoint
# of the edge opposite vertex k.
MIDPOINT_BARY = np.array(
    [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
)
MIDPOINT_W = np.array([1.0, 1.0, 1.0]) / 3.0

# Symmetric 6-point rule, exact for quartics. Weights sum to one.
_A1, _B1 = 0.108103018168070, 0.445948490915965
_A2, _B2 = 0.816847572980459, 0.091576213509771
QUAD4_BARY = np.array(
    [
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
QUAD4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

# Two-point Gauss rule on [-1/2, 1/2], exact for cubics along an edge.
GAUSS2_T = np.array([-0.5, 0.5]) / np.sqrt(3.0)


def _element_matrices_numpy(coords, lengths, signs, areas):
    """Grad-div and mass element matrices for a batch of triangles.

    coords: (nt, 3, 2) vertex coordinates, lengths/signs: (nt, 3) for the
    edge opposite each vertex, areas: (nt,). Returns (divdiv, mass), both
    (nt, 3, 3). divdiv[i, j] = s_i s_j |e_i||e_j| / |K|; mass by midpoint
    quadrature, exact for the quadratic integrand.
    """
    d = signs * lengths  # (nt, 3), |K| * div of each basis function
    divdiv = d[:, :, None] * d[:, None, :] / areas[:, None, None]
    coef = signs * lengths / (2.0 * areas[:, None])  # (nt, 3)
    # basis values at the three edge midpoints: (nt, nq, 3, 2)
    pts = np.einsum("qj,tjd->tqd", MIDPOINT_BARY, coords)
    vec = pts[:, :, None, :] - coords[:, None, :, :]
    phi = coef[:, None, :, None] * vec
    mass = np.einsum("q,tqid,tqjd->tij", MIDPOINT_W, phi, phi)
    mass *= areas[:, None, None]
    return divdiv, mass


def _element_matrices_loops(coords, lengths, signs, areas):
    nt = coords.shape[0]
    divdiv = np.empty((nt, 3, 3))
    mass = np.zeros((nt, 3, 3))
    for t in range(nt):
        area = areas[t]
        for i in range(3):
            di = signs[t, i] * lengths[t, i]
            for j in range(3):
                divdiv[t, i, j] = di * signs[t, j] * lengths[t, j] / area
        for q in range(3):
            xq = 0.0
            yq = 0.0
            for j in range(3):
                xq += MIDPOINT_BARY[q, j] * coords[t, j, 0]
                yq += MIDPOINT_BARY[q, j] * coords[t, j, 1]
            for i in range(3):
                ci = signs[t, i] * lengths[t, i] / (2.0 * area)
                pix = ci * (xq - coords[t, i, 0])
                piy = ci * (yq - coords[t, i, 1])
                for j in range(3):
                    cj = signs[t, j] * lengths[t, j] / (2.0 * area)
                    pjx = cj * (xq - coords[t, j, 0])
                    pjy = cj * (yq - coords[t, j, 1])
                    mass[t, i, j] += MIDPOINT_W[q] * area * (pix * pjx + piy * pjy)
    return divdiv, mass


def _load_vectors_numpy(coords, lengths, signs, areas, fvals, bary, weights):
    """Element load vectors int_K f . phi_i for a batch of triangles.

    fvals: (nt, nq, 2) values of the load at the quadrature points given by
    bary (nq, 3) with weights (nq,) normalized to sum one. Returns (nt, 3).
    """
    coef = signs * lengths / (2.0 * areas[:, None])
    pts = np.einsum("qj,tjd->tqd", bary, coords)
    vec = pts[:, :, None, :] - coords[:, None, :, :]
    phi = coef[:, None, :, None] * vec
    out = np.einsum("q,tqd,tqid->ti", weights, fvals, phi)
    return out * areas[:, None]


def _load_vectors_loops(coords, lengths, signs, areas, fvals, bary, weights):
    nt = coords.shape[0]
    nq = bary.shape[0]
    out = np.zeros((nt, 3))
    for t in range(nt):
        area = areas[t]
        for q in range(nq):
            xq = 0.0
            yq = 0.0
            for j in range(3):
                xq += bary[q, j] * coords[t, j, 0]
                yq += bary[q, j] * coords[t, j, 1]
            for i in range(3):
                ci = signs[t, i] * lengths[t, i] / (2.0 * area)
                dot = fvals[t, q, 0] * ci * (xq - coords[t, i, 0])
                dot += fvals[t, q, 1] * ci * (yq - coords[t, i, 1])
                out[t, i] += weights[q] * area * dot
    return out


def _rt0_values_numpy(coords, lengths, signs, areas, dofs, bary):
    """Evaluate a Raviart-Thomas field at barycentric points.

    dofs: (nt, 3) coefficients for the edge opposite each vertex. Returns
    (nt, nq, 2) field values at the points bary (nq, 3).
    """
    coef = dofs * signs * lengths / (2.0 * areas[:, None])
    pts = np.einsum("qj,tjd->tqd", bary, coords)
    vec = pts[:, :, None, :] - coords[:, None, :, :]
    return np.einsum("ti,tqid->tqd", coef, vec)


def _rt0_values_loops(coords, lengths, signs, areas, dofs, bary):
    nt = coords.shape[0]
    nq = bary.shape[0]
    out = np.zeros((nt, nq, 2))
    for t in range(nt):
        area = areas[t]
        for q in range(nq):
            xq = 0.0
            yq = 0.0
            for j in range(3):
                xq += bary[q, j] * coords[t, j, 0]
                yq += bary[q, j] * coords[t, j, 1]
            ux = 0.0
            uy = 0.0
            for i in range(3):
                ci = dofs[t, i] * signs[t, i] * lengths[t, i] / (2.0 * area)
                ux += ci * (xq - coords[t, i, 0])
                uy += ci * (yq - coords[t, i, 1])
            out[t, q, 0] = ux
            out[t, q, 1] = uy
    return out


def _numba_requested() -> bool:
    flag = os.environ.get("RRHDIV_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMPY_IMPLS = {
    "element_matrices": _element_matrices_numpy,
    "load_vectors": _load_vectors_numpy,
    "rt0_values": _rt0_values_numpy,
}

NUMBA_IMPLS = None
if _numba_requested():
    try:
        from numba import njit
    except ImportError:
        NUMBA_IMPLS = None
    else:
        NUMBA_IMPLS = {
            "element_matrices": njit(cache=True)(_element_matrices_loops),
            "load_vectors": njit(cache=True)(_load_vectors_loops),
            "rt0_values": njit(cache=True)(_rt0_values_loops),
        }

if NUMBA_IMPLS is not None:
    BACKEND = "numba"
    _ACTIVE = NUMBA_IMPLS
else:
    BACKEND = "numpy"
    _ACTIVE = NUMPY_IMPLS

element_matrices = _ACTIVE["element_matrices"]
load_vectors = _ACTIVE["load_vectors"]
rt0_values = _ACTIVE["rt0_values"]

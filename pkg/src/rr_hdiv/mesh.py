"""Structured triangulation of the unit square with oriented edge normals.

The unit square is divided into m x m cells and every cell is split by its
bottom-left to top-right diagonal. Each edge carries one degree of freedom
of the lowest-order Raviart-Thomas space (the average normal component
across the edge) and a globally fixed unit normal: (0, 1) for horizontal
edges, (1, 0) for vertical edges, (1, -1)/sqrt(2) for diagonals. Vertex,
edge and triangle ids are lexicographic by geometric position (y first,
then x), so the numbering is reproducible across runs.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

SQRT2 = float(np.sqrt(2.0))

# edge kinds
HORIZONTAL, VERTICAL, DIAGONAL = 0, 1, 2


@dataclass(eq=False)
class Mesh:
    """Triangle mesh with edge-based connectivity.

    tri_edges[t, k] is the edge opposite vertex tris[t, k]; tri_signs[t, k]
    is +1 when that edge's global normal points out of triangle t.
    edge_mid2 holds edge midpoints in half-cell integer steps (coordinates
    times 2m), which keeps boundary and interface classification exact.
    """

    m: int
    h: float
    verts: np.ndarray
    edges: np.ndarray
    edge_normal: np.ndarray
    edge_len: np.ndarray
    edge_boundary: np.ndarray
    edge_kind: np.ndarray
    edge_mid2: np.ndarray
    tris: np.ndarray
    tri_edges: np.ndarray
    tri_signs: np.ndarray
    tri_area: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.verts)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.tris)

    def tri_coords(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (nt, 3, 2)."""
        return self.verts[self.tris]

    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.edge_boundary)


def build_unit_square_mesh(m: int) -> Mesh:
    """Build the m x m criss-cross mesh of [0, 1]^2.

    Counts satisfy nv = (m+1)^2, nt = 2 m^2, ne = 3 m^2 + 2 m, with 4 m
    boundary edges.
    """
    if m < 1:
        raise ValueError(f"mesh resolution must be at least 1, got {m}")

    mp1 = m + 1
    # vertex id = iy * (m+1) + ix is already lexicographic by (y, x)
    ix, iy = np.meshgrid(np.arange(mp1), np.arange(mp1), indexing="xy")
    verts = np.column_stack([ix.ravel() / m, iy.ravel() / m]).astype(float)

    def vid(jx, jy):
        return jy * mp1 + jx

    # edge endpoint and midpoint tables in generation order
    hx, hy = np.meshgrid(np.arange(m), np.arange(mp1), indexing="xy")
    hx, hy = hx.ravel(), hy.ravel()
    vx, vy = np.meshgrid(np.arange(mp1), np.arange(m), indexing="xy")
    vx, vy = vx.ravel(), vy.ravel()
    cx, cy = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    cx, cy = cx.ravel(), cy.ravel()

    ends = np.concatenate(
        [
            np.column_stack([vid(hx, hy), vid(hx + 1, hy)]),
            np.column_stack([vid(vx, vy), vid(vx, vy + 1)]),
            np.column_stack([vid(cx, cy), vid(cx + 1, cy + 1)]),
        ]
    )
    mid2 = np.concatenate(
        [
            np.column_stack([2 * hx + 1, 2 * hy]),
            np.column_stack([2 * vx, 2 * vy + 1]),
            np.column_stack([2 * cx + 1, 2 * cy + 1]),
        ]
    )
    kind = np.concatenate(
        [
            np.full(len(hx), HORIZONTAL, dtype=np.int8),
            np.full(len(vx), VERTICAL, dtype=np.int8),
            np.full(len(cx), DIAGONAL, dtype=np.int8),
        ]
    )

    order = np.lexsort((mid2[:, 0], mid2[:, 1]))
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    ends, mid2, kind = ends[order], mid2[order], kind[order]

    normals = np.array([[0.0, 1.0], [1.0, 0.0], [1.0 / SQRT2, -1.0 / SQRT2]])
    lengths = np.array([1.0 / m, 1.0 / m, SQRT2 / m])
    edge_normal = normals[kind]
    edge_len = lengths[kind]
    on_bnd = (mid2[:, 0] == 0) | (mid2[:, 0] == 2 * m)
    on_bnd |= (mid2[:, 1] == 0) | (mid2[:, 1] == 2 * m)
    edge_boundary = on_bnd & (kind != DIAGONAL)

    # pre-sort edge index helpers for the triangle tables
    def hid(jx, jy):
        return jy * m + jx

    def vvid(jx, jy):
        return m * mp1 + jy * mp1 + jx

    def did(jx, jy):
        return m * mp1 + m * mp1 + jy * m + jx

    # lower triangle (bl, br, tr): opposite edges (right, diagonal, bottom)
    # upper triangle (bl, tr, tl): opposite edges (top, left, diagonal)
    low_v = np.column_stack([vid(cx, cy), vid(cx + 1, cy), vid(cx + 1, cy + 1)])
    low_e = np.column_stack([vvid(cx + 1, cy), did(cx, cy), hid(cx, cy)])
    up_v = np.column_stack([vid(cx, cy), vid(cx + 1, cy + 1), vid(cx, cy + 1)])
    up_e = np.column_stack([hid(cx, cy + 1), vvid(cx, cy), did(cx, cy)])

    tris = np.concatenate([low_v, up_v])
    tri_edges = inv[np.concatenate([low_e, up_e])]

    # triangle ids lexicographic by centroid (y, x); centroid * 3m is integer
    cent3 = np.concatenate(
        [
            np.column_stack([3 * cx + 2, 3 * cy + 1]),
            np.column_stack([3 * cx + 1, 3 * cy + 2]),
        ]
    )
    torder = np.lexsort((cent3[:, 0], cent3[:, 1]))
    tris, tri_edges = tris[torder], tri_edges[torder]

    coords = verts[tris]
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    # sign: +1 when the edge's fixed normal points out of the triangle
    tri_signs = np.empty((len(tris), 3))
    for k in range(3):
        a = coords[:, (k + 1) % 3]
        b = coords[:, (k + 2) % 3]
        p = coords[:, k]
        mid = 0.5 * (a + b)
        n_e = edge_normal[tri_edges[:, k]]
        tri_signs[:, k] = np.sign(np.einsum("td,td->t", mid - p, n_e))
    if np.any(tri_signs == 0.0):
        raise ValueError("degenerate triangle: edge normal tangent to face")

    return Mesh(
        m=m,
        h=1.0 / m,
        verts=verts,
        edges=ends,
        edge_normal=edge_normal,
        edge_len=edge_len,
        edge_boundary=edge_boundary,
        edge_kind=kind,
        edge_mid2=mid2,
        tris=tris,
        tri_edges=tri_edges,
        tri_signs=tri_signs,
        tri_area=area,
    )


def classify_boundary(mesh: Mesh) -> np.ndarray:
    """Edge ids lying on the boundary of the unit square.

    Recomputed from vertex coordinates (both endpoints on one boundary
    line), independently of the flags stored at build time.
    """
    p = mesh.verts[mesh.edges[:, 0]]
    q = mesh.verts[mesh.edges[:, 1]]
    on_line = np.zeros(mesh.n_edges, dtype=bool)
    for axis in (0, 1):
        for value in (0.0, 1.0):
            on_line |= (np.abs(p[:, axis] - value) < 1e-12) & (
                np.abs(q[:, axis] - value) < 1e-12
            )
    return np.flatnonzero(on_line)


def dump_mesh_csv(mesh: Mesh, directory: str) -> None:
    """Write vertex, edge and triangle tables as CSV files for debugging."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(mesh.verts):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}"])
    with open(os.path.join(directory, "edges.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "kind", "nx", "ny", "length", "boundary"])
        for i in range(mesh.n_edges):
            w.writerow(
                [
                    i,
                    mesh.edges[i, 0],
                    mesh.edges[i, 1],
                    int(mesh.edge_kind[i]),
                    f"{mesh.edge_normal[i, 0]:.17g}",
                    f"{mesh.edge_normal[i, 1]:.17g}",
                    f"{mesh.edge_len[i]:.17g}",
                    int(mesh.edge_boundary[i]),
                ]
            )
    with open(os.path.join(directory, "triangles.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "v2", "e0", "e1", "e2", "s0", "s1", "s2", "area"])
        for t in range(mesh.n_triangles):
            w.writerow(
                [t]
                + [int(v) for v in mesh.tris[t]]
                + [int(e) for e in mesh.tri_edges[t]]
                + [int(s) for s in mesh.tri_signs[t]]
                + [f"{mesh.tri_area[t]:.17g}"]
            )

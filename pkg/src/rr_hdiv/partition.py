"""Square N x N decomposition of the structured mesh.

Builds the triangle-to-subdomain map, the coarse interfaces between
neighboring subdomains, per-subdomain index sets (interior dofs and
interface dofs), the two-sided trace slot layout with its pairing
permutation, and the edge-average constraint matrix.

Trace layout: one slot per (interface fine edge, side) pair.  Interfaces
are enumerated bottom-to-top, left-to-right by midpoint; within an
interface the fine edges run in geometric order, and each edge's i-side
slot immediately precedes its j-side slot.  Subdomain pairs are ordered
i < j with the interface normal pointing from i into j (rightward or
upward), which matches the global edge normal convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import DIAGONAL, HORIZONTAL, VERTICAL, Mesh

__all__ = [
    "CoarseInterface",
    "TraceIndex",
    "SubdomainPartition",
    "partition",
    "build_constraint",
]


@dataclass(eq=False)
class CoarseInterface:
    """One straight interface segment shared by two subdomains."""

    index: int
    i: int
    j: int
    normal: np.ndarray
    fine_edges: np.ndarray
    length: float


@dataclass(eq=False)
class TraceIndex:
    """Slot layout of the two-sided interface trace vector."""

    slot_iface: np.ndarray
    slot_edge: np.ndarray
    slot_sub: np.ndarray
    slot_side: np.ndarray
    pair_perm: np.ndarray
    m_diag: np.ndarray

    @property
    def n_slots(self) -> int:
        return int(self.slot_edge.size)

    def swap(self, g: np.ndarray) -> np.ndarray:
        """Exchange the two sides of every fine edge (the involution T)."""
        return g[..., self.pair_perm]


@dataclass(eq=False)
class SubdomainPartition:
    """N x N square decomposition with its trace indexing."""

    N: int
    mesh: Mesh
    tri_sub: np.ndarray
    interior_edges: list
    interface_edges: list
    interfaces: list
    neighbors: list
    trace: TraceIndex

    @property
    def n_subdomains(self) -> int:
        return self.N * self.N

    @property
    def n_interfaces(self) -> int:
        return len(self.interfaces)

    def slots_of(self, sub: int) -> np.ndarray:
        return np.flatnonzero(self.trace.slot_sub == sub)


def partition(mesh: Mesh, N: int) -> SubdomainPartition:
    """Decompose the unit-square mesh into N x N square subdomains.

    Requires the mesh resolution to be a multiple of N so that every
    subdomain boundary runs along mesh lines.
    """
    if N < 1:
        raise ValueError(f"subdomain count per side must be positive, got {N}")
    m = mesh.m
    if m % N != 0:
        raise ValueError(
            f"mesh resolution m={m} is not a multiple of N={N}; "
            "the decomposition must align with the mesh"
        )
    r = m // N

    # Triangle -> subdomain through the integer cell coordinates of the
    # centroid (vertex ids encode the grid position exactly).
    vx = mesh.tris % (m + 1)
    vy = mesh.tris // (m + 1)
    cell_x = vx.sum(axis=1) // 3
    cell_y = vy.sum(axis=1) // 3
    tri_sub = (cell_y // r) * N + (cell_x // r)

    edge_lookup = {
        (int(x), int(y)): e for e, (x, y) in enumerate(mesh.edge_mid2)
    }

    # Enumerate interfaces bottom-to-top, left-to-right by midpoint.
    raw = []
    for J in range(N):
        for I in range(N - 1):
            mid2 = (2 * r * (I + 1), 2 * r * J + r)
            raw.append((mid2, J * N + I, J * N + I + 1, (1.0, 0.0), "v", I, J))
    for J in range(N - 1):
        for I in range(N):
            mid2 = (2 * r * I + r, 2 * r * (J + 1))
            raw.append((mid2, J * N + I, (J + 1) * N + I, (0.0, 1.0), "h", I, J))
    raw.sort(key=lambda item: (item[0][1], item[0][0]))

    interfaces = []
    for index, (mid2, i, j, normal, kind, I, J) in enumerate(raw):
        if kind == "v":
            mids = [(2 * r * (I + 1), 2 * (r * J + t) + 1) for t in range(r)]
            want_kind = VERTICAL
        else:
            mids = [(2 * (r * I + t) + 1, 2 * r * (J + 1)) for t in range(r)]
            want_kind = HORIZONTAL
        fine = np.array([edge_lookup[mid] for mid in mids], dtype=np.int64)
        if np.any(mesh.edge_kind[fine] != want_kind) or np.any(
            mesh.edge_boundary[fine]
        ):
            raise AssertionError("interface edge classification mismatch")
        if np.any(np.diff(fine) <= 0):
            raise AssertionError("interface fine edges out of order")
        interfaces.append(
            CoarseInterface(
                index=index,
                i=i,
                j=j,
                normal=np.array(normal),
                fine_edges=fine,
                length=r * mesh.h,
            )
        )

    gamma_edges = np.concatenate(
        [iface.fine_edges for iface in interfaces]
    ) if interfaces else np.empty(0, dtype=np.int64)
    if np.unique(gamma_edges).size != gamma_edges.size:
        raise AssertionError("a fine edge appears on two coarse interfaces")
    on_gamma = np.zeros(mesh.n_edges, dtype=bool)
    on_gamma[gamma_edges] = True

    # Independent geometric check: the interface set is exactly the
    # non-boundary axis-aligned edges sitting on internal subdomain lines,
    # and no diagonal edge lies on one.
    ex2 = mesh.edge_mid2[:, 0]
    ey2 = mesh.edge_mid2[:, 1]
    expect = ~mesh.edge_boundary & (
        ((mesh.edge_kind == VERTICAL) & (ex2 % (2 * r) == 0))
        | ((mesh.edge_kind == HORIZONTAL) & (ey2 % (2 * r) == 0))
    )
    if not np.array_equal(expect, on_gamma):
        raise AssertionError("interface edge set mismatch")
    if np.any(on_gamma & (mesh.edge_kind == DIAGONAL)):
        raise AssertionError("diagonal edge on a subdomain interface")

    # Per-subdomain edge sets.
    n_subs = N * N
    sub_has_edge = np.zeros((n_subs, mesh.n_edges), dtype=bool)
    for t in range(mesh.n_triangles):
        sub_has_edge[tri_sub[t], mesh.tri_edges[t]] = True
    interior_edges = []
    interface_edges = []
    for s in range(n_subs):
        mine = sub_has_edge[s]
        interior_edges.append(
            np.flatnonzero(mine & ~mesh.edge_boundary & ~on_gamma)
        )
        interface_edges.append(np.flatnonzero(mine & on_gamma))

    counts = sub_has_edge[:, ~mesh.edge_boundary & ~on_gamma].sum(axis=0)
    if interior_edges and not np.all(counts == 1):
        raise AssertionError("an interior dof is claimed by != 1 subdomain")
    if np.any(sub_has_edge[:, on_gamma].sum(axis=0) != 2):
        raise AssertionError("an interface dof is not shared by exactly 2")

    neighbors = [set() for _ in range(n_subs)]
    for iface in interfaces:
        neighbors[iface.i].add(iface.j)
        neighbors[iface.j].add(iface.i)

    # Trace slots: i-side then j-side per fine edge.
    slot_iface = []
    slot_edge = []
    slot_sub = []
    slot_side = []
    for iface in interfaces:
        for e in iface.fine_edges:
            slot_iface.extend((iface.index, iface.index))
            slot_edge.extend((e, e))
            slot_sub.extend((iface.i, iface.j))
            slot_side.extend((0, 1))
    slot_iface = np.array(slot_iface, dtype=np.int64)
    slot_edge = np.array(slot_edge, dtype=np.int64)
    slot_sub = np.array(slot_sub, dtype=np.int64)
    slot_side = np.array(slot_side, dtype=np.int64)
    pair_perm = np.arange(slot_edge.size, dtype=np.int64) ^ 1
    trace = TraceIndex(
        slot_iface=slot_iface,
        slot_edge=slot_edge,
        slot_sub=slot_sub,
        slot_side=slot_side,
        pair_perm=pair_perm,
        m_diag=mesh.edge_len[slot_edge] if slot_edge.size else np.empty(0),
    )

    part = SubdomainPartition(
        N=N,
        mesh=mesh,
        tri_sub=tri_sub,
        interior_edges=interior_edges,
        interface_edges=interface_edges,
        interfaces=interfaces,
        neighbors=neighbors,
        trace=trace,
    )
    for s in range(n_subs):
        from_ifaces = np.unique(trace.slot_edge[part.slots_of(s)])
        if not np.array_equal(from_ifaces, interface_edges[s]):
            raise AssertionError("subdomain interface set inconsistent")
    return part


def build_constraint(part: SubdomainPartition, mesh: Mesh) -> sp.csr_matrix:
    """Edge-average constraint matrix: one row per coarse interface.

    Row k integrates the two-sided jump over interface k: +|e| on the
    i-side slot of each fine edge, -|e| on the j-side slot.  B g = 0 says
    every coarse interface carries matching side averages.
    """
    trace = part.trace
    n = trace.n_slots
    data = trace.m_diag * (1 - 2 * trace.slot_side)
    B = sp.csr_matrix(
        (data, (trace.slot_iface, np.arange(n))),
        shape=(part.n_interfaces, n),
    )
    return B

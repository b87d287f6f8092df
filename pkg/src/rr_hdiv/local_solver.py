"""Per-subdomain Robin problems and the constrained interface solve.

Each subdomain carries the bilinear form restricted to its own triangles
plus a Robin term gamma*M on its interface rows, factorized once.  The
edge-average continuity constraint B u = 0 is enforced with a Lagrange
multiplier; eliminating the (block-diagonal) Robin matrix leaves a small
dense Schur complement S = B H^-1 B^T, one row per coarse interface,
factorized once and reused for every subsequent solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .mesh import Mesh
from .partition import SubdomainPartition

__all__ = [
    "LocalRobinSystem",
    "CoarseSchur",
    "ConstrainedRobinSolver",
    "build_local_systems",
    "solve_local",
    "solve_constrained",
    "apply_resolvent",
]

# Blocks at or under this many dofs use a dense Cholesky factorization
# (which also certifies positive definiteness); larger ones use sparse LU.
DENSE_LIMIT = 2000


@dataclass(eq=False)
class LocalRobinSystem:
    """One subdomain's Robin problem, factorized.

    Local dof order is [interior edges (sorted), interface slots (trace
    order)].  `A` holds the plain bilinear blocks without the Robin term;
    the factorization is of A plus gamma * diag(m_diag) on the interface
    rows.
    """

    sid: int
    interior_edges: np.ndarray
    slots: np.ndarray
    local_edges: np.ndarray
    n_interior: int
    A: sp.csr_matrix
    m_diag: np.ndarray
    gamma: float
    _chol: tuple | None
    _lu: object | None

    @property
    def n_local(self) -> int:
        return int(self.local_edges.size)

    def robin_matrix(self) -> sp.csr_matrix:
        """The factorized matrix, reassembled (small instances, tests)."""
        diag = np.zeros(self.n_local)
        diag[self.n_interior:] = self.gamma * self.m_diag
        return (self.A + sp.diags(diag)).tocsr()

    def backsolve(self, rhs: np.ndarray) -> np.ndarray:
        if self._chol is not None:
            return sla.cho_solve(self._chol, rhs)
        return self._lu.solve(rhs)


@dataclass(eq=False)
class CoarseSchur:
    """Dense SPD interface Schur complement and its factorization."""

    S: np.ndarray
    _chol: tuple

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._chol, rhs)


def _local_matrix(mesh: Mesh, beta: float, tri_ids, loc_of_edge, n_local):
    divdiv, mass = fem.element_matrices(mesh, tri_ids)
    elem = divdiv + beta * mass
    dofs = loc_of_edge[mesh.tri_edges[tri_ids]]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (elem.ravel()[keep], (rows[keep], cols[keep])),
        shape=(n_local, n_local),
    ).tocsr()


def build_local_systems(
    part: SubdomainPartition, mesh: Mesh, beta: float, gamma: float
) -> list:
    """Assemble and factorize every subdomain's Robin matrix."""
    if gamma <= 0.0:
        raise ValueError(f"Robin parameter must be positive, got {gamma}")
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    trace = part.trace
    systems = []
    for s in range(part.n_subdomains):
        slots = part.slots_of(s)
        interior = part.interior_edges[s]
        local_edges = np.concatenate([interior, trace.slot_edge[slots]])
        n_interior = interior.size
        n_local = local_edges.size

        loc_of_edge = -np.ones(mesh.n_edges, dtype=np.int64)
        loc_of_edge[local_edges] = np.arange(n_local)
        tri_ids = np.flatnonzero(part.tri_sub == s)
        A = _local_matrix(mesh, beta, tri_ids, loc_of_edge, n_local)

        m_diag = trace.m_diag[slots]
        diag = np.zeros(n_local)
        diag[n_interior:] = gamma * m_diag
        H = (A + sp.diags(diag)).tocsr()
        chol = None
        lu = None
        if n_local <= DENSE_LIMIT:
            try:
                chol = sla.cho_factor(H.toarray(), lower=True)
            except sla.LinAlgError as err:
                raise ValueError(
                    f"subdomain {s}: Robin matrix not positive definite "
                    "(assembly bug or invalid parameters)"
                ) from err
        else:
            lu = spla.splu(H.tocsc())
        systems.append(
            LocalRobinSystem(
                sid=s,
                interior_edges=interior,
                slots=slots,
                local_edges=local_edges,
                n_interior=n_interior,
                A=A,
                m_diag=m_diag,
                gamma=gamma,
                _chol=chol,
                _lu=lu,
            )
        )
    return systems


def local_loads(part: SubdomainPartition, mesh: Mesh, field) -> list:
    """Per-subdomain load vectors in local dof order."""
    contrib = fem.element_loads(mesh, field)
    loads = []
    for s in range(part.n_subdomains):
        slots = part.slots_of(s)
        local_edges = np.concatenate(
            [part.interior_edges[s], part.trace.slot_edge[slots]]
        )
        loc_of_edge = -np.ones(mesh.n_edges, dtype=np.int64)
        loc_of_edge[local_edges] = np.arange(local_edges.size)
        tri_ids = np.flatnonzero(part.tri_sub == s)
        dofs = loc_of_edge[mesh.tri_edges[tri_ids]].ravel()
        vals = contrib[tri_ids].ravel()
        f = np.zeros(local_edges.size)
        np.add.at(f, dofs[dofs >= 0], vals[dofs >= 0])
        loads.append(f)
    return loads


def solve_local(system: LocalRobinSystem, f_i, g_i):
    """One unconstrained Robin solve; returns (u_interior, u_interface).

    The interface datum enters the right-hand side as m_diag * g_i, the
    edge-length weighting of the Robin boundary term.
    """
    n = system.n_local
    nI = system.n_interior
    f_i = np.zeros(n) if f_i is None else np.asarray(f_i, dtype=float)
    g_i = np.asarray(g_i, dtype=float)
    if f_i.shape[0] != n or g_i.shape[0] != n - nI:
        raise ValueError(
            f"subdomain {system.sid}: rhs sizes {f_i.shape[0]}/{g_i.shape[0]} "
            f"do not match {n} local dofs with {n - nI} on the interface"
        )
    rhs = f_i.copy()
    rhs[nI:] += system.m_diag * g_i
    x = system.backsolve(rhs)
    r = system.A @ x - rhs
    r[nI:] += system.gamma * system.m_diag * x[nI:]
    scale = spla.norm(system.A, 1) * np.linalg.norm(x) + np.linalg.norm(rhs)
    if scale > 0 and np.linalg.norm(r) / scale > 1e-12:
        raise RuntimeError(
            f"subdomain {system.sid}: backward error "
            f"{np.linalg.norm(r) / scale:.3e} after back-substitution"
        )
    return x[:nI], x[nI:]


class ConstrainedRobinSolver:
    """Robin solves with the edge-average constraint eliminated.

    Precomputes, per subdomain, the solved constraint columns
    Y = H^-1 B^T (at most four nonzero columns each) and the dense coarse
    Schur complement S = B H^-1 B^T, then answers every constrained solve
    with one factorized solve per subdomain plus a small dense solve.
    """

    def __init__(self, systems: list, B: sp.spmatrix):
        self.systems = systems
        self.B = B.tocsr()
        self.n_ifaces, self.n_slots = B.shape
        self._adj = []
        self._Y = []
        S = np.zeros((self.n_ifaces, self.n_ifaces))
        Bcsc = B.tocsc()
        for system in systems:
            cols = Bcsc[:, system.slots].toarray()  # (n_ifaces, n_slots_s)
            adj = np.flatnonzero(np.any(cols != 0.0, axis=1))
            rhs = np.zeros((system.n_local, adj.size))
            rhs[system.n_interior:, :] = cols[adj].T
            Y = system.backsolve(rhs) if adj.size else rhs
            self._adj.append(adj)
            self._Y.append(Y)
            if adj.size:
                S[np.ix_(adj, adj)] += cols[adj] @ Y[system.n_interior:, :]
        if self.n_ifaces:
            try:
                chol = sla.cho_factor(S, lower=True)
            except sla.LinAlgError as err:
                raise ValueError(
                    "coarse interface Schur complement not positive "
                    "definite (constraint rows dependent or assembly bug)"
                ) from err
            self.schur = CoarseSchur(S=S, _chol=chol)
        else:
            self.schur = None

    def solve(self, loads, g):
        """Constrained solve; returns (u_interior list, u_trace, mu).

        `loads` is a per-subdomain list of local load vectors (None for
        zero), `g` the two-sided Robin datum on trace slots.  `g` may be a
        matrix whose columns are independent data; results then carry a
        matching trailing axis.
        """
        g = np.asarray(g, dtype=float)
        many = g.ndim == 2
        if g.shape[0] != self.n_slots:
            raise ValueError(
                f"trace datum has {g.shape[0]} rows, expected {self.n_slots}"
            )
        width = g.shape[1] if many else 1
        v_int = []
        w = np.zeros((self.n_slots, width))
        for k, system in enumerate(self.systems):
            nI = system.n_interior
            rhs = np.zeros((system.n_local, width))
            gs = g[system.slots]
            rhs[nI:] = system.m_diag[:, None] * (gs[:, None] if not many else gs)
            if loads is not None and loads[system.sid] is not None:
                rhs += np.asarray(loads[system.sid], dtype=float)[:, None]
            x = system.backsolve(rhs)
            v_int.append(x[:nI])
            w[system.slots] = x[nI:]
        if self.schur is not None:
            mu = self.schur.solve(self.B @ w)
            for k, system in enumerate(self.systems):
                adj = self._adj[k]
                if adj.size:
                    corr = self._Y[k] @ mu[adj]
                    v_int[k] -= corr[: system.n_interior]
                    w[system.slots] -= corr[system.n_interior:]
            jump = np.abs(self.B @ w).max()
            if jump > 1e-10 * max(np.abs(w).max(), 1.0):
                raise RuntimeError(
                    f"edge-average constraint violated after solve: {jump:.3e}"
                )
        else:
            mu = np.zeros((0, width))
        if not many:
            return [v[:, 0] for v in v_int], w[:, 0], mu[:, 0]
        return v_int, w, mu

    def apply_resolvent(self, rhs):
        """Interface trace of the constrained solve with interior load
        zero and raw interface right-hand side `rhs` (no mass weighting).

        Accepts a vector or a matrix of columns.
        """
        rhs = np.asarray(rhs, dtype=float)
        many = rhs.ndim == 2
        cols = rhs if many else rhs[:, None]
        if cols.shape[0] != self.n_slots:
            raise ValueError(
                f"trace vector has {cols.shape[0]} rows, expected {self.n_slots}"
            )
        w = np.zeros_like(cols)
        for k, system in enumerate(self.systems):
            nI = system.n_interior
            local = np.zeros((system.n_local, cols.shape[1]))
            local[nI:] = cols[system.slots]
            x = system.backsolve(local)
            w[system.slots] = x[nI:]
        if self.schur is not None:
            mu = self.schur.solve(self.B @ w)
            for k, system in enumerate(self.systems):
                adj = self._adj[k]
                if adj.size:
                    w[system.slots] -= (self._Y[k] @ mu[adj])[system.n_interior:]
        return w if many else w[:, 0]


def solve_constrained(systems: list, B: sp.spmatrix, f, g):
    """One-off constrained solve (see ConstrainedRobinSolver.solve)."""
    return ConstrainedRobinSolver(systems, B).solve(f, g)


def apply_resolvent(systems: list, B: sp.spmatrix, rhs):
    """One-off resolvent application on trace data."""
    return ConstrainedRobinSolver(systems, B).apply_resolvent(rhs)

"""Manufactured problem and direct-solve reference path.

The independent path against which the domain decomposition solvers are
checked: a one-shot sparse direct solve of the assembled problem, plus the
two-side Robin datum that the iterative methods must reproduce at their
fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .mesh import Mesh


def _u_quadratic(x, y):
    return x * (1.0 - x), y * (1.0 - y)


def _div_quadratic(x, y):
    return 2.0 - 2.0 * x - 2.0 * y


def _load_quadratic(x, y):
    # load for -grad(div u) + u with the quadratic field above
    return 2.0 + x - x * x, 2.0 + y - y * y


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution, divergence and matching load for a given beta."""

    u: Callable = field(default=_u_quadratic)
    div_u: Callable = field(default=_div_quadratic)
    load: Callable = field(default=_load_quadratic)
    beta: float = 1.0


def manufactured_case() -> ManufacturedCase:
    """The quadratic reference case u = (x(1-x), y(1-y)), beta = 1."""
    return ManufacturedCase()


def solve_global(mesh: Mesh, beta: float, load) -> np.ndarray:
    """Direct sparse solve of the assembled problem.

    Returns dof values for every edge (zero on boundary edges). Raises if
    the factorization residual is not at direct-solver accuracy, which
    would signal an assembly bug. Meshes beyond 512x512 are refused: the
    oracle exists to cross-check the decomposition at study scale, not to
    be a production solver.
    """
    if mesh.m > 512:
        raise ValueError(f"oracle solve capped at m=512, got m={mesh.m}")
    system = fem.assemble_global(mesh, beta, load)
    lu = spla.splu(system.A.tocsc())
    x = lu.solve(system.load)
    resid = np.linalg.norm(system.A @ x - system.load)
    scale = spla.norm(system.A, 1) * np.linalg.norm(x) + np.linalg.norm(system.load)
    if scale > 0 and resid / scale > 1e-13:
        raise RuntimeError(
            f"direct solve backward error {resid / scale:.3e} above 1e-13"
        )
    u = np.zeros(mesh.n_edges)
    u[system.free_edges] = x
    return u


def fixed_point_g(problem, u: np.ndarray) -> np.ndarray:
    """Two-side Robin datum generated by a given discrete field.

    Per interface edge and side, gamma times the trace dof plus the natural
    (divergence-flux) datum of that side's subproblem, extracted exactly
    from the local blocks: g_s = gamma u_delta + M^-1 (A_s u|_s - f_s) on
    the interface rows. For the direct-solve field this is the fixed point
    of the Robin exchange and the solution of the interface system.
    """
    trace = problem.partition.trace
    g = np.zeros(trace.n_slots)
    for system in problem.systems:
        u_loc = np.concatenate(
            [u[system.interior_edges], u[trace.slot_edge[system.slots]]]
        )
        r = system.A @ u_loc - problem.local_loads[system.sid]
        r_delta = r[system.n_interior:]
        g[system.slots] = (
            problem.gamma * u[trace.slot_edge[system.slots]]
            + r_delta / system.m_diag
        )
    return g


def direct_errors(m: int, case: ManufacturedCase | None = None):
    """L2 and H(div) errors of the direct solve at resolution m."""
    from .mesh import build_unit_square_mesh

    case = case or manufactured_case()
    mesh = build_unit_square_mesh(m)
    u = solve_global(mesh, case.beta, case.load)
    return fem.error_norms(mesh, u, case.u, case.div_u)

"""Symmetric interface system for the Robin datum and its MINRES solver.

Eliminating the subdomain unknowns from the fixed-point relation of the
Robin exchange leaves a symmetric system G g = f_g on the two-sided trace
vector, with

    G   = (T + I) M - 2 gamma M R M,
    f_g = 2 gamma M R f_tilde,

where M is the diagonal interface mass, T the side exchange, and R the
constrained Robin resolvent.  G is applied matrix-free (one constrained
solve per application) and the system is solved by a Lanczos/Givens
minimum-residual recurrence implemented here; G is symmetric but carries
a known nullspace (the per-interface constant jump directions), against
which f_g is automatically consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .iteration import RobinProblem, assemble_solution

__all__ = [
    "InterfaceOperator",
    "KrylovReport",
    "apply_G",
    "solve_minres",
    "recover_solution",
]

BREAKDOWN_FLOOR = 1e-14


class InterfaceOperator:
    """Matrix-free G bound to one assembled Robin problem."""

    def __init__(self, problem: RobinProblem):
        if problem.solver is None and problem.partition.trace.n_slots:
            raise ValueError("interface operator needs the constrained solver")
        self.problem = problem
        self.trace = problem.partition.trace
        self.gamma = problem.gamma
        self.n = self.trace.n_slots

    def apply(self, g: np.ndarray) -> np.ndarray:
        """(T + I) M g - 2 gamma M R(M g); accepts a vector or columns."""
        g = np.asarray(g, dtype=float)
        if g.shape[0] != self.n:
            raise ValueError(f"trace vector has {g.shape[0]} rows, expected {self.n}")
        if self.n == 0:
            return np.zeros_like(g)
        m = self.trace.m_diag if g.ndim == 1 else self.trace.m_diag[:, None]
        mg = m * g
        u = self.problem.solver.apply_resolvent(mg)
        return mg[self.trace.pair_perm] + mg - 2.0 * self.gamma * m * u

    def load(self) -> np.ndarray:
        """f_g = 2 gamma M R f_tilde, via one zero-datum constrained solve."""
        if self.n == 0:
            return np.zeros(0)
        _, u_trace, _ = self.problem.solver.solve(
            self.problem.local_loads, np.zeros(self.n)
        )
        return 2.0 * self.gamma * self.trace.m_diag * u_trace


def apply_G(operator: InterfaceOperator, g: np.ndarray) -> np.ndarray:
    return operator.apply(g)


@dataclass(eq=False)
class KrylovReport:
    """Outcome of a minimum-residual solve of G g = f_g."""

    iterations: int
    converged: bool
    breakdown: bool
    residual_history: np.ndarray
    final_residual: float
    g: np.ndarray = field(repr=False, default=None)
    u_h: np.ndarray = field(repr=False, default=None)
    l2_error: float = float("nan")
    hdiv_error: float = float("nan")


def _minres(matvec, b: np.ndarray, tol: float, max_iter: int):
    """Minimum-residual recurrence for a symmetric operator.

    Lanczos tridiagonalization with on-the-fly Givens QR; the recurrence
    residual estimate is monotone and drives the stopping test.  Returns
    (x, history, converged, breakdown).
    """
    n = b.size
    x = np.zeros(n)
    beta1 = float(np.linalg.norm(b))
    if beta1 == 0.0 or n == 0:
        return x, [], True, False
    y = b.copy()
    r1 = b.copy()
    r2 = b.copy()
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    history = []
    converged = False
    breakdown = False
    for _ in range(max_iter):
        v = y / beta
        y = matvec(v)
        if oldb > 0.0:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        oldb = beta
        beta = float(np.linalg.norm(y))

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = float(np.hypot(gbar, beta))
        if gamma <= BREAKDOWN_FLOOR * beta1:
            breakdown = True
            history.append(phibar / beta1)
            break
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w

        history.append(phibar / beta1)
        if phibar / beta1 < tol:
            converged = True
            break
        if beta <= BREAKDOWN_FLOOR * beta1:
            # Krylov space exhausted: the recurrence solution is exact.
            converged = phibar / beta1 < tol
            breakdown = not converged
            break
    return x, history, converged, breakdown


def solve_minres(
    operator: InterfaceOperator,
    f_g: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 10000,
    case=None,
) -> KrylovReport:
    """Solve G g = f_g to a relative l2 residual below tol.

    The returned report carries the recovered global field (one
    constrained solve with the final datum) and, when a manufactured case
    is supplied, its errors.
    """
    f_g = np.asarray(f_g, dtype=float)
    g, history, converged, breakdown = _minres(
        operator.apply, f_g, tol, max_iter
    )
    scale = float(np.linalg.norm(f_g))
    if scale > 0.0:
        final = float(np.linalg.norm(operator.apply(g) - f_g)) / scale
    else:
        final = 0.0
    u_h, l2, hdiv = recover_solution(operator, g, case)
    return KrylovReport(
        iterations=len(history),
        converged=converged,
        breakdown=breakdown,
        residual_history=np.array(history),
        final_residual=final,
        g=g,
        u_h=u_h,
        l2_error=l2,
        hdiv_error=hdiv,
    )


def recover_solution(operator: InterfaceOperator, g: np.ndarray, case=None):
    """Global dof vector from a converged datum, plus errors if a case
    with exact fields is given."""
    problem = operator.problem
    u_int, u_trace = problem.solve_once(np.asarray(g, dtype=float))
    u_h = assemble_solution(problem, u_int, u_trace)
    l2 = hdiv = float("nan")
    if case is not None:
        l2, hdiv = fem.error_norms(problem.mesh, u_h, case.u, case.div_u)
    return u_h, l2, hdiv

"""Dense reference constructions shared by the test modules.

Everything here rebuilds operators from first principles (dense block
algebra on the factorized systems) so the matrix-free production paths
have an independent cross-check on small instances.
"""

import numpy as np


def dense_resolvent(problem):
    """Constrained Robin resolvent R = S^-1 - K assembled densely.

    S is the block-diagonal Robin Schur complement onto the trace slots
    (one block per subdomain) and K = S^-1 B^T (B S^-1 B^T)^-1 B S^-1 is
    the correction that enforces the edge-average constraint.
    """
    trace = problem.partition.trace
    n = trace.n_slots
    S = np.zeros((n, n))
    for system in problem.systems:
        nI = system.n_interior
        H = system.robin_matrix().toarray()
        A_II = H[:nI, :nI]
        A_ID = H[:nI, nI:]
        A_DI = H[nI:, :nI]
        A_DD = H[nI:, nI:]
        S_loc = A_DD - A_DI @ np.linalg.solve(A_II, A_ID) if nI else A_DD
        S[np.ix_(system.slots, system.slots)] = S_loc
    S_inv = np.linalg.inv(S)
    Bd = problem.B.toarray()
    middle = np.linalg.inv(Bd @ S_inv @ Bd.T)
    K = S_inv @ Bd.T @ middle @ Bd @ S_inv
    return S_inv - K


def dense_interface_operator(problem):
    """G = (P + I) M - 2 gamma M R M with P the side-swap permutation."""
    trace = problem.partition.trace
    n = trace.n_slots
    M = np.diag(trace.m_diag)
    P = np.eye(n)[trace.pair_perm, :]
    R = dense_resolvent(problem)
    return (P + np.eye(n)) @ M - 2.0 * problem.gamma * M @ R @ M


def apply_to_identity(apply, n):
    """Materialize a linear operator column by column."""
    out = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        out[:, k] = apply(e)
    return out


def relaxed_step(problem, g, theta):
    """One Richardson update applied to a trace vector."""
    trace = problem.partition.trace
    _, u_trace = problem.solve_once(g)
    g_tilde = (2.0 * problem.gamma * u_trace - g)[trace.pair_perm]
    return theta * g_tilde + (1.0 - theta) * g

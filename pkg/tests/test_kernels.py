"""Backend equivalence: the loop kernels must match the vectorized ones."""

import os
import subprocess
import sys

import numpy as np

from rr_hdiv import _kernels as K
from rr_hdiv import fem
from rr_hdiv.mesh import build_unit_square_mesh


def _mesh_arrays(m=5):
    mesh = build_unit_square_mesh(m)
    coords = np.ascontiguousarray(mesh.tri_coords())
    lengths = np.ascontiguousarray(mesh.edge_len[mesh.tri_edges])
    signs = np.ascontiguousarray(mesh.tri_signs.astype(float))
    areas = np.ascontiguousarray(mesh.tri_area)
    return coords, lengths, signs, areas


def test_element_matrices_backends_agree():
    coords, lengths, signs, areas = _mesh_arrays()
    dd_np, m_np = K._element_matrices_numpy(coords, lengths, signs, areas)
    dd_lp, m_lp = K._element_matrices_loops(coords, lengths, signs, areas)
    np.testing.assert_allclose(dd_lp, dd_np, rtol=0, atol=1e-14)
    np.testing.assert_allclose(m_lp, m_np, rtol=0, atol=1e-16)
    dd_act, m_act = K.element_matrices(coords, lengths, signs, areas)
    np.testing.assert_allclose(dd_act, dd_np, rtol=0, atol=1e-14)
    np.testing.assert_allclose(m_act, m_np, rtol=0, atol=1e-16)


def test_load_vectors_backends_agree(rng):
    coords, lengths, signs, areas = _mesh_arrays()
    nt = coords.shape[0]
    nq = K.QUAD4_BARY.shape[0]
    fvals = np.ascontiguousarray(rng.standard_normal((nt, nq, 2)))
    args = (coords, lengths, signs, areas, fvals, K.QUAD4_BARY, K.QUAD4_W)
    out_np = K._load_vectors_numpy(*args)
    out_lp = K._load_vectors_loops(*args)
    out_act = K.load_vectors(*args)
    np.testing.assert_allclose(out_lp, out_np, rtol=0, atol=1e-15)
    np.testing.assert_allclose(out_act, out_np, rtol=0, atol=1e-15)


def test_rt0_values_backends_agree(rng):
    coords, lengths, signs, areas = _mesh_arrays()
    nt = coords.shape[0]
    dofs = np.ascontiguousarray(rng.standard_normal((nt, 3)))
    args = (coords, lengths, signs, areas, dofs, K.QUAD4_BARY)
    out_np = K._rt0_values_numpy(*args)
    out_lp = K._rt0_values_loops(*args)
    out_act = K.rt0_values(*args)
    np.testing.assert_allclose(out_lp, out_np, rtol=0, atol=1e-13)
    np.testing.assert_allclose(out_act, out_np, rtol=0, atol=1e-13)


def test_backend_name_is_reported():
    assert K.BACKEND in ("numba", "numpy")


def test_env_flag_selects_numpy_backend():
    code = "from rr_hdiv import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, RRHDIV_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True, check=True, env=env,
    )
    assert out.stdout.strip() == "numpy"


def test_quadrature_rules_are_consistent():
    assert np.isclose(K.MIDPOINT_W.sum(), 1.0)
    assert np.isclose(K.QUAD4_W.sum(), 1.0)
    np.testing.assert_allclose(K.MIDPOINT_BARY.sum(axis=1), 1.0)
    np.testing.assert_allclose(K.QUAD4_BARY.sum(axis=1), 1.0)


def test_assembly_identical_across_backends(case):
    """End-to-end: the assembled system is bit-compatible between backends."""
    mesh = build_unit_square_mesh(6)
    sys_act = fem.assemble_global(mesh, 1.0, case.load)
    dd_np, m_np = K._element_matrices_numpy(*_mesh_arrays(6))
    dd_act, m_act = fem.element_matrices(mesh)
    np.testing.assert_allclose(dd_act, dd_np, rtol=0, atol=1e-14)
    np.testing.assert_allclose(m_act, m_np, rtol=0, atol=1e-16)
    assert np.isfinite(sys_act.load).all()

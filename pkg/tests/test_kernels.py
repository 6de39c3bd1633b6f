import numpy as np
import pytest

from addbo import backend
from addbo.graphs import Decomposition, DependencyGraph, maximal_cliques
from addbo.kernels import (
    KernelParams,
    additive_gram_matrix,
    additive_kernel,
    group_scales,
    se_cross_matrix,
    se_kernel_component,
)

FIG_GRAPH = DependencyGraph.from_edges(6, [(0, 1), (0, 2), (1, 2), (0, 3), (2, 3), (3, 4)])


def test_scales_sum_to_one():
    decomp = Decomposition(((0, 1), (2, 3)))
    scales = group_scales(decomp)
    assert np.allclose(scales, [0.5, 0.5])
    assert scales.sum() == pytest.approx(1.0)


def test_se_component_at_identical_points_two_groups():
    decomp = Decomposition(((0, 1), (2, 3)))
    params = KernelParams.isotropic(4, 0.7, 0.01)
    x = np.array([0.2, 0.9])
    assert se_kernel_component(x, x, 0, decomp, params) == pytest.approx(0.5)


def test_se_component_single_variable_unit_lengthscale():
    decomp = Decomposition(((0,),))
    params = KernelParams.isotropic(1, 1.0, 0.01)
    value = se_kernel_component([0.0], [1.0], 0, decomp, params)
    assert value == pytest.approx(np.exp(-0.5))


def test_se_component_matches_hand_computed_exponent():
    # inverse lengthscale matrix 0.2 * I2, i.e. lengthscale 1/sqrt(0.2) per variable
    decomp = Decomposition(((0, 1), (2,)))
    ls = np.full(3, 1.0 / np.sqrt(0.2))
    params = KernelParams(ls, 0.01)
    xa = np.array([0.3, 1.4])
    xb = np.array([-0.2, 0.8])
    delta = xa - xb
    expected = (2.0 / 3.0) * np.exp(-0.5 * (delta @ delta) * 0.2)
    assert se_kernel_component(xa, xb, 0, decomp, params) == pytest.approx(expected, abs=1e-12)


def test_se_component_dimension_mismatch():
    decomp = Decomposition(((0, 1),))
    params = KernelParams.isotropic(2, 1.0, 0.01)
    with pytest.raises(ValueError):
        se_kernel_component([0.0], [0.0, 1.0], 0, decomp, params)


def test_se_component_symmetry():
    decomp = Decomposition(((0, 1), (1, 2)))
    params = KernelParams(np.array([0.4, 0.8, 1.3]), 0.01)
    rng = np.random.default_rng(5)
    for _ in range(20):
        xa, xb = rng.normal(size=2), rng.normal(size=2)
        assert se_kernel_component(xa, xb, 0, decomp, params) == pytest.approx(
            se_kernel_component(xb, xa, 0, decomp, params))


def test_additive_kernel_unit_diagonal():
    decomp = maximal_cliques(FIG_GRAPH)
    params = KernelParams.isotropic(6, 0.5, 0.01)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(size=6)
        assert additive_kernel(x, x, decomp, params) == pytest.approx(1.0)


def test_additive_kernel_single_group_equals_component():
    decomp = Decomposition.single_group(3)
    params = KernelParams(np.array([0.3, 0.6, 1.1]), 0.01)
    rng = np.random.default_rng(1)
    xa, xb = rng.uniform(size=3), rng.uniform(size=3)
    assert additive_kernel(xa, xb, decomp, params) == pytest.approx(
        se_kernel_component(xa, xb, 0, decomp, params))


def test_additive_kernel_sums_component_oracles():
    decomp = maximal_cliques(FIG_GRAPH)
    params = KernelParams(np.linspace(0.3, 1.2, 6), 0.01)
    rng = np.random.default_rng(2)
    for _ in range(10):
        xa, xb = rng.uniform(size=6), rng.uniform(size=6)
        expected = sum(
            se_kernel_component(xa[list(g)], xb[list(g)], j, decomp, params)
            for j, g in enumerate(decomp.groups))
        assert additive_kernel(xa, xb, decomp, params) == pytest.approx(expected, abs=1e-12)


def test_gram_matrix_matches_pairwise_kernel():
    decomp = maximal_cliques(FIG_GRAPH)
    params = KernelParams(np.linspace(0.4, 1.0, 6), 0.01)
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(7, 6))
    K = additive_gram_matrix(X, decomp, params)
    for a in range(7):
        for b in range(7):
            assert K[a, b] == pytest.approx(
                additive_kernel(X[a], X[b], decomp, params), abs=1e-10)


def test_gram_positive_semidefinite():
    rng = np.random.default_rng(4)
    for trial in range(10):
        dim = rng.integers(2, 7)
        adj = rng.random((dim, dim)) < 0.4
        adj = np.triu(adj, 1)
        graph = DependencyGraph(adj | adj.T)
        decomp = maximal_cliques(graph)
        params = KernelParams(rng.uniform(0.2, 1.5, size=dim), 0.01)
        X = rng.uniform(size=(12, dim))
        K = additive_gram_matrix(X, decomp, params)
        eigs = np.linalg.eigvalsh(K)
        assert eigs.min() >= -1e-8


def test_backends_agree():
    decomp = maximal_cliques(FIG_GRAPH)
    params = KernelParams(np.linspace(0.3, 0.9, 6), 0.01)
    rng = np.random.default_rng(6)
    X = rng.uniform(size=(15, 6))
    from addbo.kernels import _csr_groups

    idx, ptr = _csr_groups(decomp)
    scales = group_scales(decomp)
    ref = backend.additive_gram_numpy(X, idx, ptr, scales, params.inv_two_lsq)
    active = backend.additive_gram(X, idx, ptr, scales, params.inv_two_lsq)
    assert np.allclose(ref, active, atol=1e-12)

    A = rng.uniform(size=(9, 2))
    B = rng.uniform(size=(4, 2))
    w = np.ascontiguousarray(params.inv_two_lsq[[0, 1]])
    ref_c = backend.se_cross_numpy(A, B, 0.5, w)
    act_c = backend.se_cross(A, B, 0.5, w)
    assert np.allclose(ref_c, act_c, atol=1e-12)


def test_cross_matrix_matches_component():
    decomp = maximal_cliques(FIG_GRAPH)
    params = KernelParams(np.linspace(0.4, 1.0, 6), 0.01)
    rng = np.random.default_rng(7)
    g = decomp.groups[1]
    A = rng.uniform(size=(5, len(g)))
    B = rng.uniform(size=(3, len(g)))
    M = se_cross_matrix(A, B, 1, decomp, params)
    for a in range(5):
        for b in range(3):
            assert M[a, b] == pytest.approx(
                se_kernel_component(A[a], B[b], 1, decomp, params), abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        KernelParams(np.array([1.0, -0.5]), 0.01)
    with pytest.raises(ValueError):
        KernelParams(np.array([1.0]), -1.0)

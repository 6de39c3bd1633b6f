import itertools
import math

import numpy as np
import pytest

from addbo.analysis import (
    count_violations,
    greedy_info_gain,
    info_gain_csv,
    information_gain,
    scan_csv,
    variance_gap_scan,
)
from addbo.domain import Domain
from addbo.engine import function_seed
from addbo.errors import CapacityError
from addbo.gp import ObservationSet, fit_gram
from addbo.graphs import Decomposition, DependencyGraph, maximal_cliques
from addbo.kernels import KernelParams, additive_gram_matrix
from addbo.synthetic import sample_synthetic


def star_model(dim=6, grid=5, n=40, noise=0.01, lengthscale=0.5, seed=0):
    domain = Domain.uniform(dim, grid)
    graph = DependencyGraph.star(dim)
    params = KernelParams.isotropic(dim, lengthscale, noise)
    f = sample_synthetic(graph, params, domain, function_seed(seed))
    rng = np.random.default_rng(seed + 1)
    idx = domain.random_indices(rng, n)
    y = f.evaluate_batch(idx) + math.sqrt(noise) * rng.standard_normal(n)
    obs = ObservationSet(domain.points(idx), y)
    decomp = maximal_cliques(graph)
    gram = fit_gram(obs, decomp, params)
    return domain, gram, obs, decomp, params


class TestVarianceGapScan:
    def test_prior_scan(self):
        domain = Domain.uniform(4, 3)
        graph = DependencyGraph.star(4)
        decomp = maximal_cliques(graph)
        params = KernelParams.isotropic(4, 0.5, 0.01)
        samples = variance_gap_scan(domain, None, ObservationSet.empty(4), decomp,
                                    params, 50, seed=0)
        for s in samples:
            assert s.true_std == pytest.approx(1.0)
            assert s.approx_std >= 1.0 - 1e-12

    def test_observed_point_ratio_diverges(self):
        domain = Domain.uniform(3, 4)
        graph = DependencyGraph.from_edges(3, [(0, 1), (1, 2)])
        decomp = maximal_cliques(graph)
        params = KernelParams.isotropic(3, 0.5, 0.0)  # noise-free, jitter kicks in
        rng = np.random.default_rng(1)
        idx = domain.random_indices(rng, 6)
        obs = ObservationSet(domain.points(idx), rng.normal(size=6))
        gram = fit_gram(obs, decomp, params)
        from addbo.gp import posterior_component_batch, posterior_full_batch

        x = obs.X[:1]
        _, full_var = posterior_full_batch(x, gram, obs, decomp, params)
        true_std = float(np.sqrt(full_var[0]))
        approx = sum(
            float(np.sqrt(posterior_component_batch(j, x[:, list(g)], gram, obs, decomp, params)[1][0]))
            for j, g in enumerate(decomp.groups))
        assert true_std <= 1e-3
        assert approx > 0.1
        assert approx / max(true_std, 1e-12) > 100

    def test_no_violations_on_star_model(self):
        domain, gram, obs, decomp, params = star_model()
        samples = variance_gap_scan(domain, gram, obs, decomp, params, 500, seed=3)
        assert count_violations(samples) == 0
        stds = [s.true_std for s in samples]
        assert stds == sorted(stds)

    def test_csv_shape(self):
        domain, gram, obs, decomp, params = star_model(n=10)
        samples = variance_gap_scan(domain, gram, obs, decomp, params, 20, seed=4)
        lines = scan_csv(samples).strip().split("\n")
        assert lines[0] == "true_std,approx_std,ratio"
        assert len(lines) == 21


class TestInformationGain:
    def test_single_point_closed_form(self):
        decomp = Decomposition(((0, 1),))
        params = KernelParams.isotropic(2, 0.5, 1.0)
        gain = information_gain(np.array([[0.3, 0.4]]), decomp, params)
        assert gain == pytest.approx(0.5 * math.log(2.0), abs=1e-12)

    def test_duplicate_point_subadditive(self):
        decomp = Decomposition(((0,), (1,)))
        params = KernelParams.isotropic(2, 0.5, 1.0)
        x = np.array([[0.2, 0.7]])
        single = information_gain(x, decomp, params)
        double = information_gain(np.vstack([x, x]), decomp, params)
        assert double < 2 * single
        assert double > single

    def test_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(5)
        graph = DependencyGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        decomp = maximal_cliques(graph)
        params = KernelParams(rng.uniform(0.3, 1.0, 4), 0.25)
        A = rng.uniform(size=(5, 4))
        K = additive_gram_matrix(A, decomp, params)
        eigs = np.linalg.eigvalsh(K)
        expected = 0.5 * np.sum(np.log1p(eigs / params.noise_variance))
        assert information_gain(A, decomp, params) == pytest.approx(expected, abs=1e-9)

    def test_monotone_under_extension(self):
        rng = np.random.default_rng(6)
        decomp = Decomposition(((0, 1), (1, 2)))
        params = KernelParams.isotropic(3, 0.5, 0.5)
        A = rng.uniform(size=(3, 3))
        base = information_gain(A, decomp, params)
        bigger = information_gain(np.vstack([A, rng.uniform(size=(1, 3))]), decomp, params)
        assert bigger >= base - 1e-12

    def test_requires_positive_noise(self):
        decomp = Decomposition(((0,),))
        params = KernelParams.isotropic(1, 0.5, 0.0)
        with pytest.raises(ValueError):
            information_gain(np.array([[0.1]]), decomp, params)


class TestGreedyInfoGain:
    def setup_method(self):
        self.domain = Domain.uniform(2, 3)
        graph = DependencyGraph.complete(2)
        self.decomp = maximal_cliques(graph)
        self.params = KernelParams.isotropic(2, 0.6, 0.5)

    def test_t1_matches_exhaustive_single_points(self):
        result = greedy_info_gain(self.domain, 1, self.decomp, self.params)
        sizes = self.domain.sizes
        idx = np.stack(np.unravel_index(np.arange(self.domain.size), sizes), axis=-1)
        pool = self.domain.points(idx)
        best = max(information_gain(pool[k][None, :], self.decomp, self.params)
                   for k in range(pool.shape[0]))
        assert result.gain == pytest.approx(best, abs=1e-12)

    def test_t2_within_submodular_factor_of_exhaustive(self):
        rng = np.random.default_rng(7)
        pool = rng.uniform(size=(10, 2))
        result = greedy_info_gain(pool, 2, self.decomp, self.params)
        best_pair = max(
            information_gain(np.vstack([pool[a], pool[b]]), self.decomp, self.params)
            for a, b in itertools.combinations_with_replacement(range(10), 2))
        assert result.gain >= (1 - 1 / math.e) * best_pair - 1e-12

    def test_monotone_in_t(self):
        rng = np.random.default_rng(8)
        pool = rng.uniform(size=(15, 2))
        gains = [greedy_info_gain(pool, T, self.decomp, self.params).gain for T in (1, 2, 3, 4)]
        assert all(b >= a - 1e-12 for a, b in zip(gains, gains[1:]))
        result = greedy_info_gain(pool, 4, self.decomp, self.params)
        assert np.all(np.diff(result.gains) >= -1e-12)

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            greedy_info_gain(Domain.uniform(8, 8), 2, self.decomp, self.params, cap=1000)

    def test_csv(self):
        rng = np.random.default_rng(9)
        pool = rng.uniform(size=(8, 2))
        result = greedy_info_gain(pool, 3, self.decomp, self.params)
        lines = info_gain_csv(result).strip().split("\n")
        assert lines[0] == "T,gain"
        assert len(lines) == 4

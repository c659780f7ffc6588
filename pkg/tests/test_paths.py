"""Brownian path sampling, keying and bridge refinement."""

import numpy as np
import pytest

from schsim.paths import BrownianPath, coarsen, refine, sample_path, stream_key


class TestSampling:
    def test_reproducible(self):
        a = sample_path(0.0, 1.0, 64, master_seed=7, path_index=3)
        b = sample_path(0.0, 1.0, 64, master_seed=7, path_index=3)
        assert np.array_equal(a.increments, b.increments)

    def test_paths_distinct(self):
        a = sample_path(0.0, 1.0, 64, master_seed=7, path_index=0)
        b = sample_path(0.0, 1.0, 64, master_seed=7, path_index=1)
        assert not np.array_equal(a.increments, b.increments)

    def test_seed_changes_stream(self):
        a = sample_path(0.0, 1.0, 64, master_seed=7, path_index=0)
        b = sample_path(0.0, 1.0, 64, master_seed=8, path_index=0)
        assert not np.array_equal(a.increments, b.increments)

    def test_order_independent(self):
        late = sample_path(0.0, 1.0, 32, master_seed=5, path_index=41)
        for i in range(41):
            sample_path(0.0, 1.0, 32, master_seed=5, path_index=i)
        again = sample_path(0.0, 1.0, 32, master_seed=5, path_index=41)
        assert np.array_equal(late.increments, again.increments)

    def test_times_and_values(self):
        p = sample_path(0.5, 1.5, 4, master_seed=1, path_index=0)
        assert p.dt == 0.25
        assert p.times[0] == 0.5 and p.times[-1] == 1.5
        vals = p.values()
        assert vals[0] == 0.0
        assert abs(vals[-1] - p.terminal) < 1e-15

    def test_input_validation(self):
        with pytest.raises(ValueError):
            sample_path(1.0, 0.0, 4, master_seed=0, path_index=0)
        with pytest.raises(ValueError):
            sample_path(0.0, 1.0, 0, master_seed=0, path_index=0)
        with pytest.raises(ValueError):
            BrownianPath(0.0, 1.0, np.zeros((2, 2)), 0, 0)

    def test_increments_frozen(self):
        p = sample_path(0.0, 1.0, 8, master_seed=0, path_index=0)
        with pytest.raises(ValueError):
            p.increments[0] = 1.0

    def test_moments(self):
        terminals = np.array(
            [sample_path(0.0, 1.0, 16, master_seed=11, path_index=i).terminal for i in range(4000)]
        )
        assert abs(np.mean(terminals)) < 4.0 / np.sqrt(4000)
        assert abs(np.var(terminals) - 1.0) < 0.1

    def test_cross_path_correlation_small(self):
        n = 2000
        a = np.array([sample_path(0.0, 1.0, 1, 3, i).terminal for i in range(n)])
        b = np.array([sample_path(0.0, 1.0, 1, 3, i + n).terminal for i in range(n)])
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.08

    def test_key_distinct_across_levels(self):
        assert stream_key(1, 2, 0) != stream_key(1, 2, 1)
        assert stream_key(1, 2, 0) != stream_key(2, 1, 0)


class TestRefinement:
    def test_pairs_sum_to_coarse(self):
        p = sample_path(0.0, 1.0, 32, master_seed=9, path_index=5)
        f = refine(p)
        assert f.n_steps == 64
        pair_sums = f.increments[0::2] + f.increments[1::2]
        assert np.max(np.abs(pair_sums - p.increments)) < 1e-14

    def test_coarsen_is_exact_inverse(self):
        p = sample_path(0.0, 1.0, 32, master_seed=9, path_index=5)
        f = refine(p)
        assert coarsen(f) is p
        ff = refine(f)
        assert coarsen(coarsen(ff)) is p

    def test_coarsen_without_parent_raises(self):
        p = sample_path(0.0, 1.0, 32, master_seed=9, path_index=5)
        with pytest.raises(ValueError):
            coarsen(p)

    def test_refined_variance(self):
        fine = [refine(sample_path(0.0, 1.0, 8, 21, i)) for i in range(2000)]
        incs = np.concatenate([f.increments for f in fine])
        assert abs(np.var(incs) - 1.0 / 16.0) < 0.005

    def test_bridge_midpoint_distribution(self):
        # conditional on the coarse increment, the midpoint deviation has
        # variance dt/4
        devs = []
        for i in range(2000):
            p = sample_path(0.0, 1.0, 4, 33, i)
            f = refine(p)
            devs.append(f.increments[0::2] - 0.5 * p.increments)
        devs = np.concatenate(devs)
        assert abs(np.mean(devs)) < 0.01
        assert abs(np.var(devs) - 1.0 / 16.0) < 0.005

    def test_refinement_deterministic(self):
        p = sample_path(0.0, 1.0, 16, master_seed=2, path_index=7)
        assert np.array_equal(refine(p).increments, refine(p).increments)

    def test_terminal_preserved(self):
        p = sample_path(0.0, 1.0, 128, master_seed=4, path_index=0)
        f = refine(refine(p))
        assert abs(f.terminal - p.terminal) < 1e-12

"""
噪声实验室测试
"""

import numpy as np
import pytest

from core.exceptions import NoiseSpecError
from core.noise_lab import NoiseLab, SPARSE_SUBSETS
from core.synthetic import make_synthetic_cube
from models.noise_spec import NoiseCase, NoiseLog, NoiseSpec


def lab(case: NoiseCase, seed: int = 5, **kwargs) -> NoiseLab:
    return NoiseLab(NoiseSpec(case=case, seed=seed, **kwargs))


@pytest.fixture
def wide_cube():
    return make_synthetic_cube(rows=16, cols=40, bands=12, seed=9)


@pytest.fixture(scope="module")
def large_cube():
    """256×256×12，逐波段统计量的抽样误差远小于容差"""
    return make_synthetic_cube(rows=256, cols=256, bands=12, seed=2)


class TestGaussian:

    def test_zero_sigma_is_identity(self, small_cube):
        noisy, log = lab(NoiseCase.CASE1, gaussian_sigma_range=(0.0, 0.0)).corrupt(small_cube)
        np.testing.assert_array_equal(noisy.data, small_cube.data)
        assert np.all(log.sigmas() == 0.0)

    def test_empirical_std(self, large_cube):
        noisy, log = lab(NoiseCase.CASE1).corrupt(large_cube)
        sigmas = log.sigmas()
        assert len(sigmas) == 12
        for band, sigma in enumerate(sigmas):
            assert 10 / 255 <= sigma <= 70 / 255
            measured = (noisy.band(band) - large_cube.band(band)).std()
            assert abs(measured - sigma) / sigma < 0.03

    def test_every_band_logged_with_distinct_sigma(self, small_cube, case1_spec):
        _, log = NoiseLab(case1_spec).corrupt(small_cube)
        sigmas = log.sigmas()
        assert len(sigmas) == 16
        assert not np.isnan(sigmas).any()
        assert len(set(sigmas.tolist())) == 16


class TestStripesAndDeadlines:

    def test_stripes(self, wide_cube):
        noisy, log = lab(NoiseCase.CASE2).corrupt(wide_cube)
        affected = log.affected_bands('stripe')
        assert len(affected) == 4

        diff = noisy.data - wide_cube.data
        for band in range(wide_cube.bands):
            plane = diff[:, :, band]
            if band not in affected:
                assert not plane.any()
                continue
            columns = np.flatnonzero(np.abs(plane).max(axis=0) > 0)
            assert 0.05 <= len(columns) / wide_cube.cols <= 0.15
            for c in columns:
                assert np.allclose(plane[:, c], plane[0, c], atol=1e-15)
                assert 0.2 - 1e-12 <= abs(plane[0, c]) <= 0.8 + 1e-12

    def test_deadlines(self, wide_cube):
        noisy, log = lab(NoiseCase.CASE3).corrupt(wide_cube)
        affected = log.affected_bands('deadline')
        assert len(affected) == 4
        for band in range(wide_cube.bands):
            if band not in affected:
                np.testing.assert_array_equal(noisy.band(band), wide_cube.band(band))
                continue
            dead = [c for c in range(wide_cube.cols) if not noisy.band(band)[:, c].any()]
            logged = log.for_band(band)[0].params['columns']
            assert dead == logged
            assert 0.05 <= len(dead) / wide_cube.cols <= 0.15


class TestImpulse:

    def test_zero_density_is_identity(self, wide_cube):
        noisy, _ = lab(NoiseCase.CASE4, impulse_density_range=(0.0, 0.0)).corrupt(wide_cube)
        np.testing.assert_array_equal(noisy.data, wide_cube.data)

    def test_density_statistics(self, large_cube):
        noisy, log = lab(NoiseCase.CASE4, band_fraction=1.0).corrupt(large_cube)
        pixels = large_cube.rows * large_cube.cols
        for band in range(large_cube.bands):
            event = log.for_band(band)[0]
            density = event.params['density']
            assert 0.1 <= density <= 0.7
            assert abs(event.params['count'] / pixels - density) <= 0.02

            changed = noisy.band(band) != large_cube.band(band)
            assert abs(changed.sum() / pixels - density) <= 0.02
            assert np.all(np.isin(noisy.band(band)[changed], (0.0, 1.0)))


class TestLargeCube:

    @pytest.mark.parametrize("case, kind", [(NoiseCase.CASE2, 'stripe'), (NoiseCase.CASE3, 'deadline')])
    def test_column_fractions(self, large_cube, case, kind):
        noisy, log = lab(case).corrupt(large_cube)
        affected = log.affected_bands(kind)
        assert len(affected) == 4
        for band in range(large_cube.bands):
            touched = np.flatnonzero((noisy.band(band) != large_cube.band(band)).any(axis=0))
            if band not in affected:
                assert touched.size == 0
                continue
            columns = log.for_band(band)[0].params['columns']
            assert 0.05 <= len(columns) / large_cube.cols <= 0.15
            assert set(touched.tolist()) <= set(columns)

    def test_case5_gaussian_and_sparse_on_every_band(self, large_cube):
        noisy, log = lab(NoiseCase.CASE5).corrupt(large_cube)
        for band in range(large_cube.bands):
            kinds = log.kinds_for_band(band)
            assert kinds[0] == 'gaussian'
            assert set(kinds[1:]) & {'stripe', 'deadline', 'impulse'}
        _, sparse, dense = NoiseLab.decompose(large_cube, log)
        assert np.abs(noisy.data - large_cube.data - sparse - dense).max() <= 1e-12


class TestCorrupt:

    def test_case5_every_band_has_gaussian_and_sparse(self, small_cube):
        _, log = lab(NoiseCase.CASE5).corrupt(small_cube)
        for band in range(small_cube.bands):
            kinds = log.kinds_for_band(band)
            assert kinds[0] == 'gaussian'
            assert len(kinds) >= 2

    def test_subsets_cover_all_nonempty_combinations(self):
        assert len(SPARSE_SUBSETS) == 7

    @pytest.mark.parametrize("case", list(NoiseCase))
    def test_same_seed_bit_identical(self, small_cube, case):
        a, _ = lab(case, seed=21).corrupt(small_cube)
        b, _ = lab(case, seed=21).corrupt(small_cube)
        np.testing.assert_array_equal(a.data, b.data)

    def test_different_seeds_differ(self, small_cube):
        a, _ = lab(NoiseCase.CASE1, seed=1).corrupt(small_cube)
        b, _ = lab(NoiseCase.CASE1, seed=2).corrupt(small_cube)
        assert not np.array_equal(a.data, b.data)

    def test_decomposition_recovers_components(self, small_cube):
        noisy, log = lab(NoiseCase.CASE5, seed=8).corrupt(small_cube)
        replayed, sparse, dense = NoiseLab.decompose(small_cube, log)
        np.testing.assert_array_equal(replayed, noisy.data)
        assert np.abs(noisy.data - small_cube.data - sparse - dense).max() <= 1e-12

    @pytest.mark.parametrize("case", [NoiseCase.CASE2, NoiseCase.CASE3, NoiseCase.CASE4])
    def test_sparse_only_on_logged_bands(self, small_cube, case):
        noisy, log = lab(case).corrupt(small_cube)
        _, sparse, dense = NoiseLab.decompose(small_cube, log)
        assert not dense.any()
        touched = {b for b in range(small_cube.bands) if sparse[:, :, b].any()}
        assert touched <= set(log.affected_bands(log.events[0].kind))

    def test_clip_output(self, small_cube):
        noisy, log = lab(NoiseCase.CASE5, clip_output=True).corrupt(small_cube)
        assert noisy.data.min() >= 0.0 and noisy.data.max() <= 1.0
        np.testing.assert_array_equal(NoiseLab.replay(small_cube, log).data, noisy.data)

    def test_log_text_round_trip_replays(self, small_cube, tmp_path):
        noisy, log = lab(NoiseCase.CASE5, seed=13).corrupt(small_cube)
        log.save(tmp_path / "noise.txt")
        restored = NoiseLog.load(tmp_path / "noise.txt")
        assert restored.summary() == log.summary()
        np.testing.assert_array_equal(NoiseLab.replay(small_cube, restored).data, noisy.data)

    def test_replay_rejects_band_mismatch(self, small_cube, tiny_cube):
        _, log = lab(NoiseCase.CASE1).corrupt(small_cube)
        with pytest.raises(NoiseSpecError):
            NoiseLab.replay(tiny_cube, log)


class TestNoiseSpec:

    def test_empty_range_rejected(self):
        with pytest.raises(NoiseSpecError):
            NoiseSpec(gaussian_sigma_range=(70.0, 10.0))

    def test_band_fraction_bounds(self):
        with pytest.raises(NoiseSpecError):
            NoiseSpec(band_fraction=0.0)

    def test_case_parsing(self):
        assert NoiseSpec(case='3').case == NoiseCase.CASE3
        with pytest.raises(NoiseSpecError):
            NoiseSpec(case='case9')

    def test_dict_round_trip(self):
        spec = NoiseSpec(case=NoiseCase.CASE2, seed=4, clip_output=True)
        assert NoiseSpec.from_dict(spec.to_dict()) == spec

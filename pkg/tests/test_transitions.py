import numpy as np
import pytest
from scipy.stats import binom

from isingdec import bte, channel, core, exact, transitions as tr


class FakeEngine:
    """Engine stub returning a preset curve; lets tests pin inputs exactly."""

    name = "fake"

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def magnetization_curve(self, H, temps):
        return self.values


def make_curve(temps, values, items=None):
    values = np.asarray(values, dtype=float)
    items = tuple(range(values.shape[1])) if items is None else tuple(items)
    return tr.OrientationCurve(
        temperatures=np.asarray(temps, dtype=float),
        values=values, items=items, engine="test")


class TestSmoothing:
    def test_window_one_is_identity(self):
        v = np.random.default_rng(0).normal(size=(11, 3))
        assert np.array_equal(tr.smooth_curve(v, 1), v)

    def test_interior_matches_convolution(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=30)
        smoothed = tr.smooth_curve(v[:, None], 5)[:, 0]
        oracle = np.convolve(v, np.ones(5) / 5, mode="valid")
        assert np.allclose(smoothed[2:-2], oracle, atol=1e-12)

    def test_boundary_shrinks(self):
        v = np.arange(10.0)[:, None]
        s = tr.smooth_curve(v, 5)[:, 0]
        assert s[0] == pytest.approx(np.mean(v[:3]))
        assert s[-1] == pytest.approx(np.mean(v[-3:]))

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            tr.smooth_curve(np.zeros((5, 1)), 4)


class TestFindTransitions:
    def test_linear_crossing_position(self):
        temps = np.linspace(0.0, 10.0, 101)
        # straight line crossing zero at T = 3.74: interpolation is exact
        values = (temps - 3.74)[:, None]
        recs = tr.find_transitions(make_curve(temps, values),
                                   smoothing_window=1)
        assert len(recs) == 1
        assert recs[0].sigma_low == -1
        assert recs[0].transition_temps == pytest.approx((3.74,), abs=1e-12)
        assert not recs[0].excluded

    def test_multiple_crossings(self):
        temps = np.linspace(0.1, 4 * np.pi, 400)
        values = np.sin(temps)[:, None]
        recs = tr.find_transitions(make_curve(temps, values),
                                   smoothing_window=1)
        assert len(recs[0].transition_temps) == 3
        assert recs[0].transition_temps == pytest.approx(
            (np.pi, 2 * np.pi, 3 * np.pi), abs=1e-3)

    def test_exclusion(self):
        temps = np.linspace(0.1, 2.0, 20)
        values = np.full((20, 1), 0.001)
        recs = tr.find_transitions(make_curve(temps, values))
        assert recs[0].excluded
        assert recs[0].transition_temps == ()
        assert recs[0].sigma_low == 0

    def test_smoothing_removes_noise_crossings(self):
        temps = np.linspace(0.1, 5.0, 50)
        values = np.ones((50, 1))
        values[20, 0] = -0.5  # single-point glitch
        raw = tr.find_transitions(make_curve(temps, values),
                                  smoothing_window=1)
        smooth = tr.find_transitions(make_curve(temps, values),
                                     smoothing_window=5)
        assert len(raw[0].transition_temps) == 2
        assert len(smooth[0].transition_temps) == 0

    def test_short_grid_rejected(self):
        temps = np.linspace(0.1, 1.0, 3)
        with pytest.raises(ValueError):
            tr.find_transitions(make_curve(temps, np.ones((3, 1))))

    def test_orientation_curve_engine_wiring(self):
        temps = np.linspace(0.5, 3.0, 10)
        H = core.Hamiltonian.uniform(core.build_chimera(1))
        curve = tr.orientation_curve(H, temps, bte.BteEngine())
        oracle = exact.magnetization_curve(H, temps)
        assert np.allclose(curve.values, oracle, atol=1e-10)
        assert curve.items == H.graph.spins
        assert curve.engine == "bte"


class TestPlowModel:
    def test_half_agreement_is_half(self):
        assert tr.plow_model(0.5, 1000) == pytest.approx(0.5, abs=1e-12)
        assert tr.plow_model(0.5, 1000, "clt") == pytest.approx(0.5, abs=1e-12)

    def test_certain_agreement(self):
        assert tr.plow_model(1.0, 1000) == pytest.approx(1.0, abs=1e-9)
        assert tr.plow_model(0.0, 1000) == pytest.approx(0.0, abs=1e-9)

    def test_monotone_in_agreement(self):
        ps = np.linspace(0.05, 0.95, 30)
        vals = tr.plow_model(ps, 200)
        # non-decreasing everywhere, strictly rising away from saturation
        assert np.all(np.diff(vals) >= 0)
        mid = tr.plow_model(np.linspace(0.45, 0.55, 11), 200)
        assert np.all(np.diff(mid) > 0)

    def test_sharpens_with_more_runs(self):
        lo = tr.plow_model(0.52, 100)
        hi = tr.plow_model(0.52, 10000)
        assert 0.5 < lo < hi < 1.0

    def test_variants_agree_in_bulk(self):
        ps = np.linspace(0.4, 0.6, 21)
        a = tr.plow_model(ps, 1000, "paper")
        b = tr.plow_model(ps, 1000, "clt")
        assert np.max(np.abs(a - b)) < 0.1

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            tr.plow_model(0.5, 100, "bogus")


class TestPErr:
    def test_perfect_agreement_is_zero(self):
        temps = np.linspace(0.5, 2.0, 4)
        ref = np.ones((4, 6))
        rep = tr.p_err(temps, [ref], [np.ones(6)], [np.ones(6, dtype=bool)])
        assert np.all(rep.p_err == 0.0)
        assert rep.min_per_hamiltonian[0] == 0.0

    def test_counts_disagreements(self):
        temps = np.array([1.0, 2.0])
        ref = np.ones((2, 4))
        ref[1, :2] = -1  # at T=2 two of four spins flip
        expt = np.ones(4)
        rep = tr.p_err(temps, [ref], [expt], [np.ones(4, dtype=bool)])
        assert rep.per_hamiltonian[0].tolist() == [0.0, 0.5]
        assert rep.argmin_temperature[0] == 1.0

    def test_inclusion_mask_filters(self):
        temps = np.array([1.0])
        ref = np.ones((1, 4))
        expt = np.array([1.0, -1.0, -1.0, -1.0])
        inc = np.array([True, False, False, True])
        rep = tr.p_err(temps, [ref], [expt], [inc])
        assert rep.p_err[0] == pytest.approx(0.5)

    def test_empty_inclusion_rejected(self):
        with pytest.raises(ValueError):
            tr.p_err(np.array([1.0]), [np.ones((1, 2))], [np.ones(2)],
                     [np.zeros(2, dtype=bool)])

    def test_argmin_breaks_ties_low(self):
        temps = np.array([1.0, 2.0])
        ref = np.ones((2, 2))
        rep = tr.p_err(temps, [ref], [np.ones(2)], [np.ones(2, dtype=bool)])
        assert rep.argmin_temperature[0] == 1.0


class TestEffectiveTemperatureFit:
    def test_round_trip(self):
        # generate observations at a known sampler temperature and recover it
        t_true = 3.0
        n_run = 100
        eng = bte.BteEngine()
        obs = []
        for k in range(6):
            H, _ = channel.sample_sector(
                core.Hamiltonian.uniform(core.build_chimera(1)), 8,
                channel.stream(21, k))
            m = eng.magnetization_curve(H, np.array([t_true]))[0]
            for i, s in enumerate(H.graph.spins):
                sig = 1 if m[i] >= 0 else -1
                p = tr.plow_model(0.5 * (1 + sig * m[i]), n_run)
                if 1e-6 < p < 1 - 1e-6:
                    obs.append((H, s, sig, float(p)))
        assert len(obs) >= 10
        t_fit = tr.fit_effective_temperature(obs, n_run, eng)
        assert t_fit == pytest.approx(t_true, abs=0.01)

    def test_too_few_observations(self):
        with pytest.raises(ValueError):
            tr.fit_effective_temperature([], 100, bte.BteEngine())


class TestLogisticFit:
    def test_recovers_parameters(self):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0.0, 6.0, 200))
        t0, w = 2.5, 0.4
        p = 1.0 / (1.0 + np.exp(-(t - t0) / w))
        f0, fw = tr.fit_logistic(t, p)
        assert f0 == pytest.approx(t0, abs=1e-6)
        assert fw == pytest.approx(w, abs=1e-6)

    def test_noisy_recovery(self):
        rng = np.random.default_rng(4)
        t = np.sort(rng.uniform(0.0, 6.0, 400))
        p = 1.0 / (1.0 + np.exp(-(t - 2.0) / 0.6))
        p = np.clip(p + rng.normal(0, 0.03, t.size), 0, 1)
        f0, fw = tr.fit_logistic(t, p)
        assert f0 == pytest.approx(2.0, abs=0.1)
        assert fw == pytest.approx(0.6, abs=0.1)


class TestSignificanceBand:
    def test_oracle_small_n(self):
        # exhaustive check against the binomial definition for n = 100
        n, level = 100, 0.95
        d = tr.significance_band(n, level)
        k = int(round((0.5 - d) * n))
        tail = 2 * binom.cdf(k, n, 0.5)
        assert tail <= 1 - level
        tail_next = 2 * binom.cdf(k + 1, n, 0.5)
        assert tail_next > 1 - level

    def test_shrinks_with_n(self):
        assert tr.significance_band(1000) < tr.significance_band(100)

    def test_in_unit_range(self):
        for n in (10, 100, 1000):
            assert 0.0 < tr.significance_band(n) <= 0.5


class TestGrid:
    def test_default_grid(self):
        g = tr.default_temperature_grid()
        assert len(g) == 200
        assert g[-1] == pytest.approx(7.0)
        assert np.all(g > 0)
        assert np.all(np.diff(g) > 0)

import numpy as np
import pytest

from isingdec import channel, core, exact, sa


def random_cell(seed):
    rng = np.random.default_rng(seed)
    g = core.build_chimera(1)
    h = {s: float(rng.choice([-1, 1])) for s in g.spins}
    J = {e: float(rng.choice([-1, 1])) for e in g.edges}
    return core.Hamiltonian(graph=g, h=h, J=J, alpha=1.0)


class TestSchedule:
    def test_endpoints(self):
        sch = sa.AnnealSchedule(t_start=10.0, t_end=0.1, total_updates=1000)
        assert sch.temperature(0) == 10.0
        assert sch.temperature(999) == pytest.approx(0.1)

    def test_linear_midpoint(self):
        sch = sa.AnnealSchedule(t_start=8.0, t_end=2.0, total_updates=7)
        assert sch.temperature(3) == pytest.approx(5.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            sa.AnnealSchedule(t_start=1.0, t_end=2.0)
        with pytest.raises(ValueError):
            sa.AnnealSchedule(t_start=0.0, t_end=0.0)
        with pytest.raises(ValueError):
            sa.AnnealSchedule(total_updates=0)


class TestControlError:
    def test_statistics(self):
        H = core.Hamiltonian.uniform(core.build_chimera(4))
        spec = sa.ControlErrorSpec(sigma_h=0.05, sigma_j=0.03)
        rng = np.random.default_rng(0)
        dh, dj = [], []
        for _ in range(40):
            Hp = sa.inject_control_error(H, spec, rng)
            dh.append(Hp.h_vector() - H.h_vector())
            dj.append(Hp.j_vector() - H.j_vector())
        dh = np.concatenate(dh)
        dj = np.concatenate(dj)
        assert abs(dh.mean()) < 4 * 0.05 / np.sqrt(dh.size)
        assert abs(dj.mean()) < 4 * 0.03 / np.sqrt(dj.size)
        assert dh.std() == pytest.approx(0.05, rel=0.05)
        assert dj.std() == pytest.approx(0.03, rel=0.05)

    def test_deterministic(self):
        H = random_cell(1)
        spec = sa.ControlErrorSpec()
        a = sa.inject_control_error(H, spec, np.random.default_rng(7))
        b = sa.inject_control_error(H, spec, np.random.default_rng(7))
        assert np.array_equal(a.h_vector(), b.h_vector())
        assert np.array_equal(a.j_vector(), b.j_vector())

    def test_preserves_structure(self):
        H = random_cell(2)
        Hp = sa.inject_control_error(H, sa.ControlErrorSpec(),
                                     np.random.default_rng(3))
        assert Hp.graph is H.graph
        assert Hp.alpha == H.alpha


class TestAnneal:
    def test_deterministic(self):
        H = random_cell(3)
        sch = sa.AnnealSchedule(total_updates=2000)
        s1 = sa.anneal(H, sch, np.random.default_rng(9))
        s2 = sa.anneal(H, sch, np.random.default_rng(9))
        assert np.array_equal(s1, s2)
        assert set(np.unique(s1)) <= {-1, 1}

    def test_reaches_ground_state_ferromagnet(self):
        H = core.Hamiltonian.uniform(core.build_chimera(1))
        sch = sa.AnnealSchedule(t_start=5.0, t_end=0.05, total_updates=5000)
        rng = np.random.default_rng(11)
        hits = sum(np.all(sa.anneal(H, sch, rng) == 1) for _ in range(20))
        assert hits >= 18

    def test_alpha_invariance_of_dynamics(self):
        # schedule is in units of alpha, so decode statistics are alpha-free
        H1 = random_cell(5)
        H2 = core.Hamiltonian(graph=H1.graph, h=H1.h, J=H1.J, alpha=0.2)
        sch = sa.AnnealSchedule(total_updates=3000)
        s1 = sa.anneal(H1, sch, np.random.default_rng(13))
        s2 = sa.anneal(H2, sch, np.random.default_rng(13))
        assert np.array_equal(s1, s2)


class TestSweep:
    def test_curve_is_ascending_and_shaped(self):
        H = random_cell(6)
        sch = sa.AnnealSchedule(t_start=6.0, t_end=0.2, total_updates=20000)
        cps = np.array([0.5, 3.0, 1.5])
        curve = sa.sa_orientation_sweep(H, sch, cps, 50,
                                        np.random.default_rng(17))
        assert np.all(np.diff(curve.temperatures) > 0)
        assert np.allclose(curve.temperatures, [0.5, 1.5, 3.0])
        assert curve.values.shape == (3, 8)
        assert curve.engine == "sa"
        assert np.all(np.abs(curve.values) <= 1.0)

    def test_checkpoint_range_enforced(self):
        H = random_cell(6)
        sch = sa.AnnealSchedule(t_start=6.0, t_end=0.2, total_updates=100)
        with pytest.raises(ValueError):
            sa.sa_orientation_sweep(H, sch, np.array([7.0]), 5,
                                    np.random.default_rng(0))

    def test_equilibrated_sweep_matches_boltzmann(self):
        """A slow ramp equilibrates: checkpoint orientations match the
        exact thermal means within a 4-sigma binomial band."""
        H, _ = channel.sample_sector(
            core.Hamiltonian.uniform(core.build_chimera(1)), 6,
            channel.stream(31, 0))
        sch = sa.AnnealSchedule(t_start=8.0, t_end=0.5, total_updates=200000)
        cps = np.array([2.0, 3.0, 5.0])
        n_runs = 400
        curve = sa.sa_orientation_sweep(H, sch, cps, n_runs,
                                        np.random.default_rng(23))
        m = exact.magnetization_curve(H, curve.temperatures)
        band = 4.0 * np.sqrt((1.0 - m ** 2) / n_runs)
        assert np.all(np.abs(curve.values - m) < band + 0.02)

    def test_fast_ramp_freezes_high_temperature_signs(self):
        """With a drastically shortened ramp the low-T checkpoints keep the
        (disordered) high-T statistics instead of the thermal ones."""
        H, _ = channel.sample_sector(
            core.Hamiltonian.uniform(core.build_chimera(1)), 6,
            channel.stream(31, 0))
        cps = np.array([1.0])
        n_runs = 400
        slow = sa.sa_orientation_sweep(
            H, sa.AnnealSchedule(8.0, 0.5, 200000), cps, n_runs,
            np.random.default_rng(29))
        fast = sa.sa_orientation_sweep(
            H, sa.AnnealSchedule(8.0, 0.5, 64), cps, n_runs,
            np.random.default_rng(29))
        m = exact.magnetization_curve(H, np.array([1.0]))[0]
        slow_dev = np.abs(slow.values[0] - m)
        fast_dev = np.abs(fast.values[0] - m)
        assert fast_dev.max() > slow_dev.max() + 0.1

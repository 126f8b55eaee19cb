import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingdec import core


def random_nominal(rng, L=1, excluded=frozenset()):
    g = core.build_chimera(L, excluded=excluded)
    h = {s: float(rng.choice([-1, 1])) for s in g.spins}
    J = {e: float(rng.choice([-1, 1])) for e in g.edges}
    return core.Hamiltonian(graph=g, h=h, J=J, alpha=1.0)


class TestTopology:
    def test_single_cell_counts(self):
        g = core.build_chimera(1)
        assert len(g.spins) == 8
        assert len(g.edges) == 16

    def test_four_by_four_counts(self):
        g = core.build_chimera(4)
        assert len(g.spins) == 128
        assert len(g.edges) == 352

    @pytest.mark.parametrize("L", [1, 2, 3, 4, 8])
    def test_edge_count_formula(self, L):
        g = core.build_chimera(L)
        assert len(g.edges) == 16 * L * L + 8 * L * (L - 1)

    def test_cell_bipartite_structure(self):
        g = core.build_chimera(1)
        for a, b in g.edges:
            # intra-cell edges couple opposite sides only
            assert (a // 4) % 2 != (b // 4) % 2

    def test_intercell_edges(self):
        g = core.build_chimera(2)
        # side 0 couples to the cell below, side 1 to the cell on the right
        assert (0, 16) in g.edges
        assert (4, 12) in g.edges

    def test_truncated_cell(self):
        g = core.truncated_cell()
        assert len(g.spins) == 6
        assert len(g.edges) == 9
        assert 3 not in g.spins and 7 not in g.spins

    def test_exclusions_remove_incident_edges(self):
        g = core.build_chimera(1, excluded={0})
        assert all(0 not in e for e in g.edges)
        assert len(g.edges) == 12


class TestHamiltonian:
    def test_uniform_energy_ferromagnet(self):
        g = core.build_chimera(1)
        H = core.Hamiltonian.uniform(g)
        s = core.SpinConfig({i: 1 for i in g.spins})
        assert core.energy(H, s) == -24.0

    def test_alpha_scales_energy(self):
        g = core.build_chimera(1)
        H = core.Hamiltonian.uniform(g, alpha=0.25)
        s = core.SpinConfig({i: 1 for i in g.spins})
        assert core.energy(H, s) == -6.0

    def test_vector_round_trip(self):
        rng = np.random.default_rng(0)
        H = random_nominal(rng)
        H2 = core.Hamiltonian.from_vectors(H.graph, H.h_vector(),
                                           H.j_vector(), H.alpha)
        assert H2.h == H.h and H2.J == H.J


class TestGauge:
    @given(st.integers(0, 2 ** 32 - 1), st.sets(st.integers(0, 7)))
    @settings(max_examples=50, deadline=None)
    def test_energy_invariant(self, seed, flip):
        rng = np.random.default_rng(seed)
        H = random_nominal(rng)
        Hg = core.gauge_transform(H, flip)
        s = {i: int(rng.choice([-1, 1])) for i in H.graph.spins}
        sg = {i: (-v if i in flip else v) for i, v in s.items()}
        e1 = core.energy(H, core.SpinConfig(s))
        e2 = core.energy(Hg, core.SpinConfig(sg))
        assert e1 == pytest.approx(e2, abs=1e-12)

    def test_involution(self):
        rng = np.random.default_rng(1)
        H = random_nominal(rng)
        flip = {0, 3, 5}
        back = core.gauge_transform(core.gauge_transform(H, flip), flip)
        assert back.h == H.h and back.J == H.J


class TestCanonicalization:
    def test_automorphism_group_order(self):
        assert len(core.unit_cell_automorphisms()) == 1152

    def test_gauge_invariance_of_canonical_word(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            H = random_nominal(rng)
            word = core.canonicalize_cell(H).word
            flip = set(rng.choice(8, size=3, replace=False).tolist())
            assert core.canonicalize_cell(
                core.gauge_transform(H, flip)).word == word

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        H = random_nominal(rng)
        word = core.canonicalize_cell(H).word
        assert core.canonicalize_cell(core.cell_from_word(word)).word == word

    def test_nominal_ferromagnet_is_word_zero(self):
        g = core.build_chimera(1)
        assert core.canonicalize_cell(core.Hamiltonian.uniform(g)).word == 0


class TestTextFormat:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        H = random_nominal(rng)
        H2 = core.parse_hamiltonian(core.format_hamiltonian(H))
        assert H2.h == H.h and H2.J == H.J and H2.alpha == H.alpha

    def test_round_trip_with_exclusions(self):
        g = core.truncated_cell()
        H = core.Hamiltonian.uniform(g, alpha=0.5)
        H2 = core.parse_hamiltonian(core.format_hamiltonian(H))
        assert H2.graph.spins == g.spins and H2.alpha == 0.5

    def test_duplicate_rejected_with_line(self):
        g = core.build_chimera(1)
        text = core.format_hamiltonian(core.Hamiltonian.uniform(g))
        lines = text.splitlines()
        dup = next(l for l in lines if l.startswith("h "))
        with pytest.raises(core.FormatError, match=r"\d+"):
            core.parse_hamiltonian(text + "\n" + dup)

    def test_missing_entry_rejected(self):
        g = core.build_chimera(1)
        text = core.format_hamiltonian(core.Hamiltonian.uniform(g))
        lines = [l for l in text.splitlines() if not l.startswith("h 0 ")]
        with pytest.raises(core.FormatError):
            core.parse_hamiltonian("\n".join(lines))

    def test_unknown_edge_rejected(self):
        g = core.build_chimera(1)
        text = core.format_hamiltonian(core.Hamiltonian.uniform(g))
        with pytest.raises(core.FormatError):
            core.parse_hamiltonian(text + "\nJ 0 1 1.0")

    def test_garbage_rejected(self):
        with pytest.raises(core.FormatError):
            core.parse_hamiltonian("not a header\n")

"""Bit-error-rate experiment harness.

The key identity: with corrupted Hamiltonians grouped by the number s of
flipped elements (the "sector"), the total bit error rate is a polynomial in
the channel crossover probability,

    r_tot(p) = sum_s C(N+M, s) p^s (1-p)^(N+M-s) * rbar_s,

where rbar_s is the mean decode error over sector-s Hamiltonians. Sectors
small enough are enumerated exhaustively; the rest are Monte-Carlo sampled.
All decoding is against the all-+1 truth word (general truth words reduce to
it by a gauge transform).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import comb

from . import channel, exact
from .core import ChimeraGraph, Hamiltonian
from .transitions import significance_band

__all__ = [
    "MapDecoder",
    "MpmDecoder",
    "SectorRates",
    "sector_rates",
    "direct_rtot",
    "ber_curve",
    "BerSurface",
    "ber_surface",
    "NishimoriReport",
    "nishimori_check",
    "min_ratio_temperature",
    "shannon_reference",
    "bootstrap_std",
    "DecodeMetrics",
    "fourbyfour_metrics",
]


def _split_elements(graph: ChimeraGraph, elements: np.ndarray):
    """Split flat (B, N+M) element vectors into field and coupler matrices."""
    n = len(graph.spins)
    return elements[:, :n], elements[:, n:]


class MapDecoder:
    """Zero-temperature (ground-state-consensus) decoder for a fixed graph."""

    def __init__(self, graph: ChimeraGraph, alpha: float = 1.0):
        self.graph = graph
        self.alpha = alpha
        self.temperatures = None

    def __call__(self, H: Hamiltonian) -> np.ndarray:
        return exact.map_decode(H)

    def batch(self, elements: np.ndarray) -> np.ndarray:
        h_mat, j_mat = _split_elements(self.graph, elements)
        energies = exact.batch_energies(self.graph, h_mat, j_mat, self.alpha)
        return exact.batch_map_decode(energies, len(self.graph.spins), self.alpha)


class MpmDecoder:
    """Finite-temperature sign-of-magnetization decoder over a T grid.

    With a scalar temperature the per-Hamiltonian result is a (n_spins,)
    sign vector; with a grid it is (n_temps, n_spins).
    """

    def __init__(self, graph: ChimeraGraph, temperatures, alpha: float = 1.0):
        self.graph = graph
        self.alpha = alpha
        self.scalar = np.isscalar(temperatures)
        self.temperatures = np.atleast_1d(np.asarray(temperatures, dtype=float))

    def __call__(self, H: Hamiltonian) -> np.ndarray:
        out = np.sign(exact.magnetization_curve(H, self.temperatures))
        return out[0] if self.scalar else out

    def batch(self, elements: np.ndarray) -> np.ndarray:
        h_mat, j_mat = _split_elements(self.graph, elements)
        energies = exact.batch_energies(self.graph, h_mat, j_mat, self.alpha)
        out = exact.batch_mpm_decode_curve(
            energies, len(self.graph.spins), self.temperatures)
        return out[:, 0, :] if self.scalar else out


@dataclass(frozen=True)
class SectorRates:
    """Per-sector decode error rates of one clean instance.

    sample_rates[s] holds the per-Hamiltonian error rates in sector s, shape
    (B_s,) for a single-decode decoder or (B_s, n_temps) for a grid decoder;
    means stacks the sector averages. exhaustive[s] marks fully enumerated
    sectors.
    """

    n_elements: int
    counts: np.ndarray
    means: np.ndarray
    sample_rates: tuple
    exhaustive: np.ndarray
    temperatures: np.ndarray | None = None


def _sector_masks(n_elements: int, s: int, samples_per_sector: int,
                  rng: np.random.Generator):
    """Boolean flip masks (B, n_elements) for sector s; exhaustive if cheap."""
    total = comb(n_elements, s, exact=True)
    if total <= samples_per_sector:
        masks = np.zeros((total, n_elements), dtype=bool)
        for b, pos in enumerate(itertools.combinations(range(n_elements), s)):
            masks[b, list(pos)] = True
        return masks, True
    masks = np.zeros((samples_per_sector, n_elements), dtype=bool)
    for b in range(samples_per_sector):
        masks[b, rng.choice(n_elements, size=s, replace=False)] = True
    return masks, False


def _rates_against_truth(decoded: np.ndarray) -> np.ndarray:
    """Mean per-spin error of sign decodes vs the all-+1 truth; 0 counts 1/2."""
    return ((1.0 - decoded) / 2.0).mean(axis=-1)


def sector_rates(H_clean: Hamiltonian, decoder, samples_per_sector: int,
                 rng: np.random.Generator) -> SectorRates:
    """Mean decode error per corruption sector of a clean instance.

    The decoder is called per Hamiltonian unless it provides a vectorized
    `batch(elements)` method taking (B, N+M) element-value matrices.
    """
    if samples_per_sector < 1:
        raise ValueError("samples_per_sector must be >= 1")
    graph = H_clean.graph
    clean = np.concatenate([H_clean.h_vector(), H_clean.j_vector()])
    n_el = len(clean)
    counts, means, samples, exhaustive = [], [], [], []
    for s in range(n_el + 1):
        masks, full = _sector_masks(n_el, s, samples_per_sector, rng)
        elements = clean * np.where(masks, -1.0, 1.0)
        if hasattr(decoder, "batch"):
            decoded = decoder.batch(elements)
        else:
            h_mat, j_mat = _split_elements(graph, elements)
            decoded = np.array([
                decoder(Hamiltonian.from_vectors(graph, h, j, H_clean.alpha))
                for h, j in zip(h_mat, j_mat)
            ])
        r = _rates_against_truth(decoded)
        counts.append(len(masks))
        means.append(r.mean(axis=0))
        samples.append(r)
        exhaustive.append(full)
    temps = getattr(decoder, "temperatures", None)
    if temps is not None and getattr(decoder, "scalar", False):
        temps = None
    return SectorRates(
        n_elements=n_el, counts=np.array(counts), means=np.array(means),
        sample_rates=tuple(samples), exhaustive=np.array(exhaustive),
        temperatures=temps,
    )


def direct_rtot(H_clean: Hamiltonian, decoder, p_grid: np.ndarray,
                chunk: int = 4096) -> np.ndarray:
    """r_tot(p) by direct enumeration of every corruption pattern.

    Sums p^s (1-p)^(N+M-s) r over all 2^(N+M) flip patterns — the ungrouped
    form of the sector polynomial; feasible only for small graphs.
    """
    clean = np.concatenate([H_clean.h_vector(), H_clean.j_vector()])
    n_el = len(clean)
    if n_el > 26:
        raise exact.CapacityError(f"2^{n_el} corruption patterns is too many")
    p_grid = np.asarray(p_grid, dtype=float)
    total = np.zeros(len(p_grid))
    codes = np.arange(1 << n_el, dtype=np.int64)
    for start in range(0, len(codes), chunk):
        block = codes[start:start + chunk]
        masks = (block[:, None] >> np.arange(n_el)) & 1
        s = masks.sum(axis=1)
        elements = clean * (1 - 2 * masks)
        decoded = decoder.batch(elements)
        r = _rates_against_truth(decoded)
        if r.ndim != 1:
            raise ValueError("direct_rtot needs a single-decode decoder")
        weights = np.array([
            p ** s * (1.0 - p) ** (n_el - s) for p in p_grid
        ])
        total += weights @ r
    return total


def exact_sector_means(H_clean: Hamiltonian, t_decode: np.ndarray,
                       chunk: int = 4096):
    """Exact sector means over every corruption pattern of a nominal instance.

    Every corrupted (h, J) pattern gauge-transforms to h = +1 with some
    coupler sign word, and decode signs transform covariantly, so the full
    2^(N+M) channel average reduces to one decode per coupler word plus
    orbit bookkeeping of how many patterns of each sector the word's gauge
    orbit contains. Feasible when M <= ~20 active couplers.

    Returns (map_means (S+1,), mpm_means (S+1, n_t_decode)) with S = N+M.
    """
    graph = H_clean.graph
    if (np.any(H_clean.h_vector() != 1.0)
            or np.any(H_clean.j_vector() != 1.0)):
        raise ValueError(
            "exact sector means require the all-+1 nominal instance")
    n = len(graph.spins)
    m = len(graph.edges)
    if m > 20:
        raise exact.CapacityError(f"2^{m} coupler words is too many")
    t_decode = np.asarray(t_decode, dtype=float)
    pos = {s: t for t, s in enumerate(graph.spins)}
    edge_idx = np.array([(pos[a], pos[b]) for a, b in graph.edges])

    # gauge variables: one +-1 vector per spin assignment
    tau = exact.config_matrix(n)                      # (2^n, n)
    edge_parity = (
        (1 - tau[:, edge_idx[:, 0]] * tau[:, edge_idx[:, 1]]) // 2
    ).astype(np.int64)
    neg_h = ((1 - tau).sum(axis=1) // 2).astype(np.int64)     # (2^n,)
    parity_sum = edge_parity.sum(axis=1).astype(np.int64)
    n_el = n + m
    n_sectors = n_el + 1

    words = np.arange(1 << m, dtype=np.int64)
    n_temps = len(t_decode)
    mpm_acc = np.zeros((n_temps, n_sectors))
    map_acc = np.zeros(n_sectors)
    for start in range(0, len(words), chunk):
        block = words[start:start + chunk]
        bits = ((block[:, None] >> np.arange(m)) & 1)
        j_mat = (1 - 2 * bits).astype(np.float64)
        h_mat = np.ones((len(block), n))
        energies = exact.batch_energies(graph, h_mat, j_mat, H_clean.alpha)
        mpm_signs = exact.batch_mpm_decode_curve(energies, n, t_decode)
        map_signs = exact.batch_map_decode(energies, n, H_clean.alpha)
        # sector of pattern (tau, word): flipped fields plus flipped couplers
        # of the gauge-transformed word
        s_tot = (neg_h + parity_sum)[None, :] \
            + bits.sum(axis=1, dtype=np.int64)[:, None] \
            - 2 * (bits @ edge_parity.T)                      # (W, 2^n)
        flat = (np.arange(len(block))[:, None] * n_sectors + s_tot).ravel()
        tau_sum = np.zeros((len(block), n, n_sectors))
        for i in range(n):
            weights = np.broadcast_to(tau[:, i], s_tot.shape).ravel()
            tau_sum[:, i, :] = np.bincount(
                flat, weights=weights, minlength=len(block) * n_sectors,
            ).reshape(len(block), n_sectors)
        mpm_acc += np.einsum("wti,wis->ts", mpm_signs, tau_sum)
        map_acc += np.einsum("wi,wis->s", map_signs, tau_sum)

    counts = comb(n_el, np.arange(n_sectors))
    mpm_means = 0.5 - mpm_acc.T / (2.0 * n * counts[:, None])
    map_means = 0.5 - map_acc / (2.0 * n * counts)
    return map_means, mpm_means


def ber_curve(rates: SectorRates, p_grid: np.ndarray) -> np.ndarray:
    """Evaluate the sector polynomial r_tot(p) on a p grid.

    Returns (n_p,) for scalar-decode rates or (n_p, n_temps) for grid rates.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    weights = np.array([
        channel.sector_weights(p, rates.n_elements) for p in p_grid
    ])
    return weights @ rates.means


@dataclass(frozen=True)
class BerSurface:
    """MPM vs MAP bit error rates over decode and Nishimori temperature grids."""

    t_decode: np.ndarray
    t_nish: np.ndarray
    r_mpm: np.ndarray   # (n_t_decode, n_t_nish)
    r_map: np.ndarray   # (n_t_nish,)
    ratio: np.ndarray   # r_mpm / r_map
    mpm_rates: SectorRates
    map_rates: SectorRates


def ber_surface(H_clean: Hamiltonian, t_decode: np.ndarray,
                t_nish: np.ndarray, samples_per_sector: int | None = None,
                rng: np.random.Generator | None = None,
                mode: str = "exhaustive") -> BerSurface:
    """BER surface of one instance over decode and Nishimori temperatures.

    mode="exhaustive" reduces the full corruption average to one decode per
    gauge-fixed coupler word (exact to rounding); mode="sampled" Monte-Carlo
    samples each sector with samples_per_sector draws. Sector rates are
    computed once per decoder; every (T_decode, T_Nish) entry is then
    polynomial evaluation at p(T_Nish).
    """
    t_decode = np.asarray(t_decode, dtype=float)
    t_nish = np.asarray(t_nish, dtype=float)
    if mode == "exhaustive":
        map_means, mpm_means = exact_sector_means(H_clean, t_decode)
        n_el = len(H_clean.graph.spins) + len(H_clean.graph.edges)
        counts = comb(n_el, np.arange(n_el + 1)).astype(np.int64)
        full = np.ones(n_el + 1, dtype=bool)
        mpm = SectorRates(n_el, counts, mpm_means, (), full, t_decode)
        map_ = SectorRates(n_el, counts, map_means, (), full)
    elif mode == "sampled":
        if samples_per_sector is None or rng is None:
            raise ValueError("sampled mode needs samples_per_sector and rng")
        mpm = sector_rates(
            H_clean, MpmDecoder(H_clean.graph, t_decode, H_clean.alpha),
            samples_per_sector, rng)
        map_ = sector_rates(
            H_clean, MapDecoder(H_clean.graph, H_clean.alpha),
            samples_per_sector, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    p_vals = np.array([channel.crossover_probability(t) for t in t_nish])
    r_mpm = ber_curve(mpm, p_vals).T            # (n_t_decode, n_t_nish)
    r_map = ber_curve(map_, p_vals)
    return BerSurface(
        t_decode=t_decode, t_nish=t_nish, r_mpm=r_mpm, r_map=r_map,
        ratio=r_mpm / r_map, mpm_rates=mpm, map_rates=map_,
    )


@dataclass(frozen=True)
class NishimoriReport:
    violations: tuple
    max_excess: float

    @property
    def ok(self) -> bool:
        return not self.violations


def nishimori_check(surface: BerSurface, tol: float = 1e-12) -> NishimoriReport:
    """Verify BER is minimized on the diagonal T_decode = T_Nish.

    For each T_Nish on the grid, require BER at T_decode = T_Nish to be
    within tol of the column minimum. The diagonal must lie on the decode
    grid.
    """
    violations = []
    max_excess = 0.0
    for k, t in enumerate(surface.t_nish):
        idx = int(np.argmin(np.abs(surface.t_decode - t)))
        if not np.isclose(surface.t_decode[idx], t, rtol=1e-9, atol=1e-12):
            raise ValueError(
                f"T_Nish={t} not on the decode grid; diagonal missing")
        col = surface.r_mpm[:, k]
        excess = float(surface.r_mpm[idx, k] - col.min())
        max_excess = max(max_excess, excess)
        if excess > tol:
            bad = np.flatnonzero(surface.r_mpm[idx, k] > col + tol)
            violations.append((float(t), tuple(surface.t_decode[bad])))
    return NishimoriReport(violations=tuple(violations), max_excess=max_excess)


def min_ratio_temperature(mpm_means: np.ndarray, map_means: np.ndarray,
                          n_elements: int, t_nish_grid: np.ndarray,
                          flat_tol: float = 1e-9):
    """T_Nish minimizing the MPM/MAP r_tot ratio at a fixed decode T.

    Dense grid scan plus bounded local refinement on the analytic
    polynomials. Returns (t_low, t_high, t_star, ratio_min): when the
    minimum sits on a plateau (ratio within flat_tol of the minimum) the
    interval covers it instead of picking an arbitrary point.
    """
    t_grid = np.asarray(t_nish_grid, dtype=float)

    def ratio_at(t):
        p = channel.crossover_probability(t)
        w = channel.sector_weights(p, n_elements)
        return float((w @ mpm_means) / (w @ map_means))

    vals = np.array([ratio_at(t) for t in t_grid])
    k = int(np.argmin(vals))
    lo = t_grid[max(k - 1, 0)]
    hi = t_grid[min(k + 1, len(t_grid) - 1)]
    if hi > lo:
        res = minimize_scalar(ratio_at, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        t_star, r_min = float(res.x), float(res.fun)
        if vals[k] < r_min:
            t_star, r_min = float(t_grid[k]), float(vals[k])
    else:
        t_star, r_min = float(t_grid[k]), float(vals[k])
    flat = vals <= r_min + flat_tol
    t_low = float(t_grid[flat].min())
    t_high = float(t_grid[flat].max())
    return t_low, t_high, min(max(t_star, t_low), t_high), r_min


def _binary_entropy(d: float) -> float:
    if d <= 0.0 or d >= 1.0:
        return 0.0
    return -d * np.log2(d) - (1.0 - d) * np.log2(1.0 - d)


def shannon_reference(rate: float, p: float) -> float:
    """Shannon minimum bit error rate for a rate-R code on a BSC(p).

    Solves H2(d) = max(0, 1 - (1 - H2(p)) / R) for d in [0, 1/2]; zero when
    channel capacity exceeds the code rate.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    if not 0.0 <= p < 0.5:
        raise ValueError("p must be in [0, 0.5)")
    target = 1.0 - (1.0 - _binary_entropy(p)) / rate
    if target <= 0.0:
        return 0.0
    if target >= 1.0:
        return 0.5
    return float(brentq(lambda d: _binary_entropy(d) - target, 0.0, 0.5,
                        xtol=1e-14))


def bootstrap_std(rates: SectorRates, p_grid: np.ndarray, n_boot: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Bootstrap standard deviation of r_tot(p).

    Resamples Hamiltonians within each sector with replacement n_boot times
    and recomputes the sector polynomial. Requires the retained per-sector
    sample lists.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    if any(len(s) == 0 for s in rates.sample_rates):
        raise ValueError("empty sector sample list")
    p_grid = np.asarray(p_grid, dtype=float)
    weights = np.array([
        channel.sector_weights(p, rates.n_elements) for p in p_grid
    ])
    boots = np.empty((n_boot,) + ((len(p_grid),) if rates.means.ndim == 1
                                  else (len(p_grid),) + rates.means.shape[1:]))
    for b in range(n_boot):
        means = np.array([
            s[rng.integers(0, len(s), size=len(s))].mean(axis=0)
            for s in rates.sample_rates
        ])
        boots[b] = weights @ means
    return boots.std(axis=0)


@dataclass(frozen=True)
class DecodeMetrics:
    """Sampler-vs-reference error metrics over an ensemble of instances."""

    temperatures: np.ndarray
    p_err_all: np.ndarray
    p_err_significant: np.ndarray
    min_per_hamiltonian: np.ndarray
    mean_min: float
    median_min: float


def fourbyfour_metrics(temperatures: np.ndarray,
                       reference_curves: list[np.ndarray],
                       experiment_signs: list[np.ndarray],
                       include_masks: list[np.ndarray],
                       p_low_values: list[np.ndarray] | None = None,
                       n_sets: int = 100,
                       level: float = 0.95) -> DecodeMetrics:
    """Decode-error metrics for an instance ensemble against a reference.

    Averages per-spin disagreement between the reference decode curves and
    the experimental decodes, over included spins (those with a spin-sign
    transition), then over instances. When per-spin P_low values are given,
    a second curve restricted to spins whose P_low differs from 1/2 at the
    two-sided `level` exact binomial significance (over n_sets set-level
    trials) is reported alongside.
    """
    from .transitions import p_err as _p_err

    temperatures = np.asarray(temperatures, dtype=float)
    report = _p_err(temperatures, reference_curves, experiment_signs,
                    include_masks)
    if p_low_values is None:
        p_sig = report.p_err
    else:
        band = significance_band(n_sets, level)
        curves = []
        for ref, expt, inc, plow in zip(reference_curves, experiment_signs,
                                        include_masks, p_low_values):
            sig = np.asarray(inc, dtype=bool) & (
                np.abs(np.asarray(plow) - 0.5) >= band)
            if not sig.any():
                continue
            diff = np.abs(ref[:, sig] - np.asarray(expt, float)[sig]) / 2.0
            curves.append(diff.mean(axis=1))
        if not curves:
            raise ValueError("no spin passes the significance band")
        p_sig = np.array(curves).mean(axis=0)
    return DecodeMetrics(
        temperatures=temperatures,
        p_err_all=report.p_err,
        p_err_significant=p_sig,
        min_per_hamiltonian=report.min_per_hamiltonian,
        mean_min=float(report.min_per_hamiltonian.mean()),
        median_min=float(np.median(report.min_per_hamiltonian)),
    )

"""Binary symmetric channel corruption and corruption-sector weights.

The transmitted codeword is the set of N fields and M couplers of a nominal
Hamiltonian; the channel independently negates each element's sign with
crossover probability p. Decoding at the Nishimori temperature
T = 2 / ln((1-p)/p) minimizes the bit error rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import Hamiltonian

__all__ = [
    "CorruptionMask",
    "nishimori_temperature",
    "crossover_probability",
    "corrupt",
    "sample_sector",
    "sector_weight",
    "stream",
]


def stream(master_seed: int, *path: int) -> np.random.Generator:
    """Independent, reproducible Philox stream for (master seed, path...).

    Parallel workers derive disjoint streams from the same master seed by
    passing distinct paths, e.g. (sector, replicate).
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CorruptionMask:
    """Which fields and couplers the channel flipped; N_corr is the total."""

    flipped_fields: frozenset[int]
    flipped_couplers: frozenset[tuple[int, int]]

    @property
    def n_corr(self) -> int:
        return len(self.flipped_fields) + len(self.flipped_couplers)


def nishimori_temperature(p: float) -> float:
    """T_Nish = 2 / ln((1-p)/p) for the binary symmetric channel."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"p={p} outside (0, 0.5); T_Nish limits are 0 and infinity")
    return 2.0 / math.log((1.0 - p) / p)


def crossover_probability(t_nish: float) -> float:
    """Inverse of nishimori_temperature: p = 1 / (1 + exp(2/T))."""
    if t_nish <= 0.0:
        raise ValueError("T_Nish must be positive")
    return 1.0 / (1.0 + math.exp(2.0 / t_nish))


def _apply_mask(H: Hamiltonian, mask: CorruptionMask) -> Hamiltonian:
    h = {i: -v if i in mask.flipped_fields else v for i, v in H.h.items()}
    J = {e: -v if e in mask.flipped_couplers else v for e, v in H.J.items()}
    return Hamiltonian(H.graph, h, J, H.alpha)


def corrupt(H_clean: Hamiltonian, p: float,
            rng: np.random.Generator) -> tuple[Hamiltonian, CorruptionMask]:
    """Flip each field and coupler sign independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if not H_clean.is_nominal():
        raise ValueError("corrupt requires a nominal (+-1) Hamiltonian")
    spins = H_clean.graph.spins
    edges = H_clean.graph.edges
    draws = rng.random(len(spins) + len(edges)) < p
    mask = CorruptionMask(
        flipped_fields=frozenset(s for t, s in enumerate(spins) if draws[t]),
        flipped_couplers=frozenset(
            e for t, e in enumerate(edges) if draws[len(spins) + t]
        ),
    )
    return _apply_mask(H_clean, mask), mask


def sample_sector(H_clean: Hamiltonian, s: int,
                  rng: np.random.Generator) -> tuple[Hamiltonian, CorruptionMask]:
    """Flip exactly s elements, uniform over all (N+M choose s) subsets."""
    if not H_clean.is_nominal():
        raise ValueError("sample_sector requires a nominal (+-1) Hamiltonian")
    spins = H_clean.graph.spins
    edges = H_clean.graph.edges
    total = len(spins) + len(edges)
    if not 0 <= s <= total:
        raise ValueError(f"sector {s} outside [0, {total}]")
    chosen = rng.choice(total, size=s, replace=False)
    mask = mask_from_flat(H_clean, chosen)
    return _apply_mask(H_clean, mask), mask


def mask_from_flat(H: Hamiltonian, flat_indices) -> CorruptionMask:
    """Mask from flat element indices: fields first (graph order), then edges."""
    spins = H.graph.spins
    edges = H.graph.edges
    fields = frozenset(spins[i] for i in flat_indices if i < len(spins))
    couplers = frozenset(edges[i - len(spins)] for i in flat_indices if i >= len(spins))
    return CorruptionMask(fields, couplers)


def apply_mask(H: Hamiltonian, mask: CorruptionMask) -> Hamiltonian:
    """Public alias: negate the masked fields and couplers of H."""
    return _apply_mask(H, mask)


def sector_weight(s: int, p: float, n_elements: int) -> float:
    """Binomial probability that the channel corrupts exactly s elements.

    C(n, s) p^s (1-p)^(n-s); sums to 1 over s = 0..n_elements.
    """
    if not 0 <= s <= n_elements:
        raise ValueError(f"sector {s} outside [0, {n_elements}]")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return float(binom.pmf(s, n_elements, p))


def sector_weights(p: float, n_elements: int) -> np.ndarray:
    """All sector weights [q(0,p), ..., q(n_elements,p)] at once."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return binom.pmf(np.arange(n_elements + 1), n_elements, p)

"""Exhaustive-enumeration thermodynamics for small instances.

Configurations are encoded as n-bit integers with bit t = (s_t + 1)/2, where
t indexes the active spins of the graph in ascending order. Thermal averages
are computed in the log domain with the ground energy subtracted, so no
temperature in [1e-3, 1e7] overflows or underflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import CapacityError, ChimeraGraph, Hamiltonian

__all__ = [
    "Spectrum",
    "enumerate_spectrum",
    "magnetization",
    "magnetization_curve",
    "pair_correlation_curve",
    "mpm_decode",
    "map_decode",
    "bit_error_rate",
    "ExactEngine",
    "config_matrix",
    "batch_energies",
    "batch_map_decode",
    "batch_mpm_decode_curve",
]

MAX_SPINS_DEFAULT = 25
GROUND_TIE_RTOL = 1e-9
_ZERO_TOL = 1e-12  # |<sigma>| below this decodes to 0 (exact symmetry + float noise)


@dataclass(frozen=True)
class Spectrum:
    """Energies of all 2^n configurations plus the degenerate ground set."""

    energies: np.ndarray
    ground_energy: float
    ground_set: np.ndarray  # configuration codes of all ground states


@lru_cache(maxsize=32)
def _cached_config_matrix(n: int) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)[None, :]) & 1
    return (2 * bits - 1).astype(np.float64)


def config_matrix(n: int) -> np.ndarray:
    """(2^n, n) matrix of spin values; row k is configuration code k."""
    if n > MAX_SPINS_DEFAULT:
        raise CapacityError(f"{n} spins exceeds the exhaustive cap {MAX_SPINS_DEFAULT}")
    return _cached_config_matrix(n)


def _edge_index_pairs(graph: ChimeraGraph) -> np.ndarray:
    pos = {s: t for t, s in enumerate(graph.spins)}
    return np.array([(pos[i], pos[j]) for i, j in graph.edges], dtype=np.int64)


def batch_energies(graph: ChimeraGraph, h_mat: np.ndarray, j_mat: np.ndarray,
                   alpha: float = 1.0) -> np.ndarray:
    """Energies of every configuration for a batch of instances on one graph.

    h_mat: (B, n) fields, j_mat: (B, m) couplers in canonical edge order.
    Returns (B, 2^n).
    """
    S = config_matrix(graph.n_spins)
    ep = _edge_index_pairs(graph)
    P = S[:, ep[:, 0]] * S[:, ep[:, 1]] if len(ep) else np.zeros((S.shape[0], 0))
    return alpha * (-(h_mat @ S.T) - (j_mat @ P.T))


def enumerate_spectrum(H: Hamiltonian, max_spins: int = MAX_SPINS_DEFAULT) -> Spectrum:
    """Exact energies of all 2^n configurations of H."""
    n = H.graph.n_spins
    if n > max_spins:
        raise CapacityError(f"{n} spins exceeds the cap of {max_spins}")
    energies = batch_energies(
        H.graph, H.h_vector()[None, :], H.j_vector()[None, :], H.alpha
    )[0]
    ground = float(energies.min())
    tol = GROUND_TIE_RTOL * H.alpha
    ground_set = np.flatnonzero(energies <= ground + tol)
    return Spectrum(energies=energies, ground_energy=ground, ground_set=ground_set)


def _boltzmann_weights(energies: np.ndarray, T: float) -> np.ndarray:
    """Normalized Boltzmann weights, ground energy subtracted first."""
    shifted = energies - energies.min(axis=-1, keepdims=True)
    w = np.exp(-shifted / T)
    return w / w.sum(axis=-1, keepdims=True)


def magnetization(H: Hamiltonian, T: float,
                  spectrum: Spectrum | None = None) -> np.ndarray:
    """Per-spin thermal averages <sigma_i> at temperature T."""
    if T <= 0:
        raise ValueError("T must be positive")
    sp = spectrum if spectrum is not None else enumerate_spectrum(H)
    S = config_matrix(H.graph.n_spins)
    w = _boltzmann_weights(sp.energies, T)
    return w @ S


def magnetization_curve(H: Hamiltonian, temps: np.ndarray,
                        spectrum: Spectrum | None = None) -> np.ndarray:
    """(n_temps, n_spins) array of <sigma_i>(T) over a temperature grid."""
    temps = np.asarray(temps, dtype=float)
    if np.any(temps <= 0):
        raise ValueError("all temperatures must be positive")
    sp = spectrum if spectrum is not None else enumerate_spectrum(H)
    S = config_matrix(H.graph.n_spins)
    shifted = sp.energies - sp.ground_energy
    out = np.empty((len(temps), H.graph.n_spins))
    for t, T in enumerate(temps):
        w = np.exp(-shifted / T)
        out[t] = (w @ S) / w.sum()
    return out


def pair_correlation_curve(H: Hamiltonian, temps: np.ndarray,
                           pairs: list[tuple[int, int]],
                           spectrum: Spectrum | None = None) -> np.ndarray:
    """(n_temps, n_pairs) array of <sigma_i sigma_j>(T) for arbitrary pairs."""
    temps = np.asarray(temps, dtype=float)
    if np.any(temps <= 0):
        raise ValueError("all temperatures must be positive")
    sp = spectrum if spectrum is not None else enumerate_spectrum(H)
    S = config_matrix(H.graph.n_spins)
    pos = {s: t for t, s in enumerate(H.graph.spins)}
    idx = np.array([(pos[i], pos[j]) for i, j in pairs], dtype=np.int64)
    P = S[:, idx[:, 0]] * S[:, idx[:, 1]]
    shifted = sp.energies - sp.ground_energy
    out = np.empty((len(temps), len(pairs)))
    for t, T in enumerate(temps):
        w = np.exp(-shifted / T)
        out[t] = (w @ P) / w.sum()
    return out


def _sign_with_zero(m: np.ndarray, tol: float = _ZERO_TOL) -> np.ndarray:
    out = np.sign(m)
    out[np.abs(m) < tol] = 0.0
    return out


def mpm_decode(H: Hamiltonian, T: float,
               spectrum: Spectrum | None = None) -> np.ndarray:
    """Marginal posterior maximisation: sgn(<sigma_i>) at T, 0 if undecided.

    Entries align with H.graph.spins.
    """
    return _sign_with_zero(magnetization(H, T, spectrum))


def map_decode(H: Hamiltonian, spectrum: Spectrum | None = None) -> np.ndarray:
    """Maximum-likelihood decode: per-spin sign summed over all ground states.

    Exact integer arithmetic, so degenerate ties yield exactly 0.
    """
    sp = spectrum if spectrum is not None else enumerate_spectrum(H)
    S = config_matrix(H.graph.n_spins)
    sums = S[sp.ground_set].sum(axis=0)
    return np.sign(sums)


def batch_map_decode(energies: np.ndarray, n_spins: int, alpha: float = 1.0) -> np.ndarray:
    """MAP decode for a batch: energies (B, 2^n) -> signs (B, n)."""
    S = config_matrix(n_spins)
    ground = energies.min(axis=1, keepdims=True)
    degenerate = energies <= ground + GROUND_TIE_RTOL * alpha
    sums = degenerate.astype(np.float64) @ S
    return np.sign(sums)


def batch_mpm_decode_curve(energies: np.ndarray, n_spins: int,
                           temps: np.ndarray) -> np.ndarray:
    """MPM decode for a batch over a temperature grid.

    energies: (B, 2^n). Returns signs (B, n_temps, n_spins).
    """
    S = config_matrix(n_spins)
    shifted = energies - energies.min(axis=1, keepdims=True)
    out = np.empty((energies.shape[0], len(temps), n_spins))
    for t, T in enumerate(np.asarray(temps, dtype=float)):
        w = np.exp(-shifted / T)
        m = (w @ S) / w.sum(axis=1, keepdims=True)
        out[:, t, :] = _sign_with_zero(m)
    return out


def bit_error_rate(decoded: np.ndarray, truth: np.ndarray) -> float:
    """Mean over spins of (1 - decoded_i * truth_i) / 2.

    An undecided spin (decoded 0) contributes 1/2. Arrays must align.
    """
    decoded = np.asarray(decoded, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if decoded.shape != truth.shape:
        raise ValueError("decoded and truth must have the same shape")
    return float(np.mean(0.5 * (1.0 - decoded * truth)))


class ExactEngine:
    """Orientation-curve engine backed by exhaustive enumeration."""

    name = "exact"

    def __init__(self, max_spins: int = MAX_SPINS_DEFAULT):
        self.max_spins = max_spins

    def supports(self, H: Hamiltonian) -> bool:
        return H.graph.n_spins <= self.max_spins

    def magnetization_curve(self, H: Hamiltonian, temps: np.ndarray) -> np.ndarray:
        if not self.supports(H):
            raise CapacityError(f"{H.graph.n_spins} spins exceeds exact cap")
        return magnetization_curve(H, temps)

    def pair_correlation_curve(self, H: Hamiltonian, temps: np.ndarray,
                               pairs: list[tuple[int, int]]) -> np.ndarray:
        if not self.supports(H):
            raise CapacityError(f"{H.graph.n_spins} spins exceeds exact cap")
        return pair_correlation_curve(H, temps, pairs)

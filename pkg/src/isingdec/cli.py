"""Configuration-driven command-line front end.

Every command is a pure function of (config, seed): outputs are plot-ready
CSV files plus a JSON manifest echoing the resolved configuration, and
reruns with the same inputs are byte-identical. Config files are flat
key=value text grouped under [section] headers; unknown keys are rejected
with line numbers.

Exit codes: 0 success, 2 config error, 3 capacity error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bte, channel, exact, experiments, sa, transitions
from .core import (
    CapacityError,
    FormatError,
    Hamiltonian,
    build_chimera,
    canonicalize_cell,
    cell_from_word,
    enumerate_cell_classes,
    parse_hamiltonian,
)

__all__ = ["main", "ConfigError", "load_config"]


class ConfigError(Exception):
    """Invalid run configuration; message carries file/line context."""


# ---------------------------------------------------------------------------
# config parsing


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


# (section, key) -> value parser; one schema shared by all commands, each
# command checks for the keys it needs and rejects irrelevant sections.
_SCHEMA = {
    ("run", "seed"): int,
    ("run", "out"): str,
    ("graph", "l"): int,
    ("graph", "exclude"): _parse_ints,
    ("graph", "alpha"): float,
    ("graph", "engine"): str,
    ("graph", "hamiltonian"): str,
    ("grid", "t_min"): float,
    ("grid", "t_max"): float,
    ("grid", "points"): int,
    ("channel", "p"): _parse_floats,
    ("channel", "samples_per_sector"): int,
    ("channel", "mode"): str,
    ("channel", "flips"): int,
    ("channel", "bootstrap"): int,
    ("ensemble", "instances"): int,
    ("ensemble", "classes"): _parse_bool,
    ("ensemble", "correlation"): _parse_bool,
    ("sa", "t_start"): float,
    ("sa", "t_end"): float,
    ("sa", "updates"): int,
    ("sa", "runs"): int,
    ("sa", "checkpoints"): _parse_floats,
    ("control", "sigma_h"): float,
    ("control", "sigma_j"): float,
    ("control", "realizations"): int,
    ("plow", "n_run"): int,
    ("plow", "sampler_temperature"): float,
}


def load_config(path: Path) -> dict:
    """Parse a flat key=value config with [section] headers.

    Returns {"section.key": value}. Unknown keys, bad values, and duplicate
    keys raise ConfigError with the offending line number.
    """
    config: dict = {}
    section = ""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise ConfigError(f"{path}: {err}") from err
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        parser = _SCHEMA.get((section, key))
        if parser is None:
            raise ConfigError(f"{path}:{lineno}: unknown key [{section}] {key}")
        full = f"{section}.{key}"
        if full in config:
            raise ConfigError(f"{path}:{lineno}: duplicate key {full}")
        try:
            config[full] = parser(value)
        except ValueError as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {full}: {err}")
    return config


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"missing required key {key}")
    return config[key]


def _temperature_grid(config: dict) -> np.ndarray:
    points = _require(config, "grid.points")
    t_max = config.get("grid.t_max", 7.0)
    t_min = config.get("grid.t_min", t_max / points)
    if points < 1 or t_min <= 0 or t_max < t_min:
        raise ConfigError("invalid temperature grid")
    return np.linspace(t_min, t_max, points)


def _engine(config: dict):
    name = config.get("graph.engine", "exact")
    if name == "exact":
        return exact.ExactEngine()
    if name == "bte":
        return bte.BteEngine()
    raise ConfigError(f"unknown engine {name!r}")


def _graph(config: dict):
    L = config.get("graph.l", 1)
    excluded = frozenset(config.get("graph.exclude", ()))
    return build_chimera(L, excluded=excluded)


def _clean_hamiltonian(config: dict) -> Hamiltonian:
    if "graph.hamiltonian" in config:
        text = Path(config["graph.hamiltonian"]).read_text()
        return parse_hamiltonian(text)
    return Hamiltonian.uniform(_graph(config),
                               alpha=config.get("graph.alpha", 1.0))


# ---------------------------------------------------------------------------
# output helpers


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    config_text: str, outputs: list[str],
                    started: float) -> None:
    manifest = {
        "command": command,
        "seed": seed,
        "config": {k: config[k] for k in sorted(config)},
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "outputs": outputs,
        "elapsed_seconds": round(time.time() - started, 3),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, default=str) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(config, seed, out_dir):
    print("config ok")
    return []


def cmd_canonicalize(config, seed, out_dir):
    """Emit the canonical single-cell coupler classes, or canonicalize a file."""
    if "graph.hamiltonian" in config:
        H = parse_hamiltonian(Path(config["graph.hamiltonian"]).read_text())
        canon = canonicalize_cell(H)
        _write_csv(out_dir / "canonical.csv",
                   ["canonical_word", "n_negative_couplers"],
                   [[canon.word, bin(canon.word).count("1")]])
        return ["canonical.csv"]
    count, histogram, canonical = enumerate_cell_classes()
    words, orbit_sizes = np.unique(canonical, return_counts=True)
    rows = [[int(w), int(o), bin(int(w)).count("1")]
            for w, o in zip(words, orbit_sizes)]
    _write_csv(out_dir / "classes.csv",
               ["canonical_word", "orbit_size", "n_negative_couplers"], rows)
    return ["classes.csv"]


def cmd_ber(config, seed, out_dir):
    """BER ratio curve r_mpm(T_Nish)/r_map at matched decoding temperature."""
    H = _clean_hamiltonian(config)
    p_vals = np.asarray(_require(config, "channel.p"), dtype=float)
    if np.any(p_vals <= 0) or np.any(p_vals >= 0.5):
        raise ConfigError("channel.p values must lie in (0, 0.5)")
    t_nish = np.array([channel.nishimori_temperature(p) for p in p_vals])
    mode = config.get("channel.mode", "exhaustive")
    rng = channel.stream(seed, 0)
    surf = experiments.ber_surface(
        H, np.sort(t_nish), t_nish,
        samples_per_sector=config.get("channel.samples_per_sector"),
        rng=rng, mode=mode)
    n_boot = config.get("channel.bootstrap", 0)
    if n_boot and mode == "sampled":
        std = experiments.bootstrap_std(surf.map_rates, p_vals, n_boot,
                                        channel.stream(seed, 1))
    else:
        std = np.zeros(len(p_vals))
    rows = []
    for k, (p, t) in enumerate(zip(p_vals, t_nish)):
        d = int(np.argmin(np.abs(surf.t_decode - t)))
        rows.append([_fmt(float(p)), _fmt(float(t)),
                     _fmt(float(surf.r_map[k])), _fmt(float(surf.r_mpm[d, k])),
                     _fmt(float(surf.ratio[d, k])), _fmt(float(std[k]))])
    _write_csv(out_dir / "ber.csv",
               ["p", "t_nish", "r_map", "r_mpm", "ratio", "std"], rows)
    return ["ber.csv"]


def cmd_surface(config, seed, out_dir):
    H = _clean_hamiltonian(config)
    grid = _temperature_grid(config)
    p_vals = np.asarray(_require(config, "channel.p"), dtype=float)
    t_nish = np.array([channel.nishimori_temperature(p) for p in p_vals])
    t_decode = np.unique(np.concatenate([grid, t_nish]))
    surf = experiments.ber_surface(
        H, t_decode, t_nish,
        samples_per_sector=config.get("channel.samples_per_sector"),
        rng=channel.stream(seed, 0),
        mode=config.get("channel.mode", "exhaustive"))
    rows = []
    for d, td in enumerate(surf.t_decode):
        for k, tn in enumerate(surf.t_nish):
            rows.append([_fmt(float(td)), _fmt(float(tn)),
                         _fmt(float(surf.r_mpm[d, k])),
                         _fmt(float(surf.r_map[k])),
                         _fmt(float(surf.ratio[d, k]))])
    _write_csv(out_dir / "surface.csv",
               ["t_decode", "t_nish", "r_mpm", "r_map", "ratio"], rows)
    return ["surface.csv"]


def _transition_instances(config, seed):
    """Yield (label, Hamiltonian) pairs per the ensemble configuration."""
    if config.get("ensemble.classes", False):
        _, _, canonical = enumerate_cell_classes()
        for word in np.unique(canonical):
            yield f"class-{int(word)}", cell_from_word(int(word))
        return
    H_clean = _clean_hamiltonian(config)
    n_inst = config.get("ensemble.instances", 1)
    flips = config.get("channel.flips")
    for k in range(n_inst):
        rng = channel.stream(seed, 10, k)
        if flips is not None:
            H, _ = channel.sample_sector(H_clean, flips, rng)
        else:
            p = config.get("channel.p", [0.1])[0]
            H, _ = channel.corrupt(H_clean, p, rng)
        yield f"instance-{k}", H


def cmd_transitions(config, seed, out_dir):
    """Per-spin (or per-pair) sign-transition records over an ensemble."""
    grid = _temperature_grid(config)
    if len(grid) < 5:
        raise ConfigError("transition grid needs at least 5 points")
    engine = _engine(config)
    correlation = config.get("ensemble.correlation", False)
    rows = []
    for label, H in _transition_instances(config, seed):
        if correlation:
            curve = transitions.correlation_curve(
                H, grid, engine, pairs=list(H.graph.edges))
        else:
            curve = transitions.orientation_curve(H, grid, engine)
        for rec in transitions.find_transitions(curve):
            rows.append([
                label, str(rec.spin), rec.sigma_low,
                int(rec.excluded), len(rec.transition_temps),
                " ".join(repr(t) for t in rec.transition_temps),
            ])
    name = "correlation_transitions.csv" if correlation else "transitions.csv"
    _write_csv(out_dir / name,
               ["instance", "item", "sigma_low", "excluded",
                "n_transitions", "transition_temps"], rows)
    return [name]


def _plow_scatter(config, seed):
    """(t_trans, p_low) pairs per included spin across the ensemble."""
    grid = _temperature_grid(config)
    engine = _engine(config)
    n_run = config.get("plow.n_run", 1000)
    t_samp = _require(config, "plow.sampler_temperature")
    n_real = config.get("control.realizations", 0)
    spec = sa.ControlErrorSpec(config.get("control.sigma_h", 0.0),
                               config.get("control.sigma_j", 0.0))
    points = []
    for k, (label, H) in enumerate(_transition_instances(config, seed)):
        curve = transitions.orientation_curve(H, grid, engine)
        recs = transitions.find_transitions(curve)
        if n_real:
            rng = channel.stream(seed, 20, k)
            mags = np.array([
                engine.magnetization_curve(
                    sa.inject_control_error(H, spec, rng),
                    np.array([t_samp]))[0]
                for _ in range(n_real)
            ])
        else:
            mags = engine.magnetization_curve(H, np.array([t_samp]))
        for i, rec in enumerate(recs):
            if rec.excluded or len(rec.transition_temps) != 1:
                continue
            p_agree = 0.5 * (1.0 + rec.sigma_low * mags[:, i])
            p_low = float(np.mean(transitions.plow_model(p_agree, n_run)))
            points.append((rec.transition_temps[0], p_low))
    return points


def cmd_plow_fit(config, seed, out_dir):
    """P_low-vs-T_trans scatter plus a logistic transition fit."""
    points = _plow_scatter(config, seed)
    if len(points) < 3:
        raise ConfigError("too few transition points for a fit")
    t_trans = np.array([p[0] for p in points])
    p_low = np.array([p[1] for p in points])
    t0, width = transitions.fit_logistic(t_trans, p_low)
    _write_csv(out_dir / "plow.csv", ["t_trans", "p_low"],
               [[_fmt(float(a)), _fmt(float(b))] for a, b in points])
    (out_dir / "fit.json").write_text(json.dumps(
        {"center": t0, "width": width, "n_points": len(points)},
        indent=2) + "\n")
    return ["plow.csv", "fit.json"]


def cmd_sa_compare(config, seed, out_dir):
    """Annealer orientations vs equilibrium at checkpoint temperatures."""
    H = next(_transition_instances(config, seed))[1]
    schedule = sa.AnnealSchedule(
        t_start=config.get("sa.t_start", 10.0),
        t_end=config.get("sa.t_end", 1.405),
        total_updates=config.get("sa.updates", 1_000_000))
    n_runs = config.get("sa.runs", 1000)
    checkpoints = np.asarray(config.get(
        "sa.checkpoints", list(np.linspace(schedule.t_end, schedule.t_start, 8))))
    if "control.realizations" in config:
        spec = sa.ControlErrorSpec(config.get("control.sigma_h", 0.05),
                                   config.get("control.sigma_j", 0.03))
        H = sa.inject_control_error(H, spec, channel.stream(seed, 31))
    sweep = sa.sa_orientation_sweep(H, schedule, checkpoints, n_runs,
                                    channel.stream(seed, 30))
    engine = _engine(config)
    ref = engine.magnetization_curve(H, sweep.temperatures)
    band = 4.0 * np.sqrt(np.maximum(1.0 - ref ** 2, 0.0) / n_runs)
    rows = []
    onset = None
    for t_idx, T in enumerate(sweep.temperatures):
        for s_idx, spin in enumerate(sweep.items):
            dev = float(sweep.values[t_idx, s_idx] - ref[t_idx, s_idx])
            within = abs(dev) <= band[t_idx, s_idx]
            if not within:
                onset = max(onset or 0.0, float(T))
            rows.append([_fmt(float(T)), spin,
                         _fmt(float(sweep.values[t_idx, s_idx])),
                         _fmt(float(ref[t_idx, s_idx])),
                         _fmt(dev), _fmt(float(band[t_idx, s_idx])),
                         int(within)])
    _write_csv(out_dir / "deviation.csv",
               ["temperature", "spin", "sa_mean", "reference", "deviation",
                "band_4sigma", "within"], rows)
    summary = {
        "all_within_band": onset is None,
        "deviation_onset_temperature": onset,
        "n_runs": n_runs,
        "total_updates": schedule.total_updates,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return ["deviation.csv", "summary.json"]


_COMMANDS = {
    "ber": cmd_ber,
    "surface": cmd_surface,
    "transitions": cmd_transitions,
    "plow-fit": cmd_plow_fit,
    "sa-compare": cmd_sa_compare,
    "canonicalize": cmd_canonicalize,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="isingdec",
        description="Maximum-entropy vs maximum-likelihood Ising decoding runs")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", type=Path, default=None)
    args = parser.parse_args(argv)
    started = time.time()
    try:
        config = load_config(args.config)
        seed = args.seed if args.seed is not None else config.get("run.seed")
        if seed is None:
            raise ConfigError("seed is mandatory: pass --seed or set [run] seed")
        if seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        out_dir = args.out or Path(config.get("run.out", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs = _COMMANDS[args.command](config, seed, out_dir)
        if outputs:
            _write_manifest(out_dir, args.command, config, seed,
                            args.config.read_text(), outputs, started)
        return 0
    except (ConfigError, FormatError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except CapacityError as err:
        print(f"capacity error: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # internal failures must not masquerade as config
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

"""Flat ``key = value`` experiment configuration.

Recognised keys::

    n             matrix order (integer >= 2), required
    preset        bernoulli | shifted_two_point | rademacher | scaled_uniform | sparse_gnp
    p             preset parameter for bernoulli and shifted_two_point
    sigma         preset parameter for scaled_uniform
    c             preset parameter for sparse_gnp
    offdiag       explicit off-diagonal distribution (see below)
    diag          explicit diagonal distribution, defaults to "0:1"
    seed          master seed, unsigned 64-bit, default 0
    trials        number of trials, default 100
    t_grid        comma-separated ascending deviations
    statistics    comma-separated subset of the per-trial statistics
    lemma_checks  true | false
    method        auto | ql | lapack | lanczos
    name          free-form label, ignored by the runner
    out           output directory

A distribution is either ``uniform:lo,hi`` or a list of atoms
``value:prob,value:prob,...``. ``preset`` and ``offdiag``/``diag`` cannot be
combined. Blank lines and ``#`` comments are ignored.

Overrides passed alongside the file (command-line flags) replace the file's
values key by key, so a ``--seed`` flag always wins over ``seed`` in the file.
"""

from __future__ import annotations

import math
from pathlib import Path

from .ensembles import PRESETS, EntryDistribution, EnsembleSpec, InvalidSpecError, make_preset
from .experiments import DEFAULT_T_GRID, ExperimentConfig

__all__ = ["ConfigError", "KNOWN_KEYS", "parse_config", "parse_config_text", "parse_distribution"]

KNOWN_KEYS = (
    "n", "preset", "p", "sigma", "c", "offdiag", "diag", "seed", "trials", "t_grid",
    "statistics", "lemma_checks", "method", "name", "out",
)
_PRESET_PARAMS = ("p", "sigma", "c")


class ConfigError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def parse_distribution(text: str) -> EntryDistribution:
    text = text.strip()
    if text.startswith("uniform:"):
        lo, hi = (float(x) for x in text[len("uniform:"):].split(","))
        return EntryDistribution.uniform(lo, hi)
    atoms = []
    for part in text.split(","):
        v, p = part.split(":")
        atoms.append((float(v), float(p)))
    return EntryDistribution.from_atoms(atoms)


def _read_pairs(text: str, problems: list[str]) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
        elif key in pairs:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        else:
            pairs[key] = value
    return pairs


def _number(pairs, key, kind, problems, default=None):
    if key not in pairs:
        return default
    raw = pairs[key]
    try:
        if kind is int:
            value = int(raw)
        else:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
    except (TypeError, ValueError):
        problems.append(f"{key}: cannot parse {raw!r} as {kind.__name__}")
        return None
    return value


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    problems: list[str] = []
    pairs = _read_pairs(text, problems)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            problems.append(f"unknown override {key!r}")
            continue
        pairs[key] = ",".join(map(str, value)) if isinstance(value, (list, tuple)) else str(value)

    n = _number(pairs, "n", int, problems)
    if "n" not in pairs:
        problems.append("missing required key 'n'")
    elif n is not None and n < 2:
        problems.append(f"n must be an integer >= 2, got {n}")
    seed = _number(pairs, "seed", int, problems, default=0)
    if seed is not None and not 0 <= seed < 2**64:
        problems.append(f"seed {seed} is not an unsigned 64-bit integer")
    trials = _number(pairs, "trials", int, problems, default=100)
    if trials is not None and trials < 1:
        problems.append(f"trials must be >= 1, got {trials}")
    params = {k: _number(pairs, k, float, problems) for k in _PRESET_PARAMS if k in pairs}
    if "p" in params and params["p"] is not None and not 0.0 <= params["p"] <= 1.0:
        problems.append(f"p out of range [0,1]: {params['p']!r}")

    explicit = [k for k in ("offdiag", "diag") if k in pairs]
    if "preset" in pairs and explicit:
        problems.append(f"mutually exclusive keys: preset and {', '.join(explicit)}")
    elif "preset" not in pairs and "offdiag" not in pairs:
        problems.append("no ensemble given: set preset or offdiag")
    if "preset" in pairs and pairs["preset"] not in PRESETS:
        problems.append(f"unknown preset {pairs['preset']!r}; known: {', '.join(PRESETS)}")
    if "preset" not in pairs and params:
        problems.append(f"keys {', '.join(params)} only apply with a preset")

    dists = {}
    for key in explicit:
        try:
            dists[key] = parse_distribution(pairs[key])
        except ValueError:
            problems.append(f"{key}: cannot parse distribution {pairs[key]!r}")

    try:
        t_grid = (tuple(float(x) for x in pairs["t_grid"].split(",") if x.strip())
                  if "t_grid" in pairs else DEFAULT_T_GRID)
    except ValueError:
        problems.append(f"t_grid: cannot parse {pairs['t_grid']!r}")
        t_grid = DEFAULT_T_GRID
    statistics = (tuple(s.strip() for s in pairs["statistics"].split(",") if s.strip())
                  if "statistics" in pairs else ("lambda1",))
    flag = pairs.get("lemma_checks", "false").lower()
    if flag not in ("true", "false", "1", "0", "yes", "no"):
        problems.append(f"lemma_checks: expected true or false, got {flag!r}")
    lemma_checks = flag in ("true", "1", "yes")

    spec = None
    if not problems:
        try:
            if "preset" in pairs:
                spec = make_preset(pairs["preset"], n, seed, **params)
            else:
                diag = dists.get("diag", EntryDistribution.constant(0.0))
                spec = EnsembleSpec(n, dists["offdiag"], diag, seed)
        except InvalidSpecError as exc:
            problems += exc.violations
    if spec is None:
        raise ConfigError(problems)

    out = Path(pairs["out"]) if "out" in pairs else None
    config = ExperimentConfig(
        spec=spec,
        trials=trials,
        t_grid=t_grid,
        statistics=statistics,
        lemma_checks=lemma_checks,
        output_dir=out,
        method=pairs.get("method", "auto"),
    )
    problems = config.violations()
    if problems:
        raise ConfigError(problems)
    return config


def parse_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse the file at ``path`` (or only ``overrides`` when path is None)."""
    text = ""
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([f"config file not found: {path}"])
        text = path.read_text()
    return parse_config_text(text, overrides)

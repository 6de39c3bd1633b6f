"""Flat key-value experiment configuration ("key = value", "#" comments)."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .graphs import DependencyGraph, parse_edge_list

_BETA_PATTERN = re.compile(
    r"^\s*([0-9.eE+-]+)\s*\*\s*log\(\s*([0-9.eE+-]+)\s*\*?\s*t\s*\)\s*$"
)


def parse_beta(text: str):
    """A beta schedule: either a constant or "a*log(b t)" (natural log)."""
    text = text.strip()
    m = _BETA_PATTERN.match(text)
    if m:
        a, b = float(m.group(1)), float(m.group(2))
        return lambda t: max(0.0, a * math.log(b * t))
    try:
        const = float(text)
    except ValueError:
        raise ConfigError(f"cannot parse beta schedule {text!r}; "
                          "use a number or 'a*log(b t)'") from None
    if const < 0:
        raise ConfigError("constant beta must be nonnegative")
    return lambda t: const


def parse_grid_spec(text: str) -> np.ndarray:
    """Candidate grid: "low:high:count" (log-spaced) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {text!r} must be low:high:count")
        low, high, count = float(parts[0]), float(parts[1]), int(parts[2])
        if low <= 0 or high <= low or count < 1:
            raise ConfigError(f"bad grid spec {text!r}")
        return np.geomspace(low, high, count)
    values = np.array([float(tok) for tok in text.split(",") if tok.strip()])
    if values.size == 0 or np.any(values <= 0):
        raise ConfigError(f"bad grid list {text!r}")
    return values


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    """Everything the command-line harness needs for one experiment."""

    preset: str = "star"
    graph_file: str = ""
    dim: int = 6
    grid_rows: int = 3
    grid_cols: int = 3
    grid_size: int = 10
    domain_low: float = 0.0
    domain_high: float = 1.0
    modes: tuple = ("overlap", "no_overlap", "oracle", "random")
    runs: int = 10
    n_init: int = 10
    n_iter: int = 60
    n_cyc: int = 30
    n_gibbs: int = 200
    beta_spec: str = "0.5*log(2t)"
    max_eval: int = 1000
    noise_variance: float = 0.01
    true_lengthscale: float = 0.3
    lengthscale_grid: str = "0.1:1.0:8"
    edge_prior: float = 0.5
    seed: int = 0
    out_dir: str = "out"
    max_treewidth: int = 8
    max_table_size: int = 1_000_000
    analysis_observations: int = 200
    analysis_scan_points: int = 1000
    info_gain_steps: int = 20
    info_gain_candidates: int = 100
    _beta: object = field(default=None, repr=False)

    KEYS = {
        "preset": ("preset", str),
        "graph_file": ("graph_file", str),
        "D": ("dim", int),
        "grid_rows": ("grid_rows", int),
        "grid_cols": ("grid_cols", int),
        "grid_size": ("grid_size", int),
        "domain_low": ("domain_low", float),
        "domain_high": ("domain_high", float),
        "modes": ("modes", "modes"),
        "runs": ("runs", int),
        "N_init": ("n_init", int),
        "N_iter": ("n_iter", int),
        "N_cyc": ("n_cyc", int),
        "N_Gibbs": ("n_gibbs", int),
        "beta": ("beta_spec", str),
        "max_eval": ("max_eval", int),
        "noise_variance": ("noise_variance", float),
        "true_lengthscale": ("true_lengthscale", float),
        "lengthscale_grid": ("lengthscale_grid", str),
        "edge_prior": ("edge_prior", float),
        "seed": ("seed", int),
        "out": ("out_dir", str),
        "max_treewidth": ("max_treewidth", int),
        "max_table_size": ("max_table_size", int),
        "analysis_observations": ("analysis_observations", int),
        "analysis_scan_points": ("analysis_scan_points", int),
        "info_gain_steps": ("info_gain_steps", int),
        "info_gain_candidates": ("info_gain_candidates", int),
    }

    @classmethod
    def from_text(cls, text: str, base_dir: str = ".") -> "ExperimentConfig":
        pairs = parse_key_values(text)
        cfg = cls()
        for key, value in pairs.items():
            if key not in cls.KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            attr, kind = cls.KEYS[key]
            if kind == "modes":
                modes = tuple(tok.strip() for tok in value.split(",") if tok.strip())
                bad = [m for m in modes if m not in ("overlap", "no_overlap", "oracle", "random")]
                if bad:
                    raise ConfigError(f"unknown modes {bad}")
                if not modes:
                    raise ConfigError("modes list is empty")
                setattr(cfg, attr, modes)
            else:
                try:
                    setattr(cfg, attr, kind(value))
                except ValueError:
                    raise ConfigError(f"bad value for {key}: {value!r}") from None
        cfg.validate(base_dir)
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        return cls.from_text(text, base_dir=os.path.dirname(os.path.abspath(path)))

    def validate(self, base_dir: str = "."):
        if self.preset not in ("star", "grid", "file"):
            raise ConfigError(f"preset must be star, grid or file, got {self.preset!r}")
        if self.preset == "file":
            if not self.graph_file:
                raise ConfigError("preset=file needs graph_file")
            path = self.graph_path(base_dir)
            if not os.path.exists(path):
                raise ConfigError(f"graph file {path} does not exist")
            object.__setattr__(self, "graph_file", path)
        if self.preset == "star" and self.dim < 2:
            raise ConfigError("star preset needs D >= 2")
        for name, low in (("grid_size", 2), ("runs", 1), ("n_init", 1), ("n_iter", 1),
                          ("n_cyc", 1), ("n_gibbs", 1), ("seed", 0)):
            if getattr(self, name) < low:
                raise ConfigError(f"{name} must be at least {low}")
        if not (self.domain_low < self.domain_high):
            raise ConfigError("domain_low must be below domain_high")
        if self.noise_variance <= 0:
            raise ConfigError("noise_variance must be positive")
        if self.true_lengthscale <= 0:
            raise ConfigError("true_lengthscale must be positive")
        if not 0 < self.edge_prior < 1:
            raise ConfigError("edge_prior must lie strictly inside (0, 1)")
        self._beta = parse_beta(self.beta_spec)
        parse_grid_spec(self.lengthscale_grid)

    def graph_path(self, base_dir: str) -> str:
        if os.path.isabs(self.graph_file):
            return self.graph_file
        return os.path.join(base_dir, self.graph_file)

    # -- derived objects -----------------------------------------------------

    def beta(self):
        if self._beta is None:
            self._beta = parse_beta(self.beta_spec)
        return self._beta

    def true_graph(self) -> DependencyGraph:
        if self.preset == "star":
            return DependencyGraph.star(self.dim)
        if self.preset == "grid":
            return DependencyGraph.lattice(self.grid_rows, self.grid_cols)
        with open(self.graph_file, "r", encoding="utf-8") as fh:
            graph, _ = parse_edge_list(fh.read())
        return graph

    def effective_dim(self) -> int:
        if self.preset == "grid":
            return self.grid_rows * self.grid_cols
        if self.preset == "file":
            return self.true_graph().dim
        return self.dim

    def lengthscale_grids(self, dim: int) -> list:
        grid = parse_grid_spec(self.lengthscale_grid)
        return [grid.copy() for _ in range(dim)]

    def overrides(self, seed=None, out_dir=None, runs=None, modes=None) -> "ExperimentConfig":
        if seed is not None:
            self.seed = seed
        if out_dir is not None:
            self.out_dir = out_dir
        if runs is not None:
            if runs < 1:
                raise ConfigError("runs must be at least 1")
            self.runs = runs
        if modes is not None:
            bad = [m for m in modes if m not in ("overlap", "no_overlap", "oracle", "random")]
            if bad:
                raise ConfigError(f"unknown modes {bad}")
            self.modes = tuple(modes)
        return self

"""Experiment configuration files (TOML) and their validation."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .measures import FiniteMeasure, MuKFamily, lazy, simple_random_walk
from .spaces import FreeGroupTree, FuchsianHalfPlane, Mobius, SpaceModel, schottky_pair
from .walker import WalkConfig

SECTIONS = {
    "backend": {"kind", "rank", "generators", "preset", "trace", "visual_base", "delta"},
    "measure": {"kind", "hold", "support", "masses"},
    "mu_k": {"gamma0", "k_grid"},
    "walk": {"steps", "trajectories", "stride", "resolution_floor", "boundary_depth", "boundary_steps",
             "boundary_trajectories", "burn_in", "threads"},
    "estimators": None,   # free-form numeric parameters, validated by each experiment
    "thresholds": None,
    "output": {"dir"},
}
TOP_LEVEL = {"seed", "experiment", "title"}


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    current = None
    header = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if current == section:
                header = no
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*=", line):
            return no
    return header


@dataclass
class ExperimentConfig:
    seed: int
    experiment: str
    sections: dict
    source: str = "<string>"
    text: str = ""
    resolved: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def title(self) -> str:
        return self.sections.get("title", "")

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.sections

    def get(self, section: str, key: str, default=None):
        """Value from the file, else ``default``; either way it is recorded as resolved."""
        value = self.section(section).get(key, default)
        self.resolved.setdefault(section, {})[key] = value
        return value

    def error(self, message: str, section: str | None = None, key: str | None = None) -> ConfigError:
        return ConfigError(f"{self.source}: {message}", _line_of(self.text, section, key))

    def config_hash(self) -> str:
        payload = json.dumps({"seed": self.seed, "experiment": self.experiment, "sections": self.sections},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        cache, self.cache = self.cache, {}
        out = copy.deepcopy(self)
        self.cache = out.cache = cache
        out.seed = _check_seed(seed, out)
        return out

    def walk_config(self, threads: int | None = None, **overrides) -> WalkConfig:
        kw = {
            "steps": self.get("walk", "steps", 1000),
            "trajectories": self.get("walk", "trajectories", 1000),
            "stride": self.get("walk", "stride", 1),
            "resolution_floor": self.get("walk", "resolution_floor", 8.0),
            "boundary_depth": self.get("walk", "boundary_depth", 32),
            "boundary_steps": self.get("walk", "boundary_steps", None),
            # not recorded as resolved: results do not depend on the thread count
            "threads": threads if threads is not None else self.section("walk").get("threads", 1),
            "seed": self.seed,
        }
        kw.update(overrides)
        try:
            return WalkConfig(**kw)
        except ValueError as exc:
            key = str(exc).split()[0]
            raise self.error(str(exc), "walk", key if key in kw else None) from None


def _check_seed(seed, cfg=None) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        msg = f"seed must be an integer in [0, 2^64), got {seed!r}"
        if cfg is not None:
            raise cfg.error(msg, None, "seed")
        raise ConfigError(msg)
    return seed


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}", getattr(exc, "lineno", None)) from None
    probe = ExperimentConfig(0, "", data, source, text)
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise probe.error(f"unknown section [{key}]", key)
            allowed = SECTIONS[key]
            for sub in value:
                if allowed is not None and sub not in allowed:
                    raise probe.error(f"unknown key {sub!r} in [{key}]", key, sub)
        elif key not in TOP_LEVEL:
            raise probe.error(f"unknown top-level key {key!r}", None, key)
    if "seed" not in data:
        raise ConfigError(f"{source}: missing required top-level 'seed' (no wall-clock default)", 1)
    if "experiment" not in data:
        raise ConfigError(f"{source}: missing required top-level 'experiment'", 1)
    cfg = ExperimentConfig(0, str(data["experiment"]), data, source, text)
    cfg.seed = _check_seed(data["seed"], cfg)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def validate(cfg: ExperimentConfig) -> None:
    """Build every object the config names, so errors surface before any output."""
    model = build_model(cfg)
    base = build_measure(cfg, model)
    if cfg.has("mu_k"):
        build_family(cfg, model, base)
    for key, value in cfg.section("walk").items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise cfg.error(f"walk.{key} must be a number", "walk", key)
    for sec in ("estimators", "thresholds"):
        for key, value in cfg.section(sec).items():
            if isinstance(value, bool) or not isinstance(value, (int, float, list, str)):
                raise cfg.error(f"{sec}.{key} must be a number, list or string", sec, key)
    wc = cfg.walk_config()
    cap = getattr(model, "max_steps", None)
    if cap is not None:
        for key in ("steps", "boundary_steps"):
            n = getattr(wc, key)
            if n is not None and n > cap:
                raise cfg.error(f"walk.{key} = {n} exceeds the half-plane cap of {cap} steps", "walk", key)
    cfg.resolved.clear()


def build_model(cfg: ExperimentConfig) -> SpaceModel:
    if "model" not in cfg.cache:
        cfg.cache["model"] = _build_model(cfg)
    return cfg.cache["model"]


def _build_model(cfg: ExperimentConfig) -> SpaceModel:
    b = cfg.section("backend")
    kind = b.get("kind")
    a = b.get("visual_base", math.e)
    if not isinstance(a, (int, float)) or not a > 1:
        raise cfg.error("backend.visual_base must be a number > 1", "backend", "visual_base")
    if kind == "tree":
        rank = b.get("rank", 2)
        if not isinstance(rank, int) or rank < 1:
            raise cfg.error("backend.rank must be a positive integer", "backend", "rank")
        return FreeGroupTree(rank, visual_base=float(a))
    if kind == "halfplane":
        if "generators" in b:
            try:
                gens = [Mobius.from_rows(g) for g in b["generators"]]
            except (TypeError, ValueError) as exc:
                raise cfg.error(f"bad generator matrix: {exc}", "backend", "generators") from None
        elif b.get("preset", "schottky") == "schottky":
            try:
                gens = schottky_pair(float(b.get("trace", 4.0)))
            except ValueError as exc:
                raise cfg.error(str(exc), "backend", "trace") from None
        else:
            raise cfg.error(f"unknown half-plane preset {b.get('preset')!r}", "backend", "preset")
        delta = b.get("delta")
        return FuchsianHalfPlane(gens, delta=None if delta is None else float(delta), visual_base=float(a))
    raise cfg.error(f"backend.kind must be 'tree' or 'halfplane', got {kind!r}", "backend", "kind")


def _element(cfg, model, spec, section, key):
    try:
        return model.parse_element(spec)
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"cannot read group element {spec!r}: {exc}", section, key) from None


def build_measure(cfg: ExperimentConfig, model: SpaceModel) -> FiniteMeasure:
    m = cfg.section("measure")
    kind = m.get("kind", "simple")
    if kind == "simple":
        return simple_random_walk(model)
    if kind == "lazy":
        hold = m.get("hold", 0.5)
        if not isinstance(hold, (int, float)) or not 0 < hold < 1:
            raise cfg.error("measure.hold must lie in (0, 1)", "measure", "hold")
        return lazy(simple_random_walk(model), model, float(hold))
    if kind == "explicit":
        support, masses = m.get("support"), m.get("masses")
        if not isinstance(support, list) or not isinstance(masses, list) or len(support) != len(masses):
            raise cfg.error("measure.support and measure.masses must be lists of equal length", "measure", "support")
        elems = [_element(cfg, model, s, "measure", "support") for s in support]
        try:
            return FiniteMeasure.from_pairs(zip(elems, masses))
        except (TypeError, ValueError) as exc:
            raise cfg.error(f"invalid measure: {exc}", "measure", "masses") from None
    raise cfg.error(f"measure.kind must be simple, lazy or explicit, got {kind!r}", "measure", "kind")


def build_family(cfg: ExperimentConfig, model: SpaceModel, base: FiniteMeasure) -> MuKFamily:
    mk = cfg.section("mu_k")
    g0 = _element(cfg, model, mk.get("gamma0", "a"), "mu_k", "gamma0")
    k_grid(cfg)
    try:
        return MuKFamily(base, g0, model)
    except ValueError as exc:
        raise cfg.error(str(exc), "mu_k", "gamma0") from None


def k_grid(cfg: ExperimentConfig) -> list[int]:
    grid = cfg.section("mu_k").get("k_grid", [0, 1, 2, 4, 8, 16, 32])
    if not isinstance(grid, list) or not all(isinstance(k, int) and k >= 0 for k in grid):
        raise cfg.error("mu_k.k_grid must be a list of non-negative integers", "mu_k", "k_grid")
    if grid != sorted(grid) or len(set(grid)) != len(grid):
        raise cfg.error("mu_k.k_grid must be strictly ascending", "mu_k", "k_grid")
    return grid

"""Training-mixture accounting: category counts, duplication, reasoning share
and token budgets, plus the TOML config that feeds ``vlkit mix``.

Config schema::

    [mixture]                       # optional table
    default_avg_tokens = 3001.6     # tokens/sample when a category sets none
    target_reasoning_share = 0.2
    tolerance = 0.05
    weighting = "samples"           # or "tokens"

    [[category]]                    # one table per category
    name = "math"
    base_count = 150000
    duplication = 3                 # default 1
    reasoning = true                # default false
    avg_tokens = 900.0              # optional
    source = "math.jsonl"           # optional; records drawn by `vlkit mix --draw`
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InputError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# average tokens per sample implied by the stage-2 totals (188.5B tokens / 62.8M samples)
STAGE2_AVG_TOKENS = 188.5e9 / 62.8e6


@dataclasses.dataclass(frozen=True)
class CategorySpec:
    name: str
    base_count: int
    duplication: int = 1
    reasoning: bool = False
    avg_tokens: Optional[float] = None
    source: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.base_count, int) or isinstance(self.base_count, bool) or self.base_count < 0:
            raise InputError(f"{self.name}: base_count must be a non-negative integer")
        if not isinstance(self.duplication, int) or isinstance(self.duplication, bool) or self.duplication < 1:
            raise InputError(f"{self.name}: duplication must be an integer >= 1")
        if self.avg_tokens is not None and not (math.isfinite(self.avg_tokens) and self.avg_tokens >= 0):
            raise InputError(f"{self.name}: avg_tokens must be a finite non-negative number")

    @property
    def samples(self) -> int:
        return self.base_count * self.duplication

    def to_dict(self) -> dict:
        d = {"name": self.name, "base_count": self.base_count, "duplication": self.duplication,
             "reasoning": self.reasoning}
        if self.avg_tokens is not None:
            d["avg_tokens"] = self.avg_tokens
        if self.source is not None:
            d["source"] = self.source
        return d


@dataclasses.dataclass(frozen=True)
class MixtureManifest:
    specs: tuple
    total_samples: int
    reasoning_share: float
    total_tokens: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "categories": [dict(s.to_dict(), samples=s.samples) for s in self.specs],
            "total_samples": self.total_samples,
            "reasoning_share": self.reasoning_share,
            "total_tokens": self.total_tokens,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureManifest":
        specs = []
        for c in d["categories"]:
            c = {k: v for k, v in c.items() if k != "samples"}
            specs.append(CategorySpec(**c))
        m = plan_mixture(specs)
        if m.total_samples != d["total_samples"]:
            raise InputError("manifest total_samples does not match its categories")
        return dataclasses.replace(m, total_tokens=d.get("total_tokens"))


def plan_mixture(specs: Sequence[CategorySpec], default_avg_tokens: Optional[float] = None) -> MixtureManifest:
    """Sum category contributions; token total is filled when it can be estimated."""
    specs = tuple(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InputError("category names must be unique")
    total = sum(s.samples for s in specs)
    reasoning = sum(s.samples for s in specs if s.reasoning)
    share = reasoning / total if total else 0.0
    m = MixtureManifest(specs, total, share)
    if default_avg_tokens is not None or all(s.avg_tokens is not None for s in specs):
        m = dataclasses.replace(m, total_tokens=estimate_tokens(m, default_avg_tokens))
    return m


def _avg(spec: CategorySpec, default_avg_tokens) -> float:
    if spec.avg_tokens is not None:
        return spec.avg_tokens
    if default_avg_tokens is None:
        raise ConfigError(f"category {spec.name!r} has no avg_tokens and no default was given")
    return default_avg_tokens


def estimate_tokens(manifest: MixtureManifest, default_avg_tokens: Optional[float] = None) -> float:
    """Σ base_count · duplication · avg_tokens."""
    return float(sum(s.samples * _avg(s, default_avg_tokens) for s in manifest.specs))


@dataclasses.dataclass(frozen=True)
class ShareReport:
    share: float
    within: bool
    target: float
    tol: float
    weighting: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check_reasoning_share(
    manifest: MixtureManifest,
    target: float = 0.2,
    tol: float = 0.05,
    weighting: str = "samples",
    default_avg_tokens: Optional[float] = None,
) -> ShareReport:
    """Compare the reasoning share with ``target``; ``within`` iff ``|share - target| <= tol``.

    ``weighting="tokens"`` weighs each category by its estimated token count
    instead of its sample count.
    """
    if manifest.total_samples <= 0:
        raise InputError("cannot check the reasoning share of an empty mixture")
    if weighting == "samples":
        share = manifest.reasoning_share
    elif weighting == "tokens":
        weights = [(s.samples * _avg(s, default_avg_tokens), s.reasoning) for s in manifest.specs]
        total = sum(w for w, _ in weights)
        if total <= 0:
            raise InputError("mixture has zero estimated tokens")
        share = sum(w for w, r in weights if r) / total
    else:
        raise ConfigError(f"weighting must be 'samples' or 'tokens', got {weighting!r}")
    # absorb float noise such as 0.25 - 0.2 = 0.04999999999999999 vs 0.05
    within = abs(share - target) <= tol + 1e-12
    return ShareReport(share, within, target, tol, weighting)


@dataclasses.dataclass(frozen=True)
class MixtureConfig:
    specs: tuple
    default_avg_tokens: Optional[float] = None
    target_reasoning_share: float = 0.2
    tolerance: float = 0.05
    weighting: str = "samples"


_MIX_KEYS = {"default_avg_tokens", "target_reasoning_share", "tolerance", "weighting"}
_CAT_KEYS = {f.name for f in dataclasses.fields(CategorySpec)}


def parse_mixture_config(data: dict) -> MixtureConfig:
    unknown = set(data) - {"mixture", "category"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    mix = data.get("mixture", {})
    bad = set(mix) - _MIX_KEYS
    if bad:
        raise ConfigError(f"unknown [mixture] keys: {sorted(bad)}")
    specs = []
    for i, cat in enumerate(data.get("category", [])):
        bad = set(cat) - _CAT_KEYS
        if bad:
            raise ConfigError(f"category {i}: unknown keys {sorted(bad)}")
        if "name" not in cat or "base_count" not in cat:
            raise ConfigError(f"category {i}: 'name' and 'base_count' are required")
        try:
            specs.append(CategorySpec(**cat))
        except (InputError, TypeError) as e:
            raise ConfigError(f"category {i}: {e}") from e
    return MixtureConfig(tuple(specs), **mix)


def load_mixture_config(path) -> MixtureConfig:
    try:
        with open(path, "rb") as fp:
            data = tomllib.load(fp)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_mixture_config(data)


def draw_indices(pool_size: int, spec: CategorySpec, seed: int) -> np.ndarray:
    """Pick ``base_count`` distinct indices from a pool, then repeat them ``duplication`` times."""
    if spec.base_count > pool_size:
        raise InputError(f"category {spec.name!r} wants {spec.base_count} records but the pool has {pool_size}")
    rng = np.random.default_rng([seed, *spec.name.encode("utf-8")])
    picked = np.sort(rng.choice(pool_size, size=spec.base_count, replace=False))
    return np.tile(picked, spec.duplication)


def draw_samples(pools: dict, manifest: MixtureManifest, seed: int) -> list:
    """Materialize a manifest from in-memory record pools keyed by category name."""
    out = []
    for spec in manifest.specs:
        if spec.name not in pools:
            raise InputError(f"no record pool for category {spec.name!r}")
        pool = pools[spec.name]
        out.extend(pool[i] for i in draw_indices(len(pool), spec, seed))
    return out


def read_manifest(path) -> MixtureManifest:
    return MixtureManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

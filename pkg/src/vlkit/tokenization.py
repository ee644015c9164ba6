"""Visual token planning for arbitrary-resolution images.

Four strategies are supported:

* ``dynres``: resize to a patch-aligned grid whose patch count lies in
  ``[min_patches, max_patches]`` with the least aspect distortion.
* ``dyns2``: resize to an ``a x b`` arrangement of square tiles with the
  least aspect distortion, every tile encoded at every S2 scale.
* ``multicrop``: cut (possibly overlapping) square crops from the image,
  downscaling first when the crop count would exceed the token budget.
* ``multicrop-s2``: as ``multicrop`` with larger crops, each processed at
  several scales.

All crop geometry is expressed in *working space*, i.e. in pixels of the
resized image (``PatchPlan.resized_size``). ``map_coords`` handles the
conversion from source pixels.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InputError, OutOfCropError

# Default token budgets per strategy.
DEFAULT_MAX_TOKENS = {
    "dynres": 3600,
    "dyns2": 3096,
    "multicrop": 3096,
    "multicrop-s2": 2048,
}
DEFAULT_TILE_PX = {"dyns2": 384, "multicrop": 384, "multicrop-s2": 1536}
BASE_TILE_PX = 384

_NORM_EPS = 1e-9


class Strategy(str, enum.Enum):
    DYNAMIC_RES = "dynres"
    DYNAMIC_S2 = "dyns2"
    MULTI_CROP = "multicrop"
    MULTI_CROP_S2 = "multicrop-s2"

    @property
    def tiled(self) -> bool:
        return self is not Strategy.DYNAMIC_RES


@dataclasses.dataclass(frozen=True)
class StrategyConfig:
    """Parameters for one tokenization strategy.

    ``None`` fields are filled from per-strategy defaults: ``tile_px`` is 384
    (1536 for ``multicrop-s2``), ``tokens_per_tile`` is ``(384 / patch_px)**2``,
    ``max_tokens`` follows the budgets in ``DEFAULT_MAX_TOKENS`` and
    ``max_patches`` equals ``max_tokens``.
    """

    strategy: Strategy = Strategy.DYNAMIC_RES
    patch_px: int = 16
    tile_px: Optional[int] = None
    tokens_per_tile: Optional[int] = None
    max_tokens: Optional[int] = None
    min_patches: int = 1
    max_patches: Optional[int] = None
    s2_scales: tuple = (1, 2)
    pad_value: int = 128

    def __post_init__(self):
        try:
            strategy = Strategy(self.strategy)
        except ValueError:
            raise ConfigError(f"unknown strategy {self.strategy!r}") from None
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("strategy", strategy)
        if not _is_pos_int(self.patch_px):
            raise ConfigError("patch_px must be a positive integer")
        if self.tile_px is None:
            set_("tile_px", DEFAULT_TILE_PX.get(strategy.value, BASE_TILE_PX))
        if self.tokens_per_tile is None:
            set_("tokens_per_tile", max(1, (BASE_TILE_PX // self.patch_px) ** 2))
        if self.max_tokens is None:
            set_("max_tokens", DEFAULT_MAX_TOKENS[strategy.value])
        if self.max_patches is None:
            set_("max_patches", self.max_tokens)
        set_("s2_scales", tuple(int(s) for s in self.s2_scales))

        for name in ("tile_px", "tokens_per_tile", "max_tokens", "min_patches", "max_patches"):
            if not _is_pos_int(getattr(self, name)):
                raise ConfigError(f"{name} must be a positive integer")
        if self.tile_px % self.patch_px:
            raise ConfigError(f"tile_px {self.tile_px} is not a multiple of patch_px {self.patch_px}")
        if self.min_patches > self.max_patches:
            raise ConfigError(
                f"min_patches {self.min_patches} exceeds max_patches {self.max_patches}"
            )
        if strategy.tiled and self.max_tokens < self.tokens_per_tile:
            raise ConfigError(
                f"max_tokens {self.max_tokens} is below tokens_per_tile {self.tokens_per_tile}"
            )
        if not self.s2_scales or any(s < 1 for s in self.s2_scales):
            raise ConfigError("s2_scales must be a non-empty list of positive integers")
        if not 0 <= self.pad_value <= 255:
            raise ConfigError("pad_value must be a grayscale byte")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["strategy"] = self.strategy.value
        d["s2_scales"] = list(self.s2_scales)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StrategyConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclasses.dataclass(frozen=True)
class CropSpec:
    offset: tuple
    size: tuple
    pad: tuple = (0, 0)

    @property
    def content_size(self) -> tuple:
        return (self.size[0] - self.pad[0], self.size[1] - self.pad[1])

    def to_dict(self) -> dict:
        return {"offset": list(self.offset), "size": list(self.size), "pad": list(self.pad)}

    @classmethod
    def from_dict(cls, d: dict) -> "CropSpec":
        return cls(tuple(d["offset"]), tuple(d["size"]), tuple(d.get("pad", (0, 0))))


@dataclasses.dataclass(frozen=True)
class PatchPlan:
    config: StrategyConfig
    source_size: tuple
    resized_size: tuple
    grid: tuple
    crops: tuple = ()
    scales: tuple = ()
    token_count: int = 0

    @property
    def strategy(self) -> Strategy:
        return self.config.strategy

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "source_size": list(self.source_size),
            "resized_size": list(self.resized_size),
            "grid": list(self.grid),
            "crops": [c.to_dict() for c in self.crops],
            "scales": list(self.scales),
            "token_count": self.token_count,
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchPlan":
        cfg = d.get("config") or {"strategy": d["strategy"]}
        return cls(
            config=StrategyConfig.from_dict(cfg),
            source_size=tuple(d["source_size"]),
            resized_size=tuple(d["resized_size"]),
            grid=tuple(d["grid"]),
            crops=tuple(CropSpec.from_dict(c) for c in d.get("crops", [])),
            scales=tuple(d.get("scales", [])),
            token_count=int(d["token_count"]),
        )


@dataclasses.dataclass(frozen=True)
class NormPoint:
    x: float
    y: float

    def __post_init__(self):
        for v in (self.x, self.y):
            if not (0.0 <= v <= 1.0):
                raise InputError(f"normalized coordinate {v} outside [0, 1]")

    def __iter__(self):
        return iter((self.x, self.y))


@dataclasses.dataclass(frozen=True)
class NormRect:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for v in (self.x, self.y, self.w, self.h):
            if not (0.0 <= v <= 1.0):
                raise InputError(f"normalized coordinate {v} outside [0, 1]")
        if self.x + self.w > 1.0 + _NORM_EPS or self.y + self.h > 1.0 + _NORM_EPS:
            raise InputError("normalized rect extends past the image edge")

    def __iter__(self):
        return iter((self.x, self.y, self.w, self.h))

    def contains(self, x: float, y: float) -> bool:
        return self.x <= x <= self.x + self.w and self.y <= y <= self.y + self.h


def _is_pos_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 1


def _check_size(W, H):
    if not (_is_pos_int(W) and _is_pos_int(H)):
        raise InputError(f"image size must be positive integers, got {W}x{H}")


def _expect(cfg: StrategyConfig, *allowed: Strategy):
    if cfg.strategy not in allowed:
        raise ConfigError(f"strategy {cfg.strategy.value} not valid here")


def _aspect_key(cols, rows, W, H):
    # max/min of the cross products is monotone in |ln((cols/rows) * (H/W))|
    # and is tie-exact: equal rationals round to equal doubles.
    a, b = cols * H, rows * W
    return max(a, b) / min(a, b)


def plan_dynamic_resolution(W: int, H: int, cfg: StrategyConfig) -> PatchPlan:
    """Pick the patch grid with the least aspect distortion within the patch budget.

    Ties are broken by closeness of the patch area to the image's native patch
    area (clamped to the budget), then by the wider grid.
    """
    _expect(cfg, Strategy.DYNAMIC_RES)
    _check_size(W, H)
    p = cfg.patch_px
    lo = cfg.min_patches
    hi = min(cfg.max_patches, cfg.max_tokens)
    if lo > hi:
        raise ConfigError(f"min_patches {lo} exceeds the effective maximum {hi}")

    gw = np.arange(1, hi + 1, dtype=np.int64)
    gh_lo = -(-lo // gw)
    gh_hi = hi // gw
    ok = gh_lo <= gh_hi
    gw, gh_lo, gh_hi = gw[ok], gh_lo[ok], gh_hi[ok]
    # distortion is unimodal in gh for fixed gw, so only the two integers
    # bracketing the ideal height can win
    ideal = gw * (H / W)
    cand_w = np.concatenate([gw, gw])
    cand_h = np.concatenate(
        [np.clip(np.floor(ideal), gh_lo, gh_hi), np.clip(np.ceil(ideal), gh_lo, gh_hi)]
    ).astype(np.int64)

    a, b = cand_w * H, cand_h * W
    distortion = np.maximum(a, b) / np.minimum(a, b)
    # area gap in units of pixels^2 / patch^2 scaled by p^2 so it stays integral
    target = min(max(W * H, lo * p * p), hi * p * p)
    area_gap = np.abs(cand_w * cand_h * p * p - target)
    best = np.lexsort((-cand_w, area_gap, distortion))[0]
    grid = (int(cand_w[best]), int(cand_h[best]))
    return PatchPlan(
        config=cfg,
        source_size=(W, H),
        resized_size=(grid[0] * p, grid[1] * p),
        grid=grid,
        crops=(),
        scales=(1,),
        token_count=grid[0] * grid[1],
    )


def plan_dynamic_s2(W: int, H: int, cfg: StrategyConfig) -> PatchPlan:
    """Choose an ``a x b`` tile arrangement with at most ``max_tokens // tokens_per_tile`` tiles.

    Token count does not depend on the number of S2 scales; lower scales are
    concatenated on channels at the same token positions.
    """
    _expect(cfg, Strategy.DYNAMIC_S2)
    _check_size(W, H)
    t = cfg.tile_px
    max_tiles = cfg.max_tokens // cfg.tokens_per_tile

    # prefer the tile count nearest the image's own tile area: no upsampling
    # beyond native resolution when several grids are equally undistorted
    native = min(W * H, max_tiles * t * t)
    best = None
    for a in range(1, max_tiles + 1):
        for b in range(1, max_tiles // a + 1):
            key = (_aspect_key(a, b, W, H), abs(a * b * t * t - native), -a * b, -a)
            if best is None or key < best[0]:
                best = (key, a, b)
    _, a, b = best
    crops = tuple(
        CropSpec(offset=(i * t, j * t), size=(t, t)) for j in range(b) for i in range(a)
    )
    return PatchPlan(
        config=cfg,
        source_size=(W, H),
        resized_size=(a * t, b * t),
        grid=(a, b),
        crops=crops,
        scales=cfg.s2_scales,
        token_count=a * b * cfg.tokens_per_tile,
    )


def _downscaled_size(W, H, tile, max_crops) -> tuple:
    """Largest aspect-preserving ``floor(s*W), floor(s*H)`` with ``s <= 1`` within budget.

    For a crop layout ``nx x ny`` the feasible scales are ``s < (n*tile + 1) / dim``
    per axis, an open bound, so the dims are taken just below the supremum.
    """
    best = None
    for nx in range(1, max_crops + 1):
        ny = max_crops // nx
        if nx * tile >= W and ny * tile >= H:
            return (W, H)
        sup = min(Fraction(nx * tile + 1, W), Fraction(ny * tile + 1, H))
        if best is None or sup > best:
            best = sup
    w = math.ceil(best * W) - 1
    h = math.ceil(best * H) - 1
    return (max(1, w), max(1, h))


def _axis_crops(dim: int, tile: int) -> list:
    """(offset, pad) pairs covering ``[0, dim)`` with evenly spaced tiles."""
    if dim <= tile:
        return [(0, tile - dim)]
    n = -(-dim // tile)
    span = dim - tile
    # round-half-up of i * span / (n - 1) in integer arithmetic
    return [((2 * i * span + (n - 1)) // (2 * (n - 1)), 0) for i in range(n)]


def plan_multicrop(W: int, H: int, cfg: StrategyConfig) -> PatchPlan:
    """Cover the image with square crops, downscaling when over budget.

    The downscale factor is the largest ``s <= 1`` for which
    ``ceil(s*W/tile) * ceil(s*H/tile) * tokens_per_tile <= max_tokens``.
    Crops along an axis are evenly spaced, so neighbours overlap whenever the
    dimension is not an exact multiple of the tile size.
    """
    _expect(cfg, Strategy.MULTI_CROP, Strategy.MULTI_CROP_S2)
    _check_size(W, H)
    t = cfg.tile_px
    max_crops = cfg.max_tokens // cfg.tokens_per_tile
    rw, rh = _downscaled_size(W, H, t, max_crops)

    xs = _axis_crops(rw, t)
    ys = _axis_crops(rh, t)
    crops = tuple(
        CropSpec(offset=(ox, oy), size=(t, t), pad=(px, py)) for oy, py in ys for ox, px in xs
    )
    scales = cfg.s2_scales if cfg.strategy is Strategy.MULTI_CROP_S2 else (1,)
    return PatchPlan(
        config=cfg,
        source_size=(W, H),
        resized_size=(rw, rh),
        grid=(len(xs), len(ys)),
        crops=crops,
        scales=scales,
        token_count=len(crops) * cfg.tokens_per_tile,
    )


_PLANNERS = {
    Strategy.DYNAMIC_RES: plan_dynamic_resolution,
    Strategy.DYNAMIC_S2: plan_dynamic_s2,
    Strategy.MULTI_CROP: plan_multicrop,
    Strategy.MULTI_CROP_S2: plan_multicrop,
}


def plan_image(W: int, H: int, cfg: StrategyConfig) -> PatchPlan:
    """Dispatch to the planner matching ``cfg.strategy``."""
    return _PLANNERS[cfg.strategy](W, H, cfg)


Coords = Union[Sequence[float], NormPoint, NormRect]


def _working_frame(plan: PatchPlan, crop: Optional[int]):
    """Affine frame (scale, offset, extent) from source px to the target space."""
    W, H = plan.source_size
    if crop is None:
        return (1.0, 1.0), (0.0, 0.0), (float(W), float(H))
    if not 0 <= crop < len(plan.crops):
        raise InputError(f"crop index {crop} out of range for {len(plan.crops)} crops")
    c = plan.crops[crop]
    sx = plan.resized_size[0] / W
    sy = plan.resized_size[1] / H
    cw, ch = c.content_size
    return (sx, sy), (float(c.offset[0]), float(c.offset[1])), (float(cw), float(ch))


def _clamp_unit(v: float) -> float:
    if -_NORM_EPS <= v < 0.0:
        return 0.0
    if 1.0 < v <= 1.0 + _NORM_EPS:
        return 1.0
    return v


def map_coords(plan: PatchPlan, px: Coords, crop: Optional[int] = None):
    """Normalize a source-pixel point ``(x, y)`` or rect ``(x, y, w, h)``.

    With ``crop=None`` coordinates are divided by the source size. Otherwise
    they are moved into the working space of the plan, shifted by the crop's
    offset and divided by the crop's content (pre-pad) size.
    """
    vals = [float(v) for v in px]
    if len(vals) not in (2, 4):
        raise InputError("expected a point (x, y) or a rect (x, y, w, h)")
    W, H = plan.source_size
    x, y = vals[0], vals[1]
    x1 = x + (vals[2] if len(vals) == 4 else 0.0)
    y1 = y + (vals[3] if len(vals) == 4 else 0.0)
    if min(x, y) < 0 or x1 > W or y1 > H or x1 < x or y1 < y:
        raise InputError(f"{tuple(vals)} does not lie within the {W}x{H} source image")

    (sx, sy), (ox, oy), (ew, eh) = _working_frame(plan, crop)
    nx0, ny0 = (x * sx - ox) / ew, (y * sy - oy) / eh
    nx1, ny1 = (x1 * sx - ox) / ew, (y1 * sy - oy) / eh
    out = [_clamp_unit(v) for v in (nx0, ny0, nx1, ny1)]
    if any(not 0.0 <= v <= 1.0 for v in out):
        raise OutOfCropError(f"{tuple(vals)} falls outside crop {crop}")
    if len(vals) == 2:
        return NormPoint(out[0], out[1])
    return NormRect(out[0], out[1], _clamp_unit(out[2] - out[0]), _clamp_unit(out[3] - out[1]))


def denormalize(plan: PatchPlan, norm: Coords, crop: Optional[int] = None) -> tuple:
    """Inverse of ``map_coords``; returns source-pixel floats."""
    vals = [float(v) for v in norm]
    if len(vals) not in (2, 4):
        raise InputError("expected a point (x, y) or a rect (x, y, w, h)")
    (sx, sy), (ox, oy), (ew, eh) = _working_frame(plan, crop)
    x = (vals[0] * ew + ox) / sx
    y = (vals[1] * eh + oy) / sy
    if len(vals) == 2:
        return (x, y)
    x1 = ((vals[0] + vals[2]) * ew + ox) / sx
    y1 = ((vals[1] + vals[3]) * eh + oy) / sy
    return (x, y, x1 - x, y1 - y)

"""Brute-force reference implementations used only by the tests."""

from fractions import Fraction
import math

import numpy as np


def dynres_grid_oracle(W, H, patch, lo, hi):
    """Exhaustively enumerate every grid with lo <= gw*gh <= hi."""
    gws, ghs = [], []
    for gw in range(1, hi + 1):
        start = max(1, -(-lo // gw))
        stop = hi // gw
        if start > stop:
            continue
        r = np.arange(start, stop + 1)
        gws.append(np.full(len(r), gw))
        ghs.append(r)
    gw = np.concatenate(gws)
    gh = np.concatenate(ghs)
    d = np.abs(np.log((gw / gh) * (H / W)))
    near = d <= d.min() + 1e-9
    # resolve the near-optimal set exactly
    native = Fraction(W * H, patch * patch)
    target = min(max(native, lo), hi)
    best = None
    for a, b in zip(gw[near].tolist(), gh[near].tolist()):
        q = Fraction(a * H, b * W)
        dist = max(q, 1 / q)
        key = (dist, abs(a * b - target), -a)
        if best is None or key < best[0]:
            best = (key, (a, b))
    return best[1]


def dyns2_grid_oracle(W, H, tile, max_tiles):
    best = None
    native = min(Fraction(W * H, tile * tile), max_tiles)
    for a in range(1, max_tiles + 1):
        for b in range(1, max_tiles + 1):
            if a * b > max_tiles:
                continue
            q = Fraction(a * H, b * W)
            key = (max(q, 1 / q), abs(a * b - native), -a * b, -a)
            if best is None or key < best[0]:
                best = (key, (a, b))
    return best[1]


def multicrop_scale_oracle(W, H, tile, max_crops, steps=20000):
    """Largest s found by bisection on the crop-count predicate."""

    def fits(s):
        w = max(1, math.floor(s * W))
        h = max(1, math.floor(s * H))
        return math.ceil(w / tile) * math.ceil(h / tile) <= max_crops

    if fits(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return lo


def coverage_ok(width, height, crops):
    mask = np.zeros((height, width), dtype=bool)
    for c in crops:
        ox, oy = c.offset
        cw, ch = c.content_size
        assert ox >= 0 and oy >= 0
        assert ox + cw <= width and oy + ch <= height
        mask[oy : oy + ch, ox : ox + cw] = True
    return bool(mask.all())


def pareto_oracle(points):
    out = []
    for i, (ci, ai) in enumerate(points):
        dominated = False
        for j, (cj, aj) in enumerate(points):
            if i == j:
                continue
            if cj <= ci and aj >= ai and (cj < ci or aj > ai):
                dominated = True
                break
        if not dominated:
            out.append(i)
    return sorted(out, key=lambda i: (points[i][0], i))


def diff_rect_oracle(a, b, threshold_255):
    """Pixel-by-pixel scan returning (x0, y0, x1, y1) inclusive or None."""
    h, w = a.shape[:2]
    xs, ys = [], []
    for y in range(h):
        for x in range(w):
            pa = np.atleast_1d(a[y, x]).astype(int)
            pb = np.atleast_1d(b[y, x]).astype(int)
            if max(abs(int(u) - int(v)) for u, v in zip(pa, pb)) > threshold_255:
                xs.append(x)
                ys.append(y)
    if not xs:
        return None
    return min(xs), min(ys), max(xs), max(ys)

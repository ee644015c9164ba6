import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlkit.errors import ConfigError, InputError, OutOfCropError
from vlkit.tokenization import (
    NormPoint,
    NormRect,
    PatchPlan,
    StrategyConfig,
    denormalize,
    map_coords,
    plan_dynamic_resolution,
    plan_dynamic_s2,
    plan_image,
    plan_multicrop,
)

from oracles import coverage_ok, dynres_grid_oracle, dyns2_grid_oracle, multicrop_scale_oracle


def dynres(**kw):
    return StrategyConfig(strategy="dynres", **kw)


class TestDynamicResolution:
    def test_720p_anchor(self):
        plan = plan_dynamic_resolution(1920, 1080, dynres(min_patches=256, max_patches=3600))
        assert plan.grid == (80, 45)
        assert plan.resized_size == (1280, 720)
        assert plan.token_count == 3600

    def test_aligned_square_is_untouched(self):
        plan = plan_dynamic_resolution(384, 384, dynres(min_patches=1, max_patches=2048, max_tokens=2048))
        assert plan.grid == (24, 24)
        assert plan.resized_size == (384, 384)
        assert plan.token_count == 576

    def test_small_image_upscaled_to_min(self):
        plan = plan_dynamic_resolution(64, 48, dynres(min_patches=256, max_patches=3600))
        assert plan.grid == (20, 15)
        assert plan.resized_size == (320, 240)
        assert plan.token_count == 300

    @pytest.mark.parametrize("W,H", [(1920, 1080), (64, 48), (7000, 13), (13, 7000), (999, 1001)])
    def test_matches_oracle(self, W, H):
        plan = plan_dynamic_resolution(W, H, dynres(min_patches=64, max_patches=1024))
        assert plan.grid == dynres_grid_oracle(W, H, 16, 64, 1024)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            dynres(min_patches=500, max_patches=400)

    def test_zero_dimension(self):
        with pytest.raises(InputError):
            plan_dynamic_resolution(0, 10, dynres())

    def test_wrong_strategy(self):
        with pytest.raises(ConfigError):
            plan_dynamic_resolution(10, 10, StrategyConfig(strategy="dyns2"))

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(16, 8192),
        st.integers(16, 8192),
        st.integers(1, 400),
        st.integers(400, 3000),
        st.integers(1, 600),
    )
    def test_monotone_in_max_patches(self, W, H, lo, hi, extra):
        small = plan_dynamic_resolution(W, H, dynres(min_patches=lo, max_patches=hi, max_tokens=4000))
        big = plan_dynamic_resolution(W, H, dynres(min_patches=lo, max_patches=hi + extra, max_tokens=4000))
        assert big.token_count >= small.token_count


class TestDynamicS2:
    def cfg(self, **kw):
        kw.setdefault("tokens_per_tile", 576)
        kw.setdefault("max_tokens", 3096)
        return StrategyConfig(strategy="dyns2", **kw)

    def test_landscape(self):
        plan = plan_dynamic_s2(1000, 700, self.cfg())
        assert plan.grid == (2, 1)
        assert plan.resized_size == (768, 384)
        assert len(plan.crops) == 2
        assert plan.token_count == 1152

    def test_single_tile(self):
        plan = plan_dynamic_s2(384, 384, self.cfg())
        assert plan.grid == (1, 1)
        assert plan.token_count == 576

    def test_three_to_one(self):
        # the zero-distortion (3, 1) grid fits within 5 tiles
        plan = plan_dynamic_s2(3000, 1000, self.cfg())
        assert plan.grid == dyns2_grid_oracle(3000, 1000, 384, 5) == (3, 1)
        assert plan.resized_size == (1152, 384)
        assert plan.token_count == 1728

    def test_scales_do_not_change_tokens(self):
        a = plan_dynamic_s2(1000, 700, self.cfg(s2_scales=(1,)))
        b = plan_dynamic_s2(1000, 700, self.cfg(s2_scales=(1, 2, 4)))
        assert a.token_count == b.token_count
        assert b.scales == (1, 2, 4)

    def test_budget_below_tile(self):
        with pytest.raises(ConfigError):
            self.cfg(max_tokens=100)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(16, 8192), st.integers(16, 8192))
    def test_matches_oracle(self, W, H):
        plan = plan_dynamic_s2(W, H, self.cfg())
        assert plan.grid == dyns2_grid_oracle(W, H, 384, 5)


class TestMultiCrop:
    def cfg(self, **kw):
        kw.setdefault("tokens_per_tile", 576)
        return StrategyConfig(strategy="multicrop", **kw)

    def test_overlapping_crops(self):
        plan = plan_multicrop(800, 600, self.cfg(max_tokens=3600))
        assert len(plan.crops) == 6
        assert sorted({c.offset[0] for c in plan.crops}) == [0, 208, 416]
        assert sorted({c.offset[1] for c in plan.crops}) == [0, 216]
        assert plan.token_count == 3456
        assert coverage_ok(800, 600, plan.crops)

    def test_downscale_to_budget(self):
        plan = plan_multicrop(800, 600, self.cfg(max_tokens=3096))
        assert plan.resized_size == (768, 576)
        assert len(plan.crops) == 4
        assert plan.token_count == 2304
        s = multicrop_scale_oracle(800, 600, 384, 5)
        assert (int(s * 800), int(s * 600)) == (768, 576)

    def test_exact_fit(self):
        plan = plan_multicrop(384, 384, self.cfg(max_tokens=3096))
        assert len(plan.crops) == 1
        assert plan.crops[0].offset == (0, 0)
        assert plan.crops[0].pad == (0, 0)
        assert plan.token_count == 576

    def test_letterbox_pad(self):
        plan = plan_multicrop(1000, 200, self.cfg())
        assert all(c.pad == (0, 184) for c in plan.crops)
        assert all(c.content_size[1] == 200 for c in plan.crops)

    def test_s2_variant(self):
        cfg = StrategyConfig(strategy="multicrop-s2", max_tokens=2048)
        assert cfg.tile_px == 1536
        plan = plan_multicrop(4000, 2000, cfg)
        assert plan.scales == (1, 2)
        assert plan.token_count <= 2048
        assert coverage_ok(*plan.resized_size, plan.crops)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(16, 4000), st.integers(16, 4000), st.sampled_from([2048, 3096, 3600]))
    def test_scale_matches_bisection(self, W, H, budget):
        plan = plan_multicrop(W, H, self.cfg(max_tokens=budget))
        s = multicrop_scale_oracle(W, H, 384, budget // 576)
        assert plan.resized_size == (max(1, int(s * W)), max(1, int(s * H)))
        assert len(plan.crops) == plan.grid[0] * plan.grid[1]
        assert coverage_ok(*plan.resized_size, plan.crops)


class TestCoords:
    def test_center(self):
        plan = plan_dynamic_resolution(1280, 720, dynres())
        assert map_coords(plan, (640, 360)) == NormPoint(0.5, 0.5)

    def test_full_rect(self):
        plan = plan_dynamic_resolution(1280, 720, dynres())
        assert tuple(map_coords(plan, (0, 0, 1280, 720))) == (0.0, 0.0, 1.0, 1.0)

    def test_crop_local(self):
        plan = plan_multicrop(800, 600, StrategyConfig(strategy="multicrop", max_tokens=3600))
        idx = next(i for i, c in enumerate(plan.crops) if c.offset == (416, 0))
        p = map_coords(plan, (500, 100), crop=idx)
        assert p.x == pytest.approx(0.21875)
        assert p.y == pytest.approx(100 / 384)

    def test_out_of_crop(self):
        plan = plan_multicrop(800, 600, StrategyConfig(strategy="multicrop", max_tokens=3600))
        with pytest.raises(OutOfCropError):
            map_coords(plan, (10, 10), crop=2)

    def test_outside_image(self):
        plan = plan_dynamic_resolution(100, 100, dynres())
        with pytest.raises(InputError):
            map_coords(plan, (101, 5))

    def test_norm_types_validate(self):
        with pytest.raises(InputError):
            NormPoint(1.2, 0.5)
        with pytest.raises(InputError):
            NormRect(0.6, 0.0, 0.5, 0.1)

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_round_trip(self, data):
        W = data.draw(st.integers(16, 5000))
        H = data.draw(st.integers(16, 5000))
        strategy = data.draw(st.sampled_from(["dynres", "dyns2", "multicrop", "multicrop-s2"]))
        plan = plan_image(W, H, StrategyConfig(strategy=strategy))
        x = data.draw(st.floats(0, W))
        y = data.draw(st.floats(0, H))
        back = denormalize(plan, map_coords(plan, (x, y)))
        assert abs(back[0] - x) <= 0.5 and abs(back[1] - y) <= 0.5
        if plan.crops:
            i = data.draw(st.integers(0, len(plan.crops) - 1))
            c = plan.crops[i]
            sx = plan.resized_size[0] / W
            sy = plan.resized_size[1] / H
            cw, ch = c.content_size
            u = data.draw(st.floats(0, 1))
            v = data.draw(st.floats(0, 1))
            px = (c.offset[0] + u * cw) / sx
            py = (c.offset[1] + v * ch) / sy
            if px <= W and py <= H:
                local = map_coords(plan, (px, py), crop=i)
                back = denormalize(plan, local, crop=i)
                assert abs(back[0] - px) <= 0.5 and abs(back[1] - py) <= 0.5


def test_plan_json_round_trip():
    plan = plan_multicrop(800, 600, StrategyConfig(strategy="multicrop"))
    d = json.loads(json.dumps(plan.to_dict()))
    assert set(d) >= {"strategy", "source_size", "resized_size", "grid", "crops", "token_count"}
    assert PatchPlan.from_dict(d) == plan


def test_unknown_strategy():
    with pytest.raises(ConfigError):
        StrategyConfig(strategy="bogus")


def test_random_budgets_quick():
    rng = np.random.default_rng(0)
    for strategy in ["dynres", "dyns2", "multicrop", "multicrop-s2"]:
        for budget in (2048, 3096, 3600):
            cfg = StrategyConfig(strategy=strategy, max_tokens=budget)
            for W, H in rng.integers(16, 8193, size=(50, 2)).tolist():
                assert plan_image(W, H, cfg).token_count <= budget

"""Acceptance gate: one PASS/FAIL line per criterion (run with ``-s`` to see them)."""

import contextlib
import csv
import math
import random
import time
import xml.etree.ElementTree as ET

import numpy as np

from oracles import (
    coverage_ok,
    diff_rect_oracle,
    dynres_grid_oracle,
    multicrop_scale_oracle,
    pareto_oracle,
)
from vlkit.demo import load_toy_corpus, run_demo
from vlkit.evaluation import CSV_COLUMNS, EvalSample, MockModelClient, ParetoPoint, compute_pareto, run_benchmark
from vlkit.fusion import ImagePlaceholder, TextToken, assemble_sequence
from vlkit.mixture import STAGE2_AVG_TOKENS, CategorySpec, check_reasoning_share, estimate_tokens, plan_mixture
from vlkit.records import Mode, SampleRecord, Turn
from vlkit.synth import CaptionedImage, FrameSequence, SynthConfig, diff_region, synth_caption_match, synth_scrambled, synth_whats_changed
from vlkit.tokenization import PatchPlan, StrategyConfig, denormalize, map_coords, plan_image
from vlkit.transcript import PROTOCOL_TOKENS, parse_transcript, render_sample, repair_transcript

STRATEGIES = ("dynres", "dyns2", "multicrop", "multicrop-s2")
BUDGETS = (2048, 3096, 3600)


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"FAIL  {name}")
        raise
    print(f"PASS  {name}")


def test_tokenization_budgets():
    with criterion("tokenization budgets"):
        rng = np.random.default_rng(101)
        t0 = time.perf_counter()
        for strategy in STRATEGIES:
            sizes = rng.integers(1, 10001, size=(1000, 2)).tolist()
            for budget in BUDGETS:
                cfg = StrategyConfig(strategy=strategy, max_tokens=budget)
                for W, H in sizes:
                    n = plan_image(W, H, cfg).token_count
                    assert n <= budget, (strategy, budget, W, H, n)
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0, f"{elapsed:.2f}s"


def test_dynres_optimality():
    with criterion("dynamic-resolution optimality"):
        rng = np.random.default_rng(102)
        for _ in range(1000):
            W, H = rng.integers(1, 6001, size=2).tolist()
            lo = int(rng.integers(1, 512))
            hi = int(rng.integers(lo, 4097))
            plan = plan_image(W, H, StrategyConfig(strategy="dynres", min_patches=lo, max_patches=hi, max_tokens=4096))
            assert plan.grid == dynres_grid_oracle(W, H, 16, lo, hi), (W, H, lo, hi)
        anchor = plan_image(1920, 1080, StrategyConfig(strategy="dynres", min_patches=256, max_patches=3600))
        assert anchor.grid == (80, 45) and anchor.token_count == 3600


def test_multicrop_coverage():
    with criterion("multi-crop coverage"):
        rng = np.random.default_rng(103)
        for _ in range(500):
            W, H = rng.integers(1, 3001, size=2).tolist()
            budget = int(rng.choice(BUDGETS))
            plan = plan_image(W, H, StrategyConfig(strategy="multicrop", max_tokens=budget))
            w, h = plan.resized_size
            assert len(plan.crops) == math.ceil(w / 384) * math.ceil(h / 384)
            assert plan.token_count <= budget
            assert coverage_ok(w, h, plan.crops)
            s = multicrop_scale_oracle(W, H, 384, budget // 576)
            assert (w, h) == (max(1, int(s * W)), max(1, int(s * H)))
        plan = plan_image(800, 600, StrategyConfig(strategy="multicrop", max_tokens=3096))
        assert plan.resized_size == (768, 576) and len(plan.crops) == 4


def test_coordinate_round_trip():
    with criterion("coordinate round-trip"):
        rng = np.random.default_rng(104)
        worst = 0.0
        for k in range(10_000):
            W, H = rng.integers(1, 5001, size=2).tolist()
            plan = plan_image(W, H, StrategyConfig(strategy=STRATEGIES[k % 4]))
            if k % 2:
                x0, x1 = sorted(rng.uniform(0, W, 2).tolist())
                y0, y1 = sorted(rng.uniform(0, H, 2).tolist())
                px = (x0, y0, x1 - x0, y1 - y0)
            else:
                px = (float(rng.uniform(0, W)), float(rng.uniform(0, H)))
            back = denormalize(plan, map_coords(plan, px))
            worst = max(worst, max(abs(a - b) for a, b in zip(back, px)))
        assert worst <= 0.5, worst


def _plan(tokens):
    return PatchPlan(config=StrategyConfig(), source_size=(1, 1), resized_size=(16, 16), grid=(1, 1),
                     token_count=tokens)


def test_fusion_layout():
    with criterion("fusion layout"):
        rng = random.Random(105)
        for _ in range(1000):
            n_img = rng.randint(0, 6)
            plans = [_plan(rng.randint(1, 3000)) for _ in range(n_img)]
            overhead = rng.randint(0, 4)
            order = list(range(n_img))
            rng.shuffle(order)
            stream = []
            for i in order:
                stream += [TextToken(0)] * rng.randint(0, 50) + [ImagePlaceholder(i)]
            stream += [TextToken(0)] * rng.randint(0, 50)
            want = 0
            for item in stream:
                want += plans[item.index].token_count + overhead if isinstance(item, ImagePlaceholder) else 1
            assert assemble_sequence(stream, plans, marker_overhead=overhead).total_len == want
        one = [TextToken(0)] * 4 + [ImagePlaceholder(0)] + [TextToken(0)] * 5
        assert assemble_sequence(one, [_plan(576)]).total_len == 587
        two = [TextToken(0)] * 3 + [ImagePlaceholder(1)] + [TextToken(0)] * 10 + [ImagePlaceholder(0)] + [TextToken(0)] * 5
        assert assemble_sequence(two, [_plan(576), _plan(1152)]).total_len == 1750


ALPHABET = "abcdefghij XYZ0123456789.,:;!?()<>/\\{}\n\té中"


def _text(rng, lo, hi):
    while True:
        s = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(lo, hi)))
        if not any(t in s for t in PROTOCOL_TOKENS):
            return s


def test_transcript_protocol():
    with criterion("transcript protocol"):
        rng = random.Random(106)
        for k in range(10_000):
            mode = Mode.REASON if k % 2 else Mode.DIRECT
            think = _text(rng, 0, 60) if mode is Mode.REASON else None
            final = _text(rng, 1, 40).lstrip() or "x"
            rec = SampleRecord(f"r{k}", (), (Turn("user", "q"),), mode, final, think)
            p = parse_transcript(render_sample(rec))
            assert (p.mode.value, p.think, p.final) == (mode.value, think, final) and p.issues == ()
        repaired = 0
        for k in range(1000):
            marker = rng.choice(("Final answer: ", "Answer: ", "so the answer: ", "\\boxed{"))
            value = str(rng.randint(0, 10**6))
            broken = f"<think>{_text(rng, 0, 60)} {marker}{value}</think>"
            assert [i.code.value for i in parse_transcript(broken).issues] == ["answer_in_think"]
            text, _ = repair_transcript(parse_transcript(broken))
            again = parse_transcript(text)
            repaired += again.issues == () and value in again.final
        assert repaired == 1000, repaired


def test_mixture_arithmetic():
    with criterion("mixture arithmetic"):
        K, M = 1000, 1_000_000
        rows = [(1, [450 * K], 1.6), (1, [450 * K, 400 * K], 2.0), (3, [450 * K], 1.9),
                (3, [450 * K, 400 * K], 2.3), (1, [150 * K], 1.3), (1, [250 * K], 1.4)]
        for dup, cua, total in rows:
            specs = [CategorySpec("general", M), CategorySpec("math", 150 * K, dup, reasoning=True)]
            specs += [CategorySpec(f"cua{i}", n) for i, n in enumerate(cua)]
            assert plan_mixture(specs).total_samples == round(total * M)
        for samples, avg, tokens in ((2.0e6, 1.4e9 / 2.0e6, 1.4e9), (62.8e6, STAGE2_AVG_TOKENS, 188.5e9),
                                     (3.2e6, 12e9 / 3.2e6, 12e9)):
            got = estimate_tokens(plan_mixture([CategorySpec("all", int(samples), avg_tokens=avg)]))
            assert abs(got - tokens) <= 1e-3 * tokens
        for pct in range(0, 101):
            m = plan_mixture([CategorySpec("r", pct, reasoning=True), CategorySpec("d", 100 - pct)])
            assert check_reasoning_share(m, 0.2, 0.05).within is (15 <= pct <= 25), pct


def test_synthesis():
    with criterion("synthesis"):
        pool = [CaptionedImage(f"img{i}.png", f"caption {i}") for i in range(12)]
        for seed in range(1000):
            n = 2 + seed % 9
            cfg = SynthConfig(seed=seed * 7919, insert_prob=0.5)
            s = synth_scrambled(pool[:n], cfg)
            assert sorted(s.meta["request_order"]) == list(range(1, len(s.images) + 1))
            assert s.meta["gold"] == [next(c.caption for c in pool if c.image == s.images[j - 1])
                                      for j in s.meta["request_order"]]
            assert synth_scrambled(pool[:n], cfg) == s
            m = synth_caption_match(pool[:n], cfg)
            k = min(n, cfg.group_size)
            assert sorted(m.meta["gold"]) == list(range(1, k + 1))
            for cap, g in zip(m.meta["captions"], m.meta["gold"]):
                assert pool[g - 1].caption == cap and m.images[g - 1] == pool[g - 1].image
            assert synth_caption_match(pool[:n], cfg) == m

        rng = np.random.default_rng(108)
        frames = []
        for _ in range(100):
            h, w = rng.integers(1, 40, size=2).tolist()
            a = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            b = a.copy()
            for _ in range(rng.integers(0, 3)):
                y, x = rng.integers(0, h), rng.integers(0, w)
                b[y : y + rng.integers(1, 6), x : x + rng.integers(1, 6)] ^= np.uint8(rng.integers(1, 256))
            frames.append((a, b))
        a = np.zeros((480, 640, 3), np.uint8)
        b = a.copy()
        b[50:60, 100:110] = 200
        frames[0] = (a, b)
        for a, b in frames:
            h, w = a.shape[:2]
            want = diff_rect_oracle(a, b, 16)
            got = diff_region(a, b)
            if want is None:
                assert got is None
            else:
                x0, y0, x1, y1 = want
                assert tuple(got) == (x0 / w, y0 / h, (x1 - x0 + 1) / w, (y1 - y0 + 1) / h)
        assert tuple(diff_region(*frames[0])) == (0.15625, 50 / 480, 0.015625, 10 / 480)


def test_synthesis_whats_changed(tmp_path):
    from PIL import Image

    with criterion("synthesis (what's changed)"):
        rng = np.random.default_rng(109)
        for i in range(6):
            img = np.full((32, 48, 3), 255, np.uint8)
            y, x = rng.integers(0, 24), rng.integers(0, 40)
            img[y : y + 8, x : x + 8] = 0
            Image.fromarray(img).save(tmp_path / f"f{i}.png")
        for seed in range(1000):
            k = 2 + seed % 2
            start = seed % (7 - k)
            seq = FrameSequence([f"f{start + j}.png" for j in range(k)])
            cfg = SynthConfig(seed=seed)
            r = synth_whats_changed(seq, None, cfg, root=str(tmp_path))
            assert r == synth_whats_changed(seq, None, cfg, root=str(tmp_path))
            assert len(r.images) == k and r.meta["answer_sources"] == ["diff"] * (k - 1)


def test_pareto():
    with criterion("pareto frontier"):
        rng = np.random.default_rng(110)
        for _ in range(1000):
            n = int(rng.integers(0, 201))
            costs = rng.integers(0, 30, n).astype(float)
            accs = rng.integers(0, 101, n).astype(float)
            pairs = list(zip(costs.tolist(), accs.tolist()))
            pts = [ParetoPoint(str(i), c, a) for i, (c, a) in enumerate(pairs)]
            got = compute_pareto(pts)
            assert got == pareto_oracle(pairs)
            scale, shift = float(rng.uniform(0.01, 100)), float(rng.uniform(-100, 100))
            moved = [ParetoPoint(p.label, p.cost * scale + shift, p.accuracy) for p in pts]
            assert set(compute_pareto(moved)) == set(got)


def _bench(name, n):
    return [EvalSample(f"{name}{i}", name, "exact_match", f"{name} q{i}", (), "a") for i in range(n)]


def test_harness_timing():
    with criterion("harness timing fidelity"):
        for delay, count in ((50, 100), (100, 30), (500, 6)):
            client = MockModelClient(respond=lambda p: "a", delay_ms=delay)
            res = run_benchmark(client, _bench("b", 300), subset_size=count, seed=delay)
            assert len(res) == count
            lat = [r.latency_ms for r in res]
            assert all(delay <= x <= delay + 20 for x in lat), (delay, min(lat), max(lat))
            assert client.max_in_flight == 1
        client = MockModelClient(respond=lambda p: "a", delay_ms=0)
        for name, size in (("alpha", 100), ("beta", 250), ("gamma", 5000)):
            res = run_benchmark(client, _bench(name, size), subset_size=100, seed=1)
            assert len(res) == 100 and len({r.sample_id for r in res}) == 100
        assert client.max_in_flight == 1
        # the detector itself must notice overlap
        probe = MockModelClient(delay_ms=20)
        run_benchmark(probe, _bench("p", 8), workers=4, timed=False)
        assert probe.max_in_flight > 1


def test_end_to_end(tmp_path):
    with criterion("end-to-end demo"):
        records = load_toy_corpus()
        assert len(records) == 500
        t0 = time.perf_counter()
        result = run_demo(tmp_path / "demo", seed=0)
        assert time.perf_counter() - t0 < 60
        with open(result.csv_path, newline="") as fp:
            rows = list(csv.reader(fp))
        assert tuple(rows[0]) == CSV_COLUMNS and len(rows) > 1
        for row in rows[1:]:
            assert len(row) == len(CSV_COLUMNS)
            acc, lat, tok = (float(v) for v in row[2:5])
            assert 0 <= acc <= 100 and lat >= 0 and tok >= 0
            assert row[5] in ("server", "fallback", "none")
        for svg in (result.svg_path, tmp_path / "demo" / "pareto_tokens.svg"):
            root = ET.parse(svg).getroot()
            assert root.tag.endswith("svg")
            classes = [c.get("class") for c in root.iter("{http://www.w3.org/2000/svg}circle")]
            assert len(classes) == 4 and "point frontier" in classes
        assert all(v == 1 for v in result.stats["max_in_flight"].values())

"""``vlkit`` command-line entry point.

Exit codes: 0 success, 1 data errors (details on stderr), 2 usage or
configuration errors. Every subcommand takes ``--config FILE``, a TOML file
whose ``[<subcommand>]`` table supplies defaults for that subcommand's flags
(keys are flag names with ``-`` or ``_``); flags given on the command line win.
Endpoints and credentials come only from the environment: ``VLKIT_ENDPOINT``
(model), ``VLKIT_JUDGE_ENDPOINT`` (judge / describer) and ``VLKIT_API_KEY``.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from pathlib import Path

from . import demo as demo_mod
from .curation import (
    HttpJudgeClient,
    JudgeVerdict,
    fix_record,
    lint_record,
    reformat_double_duty,
    regenerate_answer,
    summarize_dataset,
)
from .errors import ConfigError, InputError, SkipRecord, VlkitError
from .evaluation import (
    EvalSample,
    GenConfig,
    HttpModelClient,
    Summary,
    aggregate,
    compute_pareto,
    emit_report,
    points_from_summaries,
    run_benchmark,
)
from .fusion import ImagePlaceholder, TextToken, assemble_sequence, validate_layout
from .mixture import (
    check_reasoning_share,
    draw_samples,
    parse_mixture_config,
    plan_mixture,
    tomllib,
)
from .records import iter_jsonl, write_records
from .synth import CaptionedImage, FrameSequence, SynthConfig, synth_caption_match, synth_scrambled, synth_whats_changed
from .tokenization import Strategy, StrategyConfig, plan_image

log = logging.getLogger("vlkit")

SUBCOMMANDS = ("plan", "lint", "transform", "synth", "mix", "eval", "pareto", "demo")
# per-subcommand defaults, applied after the config file so flags > config > defaults
DEFAULTS = {
    "plan": {"strategy": "dynres", "patch": 16, "min_patches": 1, "s2_scales": "1,2", "format": "json"},
    "lint": {},
    "transform": {"double_duty_rate": 1.0, "votes": 3, "threshold": 0.5, "attempts": 3, "workers": 1},
    "synth": {"group_size": 5, "insert_prob": 0.2, "diff_threshold": 16 / 255},
    "mix": {},
    "eval": {"subset_size": 100, "model": "model", "max_output_tokens": 4096, "temperature": 0.0,
             "mock_delay_ms": 0.0, "mock_accuracy": 1.0, "mock_tokens_per_word": 1, "workers": 1},
    "pareto": {"axis": "latency"},
    "demo": {"subset_size": 100},
}
# dests that are never read from a config file
_NOT_CONFIGURABLE = {"command", "config", "kind", "input", "inputs"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 1920x1080, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vlkit", description="Multimodal data and evaluation toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--config", help="TOML file; its [%s] table sets flag defaults" % name)
        return sp

    sp = cmd("plan", "Plan visual tokens for images and optionally lay out a fused sequence.")
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], help="tokenization strategy (default dynres)")
    sp.add_argument("--width", type=int, help="image width in px")
    sp.add_argument("--height", type=int, help="image height in px")
    sp.add_argument("--size", type=_size, action="append", help="WxH; repeat for several images")
    sp.add_argument("--image", action="append", help="raster file whose size is planned; repeatable")
    sp.add_argument("--patch", type=int, help="patch size in px (default 16)")
    sp.add_argument("--tile", type=int, help="tile/crop size in px (strategy default)")
    sp.add_argument("--tokens-per-tile", type=int, help="tokens per tile (default (384/patch)^2)")
    sp.add_argument("--max-tokens", type=int, help="token budget (strategy default)")
    sp.add_argument("--min-patches", type=int, help="dynres lower patch bound (default 1)")
    sp.add_argument("--max-patches", type=int, help="dynres upper patch bound (default max-tokens)")
    sp.add_argument("--s2-scales", help="comma-separated S2 scales (default 1,2)")
    sp.add_argument("--with-layout", nargs="?", const="", metavar="STREAM",
                    help="also lay out a fused sequence; STREAM like 't12 i0 t20' (default: images only)")
    sp.add_argument("--max-seq-len", type=int, help="validate the layout against this length")
    sp.add_argument("--format", choices=("json", "text"), help="output format (default json)")
    sp.add_argument("--output", help="write here instead of stdout")

    sp = cmd("lint", "Lint a JSONL corpus; issues go to stdout as JSONL.")
    sp.add_argument("input", help="JSONL file or - for stdin")
    sp.add_argument("--output", help="issues JSONL path (default stdout)")
    sp.add_argument("--report", help="write a dataset report JSON here")
    sp.add_argument("--image-root", help="directory image references are relative to")
    sp.add_argument("--verdicts", help="JSONL of {record_id, agrees} judge verdicts for the report")
    sp.add_argument("--known-tags", help="comma-separated image tags (default <image_1>..<image_n>)")

    sp = cmd("transform", "Repair records, reformat for instruction following, or regenerate answers.")
    sp.add_argument("input", help="JSONL file or - for stdin")
    sp.add_argument("--output", help="output JSONL (default stdout)")
    sp.add_argument("--no-repair", action="store_true", default=None, help="skip automatic repairs")
    sp.add_argument("--drop-unfixable", action="store_true", default=None,
                    help="drop records that still have errors after repair")
    sp.add_argument("--double-duty", action="store_true", default=None, help="append format instructions")
    sp.add_argument("--double-duty-rate", type=float, help="fraction of records reformatted (default 1)")
    sp.add_argument("--regenerate", action="store_true", default=None,
                    help="re-answer with the judge at VLKIT_JUDGE_ENDPOINT and keep verified majorities")
    sp.add_argument("--votes", type=int, help="judge samples per record (default 3)")
    sp.add_argument("--threshold", type=float, help="majority threshold (default 0.5)")
    sp.add_argument("--attempts", type=int, help="tries per judge call (default 3)")
    sp.add_argument("--image-root", help="directory image references are relative to")
    sp.add_argument("--seed", type=int, help="required with --double-duty")
    sp.add_argument("--workers", type=int, help="parallel workers; output order is stable (default 1)")

    sp = cmd("synth", "Generate synthetic multi-image records.")
    sp.add_argument("kind", choices=("scrambled", "match", "whats-changed"))
    sp.add_argument("input", help="JSONL of {image, caption} or {frames, timestamps?} objects")
    sp.add_argument("--seed", type=int, help="required")
    sp.add_argument("--group-size", type=int, help="images per record (default 5)")
    sp.add_argument("--insert-prob", type=float, help="chance of one extra image (default 0.2)")
    sp.add_argument("--diff-threshold", type=float, help="per-pixel change threshold in [0,1) (default 16/255)")
    sp.add_argument("--image-root", help="directory image references are relative to")
    sp.add_argument("--describer", action="store_true", default=None,
                    help="describe changes with the judge at VLKIT_JUDGE_ENDPOINT")
    sp.add_argument("--no-fallback", action="store_true", default=None,
                    help="fail instead of using the pixel diff when the describer fails")
    sp.add_argument("--output", help="output JSONL (default stdout)")

    sp = cmd("mix", "Plan a training mixture from a TOML config ([mixture] + [[category]] tables).")
    sp.add_argument("--default-avg-tokens", type=float, help="tokens/sample for categories without one")
    sp.add_argument("--target", type=float, help="target reasoning share")
    sp.add_argument("--tolerance", type=float, help="allowed deviation from the target")
    sp.add_argument("--weighting", choices=("samples", "tokens"), help="reasoning share weighting")
    sp.add_argument("--output", help="manifest JSON path (default stdout)")
    sp.add_argument("--draw", help="materialize the mixture from category sources into this JSONL")
    sp.add_argument("--seed", type=int, help="required with --draw")

    sp = cmd("eval", "Run timed benchmark evaluation against a model endpoint.")
    sp.add_argument("input", help="benchmark JSONL (meta.benchmark, meta.task_kind)")
    sp.add_argument("--seed", type=int, help="required; picks each benchmark's subset")
    sp.add_argument("--subset-size", type=int, help="samples per benchmark, -1 for all (default 100)")
    sp.add_argument("--model", help="label used in reports (default 'model')")
    sp.add_argument("--max-output-tokens", type=int, help="default 4096")
    sp.add_argument("--temperature", type=float, help="default 0 (greedy)")
    sp.add_argument("--image-root", help="directory image references are relative to")
    sp.add_argument("--mock", action="store_true", default=None, help="use a local mock model")
    sp.add_argument("--mock-delay-ms", type=float, help="mock latency (default 0)")
    sp.add_argument("--mock-accuracy", type=float, help="fraction of mock answers that are correct")
    sp.add_argument("--mock-tokens-per-word", type=int, help="mock server-reported tokens per word")
    sp.add_argument("--fail-fast", action="store_true", default=None, help="abort on the first transport error")
    sp.add_argument("--untimed", action="store_true", default=None, help="allow --workers > 1")
    sp.add_argument("--workers", type=int, help="parallel requests, untimed runs only (default 1)")
    sp.add_argument("--output", help="per-sample results JSONL")
    sp.add_argument("--summary", help="summary JSON path (default stdout)")

    sp = cmd("pareto", "Build the accuracy-vs-cost Pareto report from eval summaries.")
    sp.add_argument("inputs", nargs="+", help="summary JSON files written by 'eval'")
    sp.add_argument("--axis", choices=("latency", "tokens"), help="cost axis (default latency)")
    sp.add_argument("--csv", help="CSV report path")
    sp.add_argument("--svg", help="SVG plot path")

    sp = cmd("demo", "Run the end-to-end pipeline on the bundled toy corpus.")
    sp.add_argument("--workdir", help="output directory (required)")
    sp.add_argument("--seed", type=int, help="required")
    sp.add_argument("--subset-size", type=int, help="eval samples per benchmark (default 100)")
    return p


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        return action.choices[name]


def _apply_config(parser, args):
    """Fill unset flags from the config file's table for this subcommand, then defaults."""
    name = args.command
    if args.config:
        try:
            with open(args.config, "rb") as fp:
                data = tomllib.load(fp)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        unknown = set(data) - set(SUBCOMMANDS) - {"mixture", "category"}
        if unknown:
            raise ConfigError(f"unknown config tables: {sorted(unknown)}")
        table = data.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table")
        dests = {a.dest for a in _subparser(parser, name)._actions} - _NOT_CONFIGURABLE - {"help"}
        for key, value in table.items():
            dest = key.replace("-", "_")
            if dest not in dests:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            if getattr(args, dest) is None:
                setattr(args, dest, value)
        args._config_data = data
    for dest, value in DEFAULTS[name].items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)
    return args


def _need_seed(args, why="this subcommand"):
    if args.seed is None:
        raise ConfigError(f"--seed is required for {why}")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _input(path):
    return sys.stdin.buffer if path == "-" else path


class _Stream:
    """JSONL records with parse errors reported to stderr and counted."""

    def __init__(self, path):
        self.path = path
        self.errors = 0

    def __iter__(self):
        for item in iter_jsonl(_input(self.path)):
            if item.error is not None:
                self.errors += 1
                print(f"{self.path}: {item.error}", file=sys.stderr)
                continue
            yield item.record


def _batched_map(fn, items, workers, batch=256):
    """Ordered map with bounded memory; threads only when workers > 1."""
    it = iter(items)
    if workers <= 1:
        yield from map(fn, it)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while True:
            chunk = list(islice(it, batch))
            if not chunk:
                return
            yield from pool.map(fn, chunk)


# ---------------------------------------------------------------- subcommands


def cmd_plan(args) -> int:
    sizes = list(args.size or [])
    if args.width is not None or args.height is not None:
        if args.width is None or args.height is None:
            raise ConfigError("--width and --height go together")
        sizes.insert(0, (args.width, args.height))
    if args.image:
        from PIL import Image

        for path in args.image:
            try:
                with Image.open(path) as im:
                    sizes.append(im.size)
            except OSError as e:
                raise InputError(f"cannot read image {path}: {e}") from e
    if not sizes:
        raise ConfigError("give --width/--height, --size or --image")
    try:
        scales = tuple(int(s) for s in str(args.s2_scales).split(","))
    except ValueError:
        raise ConfigError(f"bad --s2-scales {args.s2_scales!r}") from None
    cfg = StrategyConfig(
        strategy=args.strategy,
        patch_px=args.patch,
        tile_px=args.tile,
        tokens_per_tile=args.tokens_per_tile,
        max_tokens=args.max_tokens,
        min_patches=args.min_patches,
        max_patches=args.max_patches,
        s2_scales=scales,
    )
    plans = [plan_image(w, h, cfg) for w, h in sizes]
    out = {"plans": [p.to_dict() for p in plans]}
    layout = None
    if args.with_layout is not None:
        stream = _parse_stream(args.with_layout, len(plans))
        layout = assemble_sequence(stream, plans)
        out["layout"] = layout.to_dict()
        if args.max_seq_len is not None:
            out["violations"] = [v._asdict() for v in validate_layout(layout, args.max_seq_len)]
    fp, close = _open_out(args.output)
    try:
        if args.format == "text":
            for p in plans:
                w, h = p.source_size
                gx, gy = p.grid
                fp.write(f"{w}x{h}: grid {gx}x{gy}, {p.token_count} tokens, resized "
                         f"{p.resized_size[0]}x{p.resized_size[1]}, {len(p.crops)} crops\n")
            if layout is not None:
                fp.write(f"layout: {layout.total_len} positions, {len(layout.visual_spans)} visual spans\n")
        else:
            fp.write(json.dumps(out, indent=2) + "\n")
    finally:
        if close:
            fp.close()
    return 1 if out.get("violations") else 0


def _parse_stream(spec: str, n_images: int) -> list:
    if not spec.strip():
        return [ImagePlaceholder(i) for i in range(n_images)]
    out = []
    for tok in spec.split():
        kind, num = tok[0].lower(), tok[1:]
        if kind not in "ti" or not num.isdigit():
            raise ConfigError(f"bad stream item {tok!r}; use tN (N text tokens) or iK (image K)")
        if kind == "t":
            out.extend(TextToken(0) for _ in range(int(num)))
        else:
            out.append(ImagePlaceholder(int(num)))
    return out


def cmd_lint(args) -> int:
    known = args.known_tags.split(",") if args.known_tags else None
    stream = _Stream(args.input)
    fp, close = _open_out(args.output)
    n_errors = 0
    kept = [] if args.report else None
    try:
        for rec in stream:
            for issue in lint_record(rec, known):
                fp.write(json.dumps(issue.to_dict()) + "\n")
                n_errors += issue.severity.value == "error"
            if kept is not None:
                kept.append(rec)
    finally:
        if close:
            fp.close()
    if args.report:
        verdicts = None
        if args.verdicts:
            with open(args.verdicts, encoding="utf-8") as vf:
                verdicts = [JudgeVerdict(d["record_id"], bool(d["agrees"]))
                            for d in map(json.loads, filter(str.strip, vf))]
        report = summarize_dataset(kept, verdicts, known, image_root=args.image_root)
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if n_errors:
        print(f"{n_errors} error-level issues", file=sys.stderr)
    return 1 if stream.errors or n_errors else 0


def cmd_transform(args) -> int:
    if args.double_duty:
        _need_seed(args, "--double-duty")
    if not 0.0 <= args.double_duty_rate <= 1.0:
        raise ConfigError("--double-duty-rate must lie in [0, 1]")
    judge = HttpJudgeClient.from_env(image_root=args.image_root) if args.regenerate else None

    def one(rec):
        notes = []
        out = [rec]
        if not args.no_repair:
            fixed, fixes = fix_record(rec)
            notes += [f"{rec.id}: {f.code.value} {f.action} ({f.detail})" for f in fixes if f.action == "skipped"]
            out = [fixed]
        if args.drop_unfixable and any(i.severity.value == "error" for i in lint_record(out[0])):
            return [], notes + [f"{rec.id}: dropped"]
        if judge is not None:
            out = [regenerate_answer(out[0], judge, args.votes, args.threshold, args.attempts)[0]]
        if args.double_duty and random.Random(f"{args.seed}:{rec.id}:pick").random() < args.double_duty_rate:
            try:
                out.append(reformat_double_duty(out[0], seed=args.seed))
            except SkipRecord as e:
                notes.append(f"{rec.id}: double-duty skipped ({e.reason})")
        return out, notes

    stream = _Stream(args.input)
    fp, close = _open_out(args.output)
    try:
        for recs, notes in _batched_map(one, stream, args.workers):
            write_records(recs, fp)
            for n in notes:
                print(n, file=sys.stderr)
    finally:
        if close:
            fp.close()
    return 1 if stream.errors else 0


def _read_objects(path):
    fp = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        for line_no, line in enumerate(fp, 1):
            if line.strip():
                try:
                    yield line_no, json.loads(line)
                except json.JSONDecodeError as e:
                    yield line_no, InputError(f"invalid JSON: {e.msg}")
    finally:
        if fp is not sys.stdin:
            fp.close()


def cmd_synth(args) -> int:
    _need_seed(args)
    cfg = SynthConfig(args.group_size, args.insert_prob, args.seed, args.diff_threshold,
                      fallback=not args.no_fallback)
    errors = 0
    items = []
    for line_no, obj in _read_objects(args.input):
        try:
            if isinstance(obj, Exception):
                raise obj
            if args.kind == "whats-changed":
                items.append(FrameSequence(tuple(obj["frames"]), obj.get("timestamps")))
            else:
                items.append(CaptionedImage(obj["image"], obj["caption"]))
        except (InputError, KeyError, TypeError) as e:
            errors += 1
            print(f"{args.input}: line {line_no}: {e}", file=sys.stderr)

    out = []
    if args.kind == "whats-changed":
        describer = HttpJudgeClient.from_env(image_root=args.image_root) if args.describer else None
        for seq in items:
            out.append(synth_whats_changed(seq, describer, cfg, root=args.image_root))
    else:
        g = cfg.group_size
        for start in range(0, len(items), g):
            if len(items) - start < 2:
                print(f"{args.input}: {len(items) - start} leftover item(s) ignored", file=sys.stderr)
                break
            try:
                if args.kind == "scrambled":
                    # the next group's first item can be sprinkled in as the extra image
                    out.append(synth_scrambled(items[start : start + g + 1], cfg))
                else:
                    out.append(synth_caption_match(items[start : start + g], cfg))
            except InputError as e:
                errors += 1
                print(f"{args.input}: group at item {start + 1}: {e}", file=sys.stderr)
    fp, close = _open_out(args.output)
    try:
        write_records(out, fp)
    finally:
        if close:
            fp.close()
    return 1 if errors else 0


def cmd_mix(args) -> int:
    if not args.config:
        raise ConfigError("mix needs --config with [[category]] tables")
    data = dict(args._config_data)
    data.pop("mix", None)
    for other in SUBCOMMANDS:
        data.pop(other, None)
    mc = parse_mixture_config(data)
    if not mc.specs:
        raise ConfigError("config defines no [[category]] tables")
    avg = args.default_avg_tokens if args.default_avg_tokens is not None else mc.default_avg_tokens
    target = args.target if args.target is not None else mc.target_reasoning_share
    tol = args.tolerance if args.tolerance is not None else mc.tolerance
    weighting = args.weighting or mc.weighting
    manifest = plan_mixture(mc.specs, avg)
    out = manifest.to_dict()
    if manifest.total_samples > 0:
        share = check_reasoning_share(manifest, target, tol, weighting, avg)
        out["reasoning_check"] = share.to_dict()
        if not share.within:
            print(f"reasoning share {share.share:.4f} is outside {target} +/- {tol}", file=sys.stderr)
    fp, close = _open_out(args.output)
    try:
        fp.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    finally:
        if close:
            fp.close()
    if args.draw:
        _need_seed(args, "--draw")
        base = Path(args.config).parent
        pools = {}
        for spec in manifest.specs:
            if spec.source is None:
                raise ConfigError(f"category {spec.name!r} has no source to draw from")
            stream = _Stream(str(base / spec.source))
            pools[spec.name] = list(stream)
            if stream.errors:
                return 1
        write_records(draw_samples(pools, manifest, args.seed), args.draw)
    return 0


def cmd_eval(args) -> int:
    _need_seed(args)
    if args.workers > 1 and not args.untimed:
        raise ConfigError("--workers > 1 needs --untimed; timed runs are single-threaded")
    gen = GenConfig(args.temperature, "greedy", args.max_output_tokens)
    stream = _Stream(args.input)
    by_bench = {}
    bad = 0
    for rec in stream:
        try:
            s = EvalSample.from_record(rec)
        except InputError as e:
            bad += 1
            print(f"{rec.id}: {e}", file=sys.stderr)
            continue
        by_bench.setdefault(s.benchmark, []).append(s)
    if stream.errors or bad:
        return 1
    if args.mock:
        samples = [s for group in by_bench.values() for s in group]
        client = demo_mod.mock_client(args.model, args.mock_delay_ms, args.mock_accuracy,
                                      args.mock_tokens_per_word, samples)
    else:
        client = HttpModelClient.from_env(image_root=args.image_root)
    results = []
    for bench in sorted(by_bench):
        group = by_bench[bench]
        k = len(group) if args.subset_size < 0 else args.subset_size
        if k > len(group):
            raise InputError(f"benchmark {bench} has {len(group)} samples, fewer than --subset-size {k}")
        results += run_benchmark(client, group, gen, k, args.seed, fail_fast=bool(args.fail_fast),
                                 workers=args.workers, timed=not args.untimed)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fp:
            for r in results:
                fp.write(json.dumps(r.to_dict()) + "\n")
    summary = aggregate(results).to_dict(args.model)
    fp, close = _open_out(args.summary)
    try:
        fp.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    finally:
        if close:
            fp.close()
    return 0


def cmd_pareto(args) -> int:
    summaries = {}
    for path in args.inputs:
        with open(path, encoding="utf-8") as fp:
            try:
                d = json.load(fp)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: {e}") from e
        name = d.get("model") or Path(path).stem
        if name in summaries:
            raise InputError(f"model {name!r} appears twice")
        summaries[name] = Summary.from_dict(d)
    points = points_from_summaries(summaries, args.axis)
    frontier = compute_pareto(points)
    label = "mean latency (ms)" if args.axis == "latency" else "mean output tokens"
    if args.csv and args.svg:
        emit_report(summaries, points, frontier, args.csv, args.svg, label)
    elif args.csv or args.svg:
        raise ConfigError("--csv and --svg go together")
    print(json.dumps({"axis": args.axis, "frontier": [points[i].label for i in frontier],
                      "points": [{"label": p.label, "cost": p.cost, "accuracy": p.accuracy} for p in points]},
                     indent=2))
    return 0


def cmd_demo(args) -> int:
    _need_seed(args)
    if not args.workdir:
        raise ConfigError("--workdir is required")
    res = demo_mod.run_demo(args.workdir, args.seed, args.subset_size)
    print(json.dumps({"seconds": round(res.seconds, 3), "csv": res.csv_path, "svg": res.svg_path,
                      "frontier": res.stats["frontier"], "accuracy": res.stats["accuracy"]}, indent=2))
    return 0


COMMANDS = {
    "plan": cmd_plan,
    "lint": cmd_lint,
    "transform": cmd_transform,
    "synth": cmd_synth,
    "mix": cmd_mix,
    "eval": cmd_eval,
    "pareto": cmd_pareto,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(parser, args)
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"vlkit {args.command}: configuration error: {e}", file=sys.stderr)
        return 2
    except (VlkitError, OSError) as e:
        print(f"vlkit {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

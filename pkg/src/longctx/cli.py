"""Command-line entry point: ``longctx <subcommand> [flags]``.

Every subcommand accepts ``--seed`` (default from ``LONGCTX_SEED``, else 0),
``--format`` and ``--output``. Floats are printed with 12 significant digits.
Usage errors exit with status 2, I/O failures with status 1.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import extension, hybrid, packing
from .attention import HaystackConfig, MRoPE, RoPE, effective_length, haystack_curve
from .errors import LongCtxError
from .mrope import DimensionLayout, assign_positions, parse_span
from .rotary import make_basis, wavelength

SUBCOMMANDS = ("analyze-basis", "extend", "positions", "haystack", "pack", "schedule", "plan-hybrid", "tradeoff")
DEFAULT_STAGES = "8192,32768,65536,131072"


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format(obj, ".12g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_round_floats(obj), indent=2) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get("LONGCTX_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"LONGCTX_SEED must be an integer, got {raw!r}") from None


def _read_samples(path: str) -> list:
    if path == "-":
        stream = contextlib.nullcontext(sys.stdin)
    else:
        stream = open(path, encoding="utf-8")
    with stream as fh:
        return [packing.Sample.from_dict(json.loads(line)) for line in fh if line.strip()]


def cmd_analyze_basis(args) -> str:
    basis = make_basis(args.head_dim, args.base)
    rows = [(d, basis.angles[d], wavelength(basis, d)) for d in range(basis.n_blocks)]
    if args.format == "json":
        return to_json({"head_dim": basis.head_dim, "base": basis.base,
                        "blocks": [dict(d=d, theta=t, wavelength=w) for d, t, w in rows]})
    return to_csv(["d", "theta", "lambda"], rows)


def cmd_extend(args) -> str:
    basis = make_basis(args.head_dim, args.base)
    s = extension.scale_factor(args.target_len, args.orig_len)
    p = extension.extend(args.method, basis, s, args.orig_len)
    layout = DimensionLayout.for_head_dim(args.head_dim) if args.head_dim % 16 == 0 else None
    r = extension.ratio_profile(basis, args.target_len)
    rows = [
        (d, basis.angles[d], p.scaled_angles[d], wavelength(basis, d), float(r[d]),
         layout.segment_name(d) if layout else "all")
        for d in range(basis.n_blocks)
    ]
    if args.format == "json":
        keys = ("d", "theta", "theta_prime", "lambda", "r", "segment")
        return to_json({"method": p.method, "scale": p.scale, "effective_base": p.effective_base,
                        "rows": [dict(zip(keys, row)) for row in rows]})
    return to_csv(["d", "theta", "theta_prime", "lambda", "r", "segment"], rows)


def cmd_positions(args) -> str:
    spans = [parse_span(s) for s in args.span]
    return "".join(json.dumps({"i_t": p.i_t, "i_h": p.i_h, "i_w": p.i_w}) + "\n" for p in assign_positions(spans))


def cmd_haystack(args) -> str:
    if args.method == "none":
        embedding = None
    else:
        basis = make_basis(args.d_k, args.base)
        s = extension.scale_factor(args.target_len, args.orig_len)
        p = extension.extend(args.method, basis, s, args.orig_len)
        embedding = RoPE(p) if args.embedding == "rope" else MRoPE(p)
    config = HaystackConfig(
        num_items=max(args.items),
        tokens_per_item=args.tokens_per_item,
        d_k=args.d_k,
        needle_index=args.needle_index,
        trials=args.trials,
        seed=args.seed,
        embedding=embedding,
    )
    curve = haystack_curve(args.items, config)
    eff = effective_length(curve, args.threshold)
    if args.format == "json":
        return to_json({
            "method": args.method,
            "points": [{"context_items": n, "success_rate": rate} for n, rate in curve.points],
            "threshold": args.threshold,
            "effective_length": eff,
        })
    text = to_csv(["context_items", "success_rate"], curve.points)
    return text + f"# effective_length@{fmt(args.threshold)}={'none' if eff is None else eff}\n"


def _load_recipe(path):
    if path is None:
        return packing.RecipeConfig()
    with open(path, encoding="utf-8") as fh:
        return packing.RecipeConfig.from_dict(json.load(fh))


def _select(args, samples):
    """Apply recipe sampling when a budget is given; otherwise keep everything."""
    if args.budget is None:
        return samples, None
    recipe = _load_recipe(args.recipe)
    sel = packing.sample_corpus(recipe, samples, args.budget, args.seed)
    info = {"total_tokens": sel.total_tokens, "category_shares": sel.category_shares,
            "long_share": sel.long_share, "warnings": sel.warnings}
    return sel.samples, info


def cmd_pack(args) -> str:
    samples = _read_samples(args.input)
    target = args.target_len
    if target is None:
        target = _load_recipe(args.recipe).target_length
    chosen, info = _select(args, samples)
    manifest = packing.pack(chosen, target)
    if args.serialize_dir:
        out_dir = Path(args.serialize_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        by_id = {s.id: s for s in samples}
        for k, p in enumerate(manifest.packs):
            (out_dir / f"pack_{k:05d}.txt").write_text(packing.serialize_chatml(p, by_id), encoding="utf-8")
    payload = manifest.to_dict()
    if info is not None:
        payload["selection"] = info
    return to_json(payload)


def cmd_schedule(args) -> str:
    stages = extension.progressive_schedule(args.stages)
    samples = None
    if args.input:
        samples, _ = _select(args, _read_samples(args.input))
    records = []
    for st in stages:
        rec = {"index": st.index, "target_length": st.target_length, "scale": st.scale}
        if samples is not None:
            rec["manifest"] = packing.pack(samples, st.target_length).to_dict()
        records.append(rec)
    if args.format == "csv":
        rows = [(r["index"], r["target_length"], r["scale"],
                 len(r["manifest"]["packs"]) if "manifest" in r else "",
                 len(r["manifest"]["leftovers"]) if "manifest" in r else "") for r in records]
        return to_csv(["index", "target_length", "scale", "packs", "leftovers"], rows)
    return to_json({"stages": records})


def cmd_plan_hybrid(args) -> str:
    cfg = hybrid.HybridConfig(args.group_size, args.hi_res_tokens, args.compression)
    return to_json(hybrid.plan(args.frames, cfg).to_dict())


def cmd_tradeoff(args) -> str:
    rows = hybrid.tradeoff_table(args.budget, args.frames)
    if args.format == "json":
        return to_json([{"frames": f, "tokens_per_frame": t} for f, t in rows])
    return to_csv(["frames", "tokens_per_frame"], rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $LONGCTX_SEED or 0)")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="output format (default depends on subcommand)")
    common.add_argument("--output", default=None, help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="longctx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    fmt_help = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("analyze-basis", parents=[common], formatter_class=fmt_help,
                       help="per-pair rotary angles and wavelengths")
    p.add_argument("--head-dim", type=int, default=128)
    p.add_argument("--base", type=float, default=10000.0)
    p.set_defaults(func=cmd_analyze_basis, default_format="csv")

    p = sub.add_parser("extend", parents=[common], formatter_class=fmt_help,
                       help="scaled angle table for an extension method")
    p.add_argument("--method", choices=extension.METHODS, default="mropepp")
    p.add_argument("--head-dim", type=int, default=128)
    p.add_argument("--base", type=float, default=10000.0)
    p.add_argument("--orig-len", type=int, default=extension.DEFAULT_ORIGINAL_LENGTH)
    p.add_argument("--target-len", type=int, default=131072)
    p.set_defaults(func=cmd_extend, default_format="csv")

    p = sub.add_parser("positions", parents=[common], formatter_class=fmt_help,
                       help="(t, h, w) position ids as JSON lines")
    p.add_argument("--span", action="append", required=True,
                   help="text:N, image:HxW or video:FxHxW; repeat in sequence order")
    p.set_defaults(func=cmd_positions, default_format="json")

    p = sub.add_parser("haystack", parents=[common], formatter_class=fmt_help,
                       help="synthetic needle retrieval curve and effective length")
    p.add_argument("--items", type=_int_list, default=[1, 2, 4, 8, 16, 32, 64],
                   help="comma-separated item counts")
    p.add_argument("--d-k", type=int, default=64)
    p.add_argument("--tokens-per-item", type=int, default=64)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--method", choices=("none",) + extension.METHODS, default="mropepp")
    p.add_argument("--embedding", choices=("mrope", "rope"), default="mrope")
    p.add_argument("--base", type=float, default=10000.0)
    p.add_argument("--orig-len", type=int, default=64, help="original context, in positions")
    p.add_argument("--target-len", type=int, default=256, help="extended context, in positions")
    p.add_argument("--needle-index", type=int, default=None,
                   help="fixed needle item (default: uniform random per trial)")
    p.add_argument("--threshold", type=float, default=0.6)
    p.set_defaults(func=cmd_haystack, default_format="csv")

    def add_pack_inputs(p, required):
        p.add_argument("--input", required=required, default=None,
                       help="samples as JSON lines (id, category, token_len, turns); '-' for stdin")
        p.add_argument("--recipe", default=None, help="RecipeConfig JSON file")
        p.add_argument("--budget", type=int, default=None,
                       help="token budget; when set, samples are drawn to the recipe before packing")

    p = sub.add_parser("pack", parents=[common], formatter_class=fmt_help,
                       help="first-fit-decreasing pack manifest")
    add_pack_inputs(p, required=True)
    p.add_argument("--target-len", type=int, default=None, help="default: recipe target_length")
    p.add_argument("--serialize-dir", default=None, help="also write one ChatML text file per pack")
    p.set_defaults(func=cmd_pack, default_format="json")

    p = sub.add_parser("schedule", parents=[common], formatter_class=fmt_help,
                       help="progressive extension stages, with a manifest per stage when --input is given")
    p.add_argument("--stages", type=_int_list, default=_int_list(DEFAULT_STAGES))
    add_pack_inputs(p, required=False)
    p.set_defaults(func=cmd_schedule, default_format="json")

    p = sub.add_parser("plan-hybrid", parents=[common], formatter_class=fmt_help,
                       help="hybrid-resolution frame plan as JSON")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--group-size", type=int, default=4)
    p.add_argument("--hi-res-tokens", type=int, default=240)
    p.add_argument("--compression", type=int, default=3)
    p.set_defaults(func=cmd_plan_hybrid, default_format="json")

    p = sub.add_parser("tradeoff", parents=[common], formatter_class=fmt_help,
                       help="frames vs tokens-per-frame under a fixed budget")
    p.add_argument("--budget", type=int, default=122880)
    p.add_argument("--frames", type=_int_list, default=[128, 256, 512, 768, 1024])
    p.set_defaults(func=cmd_tradeoff, default_format="csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.format is None:
            args.format = args.default_format
        text = args.func(args)
    except (UsageError, LongCtxError) as exc:
        parser.exit(2, f"longctx {args.subcommand}: error: {exc}\n")
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"longctx {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    try:
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"longctx {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

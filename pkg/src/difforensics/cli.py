"""Command-line front end.

Subcommands: ``diff``, ``video``, ``forgery``, ``synth``, ``eval``. All
outputs go under ``--out`` with fixed file names. Exit status is 0 on
success (degenerate results included), 1 for usage/configuration errors and
2 for data or format errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import DifForensicsError, ParameterError
from .forgery import (DEFAULT_EVIDENCE_THRESHOLD, DEFAULT_MIN_SUPPORT, DEFAULT_TAU,
                      RegionSpec, forgery_check)
from .image import (DEFAULT_SIGMA, DEFAULT_TEMPORAL_WINDOW, DEFAULT_ZERO_FLOOR,
                    AnalysisParams, FloatImage)
from .pipeline import AmplifiedPair, analyze_pair
from .synth import evaluate_recovery, format_scene_config, generate_pair, generate_stream, \
    parse_scene_config, with_seed
from .video import ReferenceSpec, change_point, iter_video

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _range(text: str) -> tuple[int, int]:
    a, sep, b = text.partition(":")
    try:
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None


def _ints(n):
    def parse(text):
        try:
            vals = tuple(int(v) for v in text.split(","))
        except ValueError:
            vals = ()
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers")
        return vals
    return parse


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_params(p):
    g = p.add_argument_group("analysis parameters")
    g.add_argument("--sigma", type=float, default=DEFAULT_SIGMA,
                   help="Gaussian std in pixels; 0 disables spatial filtering (default: 9)")
    g.add_argument("--radius", type=int, default=None,
                   help="kernel half-width in pixels (default: ceil(3*sigma))")
    g.add_argument("--window", type=int, default=DEFAULT_TEMPORAL_WINDOW,
                   help="temporal box window in frames, odd (default: 11)")
    g.add_argument("--zero-floor", type=float, default=DEFAULT_ZERO_FLOOR,
                   help="extremes at or below this are treated as no difference")
    g.add_argument("--workers", type=int, default=1,
                   help="internal threads; never changes results (default: 1)")


def _params(args) -> AnalysisParams:
    return AnalysisParams(sigma=args.sigma, truncation_radius=args.radius,
                          temporal_window=args.window, zero_floor=args.zero_floor,
                          workers=args.workers)


def _param_lines(params: AnalysisParams) -> list[str]:
    return [f"sigma: {params.sigma:g}",
            f"truncation_radius: {params.radius if params.sigma > 0 else 0}",
            f"temporal_window: {params.temporal_window}",
            f"zero_floor: {params.zero_floor:g}"]


def _fmt_loc(loc):
    return "none" if loc is None else ",".join(str(v) for v in loc)


def _pair_lines(pair: AmplifiedPair) -> list[str]:
    return [f"gain_plus: {pair.gain_plus!r}",
            f"gain_minus: {pair.gain_minus!r}",
            f"degenerate_plus: {str(pair.degenerate_plus).lower()}",
            f"degenerate_minus: {str(pair.degenerate_minus).lower()}",
            f"argmax_plus: {_fmt_loc(pair.argmax_plus())}",
            f"argmax_minus: {_fmt_loc(pair.argmax_minus())}",
            "d_minus_sign: negative (D- holds magnitudes of negative differences)"]


def _write_pair(out: Path, pair: AmplifiedPair, depth: int, prefix: str = ""):
    io.write_image(pair.d_plus, out / f"{prefix}D+.png", depth)
    io.write_image(pair.d_minus, out / f"{prefix}D-.png", depth)
    io.write_float_dump(pair.d_plus, out / f"{prefix}D+.difd")
    io.write_float_dump(pair.d_minus, out / f"{prefix}D-.difd")


# -- subcommands -----------------------------------------------------------------

def cmd_diff(args):
    params = _params(args)
    p = io.read_image(args.scene)
    p_ref = io.read_image(args.ref)
    pair = analyze_pair(p, p_ref, params)
    out = io.ensure_dir(args.out)
    _write_pair(out, pair, args.depth)
    lines = ["command: diff", f"scene: {Path(args.scene).name}", f"reference: {Path(args.ref).name}",
             f"size: {p.width}x{p.height}x{p.channels}"]
    io.write_report(out / "report.txt", lines + _param_lines(params) + _pair_lines(pair))
    return EXIT_OK


def cmd_video(args):
    params = _params(args)
    stream = io.load_stream(args.manifest)
    if args.ref_image is not None:
        ref = ReferenceSpec.external(io.read_image(args.ref_image))
        ref_desc = f"external-image {Path(args.ref_image).name}"
    elif args.ref_range is not None:
        ref = ReferenceSpec.frame_range(*args.ref_range)
        ref_desc = f"frame-range-average {args.ref_range[0]}:{args.ref_range[1]}"
    else:
        ref = ReferenceSpec.adjacent(args.adjacent)
        ref_desc = f"adjacent-frame lag {args.adjacent}"
    out = io.ensure_dir(args.out)
    frames_dir = io.ensure_dir(out / "frames") if args.frame_outputs != "none" else None

    gen = iter_video(stream, ref, params, args.analyze)
    reference = next(gen)
    if reference is not None:
        io.write_float_dump(reference, out / "reference.difd")
    indices, energy, degenerate = [], [], 0
    for i, pair, e in gen:
        indices.append(i)
        energy.append(e)
        degenerate += pair.degenerate_plus
        if frames_dir is not None:
            prefix = f"{i:06d}_"
            io.write_image(pair.d_plus, frames_dir / f"{prefix}D+.png", args.depth)
            io.write_image(pair.d_minus, frames_dir / f"{prefix}D-.png", args.depth)
            if args.frame_outputs == "all":
                io.write_float_dump(pair.d_plus, frames_dir / f"{prefix}D+.difd")
                io.write_float_dump(pair.d_minus, frames_dir / f"{prefix}D-.difd")
    io.write_energy_csv(out / "energy.csv", indices, energy)
    lines = ["command: video", f"manifest: {Path(args.manifest).name}", f"reference: {ref_desc}",
             f"analyzed: {indices[0]}:{indices[-1]}", f"frames_analyzed: {len(indices)}"]
    lines += _param_lines(params)
    lines += [f"degenerate_plus_frames: {degenerate}",
              f"max_energy_increase_frame: "
              f"{change_point(energy, indices) if len(energy) > 1 else 'none'}"]
    io.write_report(out / "report.txt", lines)
    return EXIT_OK


def cmd_forgery(args):
    params = _params(args)
    p = io.read_image(args.scene)
    p_ref = io.read_image(args.ref)
    if args.rect is not None:
        region = RegionSpec(rect=args.rect)
    elif args.mask is not None:
        region = RegionSpec(mask=io.read_image(args.mask).data)
    else:
        region = None
    res = forgery_check(p, p_ref, region, params, args.evidence_threshold,
                        args.min_support, args.tau)
    out = io.ensure_dir(args.out)
    io.write_mask(res.evidence_mask, out / "evidence_mask.png")
    io.write_image(res.pair.d_plus, out / "D+.png", args.depth)
    io.write_float_dump(res.pair.d_plus, out / "D+.difd")
    lines = ["command: forgery", f"scene: {Path(args.scene).name}", f"reference: {Path(args.ref).name}",
             f"region: {','.join(map(str, args.rect)) if args.rect else (Path(args.mask).name if args.mask else 'none')}"]
    io.write_report(out / "report.txt", lines + _param_lines(params) + res.report.as_lines())
    return EXIT_OK


def cmd_synth(args):
    try:
        text = Path(args.spec).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read scene spec: {exc}") from None
    spec, stream_opts = parse_scene_config(text)
    if args.seed is not None:
        spec = with_seed(spec, args.seed)
    frames = args.frames if args.frames is not None else stream_opts.get("frames")
    entry = args.entry if args.entry is not None else stream_opts.get("entry_frame")
    out = io.ensure_dir(args.out)
    if frames is None:
        scene = generate_pair(spec)
        io.write_image(scene.p, out / "p.png", 16)
        io.write_image(scene.p_ref, out / "p_ref.png", 16)
        io.write_float_dump(scene.p, out / "p.difd")
        io.write_float_dump(scene.p_ref, out / "p_ref.difd")
        truth = scene.truth
        (out / "scene.cfg").write_text(format_scene_config(spec))
    else:
        entry = frames if entry is None else entry
        stream, truth = generate_stream(spec, frames, entry)
        fdir = io.ensure_dir(out / "frames")
        entries = []
        for i in stream.indices:
            name = f"frame_{i:06d}.{args.frame_format}"
            io.write_image(stream.frame(i), fdir / name, 16)
            entries.append((i, f"frames/{name}"))
        io.write_manifest(out / "manifest.tsv", entries)
        (out / "scene.cfg").write_text(format_scene_config(spec, frames=frames, entry_frame=entry))
    union = np.zeros((spec.height, spec.width), dtype=bool)
    for k, t in enumerate(truth):
        io.write_mask(t, out / f"truth_{k:02d}.png")
        union |= t
    io.write_mask(union, out / "truth.png")
    return EXIT_OK


def cmd_eval(args):
    dp = io.read_image(args.result)
    truth = io.read_image(args.truth).data.max(axis=2) > 0.5
    peak = float(dp.data.max())
    degenerate = peak <= 0
    zeros = FloatImage(np.zeros_like(dp.data))
    pair = AmplifiedPair(dp, zeros, 0.0 if degenerate else 1.0, 0.0, degenerate, True)
    metrics = evaluate_recovery(pair, truth, args.threshold, args.chroma)
    lines = ["command: eval", f"result: {Path(args.result).name}", f"truth: {Path(args.truth).name}",
             f"threshold: {args.threshold:g}"] + metrics.as_lines()
    if args.out is not None:
        io.write_report(io.ensure_dir(args.out) / "metrics.txt", lines)
    print("\n".join(metrics.as_lines()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="difforensics",
                     description="Differential imaging forensics: extract and amplify faint "
                                 "differences between a scene and a reference baseline.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("diff", help="analyze a scene image against a reference image")
    p.add_argument("--scene", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--depth", type=int, choices=(8, 16), default=8, help="PNG bit depth")
    _add_params(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("video", help="analyze a frame manifest against a reference")
    p.add_argument("--manifest", required=True, help="index<TAB>path lines")
    ref = p.add_mutually_exclusive_group(required=True)
    ref.add_argument("--ref-image")
    ref.add_argument("--ref-range", type=_range, help="START:END frames to average")
    ref.add_argument("--adjacent", type=int, nargs="?", const=1, metavar="LAG",
                     help="difference against frame i-LAG (default lag 1)")
    p.add_argument("--analyze", type=_range, help="START:END frames to analyze (default: all)")
    p.add_argument("--out", default="out")
    p.add_argument("--depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--frame-outputs", choices=("png", "all", "none"), default="png",
                   help="per-frame D+/D- PNGs, plus float dumps with 'all'")
    _add_params(p)
    p.set_defaults(func=cmd_video)

    p = sub.add_parser("forgery", help="check a suspect region against recovered evidence")
    p.add_argument("--scene", required=True)
    p.add_argument("--ref", required=True)
    region = p.add_mutually_exclusive_group()
    region.add_argument("--rect", type=_ints(4), metavar="X,Y,W,H")
    region.add_argument("--mask", help="image whose nonzero pixels mark the query region")
    p.add_argument("--evidence-threshold", type=float, default=DEFAULT_EVIDENCE_THRESHOLD)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU,
                   help="chromaticity distance above which the region is inconsistent")
    p.add_argument("--min-support", type=float, default=DEFAULT_MIN_SUPPORT,
                   help="minimum evidence fraction of valid pixels")
    p.add_argument("--out", default="out")
    p.add_argument("--depth", type=int, choices=(8, 16), default=8)
    _add_params(p)
    p.set_defaults(func=cmd_forgery)

    p = sub.add_parser("synth", help="generate a synthetic scene pair or stream")
    p.add_argument("--spec", required=True, help="scene config file (key: value)")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int, help="generate a stream of this many frames")
    p.add_argument("--entry", type=int, help="first frame carrying the evidence")
    p.add_argument("--frame-format", choices=("png", "difd"), default="png")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score a D+ result against a truth mask")
    p.add_argument("--result", required=True, help="D+ image (.difd or .png)")
    p.add_argument("--truth", required=True, help="truth mask image")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--chroma", type=_floats, help="injected R,G,B direction")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"difforensics: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"difforensics: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DifForensicsError, OSError) as exc:
        print(f"difforensics: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

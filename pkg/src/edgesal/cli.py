"""Command-line interface: enhance, eval, synth, and selftest subcommands.

Every flag can also be supplied through a JSON config file (--config);
explicit flags win over the file, which wins over built-in defaults.  The
file holds either a flat {"flag_name": value} object or per-subcommand
sections like {"eval": {...}}.

Exit codes: 0 success, 1 validation error (bad flags, missing or
inconsistent inputs), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .batch import BatchError, emit_report, run_batch
from .dataset import (SHAPE_NAMES, IngestError, SyntheticSpec,
                      generate_synthetic, ingest)
from .fields import load_image, load_map, save_image, save_map
from .metrics import METRIC_NAMES
from .pipeline import (ExternalCommandProvider, FixedMapProvider,
                       MeanLumaProvider, SeeConfig, reconstruct_image,
                       see_full)

TOY_METHOD = "toy"
EXTERNAL_METHOD = "external"


class CliValidationError(ValueError):
    """User input (flags, config file, referenced paths) is invalid."""


class _Parser(argparse.ArgumentParser):
    """argparse flavor whose argument errors surface as validation
    errors (exit code 1) instead of argparse's default exit code 2."""

    def error(self, message):
        raise CliValidationError(f"{self.prog}: {message}")


_DEFAULTS: dict[str, dict[str, object]] = {
    "enhance": {
        "image": None, "edges": None, "saliency": None,
        "saliency_reconstructed": None, "out": None, "pre": True,
        "post": True, "contrast_k": 4, "blur_sigma": 3.0,
        "export_reconstructed": None, "provider_cmd": None,
    },
    "eval": {
        "root": None, "manifest": None, "methods": None,
        "variants": "baseline,post", "out": None, "jobs": 1,
        "skip_incomplete": False, "post_only": False, "contrast_k": 4,
        "blur_sigma": 3.0, "provider_cmd": None,
        "saliency_reconstructed": None,
    },
    "synth": {
        "count": 50, "size": 256, "seed": 0, "out": None,
        "blur_sigma": 5.0, "noise_amplitude": 0.3, "hole_probability": 0.5,
        "shapes": ",".join(SHAPE_NAMES),
    },
    "selftest": {},
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="edgesal",
                     description="Edge-guided saliency map enhancement")
    sub = parser.add_subparsers(dest="command", required=True)

    enhance = sub.add_parser(
        "enhance", help="enhance saliency for one image or a directory")
    enhance.add_argument("--image", help="input image file or directory")
    enhance.add_argument("--edges", help="edge map file or directory")
    enhance.add_argument("--saliency",
                         help="baseline saliency map file or directory")
    enhance.add_argument("--saliency-reconstructed",
                         help="saliency of previously exported reconstructed "
                              "images (file or directory)")
    enhance.add_argument("--out", help="output map file or directory")
    enhance.add_argument("--pre", action=argparse.BooleanOptionalAction,
                         default=None, help="run the pre stage")
    enhance.add_argument("--post", action=argparse.BooleanOptionalAction,
                         default=None, help="run the post stage")
    enhance.add_argument("--contrast-k", type=int, default=None,
                         help="smooth-step order (0 disables)")
    enhance.add_argument("--blur-sigma", type=float, default=None,
                         help="post-stage saliency blur sigma")
    enhance.add_argument("--export-reconstructed", metavar="DIR",
                         help="write pre-stage reconstructed images here "
                              "and take no further steps needing saliency")
    enhance.add_argument("--provider-cmd",
                         help="external saliency command with {input} and "
                              "{output} placeholders")

    evalp = sub.add_parser("eval", help="evaluate variants over a dataset")
    evalp.add_argument("--root", help="dataset root directory")
    evalp.add_argument("--manifest", help="JSON file overriding directories")
    evalp.add_argument("--methods",
                       help="comma-separated method names (default: all "
                            "saliency subdirectories)")
    evalp.add_argument("--variants",
                       help="comma-separated subset of baseline,post,full")
    evalp.add_argument("--out", help="report output directory")
    evalp.add_argument("--jobs", type=int, default=None,
                       help="parallel image workers")
    evalp.add_argument("--skip-incomplete", action="store_true",
                       default=None, help="skip keys with missing files")
    evalp.add_argument("--post-only", action="store_true", default=None,
                       help="full variant runs only the post stage")
    evalp.add_argument("--contrast-k", type=int, default=None)
    evalp.add_argument("--blur-sigma", type=float, default=None)
    evalp.add_argument("--provider-cmd",
                       help="external saliency command backing the "
                            "'external' method")
    evalp.add_argument("--saliency-reconstructed", metavar="ROOT",
                       help="per-method directories of precomputed saliency "
                            "for reconstructed images (resume mode)")

    synth = sub.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--count", type=int, default=None)
    synth.add_argument("--size", type=int, default=None)
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--out", help="corpus output directory")
    synth.add_argument("--blur-sigma", type=float, default=None,
                       help="saliency corruption blur")
    synth.add_argument("--noise-amplitude", type=float, default=None)
    synth.add_argument("--hole-probability", type=float, default=None)
    synth.add_argument("--shapes", help="comma-separated subset of "
                                        + ",".join(SHAPE_NAMES))

    sub.add_parser("selftest", help="run built-in consistency checks")

    for p in (enhance, evalp, synth):
        p.add_argument("--config", help="JSON file mirroring these flags")
    return parser


def _config_section(path: str, command: str) -> dict:
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise CliValidationError(f"config file not found: {cfg_path}")
    try:
        data = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise CliValidationError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise CliValidationError("config file must hold a JSON object")
    section = data.get(command, data)
    if not isinstance(section, dict):
        raise CliValidationError(f"config section {command!r} must be an "
                                 "object")
    return {str(k).replace("-", "_"): v for k, v in section.items()
            if k not in _DEFAULTS}


def _merge_options(args: argparse.Namespace) -> SimpleNamespace:
    defaults = _DEFAULTS[args.command]
    section = {}
    if getattr(args, "config", None):
        section = _config_section(args.config, args.command)
        unknown = set(section) - set(defaults)
        if unknown:
            raise CliValidationError(
                f"unknown config key(s) for {args.command}: "
                f"{', '.join(sorted(unknown))}")
    merged = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        merged[key] = cli_value if cli_value is not None else section.get(
            key, default)
    return SimpleNamespace(**merged)


def _require(opts: SimpleNamespace, *names: str) -> None:
    missing = [n for n in names if getattr(opts, n) in (None, "")]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise CliValidationError(f"missing required option(s): {flags}")


def _split_csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _cmd_synth(opts: SimpleNamespace) -> int:
    _require(opts, "out")
    spec = SyntheticSpec(count=int(opts.count), size=int(opts.size),
                         shapes=tuple(_split_csv(opts.shapes)),
                         blur_sigma=float(opts.blur_sigma),
                         noise_amplitude=float(opts.noise_amplitude),
                         hole_probability=float(opts.hole_probability),
                         seed=int(opts.seed))
    records = generate_synthetic(spec, opts.out)
    print(f"wrote {len(records)} synthetic items under {opts.out}")
    return 0


def _cmd_eval(opts: SimpleNamespace) -> int:
    _require(opts, "root", "out")
    requested = _split_csv(opts.methods) if opts.methods else None
    providers = {}
    if requested and TOY_METHOD in requested:
        providers[TOY_METHOD] = MeanLumaProvider()
    if opts.provider_cmd:
        providers[EXTERNAL_METHOD] = ExternalCommandProvider(
            shlex.split(opts.provider_cmd))
    elif requested and EXTERNAL_METHOD in requested:
        raise CliValidationError(
            f"method {EXTERNAL_METHOD!r} needs --provider-cmd")
    directory_methods = ([m for m in requested if m not in providers]
                         if requested is not None else None)
    records, skipped = ingest(opts.root, opts.manifest,
                              skip_incomplete=bool(opts.skip_incomplete),
                              methods=directory_methods)
    variants = tuple(_split_csv(opts.variants))
    cfg = SeeConfig(contrast_k=int(opts.contrast_k),
                    blur_sigma=float(opts.blur_sigma),
                    run_pre=not opts.post_only, run_post=True)
    report = run_batch(records, requested, variants, cfg,
                       providers=providers or None,
                       reconstructed_root=opts.saliency_reconstructed,
                       jobs=int(opts.jobs), skipped=skipped)
    written = emit_report(report, opts.out)
    for (method, variant), entry in sorted(report.aggregate.items()):
        stats = "  ".join(f"{name}={entry[name]:.4f}"
                          for name in METRIC_NAMES)
        print(f"{method}/{variant}: {stats}  (n={int(entry['image_count'])})")
    for failure in report.failures:
        print(f"failed {failure['key']} [{failure['method']}/"
              f"{failure['variant']}]: {failure['error']}", file=sys.stderr)
    for key, reason in report.skipped:
        print(f"skipped {key}: {reason}", file=sys.stderr)
    print(f"wrote {len(written)} report file(s) under {opts.out}")
    if report.failures and not report.per_image:
        print("error: every evaluation failed", file=sys.stderr)
        return 2
    return 0


def _enhance_worklist(opts: SimpleNamespace) -> list[dict[str, Path | str]]:
    """Resolve single-file or directory mode into per-key path sets."""
    image = Path(opts.image)
    edges = Path(opts.edges)
    if image.is_dir():
        keys = sorted(p.stem for p in image.glob("*.png"))
        if not keys:
            raise CliValidationError(f"no PNG images under {image}")
        if not edges.is_dir():
            raise CliValidationError(
                "--edges must be a directory when --image is one")
        items = []
        for key in keys:
            item: dict[str, Path | str] = {
                "key": key, "image": image / f"{key}.png",
                "edges": edges / f"{key}.png"}
            if opts.saliency:
                item["saliency"] = Path(opts.saliency) / f"{key}.png"
            if opts.saliency_reconstructed:
                item["saliency_reconstructed"] = (
                    Path(opts.saliency_reconstructed) / f"{key}.png")
            if opts.out:
                item["out"] = Path(opts.out) / f"{key}.png"
            items.append(item)
        return items
    if not image.is_file():
        raise CliValidationError(f"image not found: {image}")
    item = {"key": image.stem, "image": image, "edges": edges}
    if opts.saliency:
        item["saliency"] = Path(opts.saliency)
    if opts.saliency_reconstructed:
        item["saliency_reconstructed"] = Path(opts.saliency_reconstructed)
    if opts.out:
        out = Path(opts.out)
        item["out"] = out / f"{image.stem}.png" if out.is_dir() else out
    return [item]


def _cmd_enhance(opts: SimpleNamespace) -> int:
    _require(opts, "image", "edges")
    if not opts.out and not opts.export_reconstructed:
        raise CliValidationError(
            "nothing to do: pass --out and/or --export-reconstructed")
    if opts.out and not (opts.pre or opts.post):
        raise CliValidationError("enable at least one of --pre / --post")
    cfg = SeeConfig(contrast_k=int(opts.contrast_k),
                    blur_sigma=float(opts.blur_sigma),
                    run_pre=bool(opts.pre), run_post=bool(opts.post))
    items = _enhance_worklist(opts)
    export_dir = (Path(opts.export_reconstructed)
                  if opts.export_reconstructed else None)
    if export_dir:
        export_dir.mkdir(parents=True, exist_ok=True)
    if opts.out and len(items) > 1:
        Path(opts.out).mkdir(parents=True, exist_ok=True)
    for item in items:
        image = load_image(item["image"])
        edge_map = load_map(item["edges"])
        if edge_map.shape != image.shape[:2]:
            raise CliValidationError(
                f"{item['key']}: edge map {edge_map.shape} does not match "
                f"image {image.shape[:2]}")
        rebuilt = None
        if export_dir is not None:
            rebuilt = reconstruct_image(image, edge_map, cfg)
            export_path = export_dir / f"{item['key']}.png"
            save_image(rebuilt, export_path)
            print(f"exported reconstructed image: {export_path}")
        if not opts.out:
            continue
        if opts.provider_cmd:
            provider = ExternalCommandProvider(shlex.split(opts.provider_cmd))
        elif "saliency" in item:
            recon_map = None
            if "saliency_reconstructed" in item:
                recon_map = load_map(item["saliency_reconstructed"])
            provider = FixedMapProvider(load_map(item["saliency"]), recon_map)
        else:
            raise CliValidationError(
                "a saliency source is required: --saliency or "
                "--provider-cmd")
        result = see_full(image, edge_map, provider, cfg, key=item["key"])
        out_path = Path(item["out"])
        if out_path.parent and not out_path.parent.exists():
            out_path.parent.mkdir(parents=True, exist_ok=True)
        save_map(result, out_path)
        print(f"wrote enhanced map: {out_path}")
    return 0


def _cmd_selftest(_: SimpleNamespace) -> int:
    from .merging import POST_MERGERS, gdm_run
    from .metrics import evaluate, f_measure_curve, pr_at_threshold
    from .pipeline import smooth_step
    from .solver import (build_green_kernel, gradient, reconstruct)
    from .fields import pad_zero

    checks: list[tuple[str, bool, str]] = []

    def check(name: str, passed: bool, detail: str = "") -> None:
        checks.append((name, bool(passed), detail))

    rng = np.random.default_rng(20240817)
    f = rng.random((64, 48))
    padded = pad_zero(f, 3)
    kernel = build_green_kernel(*padded.shape)
    out = reconstruct(gradient(padded), kernel, 3, clamp=False)
    err = float(np.abs(out - f).max())
    check("solver round trip (64x48)", err <= 1e-5, f"max err {err:.2e}")

    h, w = 16, 12
    kern = build_green_kernel(h, w)
    uu = np.arange(h)[:, None]
    vv = np.arange(w)[None, :]
    denom = 4.0 - 2.0 * np.cos(2 * np.pi * uu / h) - 2.0 * np.cos(
        2 * np.pi * vv / w)
    closed = np.zeros((h, w))
    np.divide(1.0, denom, out=closed, where=denom > 1e-9)
    kerr = float(np.abs(kern.transfer.real - closed).max())
    check("kernel closed form (16x12)", kerr <= 1e-10, f"max err {kerr:.2e}")

    s = np.linspace(0.0, 1.0, 1000)
    expanded = 6 * s**5 - 15 * s**4 + 10 * s**3
    serr = float(np.abs(smooth_step(s, 2) - expanded).max())
    fixed = all(abs(smooth_step(v, k) - v) < 1e-12
                for v in (0.0, 0.5, 1.0) for k in range(9))
    check("smooth-step expansion + fixed points", serr <= 1e-12 and fixed,
          f"max err {serr:.2e}")

    s4 = np.zeros((4, 4))
    s4[0:2, :] = 1.0
    g4 = np.zeros((4, 4), dtype=bool)
    g4[:, 0:2] = True
    p, r, fp = pr_at_threshold(s4, g4, 0.5)
    curve, summary = evaluate(s4, g4)
    scores = f_measure_curve(curve.precision, curve.recall)
    # threshold 0 selects every pixel (P = 1/2, R = 1), so the curve max
    # is 0.545/1.045; the hand-counted mask wins among positive thresholds
    best_positive = float(scores[1:].max())
    check("metrics hand case (4x4)",
          p == 0.5 and r == 0.5 and fp == 0.5
          and abs(best_positive - 0.5) < 1e-12
          and abs(summary.f_measure - 0.545 / 1.045) < 1e-12,
          f"P={p} R={r} Fm={summary.f_measure}")

    field = rng.random((32, 32))
    edge_map = np.zeros((32, 32))
    edge_map[8:24, 8] = 1.0
    first = gdm_run(field, edge_map, POST_MERGERS)
    second = gdm_run(field, edge_map, POST_MERGERS)
    check("deterministic gdm run", bool(np.array_equal(first, second)))

    zero_edges = gdm_run(field, np.zeros((32, 32)), POST_MERGERS)
    check("post merge with no edges flattens",
          float(np.abs(zero_edges).max()) <= 1e-9)

    failed = [name for name, ok, _ in checks if not ok]
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"{status}  {name}{suffix}")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else 2


_HANDLERS = {"enhance": _cmd_enhance, "eval": _cmd_eval,
             "synth": _cmd_synth, "selftest": _cmd_selftest}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _merge_options(args)
        return _HANDLERS[args.command](opts)
    except (CliValidationError, IngestError, BatchError, ValueError,
            FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Batch evaluation: run enhancement variants over a dataset and report.

For every (image, method) pair up to three variants are scored against the
ground truth: the method's map as-is ("baseline"), the post-stage
enhancement of that map ("post"), and the full chain ("full").  Work is
distributed over a thread pool at image granularity; results are reduced
in sorted order so the report content does not depend on the pool width.
Timings are wall-clock sums per stage and are the only
parallelism-dependent part of a report.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetRecord
from .fields import binarize, load_image, load_map
from .metrics import (METRIC_NAMES, PRCurve, EvalSummary, evaluate,
                      f_measure_curve)
from .pipeline import (PrecomputedDirectoryProvider, ProviderError,
                       SaliencyProvider, SeeConfig, see_full, see_post)
from .solver import KernelCache, default_cache

VARIANT_NAMES = ("baseline", "post", "full")


class BatchError(ValueError):
    """The batch request itself is invalid (bad variant, no provider)."""


@dataclass(frozen=True)
class ImageResult:
    """Metrics of one (image, method, variant) cell."""

    key: str
    method: str
    variant: str
    summary: EvalSummary
    curve: PRCurve


@dataclass
class RunReport:
    """Everything a batch run produced, ready for serialization."""

    methods: list[str]
    variants: list[str]
    config: SeeConfig
    per_image: list[ImageResult]
    aggregate: dict[tuple[str, str], dict[str, float]]
    curves: dict[tuple[str, str], PRCurve]
    failures: list[dict[str, str]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


def _resolve_providers(records: list[DatasetRecord], methods: list[str],
                       providers: dict[str, SaliencyProvider] | None,
                       reconstructed_root: str | Path | None,
                       ) -> dict[str, SaliencyProvider]:
    """One provider per method: explicit ones win, otherwise the method's
    precomputed saliency directory is wrapped."""
    resolved: dict[str, SaliencyProvider] = dict(providers or {})
    for method in methods:
        if method in resolved:
            continue
        directories = {r.saliency_paths[method].parent
                       for r in records if method in r.saliency_paths}
        if len(directories) != 1:
            raise BatchError(
                f"method {method!r} has no provider and no unique "
                "precomputed saliency directory")
        rec_dir = (Path(reconstructed_root) / method
                   if reconstructed_root is not None else None)
        resolved[method] = PrecomputedDirectoryProvider(
            directories.pop(), rec_dir, name=method)
    return resolved


def _evaluate_record(record: DatasetRecord, methods: list[str],
                     variants: list[str],
                     providers: dict[str, SaliencyProvider], cfg: SeeConfig,
                     cache: KernelCache,
                     ) -> tuple[list[ImageResult], list[dict[str, str]],
                                dict[str, float]]:
    results: list[ImageResult] = []
    failures: list[dict[str, str]] = []
    timings: dict[str, float] = {}

    def clocked(stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        out = fn(*args, **kwargs)
        timings[stage] = timings.get(stage, 0.0) + (
            time.perf_counter() - start) * 1e3
        return out

    try:
        image = clocked("load", load_image, record.image_path)
        gt = binarize(clocked("load", load_map, record.gt_path))
        edges = clocked("load", load_map, record.edge_path)
    except Exception as exc:
        failures.append({"key": record.key, "method": "*", "variant": "*",
                         "error": f"load failed: {exc}"})
        return results, failures, timings
    if gt.shape != image.shape[:2] or edges.shape != image.shape[:2]:
        failures.append({"key": record.key, "method": "*", "variant": "*",
                         "error": "ground truth / edge map dimensions do "
                                  "not match the image"})
        return results, failures, timings
    for method in methods:
        provider = providers[method]
        try:
            base_map = provider.for_original(image, record.key)
            base_map = np.asarray(base_map, dtype=np.float64)
            if base_map.shape != image.shape[:2]:
                raise ProviderError(
                    f"saliency map shape {base_map.shape} does not match "
                    f"image {image.shape[:2]}")
        except Exception as exc:
            for variant in variants:
                failures.append({"key": record.key, "method": method,
                                 "variant": variant, "error": str(exc)})
            continue
        for variant in variants:
            try:
                if variant == "baseline":
                    out = base_map
                elif variant == "post":
                    out = clocked("enhance_post", see_post, base_map, edges,
                                  cfg, cache)
                else:
                    out = clocked("enhance_full", see_full, image, edges,
                                  provider, cfg, cache, record.key)
                curve, summary = clocked("evaluate", evaluate, out, gt)
            except Exception as exc:
                failures.append({"key": record.key, "method": method,
                                 "variant": variant, "error": str(exc)})
                continue
            results.append(ImageResult(key=record.key, method=method,
                                       variant=variant, summary=summary,
                                       curve=curve))
    return results, failures, timings


def run_batch(records: list[DatasetRecord],
              methods: list[str] | None = None,
              variants: tuple[str, ...] = ("baseline", "post"),
              cfg: SeeConfig | None = None,
              providers: dict[str, SaliencyProvider] | None = None,
              reconstructed_root: str | Path | None = None,
              jobs: int = 1,
              cache: KernelCache | None = None,
              skipped: list[tuple[str, str]] | None = None) -> RunReport:
    """Score every record under every method and variant.

    ``providers`` supplies computational saliency backends by method name;
    methods without one fall back to their precomputed map directory.  The
    ``full`` variant follows cfg.run_pre / run_post.  Per-image failures
    are recorded and the run continues.
    """
    cfg = cfg or SeeConfig()
    cache = cache or default_cache()
    jobs = max(1, int(jobs))
    for variant in variants:
        if variant not in VARIANT_NAMES:
            raise BatchError(f"unknown variant {variant!r}; expected one "
                             f"of {VARIANT_NAMES}")
    if not variants:
        raise BatchError("no variants requested")
    if methods is None:
        methods = sorted({m for r in records for m in r.saliency_paths})
        if providers:
            methods = sorted(set(methods) | set(providers))
    if not methods and records:
        raise BatchError("no methods requested and none discoverable")
    resolved = _resolve_providers(records, methods, providers,
                                  reconstructed_root)
    start = time.perf_counter()
    if jobs == 1 or len(records) <= 1:
        chunks = [_evaluate_record(r, methods, list(variants), resolved,
                                   cfg, cache) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(
                lambda r: _evaluate_record(r, methods, list(variants),
                                           resolved, cfg, cache), records))
    per_image: list[ImageResult] = []
    failures: list[dict[str, str]] = []
    timings: dict[str, float] = {}
    for results, fails, times in chunks:
        per_image.extend(results)
        failures.extend(fails)
        for stage, ms in times.items():
            timings[stage] = timings.get(stage, 0.0) + ms
    order = {m: i for i, m in enumerate(methods)}
    vorder = {v: i for i, v in enumerate(variants)}
    per_image.sort(key=lambda r: (r.key, order[r.method], vorder[r.variant]))
    failures.sort(key=lambda f: (f["key"], f["method"], f["variant"]))
    aggregate: dict[tuple[str, str], dict[str, float]] = {}
    curves: dict[tuple[str, str], PRCurve] = {}
    for method in methods:
        for variant in variants:
            cell = [r for r in per_image
                    if r.method == method and r.variant == variant]
            if not cell:
                continue
            entry = {"image_count": float(len(cell))}
            for name in METRIC_NAMES:
                values = np.array([getattr(r.summary, name) for r in cell])
                entry[name] = float(values.mean())
            mean_curve = PRCurve(
                thresholds=cell[0].curve.thresholds.copy(),
                precision=np.mean([r.curve.precision for r in cell], axis=0),
                recall=np.mean([r.curve.recall for r in cell], axis=0),
                false_positive=np.mean([r.curve.false_positive for r in cell],
                                       axis=0))
            entry["f_measure_of_mean_curve"] = float(
                f_measure_curve(mean_curve.precision,
                                mean_curve.recall).max())
            aggregate[(method, variant)] = entry
            curves[(method, variant)] = mean_curve
    timings["total"] = (time.perf_counter() - start) * 1e3
    return RunReport(methods=list(methods), variants=list(variants),
                     config=cfg, per_image=per_image, aggregate=aggregate,
                     curves=curves, failures=failures,
                     skipped=list(skipped or []), timings=timings)


def report_to_dict(report: RunReport) -> dict:
    """JSON-ready view of a report (tuple keys flattened into rows)."""
    per_image = [{"key": r.key, "method": r.method, "variant": r.variant,
                  **r.summary.as_dict()} for r in report.per_image]
    aggregate = [{"method": method, "variant": variant, **entry}
                 for (method, variant), entry in sorted(report.aggregate.items())]
    return {
        "config": asdict(report.config),
        "methods": list(report.methods),
        "variants": list(report.variants),
        "per_image": per_image,
        "aggregate": aggregate,
        "failures": list(report.failures),
        "skipped": [list(pair) for pair in report.skipped],
        "timings": {k: round(v, 3) for k, v in sorted(report.timings.items())},
    }


_SVG_COLORS = ("#1965b0", "#dc050c", "#4eb265", "#f7a000", "#882e72")


def _svg_pr_plot(method: str, variant_curves: dict[str, PRCurve]) -> str:
    """Minimal PR plot: one polyline per variant in a 640x480 frame."""
    width, height = 640, 480
    left, right, top, bottom = 60, 620, 20, 440

    def sx(v: float) -> float:
        return left + v * (right - left)

    def sy(v: float) -> float:
        return bottom - v * (bottom - top)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{right - left}" '
        f'height="{bottom - top}" fill="white" stroke="black"/>',
        f'<text x="{(left + right) / 2:.1f}" y="{height - 10}" '
        f'text-anchor="middle" font-size="14">recall</text>',
        f'<text x="15" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
        f'font-size="14" transform="rotate(-90 15 '
        f'{(top + bottom) / 2:.1f})">precision</text>',
        f'<text x="{(left + right) / 2:.1f}" y="{top - 5}" '
        f'text-anchor="middle" font-size="14">{method}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{sx(tick):.1f}" y="{bottom + 16}" '
                     f'text-anchor="middle" font-size="11">{tick:g}</text>')
        parts.append(f'<text x="{left - 8}" y="{sy(tick) + 4:.1f}" '
                     f'text-anchor="end" font-size="11">{tick:g}</text>')
    for i, (variant, curve) in enumerate(sorted(variant_curves.items())):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        points = " ".join(
            f"{sx(r):.2f},{sy(p):.2f}"
            for r, p in zip(curve.recall, curve.precision))
        parts.append(f'<polyline fill="none" stroke="{color}" '
                     f'stroke-width="1.5" points="{points}"/>')
        parts.append(f'<text x="{right - 150}" y="{top + 20 + 18 * i}" '
                     f'font-size="12" fill="{color}">{variant}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: RunReport, out_dir: str | Path,
                formats: tuple[str, ...] = ("json", "csv", "curves-csv",
                                            "svg")) -> list[Path]:
    """Write the report under ``out_dir``; returns the files written.

    json   -> report.json     full structure, sorted keys
    csv    -> per_image.csv   one row per image x method x variant
    curves-csv -> curves.csv  256 rows per mean curve
    svg    -> pr_<method>.svg PR plot overlaying variants
    All formats are plain deterministic text given the same report
    content; only the "timings" block of the JSON varies between runs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    known = {"json", "csv", "curves-csv", "svg"}
    unknown = set(formats) - known
    if unknown:
        raise ValueError(f"unknown report format(s): {sorted(unknown)}")
    written: list[Path] = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(report_to_dict(report), indent=2,
                                   sort_keys=True) + "\n")
        written.append(path)
    if "csv" in formats:
        path = out_dir / "per_image.csv"
        lines = ["key,method,variant," + ",".join(METRIC_NAMES)]
        for r in report.per_image:
            metrics = ",".join(repr(getattr(r.summary, n))
                               for n in METRIC_NAMES)
            lines.append(f"{r.key},{r.method},{r.variant},{metrics}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "curves-csv" in formats:
        path = out_dir / "curves.csv"
        lines = ["method,variant,threshold,precision,recall,false_positive"]
        for (method, variant), curve in sorted(report.curves.items()):
            for i in range(curve.thresholds.size):
                lines.append(
                    f"{method},{variant},{curve.thresholds[i]!r},"
                    f"{curve.precision[i]!r},{curve.recall[i]!r},"
                    f"{curve.false_positive[i]!r}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if "svg" in formats:
        for method in report.methods:
            variant_curves = {variant: curve
                              for (m, variant), curve in report.curves.items()
                              if m == method}
            if not variant_curves:
                continue
            path = out_dir / f"pr_{method}.svg"
            path.write_text(_svg_pr_plot(method, variant_curves))
            written.append(path)
    return written

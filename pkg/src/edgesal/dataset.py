"""Dataset ingestion and deterministic synthetic corpus generation.

On disk a dataset is a directory tree keyed by file stem:

    root/images/<key>.png        color input image
    root/gt/<key>.png            binary ground-truth mask
    root/edges/<key>.png         salient-edge strength map
    root/saliency/<method>/<key>.png   one subdirectory per method

A JSON manifest can point any of these roles somewhere else, e.g.
{"images": "/data/img", "saliency": {"deep": "/data/deep_maps"}}.

The synthetic generator renders simple shapes (rectangle, disk, L-shape)
over a textured background and derives ground truth, an exact one-pixel
boundary edge map, and a deliberately corrupted saliency map (blur, added
background noise, punched interior holes) for the method name
"corrupted".  Everything is reproducible from the seed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import distance_transform_edt

from .fields import erode_diamond, gaussian_blur, save_image, save_map

SYNTHETIC_METHOD = "corrupted"
SHAPE_NAMES = ("rectangle", "disk", "l-shape")


class IngestError(ValueError):
    """Dataset directory content is missing or inconsistent."""


@dataclass(frozen=True)
class DatasetRecord:
    """Paths of one dataset item; all files exist and share dimensions."""

    key: str
    image_path: Path
    gt_path: Path
    edge_path: Path
    saliency_paths: dict[str, Path] = field(default_factory=dict)


def _png_size(path: Path) -> tuple[int, int]:
    """(height, width) of a PNG, verifying the file decodes."""
    with Image.open(path) as im:
        im.verify()
    with Image.open(path) as im:
        return im.height, im.width


def _resolve_layout(root: str | Path,
                    manifest: str | Path | None) -> tuple[Path, Path, Path,
                                                          dict[str, Path]]:
    root = Path(root)
    images = root / "images"
    gt = root / "gt"
    edges = root / "edges"
    saliency_root = root / "saliency"
    saliency: dict[str, Path] = {}
    overrides: dict = {}
    if manifest is not None:
        manifest = Path(manifest)
        if not manifest.is_file():
            raise IngestError(f"manifest not found: {manifest}")
        overrides = json.loads(manifest.read_text())
        if not isinstance(overrides, dict):
            raise IngestError(f"manifest must be a JSON object: {manifest}")
        base = manifest.parent
        if "images" in overrides:
            images = base / overrides["images"]
        if "gt" in overrides:
            gt = base / overrides["gt"]
        if "edges" in overrides:
            edges = base / overrides["edges"]
    if saliency_root.is_dir():
        for sub in sorted(saliency_root.iterdir()):
            if sub.is_dir():
                saliency[sub.name] = sub
    if isinstance(overrides.get("saliency"), dict):
        base = Path(manifest).parent
        for method, rel in overrides["saliency"].items():
            saliency[method] = base / rel
    return images, gt, edges, saliency


def ingest(root: str | Path, manifest: str | Path | None = None,
           skip_incomplete: bool = False,
           methods: list[str] | None = None,
           ) -> tuple[list[DatasetRecord], list[tuple[str, str]]]:
    """Collect validated dataset records, sorted by key.

    Every image key must have a ground-truth mask, an edge map, and one
    saliency map per requested method, all PNGs of the image's size.
    Broken keys abort the run with a per-key report unless
    ``skip_incomplete`` is set, in which case they are returned as
    (key, reason) pairs alongside the good records.
    """
    images_dir, gt_dir, edges_dir, saliency_dirs = _resolve_layout(
        root, manifest)
    if not images_dir.is_dir():
        raise IngestError(f"image directory not found: {images_dir}")
    if methods is not None:
        missing = [m for m in methods if m not in saliency_dirs]
        if missing:
            raise IngestError(
                f"no saliency directory for method(s): {', '.join(missing)}")
        saliency_dirs = {m: saliency_dirs[m] for m in methods}
    keys = sorted(p.stem for p in images_dir.glob("*.png"))
    if not keys:
        warnings.warn(f"no PNG images under {images_dir}", stacklevel=2)
        return [], []
    records: list[DatasetRecord] = []
    skipped: list[tuple[str, str]] = []
    for key in keys:
        image_path = images_dir / f"{key}.png"
        problems: list[str] = []
        try:
            size = _png_size(image_path)
        except Exception as exc:
            skipped.append((key, f"unreadable image: {exc}"))
            continue
        counterparts = {"ground truth": gt_dir / f"{key}.png",
                        "edge map": edges_dir / f"{key}.png"}
        for method, sal_dir in saliency_dirs.items():
            counterparts[f"saliency[{method}]"] = sal_dir / f"{key}.png"
        for role, path in counterparts.items():
            if not path.is_file():
                problems.append(f"missing {role}: {path}")
                continue
            try:
                other = _png_size(path)
            except Exception as exc:
                problems.append(f"unreadable {role}: {exc}")
                continue
            if other != size:
                problems.append(
                    f"{role} is {other[0]}x{other[1]}, image is "
                    f"{size[0]}x{size[1]}")
        if problems:
            skipped.append((key, "; ".join(problems)))
            continue
        records.append(DatasetRecord(
            key=key, image_path=image_path,
            gt_path=counterparts["ground truth"],
            edge_path=counterparts["edge map"],
            saliency_paths={m: saliency_dirs[m] / f"{key}.png"
                            for m in saliency_dirs}))
    if skipped and not skip_incomplete:
        detail = "\n".join(f"  {key}: {reason}" for key, reason in skipped)
        raise IngestError(
            f"{len(skipped)} incomplete dataset key(s) (use skip_incomplete "
            f"to continue without them):\n{detail}")
    return records, skipped


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a generated corpus; identical specs yield identical
    bytes on disk."""

    count: int = 50
    size: int = 256
    shapes: tuple[str, ...] = SHAPE_NAMES
    blur_sigma: float = 5.0
    noise_amplitude: float = 0.3
    hole_probability: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.size < 32:
            raise ValueError(f"size must be >= 32, got {self.size}")
        unknown = [s for s in self.shapes if s not in SHAPE_NAMES]
        if unknown or not self.shapes:
            raise ValueError(f"shapes must be drawn from {SHAPE_NAMES}")
        if self.blur_sigma < 0 or self.noise_amplitude < 0:
            raise ValueError("corruption amounts must be >= 0")
        if not 0.0 <= self.hole_probability <= 1.0:
            raise ValueError("hole_probability must be in [0, 1]")


def _shape_mask(shape: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Random filled shape, small against the frame so blur and noise
    corruption meaningfully degrade its saliency map."""
    yy, xx = np.mgrid[0:size, 0:size]
    cy = rng.uniform(0.35 * size, 0.65 * size)
    cx = rng.uniform(0.35 * size, 0.65 * size)
    if shape == "disk":
        radius = rng.uniform(0.05 * size, 0.10 * size)
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    half_h = rng.uniform(0.05 * size, 0.10 * size)
    half_w = rng.uniform(0.05 * size, 0.10 * size)
    box = ((np.abs(yy - cy) <= half_h) & (np.abs(xx - cx) <= half_w))
    if shape == "rectangle":
        return box
    # l-shape: box minus one quadrant
    corner = rng.integers(0, 4)
    above = yy < cy if corner < 2 else yy >= cy
    left = xx < cx if corner % 2 == 0 else xx >= cx
    return box & ~(above & left)


def exact_boundary(mask: np.ndarray) -> np.ndarray:
    """One-pixel inner boundary of a binary mask, strength 1.0."""
    mask = np.asarray(mask, dtype=bool)
    return (mask & ~erode_diamond(mask)).astype(np.float64)


def _corrupt_saliency(gt: np.ndarray, spec: SyntheticSpec,
                      rng: np.random.Generator) -> np.ndarray:
    """Blur + background noise + optional punched interior holes."""
    s = gt.astype(np.float64)
    if spec.blur_sigma > 0:
        s = gaussian_blur(s, spec.blur_sigma)
    if spec.noise_amplitude > 0:
        noise = rng.uniform(0.0, spec.noise_amplitude, size=gt.shape)
        s = s + np.where(gt, 0.0, noise)
    if spec.hole_probability > 0 and rng.random() < spec.hole_probability:
        # punch out most of the interior but keep a boundary band, so an
        # enhancer that trusts the edges can refill what was lost
        depth = distance_transform_edt(gt)
        band = max(3.0, spec.blur_sigma)
        interior = depth > band
        rows, cols = np.nonzero(interior)
        if rows.size:
            yy, xx = np.mgrid[0:gt.shape[0], 0:gt.shape[1]]
            max_depth = float(depth.max())
            pick = int(rng.integers(rows.size))
            radius = rng.uniform(1.0, 1.6) * max_depth
            hole = ((yy - rows[pick]) ** 2 + (xx - cols[pick]) ** 2
                    <= radius ** 2)
            s = np.where(hole & interior, 0.0, s)
    return np.clip(s, 0.0, 1.0)


def generate_synthetic(spec: SyntheticSpec,
                       out_dir: str | Path) -> list[DatasetRecord]:
    """Render a corpus under ``out_dir`` and return its records.

    Images are written as RGB with luma equal to the rendered intensity,
    ground truth and edge maps as 8-bit grayscale, and the corrupted
    saliency under saliency/corrupted/.
    """
    out_dir = Path(out_dir)
    dirs = {name: out_dir / name for name in ("images", "gt", "edges")}
    dirs["saliency"] = out_dir / "saliency" / SYNTHETIC_METHOD
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    records: list[DatasetRecord] = []
    width = len(str(spec.count - 1))
    for index in range(spec.count):
        key = f"synthetic_{index:0{width}d}"
        shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
        gt = _shape_mask(shape, spec.size, rng)
        foreground = rng.uniform(0.65, 0.9)
        background = rng.uniform(0.15, 0.35)
        # smooth background texture keeps the toy luma provider imperfect
        texture = gaussian_blur(rng.uniform(-1.0, 1.0, (spec.size,) * 2), 8.0)
        texture = 0.35 * texture / max(float(np.abs(texture).max()), 1e-9)
        intensity = np.clip(
            np.where(gt, foreground, background + texture), 0.0, 1.0)
        image = np.stack([intensity] * 3, axis=-1)
        saliency = _corrupt_saliency(gt, spec, rng)
        image_path = dirs["images"] / f"{key}.png"
        gt_path = dirs["gt"] / f"{key}.png"
        edge_path = dirs["edges"] / f"{key}.png"
        sal_path = dirs["saliency"] / f"{key}.png"
        save_image(image, image_path)
        save_map(gt.astype(np.float64), gt_path)
        save_map(exact_boundary(gt), edge_path)
        save_map(saliency, sal_path)
        records.append(DatasetRecord(
            key=key, image_path=image_path, gt_path=gt_path,
            edge_path=edge_path,
            saliency_paths={SYNTHETIC_METHOD: sal_path}))
    return records

"""Saliency enhancement pipeline: pre/post stages, contrast, providers.

The full chain takes a color image, its salient-edge map, and a saliency
backend ("provider"), and produces an enhanced saliency map:

1. pre stage: re-integrate the image with pre-style mergers, run the
   provider on both the original and the reconstructed image, average.
2. post stage: blur the saliency map, re-integrate with post-style mergers
   against the thinned edges, average with the unblurred input.
3. min-max normalize once, then sharpen contrast with a smooth-step
   polynomial.

Providers abstract where saliency maps come from: a directory of
precomputed PNGs, an external command, or the built-in mean-luma toy.
"""

from __future__ import annotations

import math
import subprocess
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fields import load_map, normalize, save_image, to_luma
from .merging import (POST_MERGERS, PRE_MERGERS, gdm_run, gdm_run_color,
                      prepare_saliency_post)
from .solver import KernelCache


class ProviderError(RuntimeError):
    """A saliency provider could not produce a usable map."""


@dataclass(frozen=True)
class SeeConfig:
    """Tunable knobs of the enhancement chain.

    contrast_k: smooth-step order (0 disables contrast sharpening).
    blur_sigma: Gaussian sigma for the post stage's saliency pre-blur.
    run_pre / run_post: which stages the full chain executes.
    pad_margin: zero-padding width around every field before solving.
    """

    contrast_k: int = 4
    blur_sigma: float = 3.0
    run_pre: bool = True
    run_post: bool = True
    pad_margin: int = 3

    def __post_init__(self) -> None:
        if self.contrast_k < 0:
            raise ValueError(f"contrast_k must be >= 0, got {self.contrast_k}")
        if self.blur_sigma <= 0:
            raise ValueError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        if self.pad_margin < 1:
            raise ValueError(f"pad_margin must be >= 1, got {self.pad_margin}")


def smooth_step(values: np.ndarray | float, order: int) -> np.ndarray | float:
    """Hermite smooth-step of the given order, applied element-wise.

    Evaluates s^(order+1) * sum_{j=0..order} C(order+j, j) *
    C(2*order+1, order-j) * (-s)^j, which maps [0, 1] onto [0, 1] with
    fixed points at 0, 1/2, and 1 and flattens toward both ends as the
    order grows.  Order 0 is the identity.  Inputs outside [0, 1] are
    clamped with a warning.
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        warnings.warn("smooth_step input outside [0, 1]; clamping",
                      stacklevel=2)
        arr = np.clip(arr, 0.0, 1.0)
    # The alternating polynomial cancels badly near s = 1 (error up to
    # coefficient * eps, ~1e-10 at order 8), so evaluate the algebraically
    # identical all-positive form sum_{j>order} C(2*order+1, j) * s^j *
    # (1-s)^(2*order+1-j) instead; every term is nonnegative, which keeps
    # the result in [0, 1] and monotone to within an ulp.
    rest = 1.0 - arr
    degree = 2 * order + 1
    rest_pow = [np.ones_like(arr)]
    for _ in range(order):
        rest_pow.append(rest_pow[-1] * rest)
    arr_pow = arr ** (order + 1)
    total = np.zeros_like(arr)
    for j in range(order + 1, degree + 1):
        total += math.comb(degree, j) * arr_pow * rest_pow[degree - j]
        arr_pow = arr_pow * arr
    out = np.clip(total, 0.0, 1.0)
    if np.ndim(values) == 0:
        return float(out)
    return out


class SaliencyProvider:
    """Produces a saliency map in [0, 1] for a color image.

    The pipeline asks separately for maps of original and reconstructed
    images; backends that compute on pixels treat both alike, while
    file-backed ones may only be able to serve one side.
    """

    name = "provider"

    def for_original(self, image: np.ndarray, key: str = "") -> np.ndarray:
        return self._compute(image, key)

    def for_reconstructed(self, image: np.ndarray,
                          key: str = "") -> np.ndarray:
        return self._compute(image, key)

    def _compute(self, image: np.ndarray, key: str) -> np.ndarray:
        raise NotImplementedError


class MeanLumaProvider(SaliencyProvider):
    """Toy backend: binary map of pixels whose luma reaches the image mean."""

    name = "toy"

    def _compute(self, image: np.ndarray, key: str = "") -> np.ndarray:
        luma = to_luma(image)
        return (luma >= luma.mean()).astype(np.float64)


class PrecomputedDirectoryProvider(SaliencyProvider):
    """File backend: maps live at <directory>/<key>.png.

    Maps for reconstructed images must be precomputed too (see the export /
    resume workflow on the command line); without a second directory this
    provider refuses the reconstructed side.
    """

    def __init__(self, directory: str | Path,
                 reconstructed_directory: str | Path | None = None,
                 name: str = "precomputed") -> None:
        self.directory = Path(directory)
        self.reconstructed_directory = (
            Path(reconstructed_directory)
            if reconstructed_directory is not None else None)
        self.name = name

    def _load(self, directory: Path, image: np.ndarray,
              key: str) -> np.ndarray:
        if not key:
            raise ProviderError(f"provider {self.name!r} needs an image key")
        path = directory / f"{key}.png"
        if not path.is_file():
            raise ProviderError(f"missing precomputed map: {path}")
        out = load_map(path)
        if out.shape != image.shape[:2]:
            raise ProviderError(
                f"map {path} has shape {out.shape}, image is "
                f"{image.shape[:2]}")
        return out

    def for_original(self, image: np.ndarray, key: str = "") -> np.ndarray:
        return self._load(self.directory, image, key)

    def for_reconstructed(self, image: np.ndarray,
                          key: str = "") -> np.ndarray:
        if self.reconstructed_directory is None:
            raise ProviderError(
                f"provider {self.name!r} has no maps for reconstructed "
                "images; export the reconstructed images, compute their "
                "maps externally, and resume with that directory")
        return self._load(self.reconstructed_directory, image, key)


class ExternalCommandProvider(SaliencyProvider):
    """Command backend: runs an argv template with {input} and {output}
    placeholders substituted by temporary PNG paths.  No shell is involved.
    """

    name = "external"

    def __init__(self, argv_template: Sequence[str]) -> None:
        argv = [str(a) for a in argv_template]
        if not argv:
            raise ValueError("empty provider command")
        joined = " ".join(argv)
        if "{input}" not in joined or "{output}" not in joined:
            raise ValueError(
                "provider command must use both {input} and {output}")
        self.argv_template = argv

    def _compute(self, image: np.ndarray, key: str = "") -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="edgesal-") as tmp:
            in_path = Path(tmp) / "input.png"
            out_path = Path(tmp) / "output.png"
            save_image(image, in_path)
            argv = [a.replace("{input}", str(in_path))
                     .replace("{output}", str(out_path))
                    for a in self.argv_template]
            proc = subprocess.run(argv, capture_output=True, text=True)
            if proc.returncode != 0:
                raise ProviderError(
                    f"provider command failed with exit code "
                    f"{proc.returncode}: {proc.stderr.strip()}")
            if not out_path.is_file():
                raise ProviderError("provider command wrote no output map")
            out = load_map(out_path)
        if out.shape != image.shape[:2]:
            raise ProviderError(
                f"provider output has shape {out.shape}, image is "
                f"{image.shape[:2]}")
        return out


class FixedMapProvider(SaliencyProvider):
    """Serves one preloaded map (and optionally a second for the
    reconstructed image); used for single-image command-line runs."""

    name = "fixed"

    def __init__(self, original_map: np.ndarray,
                 reconstructed_map: np.ndarray | None = None) -> None:
        self.original_map = np.asarray(original_map, dtype=np.float64)
        self.reconstructed_map = (
            np.asarray(reconstructed_map, dtype=np.float64)
            if reconstructed_map is not None else None)

    def for_original(self, image: np.ndarray, key: str = "") -> np.ndarray:
        return self.original_map

    def for_reconstructed(self, image: np.ndarray,
                          key: str = "") -> np.ndarray:
        if self.reconstructed_map is None:
            raise ProviderError(
                "no saliency map supplied for the reconstructed image; "
                "pass one, or export the reconstructed image and rerun")
        return self.reconstructed_map


def _checked_provider_map(provider: SaliencyProvider, which: str,
                          image: np.ndarray, key: str) -> np.ndarray:
    out = (provider.for_original(image, key) if which == "original"
           else provider.for_reconstructed(image, key))
    out = np.asarray(out, dtype=np.float64)
    if out.shape != image.shape[:2]:
        raise ProviderError(
            f"provider {provider.name!r} returned shape {out.shape} for a "
            f"{image.shape[:2]} image")
    return out


def see_post(saliency: np.ndarray, raw_edges: np.ndarray,
             cfg: SeeConfig | None = None,
             cache: KernelCache | None = None) -> np.ndarray:
    """Post stage: sharpen an existing saliency map against the edge map.

    The map is blurred, re-integrated through the post mergers, and the
    result is averaged with the original (unblurred) input, clamped to
    [0, 1].
    """
    cfg = cfg or SeeConfig()
    saliency = np.asarray(saliency, dtype=np.float64)
    raw_edges = np.asarray(raw_edges, dtype=np.float64)
    if saliency.shape != raw_edges.shape:
        raise ValueError(f"saliency shape {saliency.shape} does not match "
                         f"edge map shape {raw_edges.shape}")
    blurred = prepare_saliency_post(saliency, cfg.blur_sigma)
    refit = gdm_run(blurred, raw_edges, POST_MERGERS, cache, cfg.pad_margin)
    return np.clip(0.5 * (saliency + refit), 0.0, 1.0)


def reconstruct_image(image: np.ndarray, raw_edges: np.ndarray,
                      cfg: SeeConfig | None = None,
                      cache: KernelCache | None = None) -> np.ndarray:
    """Pre stage's image rewrite: strengthen edge-adjacent contrast and
    soften texture by re-integrating each channel through the pre mergers."""
    cfg = cfg or SeeConfig()
    return gdm_run_color(image, raw_edges, PRE_MERGERS, cache,
                         cfg.pad_margin)


def see_pre(image: np.ndarray, raw_edges: np.ndarray,
            provider: SaliencyProvider, cfg: SeeConfig | None = None,
            cache: KernelCache | None = None, key: str = "") -> np.ndarray:
    """Pre stage: average the provider's maps of the original and the
    edge-reconstructed image."""
    cfg = cfg or SeeConfig()
    image = np.asarray(image, dtype=np.float64)
    rebuilt = reconstruct_image(image, raw_edges, cfg, cache)
    s_original = _checked_provider_map(provider, "original", image, key)
    s_rebuilt = _checked_provider_map(provider, "reconstructed", rebuilt, key)
    return 0.5 * (s_original + s_rebuilt)


def see_full(image: np.ndarray, raw_edges: np.ndarray,
             provider: SaliencyProvider, cfg: SeeConfig | None = None,
             cache: KernelCache | None = None, key: str = "") -> np.ndarray:
    """Full chain: optional pre stage, optional post stage, one min-max
    normalization, then smooth-step contrast."""
    cfg = cfg or SeeConfig()
    if not (cfg.run_pre or cfg.run_post):
        raise ValueError("at least one of run_pre / run_post must be enabled")
    image = np.asarray(image, dtype=np.float64)
    if cfg.run_pre:
        saliency = see_pre(image, raw_edges, provider, cfg, cache, key)
    else:
        saliency = _checked_provider_map(provider, "original", image, key)
    if cfg.run_post:
        saliency = see_post(saliency, raw_edges, cfg, cache)
    return smooth_step(normalize(saliency), cfg.contrast_k)

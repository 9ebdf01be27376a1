"""Gradient-domain merging of an edge map into an image or saliency field.

The core move: take the gradient of a field, replace its magnitudes (and
optionally its orientations) using an external edge-strength map, then
reintegrate with the FFT solver.  Two merger families are provided:

* post-style: magnitude becomes sqrt(prepared_edges * |E|) and orientation
  is taken from the edge map's across-edge direction, sign-aligned with the
  field's own gradient; used to re-sharpen an existing saliency map.
* pre-style: magnitude becomes the average of sqrt(raw_edges * |E|) and
  |E| itself, orientation is kept; used to pre-sharpen an image before
  computing saliency on it.

Edge preparation for the post family thins the raw edge map by non-maximum
suppression along the across-edge orientation (from a blurred structure
tensor), then thickens the survivors with a one-pixel diamond dilation so
the reintegration sees a clean two-sided step.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import distance_transform_edt

from .fields import dilate_disk3, gaussian_blur, pad_zero
from .solver import (KernelCache, VectorField, default_cache, gradient,
                     reconstruct)

# Edge strengths below this floor never become suppression candidates.
NMS_FLOOR = 0.05
# Blur applied to structure-tensor products before orientation extraction.
ORIENTATION_SIGMA = 2.0


class MergerKind(Enum):
    """The four merger rules; a run pairs one norm rule with one
    orientation rule."""

    POST_NORM = "post-norm"
    POST_ORIENTATION = "post-orientation"
    PRE_NORM = "pre-norm"
    PRE_ORIENTATION = "pre-orientation"


POST_MERGERS = (MergerKind.POST_NORM, MergerKind.POST_ORIENTATION)
PRE_MERGERS = (MergerKind.PRE_NORM, MergerKind.PRE_ORIENTATION)

_NORM_KINDS = (MergerKind.POST_NORM, MergerKind.PRE_NORM)
_THETA_KINDS = (MergerKind.POST_ORIENTATION, MergerKind.PRE_ORIENTATION)


@dataclass(frozen=True)
class PreparedEdges:
    """Edge map after thinning/dilation, with per-pixel orientation.

    ``strength`` is zero away from (dilated) NMS survivors; ``theta`` is the
    across-edge orientation, propagated from the nearest survivor, and only
    meaningful where ``valid`` (strength > 0) holds.
    """

    strength: np.ndarray
    theta: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.strength.shape


def _central_gradient(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient (one-sided at borders), y pointing up."""
    gx = np.zeros_like(values)
    gy = np.zeros_like(values)
    if values.shape[1] >= 2:
        gx[:, 1:-1] = 0.5 * (values[:, 2:] - values[:, :-2])
        gx[:, 0] = values[:, 1] - values[:, 0]
        gx[:, -1] = values[:, -1] - values[:, -2]
    if values.shape[0] >= 2:
        gy[1:-1, :] = 0.5 * (values[:-2, :] - values[2:, :])
        gy[0, :] = values[0, :] - values[1, :]
        gy[-1, :] = values[-2, :] - values[-1, :]
    return gx, gy


def across_edge_orientation(values: np.ndarray,
                            sigma: float = ORIENTATION_SIGMA) -> np.ndarray:
    """Dominant across-edge direction from the blurred structure tensor.

    Returns angles in (-pi/2, pi/2]; an orientation and its opposite are the
    same axis, so a half-circle range is enough here.
    """
    gx, gy = _central_gradient(np.asarray(values, dtype=np.float64))
    jxx = gaussian_blur(gx * gx, sigma)
    jxy = gaussian_blur(gx * gy, sigma)
    jyy = gaussian_blur(gy * gy, sigma)
    return 0.5 * np.arctan2(2.0 * jxy, jxx - jyy)


def _bilinear(values: np.ndarray, rows: np.ndarray,
              cols: np.ndarray) -> np.ndarray:
    """Sample at fractional (row, col) positions, clamping to the border."""
    h, w = values.shape
    rows = np.clip(rows, 0.0, h - 1.0)
    cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows).astype(np.intp)
    c0 = np.floor(cols).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = rows - r0
    fc = cols - c0
    top = values[r0, c0] * (1.0 - fc) + values[r0, c1] * fc
    bottom = values[r1, c0] * (1.0 - fc) + values[r1, c1] * fc
    return top * (1.0 - fr) + bottom * fr


def prepare_edges_post(raw_edges: np.ndarray) -> PreparedEdges:
    """Thin a raw edge map for post-style merging.

    Pixels at or above the candidate floor survive if they are at least as
    strong as both bilinear samples one pixel away along the across-edge
    orientation.  Survivors keep their raw strength and are dilated by the
    4-connected diamond; orientation is filled in from the nearest survivor
    and flagged valid only where the dilated strength is positive.
    """
    raw_edges = np.asarray(raw_edges, dtype=np.float64)
    if raw_edges.ndim != 2:
        raise ValueError(f"expected a 2D edge map, got shape {raw_edges.shape}")
    theta = across_edge_orientation(raw_edges)
    candidates = raw_edges >= NMS_FLOOR
    rows, cols = np.nonzero(candidates)
    if rows.size == 0:
        zeros = np.zeros_like(raw_edges)
        return PreparedEdges(strength=zeros, theta=zeros.copy(),
                             valid=np.zeros(raw_edges.shape, dtype=bool))
    t = theta[rows, cols]
    dx = np.cos(t)
    dy = np.sin(t)
    center = raw_edges[rows, cols]
    # y points up in the orientation convention, so +dy steps to a lower row
    ahead = _bilinear(raw_edges, rows - dy, cols + dx)
    behind = _bilinear(raw_edges, rows + dy, cols - dx)
    keep = (center >= ahead) & (center >= behind)
    survivors = np.zeros(raw_edges.shape, dtype=bool)
    survivors[rows[keep], cols[keep]] = True
    if not survivors.any():
        zeros = np.zeros_like(raw_edges)
        return PreparedEdges(strength=zeros, theta=zeros.copy(),
                             valid=np.zeros(raw_edges.shape, dtype=bool))
    strength = dilate_disk3(np.where(survivors, raw_edges, 0.0))
    valid = strength > 0.0
    nearest = distance_transform_edt(~survivors, return_distances=False,
                                     return_indices=True)
    theta_near = theta[nearest[0], nearest[1]]
    return PreparedEdges(strength=np.where(valid, strength, 0.0),
                         theta=np.where(valid, theta_near, 0.0),
                         valid=valid)


def prepare_saliency_post(saliency: np.ndarray,
                          sigma: float = 3.0) -> np.ndarray:
    """Pre-blur a saliency map so its gradients spread to meet the thinned
    edges."""
    return gaussian_blur(saliency, sigma)


def _merged_field(grad: VectorField, norm_kind: MergerKind,
                  theta_kind: MergerKind, raw_edges: np.ndarray | None,
                  prepared: PreparedEdges | None) -> VectorField:
    """Apply one norm rule and one orientation rule to a gradient field."""
    if norm_kind not in _NORM_KINDS:
        raise ValueError(f"{norm_kind} is not a norm merger")
    if theta_kind not in _THETA_KINDS:
        raise ValueError(f"{theta_kind} is not an orientation merger")
    mag = grad.norm()
    if norm_kind is MergerKind.POST_NORM:
        if prepared is None or prepared.shape != grad.shape:
            raise ValueError("post-norm merger needs prepared edges of "
                             "matching shape")
        merged_mag = np.sqrt(prepared.strength * mag)
    else:
        if raw_edges is None or raw_edges.shape != grad.shape:
            raise ValueError("pre-norm merger needs a raw edge map of "
                             "matching shape")
        merged_mag = 0.5 * (np.sqrt(np.maximum(raw_edges, 0.0) * mag) + mag)
    if theta_kind is MergerKind.PRE_ORIENTATION:
        # keep the original direction; pixels with |E| = 0 stay (0, 0)
        scale = np.divide(merged_mag, mag, out=np.zeros_like(mag),
                          where=mag > 0.0)
        return VectorField(grad.ex * scale, grad.ey * scale)
    if prepared is None or prepared.shape != grad.shape:
        raise ValueError("post-orientation merger needs prepared edges of "
                         "matching shape")
    theta_e = grad.orientation()
    # pick the across-edge axis direction that agrees with the field's own
    # gradient; ties (cos == 0) keep the prepared angle as-is
    flip = np.cos(prepared.theta - theta_e) < 0.0
    theta = np.where(flip, prepared.theta + np.pi, prepared.theta)
    theta = np.where(theta > np.pi, theta - 2.0 * np.pi, theta)
    merged_mag = np.where(prepared.valid, merged_mag, 0.0)
    theta = np.where(prepared.valid, theta, 0.0)
    return VectorField(merged_mag * np.cos(theta), merged_mag * np.sin(theta))


def merge_post(grad: VectorField, prepared: PreparedEdges) -> VectorField:
    """Post-style merge: sqrt(prepared * |E|) magnitude, across-edge
    orientation sign-aligned with the field gradient; invalid pixels drop
    to the zero vector."""
    return _merged_field(grad, MergerKind.POST_NORM,
                         MergerKind.POST_ORIENTATION, None, prepared)


def merge_pre(grad: VectorField, raw_edges: np.ndarray) -> VectorField:
    """Pre-style merge: average of sqrt(raw * |E|) and |E| as magnitude,
    original orientation kept exactly."""
    return _merged_field(grad, MergerKind.PRE_NORM,
                         MergerKind.PRE_ORIENTATION, raw_edges, None)


def _needs_prepared(mergers: tuple[MergerKind, MergerKind]) -> bool:
    return (MergerKind.POST_NORM in mergers
            or MergerKind.POST_ORIENTATION in mergers)


def _check_mergers(mergers: tuple[MergerKind, MergerKind]) -> None:
    norm_kind, theta_kind = mergers
    if norm_kind not in _NORM_KINDS or theta_kind not in _THETA_KINDS:
        raise ValueError(f"invalid merger pair: {mergers}")


def gdm_run(values: np.ndarray, raw_edges: np.ndarray,
            mergers: tuple[MergerKind, MergerKind] = POST_MERGERS,
            cache: KernelCache | None = None, margin: int = 3) -> np.ndarray:
    """Merge an edge map into a scalar field through the gradient domain.

    Pads both inputs with a zero border, differentiates, applies the merger
    pair, reintegrates with the FFT solver, and returns the cropped result
    clamped to [0, 1].
    """
    values = np.asarray(values, dtype=np.float64)
    raw_edges = np.asarray(raw_edges, dtype=np.float64)
    if values.shape != raw_edges.shape:
        raise ValueError(f"field shape {values.shape} does not match edge "
                         f"map shape {raw_edges.shape}")
    _check_mergers(mergers)
    cache = cache or default_cache()
    padded_edges = pad_zero(raw_edges, margin)
    prepared = (prepare_edges_post(padded_edges)
                if _needs_prepared(mergers) else None)
    kernel = cache.get(*padded_edges.shape)
    padded = pad_zero(values, margin)
    merged = _merged_field(gradient(padded), mergers[0], mergers[1],
                           padded_edges, prepared)
    return reconstruct(merged, kernel, margin=margin, clamp=True)


def gdm_run_color(image: np.ndarray, raw_edges: np.ndarray,
                  mergers: tuple[MergerKind, MergerKind] = PRE_MERGERS,
                  cache: KernelCache | None = None,
                  margin: int = 3) -> np.ndarray:
    """Per-channel gdm_run over an (H, W, 3) image with shared edge
    preparation and a shared kernel."""
    image = np.asarray(image, dtype=np.float64)
    raw_edges = np.asarray(raw_edges, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {image.shape}")
    if image.shape[:2] != raw_edges.shape:
        raise ValueError(f"image shape {image.shape[:2]} does not match edge "
                         f"map shape {raw_edges.shape}")
    _check_mergers(mergers)
    cache = cache or default_cache()
    padded_edges = pad_zero(raw_edges, margin)
    prepared = (prepare_edges_post(padded_edges)
                if _needs_prepared(mergers) else None)
    kernel = cache.get(*padded_edges.shape)
    out = np.empty_like(image)
    for ch in range(3):
        padded = pad_zero(image[:, :, ch], margin)
        merged = _merged_field(gradient(padded), mergers[0], mergers[1],
                               padded_edges, prepared)
        out[:, :, ch] = reconstruct(merged, kernel, margin=margin, clamp=True)
    return out

"""Discrete gradient / Laplacian operators and the FFT inverse solver.

A scalar field f maps to a complex-style gradient field E = (ex, ey) via
one-sided differences; E maps onward to a Laplacian-like field L built from
the same differences so that L equals the classic five-point stencil

    L(x, y) = 4 f(x, y) - f(x+1, y) - f(x-1, y) - f(x, y-1) - f(x, y+1)

with out-of-range samples read as zero.  Because x and y offsets enter the
two steps with opposite signs, their composition telescopes to exactly this
stencil, and inverting it in the Fourier domain recovers f up to an additive
constant.  The inverse transfer function is built once per padded size: the
stencil is embedded in a wrap-around frame, and the spectrum of a unit
impulse at the origin is divided by the stencil spectrum bin-by-bin (the DC
bin, where the stencil spectrum vanishes, is forced to zero, which pins the
solution mean).  The lost constant is restored afterwards by driving the
outermost ring of the solution to zero mean, which matches the zero padding
the pipeline adds around every input.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .fields import crop


@dataclass(frozen=True)
class VectorField:
    """Per-pixel 2D vectors, stored as separate x and y component planes."""

    ex: np.ndarray
    ey: np.ndarray

    def __post_init__(self) -> None:
        if self.ex.shape != self.ey.shape:
            raise ValueError(
                f"component shapes differ: {self.ex.shape} vs {self.ey.shape}")
        if self.ex.ndim != 2:
            raise ValueError(f"expected 2D components, got {self.ex.ndim}D")

    @property
    def shape(self) -> tuple[int, int]:
        return self.ex.shape

    def norm(self) -> np.ndarray:
        """Per-pixel Euclidean magnitude."""
        return np.hypot(self.ex, self.ey)

    def orientation(self) -> np.ndarray:
        """Per-pixel angle in radians, in (-pi, pi]; (0, 0) maps to 0."""
        return np.arctan2(self.ey, self.ex)


def gradient(values: np.ndarray) -> VectorField:
    """One-sided difference gradient of a 2D field.

    ex(x, y) = f(x+1, y) - f(x, y) and ey(x, y) = f(x, y) - f(x, y+1),
    with out-of-range samples read as zero (y grows downward in memory,
    so ey points against the row axis).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {values.shape}")
    ex = np.zeros_like(values)
    ey = np.zeros_like(values)
    ex[:, :-1] = values[:, 1:] - values[:, :-1]
    ex[:, -1] = -values[:, -1]
    ey[:-1, :] = values[:-1, :] - values[1:, :]
    ey[-1, :] = values[-1, :]
    return VectorField(ex, ey)


def field_to_laplacian(grad: VectorField) -> np.ndarray:
    """Collapse a gradient field to the five-point stencil response.

    L(x, y) = ex(x-1, y) - ex(x, y) + ey(x, y) - ey(x, y-1), again with
    out-of-range samples read as zero.  For grad = gradient(f) this equals
    4 f - (sum of the four neighbors of f); when f has a zero border the
    sums telescope and the output totals exactly zero.
    """
    ex, ey = grad.ex, grad.ey
    lap = np.zeros_like(ex)
    lap -= ex
    lap[:, 1:] += ex[:, :-1]
    lap += ey
    lap[1:, :] -= ey[:-1, :]
    return lap


@dataclass(frozen=True)
class GreenKernel:
    """Precomputed inverse-stencil transfer function for one padded size.

    ``transfer`` is the full complex spectrum with its DC bin forced to
    zero; ``half`` is the real part of its non-redundant half, aligned with
    the layout of a real-input FFT so solves can stay in the half-spectrum.
    Both arrays are read-only, so a kernel can be shared across threads.
    """

    transfer: np.ndarray
    half: np.ndarray

    @property
    def padded_shape(self) -> tuple[int, int]:
        return self.transfer.shape


def build_green_kernel(padded_height: int, padded_width: int) -> GreenKernel:
    """Build the inverse transfer function for a padded size.

    The closed form per frequency bin (u, v) is
    1 / (4 - 2 cos(2 pi u / H) - 2 cos(2 pi v / W)), except the DC bin
    which is zero.
    """
    h, w = int(padded_height), int(padded_width)
    if h < 3 or w < 3:
        raise ValueError(f"padded size must be at least 3x3, got {h}x{w}")
    stencil = np.zeros((h, w))
    stencil[0, 0] = 4.0
    stencil[0, 1] -= 1.0
    stencil[0, -1] -= 1.0
    stencil[1, 0] -= 1.0
    stencil[-1, 0] -= 1.0
    impulse = np.zeros((h, w))
    impulse[0, 0] = 1.0
    numerator = np.fft.fft2(impulse)
    denominator = np.fft.fft2(stencil)
    transfer = np.zeros_like(numerator)
    np.divide(numerator, denominator, out=transfer, where=denominator != 0)
    transfer[0, 0] = 0.0
    half = np.ascontiguousarray(transfer[:, : w // 2 + 1].real)
    transfer.setflags(write=False)
    half.setflags(write=False)
    return GreenKernel(transfer=transfer, half=half)


class KernelCache:
    """Thread-safe cache of Green kernels keyed by padded size.

    Counts builds and hits so reuse is observable; building holds the lock,
    which serializes first-time construction of a given size.
    """

    def __init__(self) -> None:
        self._kernels: dict[tuple[int, int], GreenKernel] = {}
        self._lock = threading.Lock()
        self.builds = 0
        self.hits = 0

    def get(self, padded_height: int, padded_width: int) -> GreenKernel:
        key = (int(padded_height), int(padded_width))
        with self._lock:
            kernel = self._kernels.get(key)
            if kernel is not None:
                self.hits += 1
                return kernel
            kernel = build_green_kernel(*key)
            self._kernels[key] = kernel
            self.builds += 1
            return kernel


_default_cache = KernelCache()


def default_cache() -> KernelCache:
    """Process-wide kernel cache used when a caller does not supply one."""
    return _default_cache


def _border_ring_mean(values: np.ndarray) -> float:
    h, w = values.shape
    total = values[0, :].sum() + values[-1, :].sum()
    if h > 2:
        total += values[1:-1, 0].sum() + values[1:-1, -1].sum()
    return float(total) / (2 * w + 2 * max(h - 2, 0))


def solve_laplacian(lap: np.ndarray, kernel: GreenKernel,
                    margin: int = 3) -> np.ndarray:
    """Invert the five-point stencil and crop the padding margin.

    The multiply runs on the real half-spectrum (the transfer function is
    real by symmetry), then the additive constant lost at the DC bin is
    restored by forcing the outermost ring of the padded solution to zero
    mean before cropping.
    """
    lap = np.asarray(lap, dtype=np.float64)
    if lap.shape != kernel.padded_shape:
        raise ValueError(
            f"field shape {lap.shape} does not match kernel "
            f"shape {kernel.padded_shape}")
    h, w = lap.shape
    raw = np.fft.irfft2(np.fft.rfft2(lap) * kernel.half, s=(h, w))
    raw -= _border_ring_mean(raw)
    return crop(raw, margin)


def reconstruct(grad: VectorField, kernel: GreenKernel, margin: int = 3,
                clamp: bool = True) -> np.ndarray:
    """Recover a scalar field from a (possibly edited) gradient field."""
    out = solve_laplacian(field_to_laplacian(grad), kernel, margin)
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return out

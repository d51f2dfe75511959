"""Seeded synthetic test objects with controllable domain shifts.

Three families: randomized ellipse stacks, piecewise-smooth blobs with
flat inserts, and smooth backgrounds carrying band-passed texture.  The
base magnitude is normalized to [0, 1]; domain shifts then remap it:
a contrast exponent, a multiplicative smooth bias field 1 + a*g with
max|g| = 1 (applied without renormalization so the pixelwise ratio to
the unshifted phantom stays inside [1-a, 1+a]), and a resolution scale
that blurs toward lower effective resolution.  A gentle smooth phase
makes the output genuinely complex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InvalidArgumentError

PHANTOM_KINDS = ("ellipse-phantom", "piecewise-smooth", "texture-mix")

_PHASE_AMPLITUDE = 0.3  # radians


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "ellipse-phantom"
    size: int = 64
    contrast_exponent: float = 1.0
    bias_amplitude: float = 0.0
    resolution_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise InvalidArgumentError(f"unknown phantom kind {self.kind!r}")
        if self.size < 8:
            raise InvalidArgumentError("phantom size must be >= 8")
        if self.contrast_exponent <= 0:
            raise InvalidArgumentError("contrast exponent must be > 0")
        if self.bias_amplitude < 0 or self.bias_amplitude >= 1:
            raise InvalidArgumentError("bias amplitude must lie in [0, 1)")
        if not 0 < self.resolution_scale <= 1:
            raise InvalidArgumentError("resolution scale must lie in (0, 1]")


def _smooth_field(n: int, rng: np.random.Generator, rel_sigma: float = 0.125) -> np.ndarray:
    """Band-limited field normalized to max|.| = 1."""
    g = gaussian_filter(rng.standard_normal((n, n)), sigma=rel_sigma * n, mode="wrap")
    peak = np.max(np.abs(g))
    return g / peak if peak > 0 else g


def _ellipse(n: int, cy, cx, ay, ax, angle) -> np.ndarray:
    y, x = np.mgrid[0:n, 0:n]
    yn = 2 * y / (n - 1) - 1
    xn = 2 * x / (n - 1) - 1
    ca, sa = np.cos(angle), np.sin(angle)
    u = (xn - cx) * ca + (yn - cy) * sa
    v = -(xn - cx) * sa + (yn - cy) * ca
    return ((u / ax) ** 2 + (v / ay) ** 2 <= 1.0).astype(np.float64)


def _base_magnitude(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.size
    if spec.kind == "ellipse-phantom":
        img = _ellipse(n, 0.0, 0.0, 0.88, 0.72, 0.0)
        for _ in range(int(rng.integers(5, 9))):
            cy, cx = rng.uniform(-0.45, 0.45, size=2)
            ay, ax = rng.uniform(0.08, 0.38, size=2)
            angle = rng.uniform(0, np.pi)
            img += rng.uniform(-0.5, 0.6) * _ellipse(n, cy, cx, ay, ax, angle)
        img = np.clip(img, 0.0, None)
    elif spec.kind == "piecewise-smooth":
        img = 0.5 + 0.5 * _smooth_field(n, rng)
        img *= _ellipse(n, 0.0, 0.0, 0.9, 0.85, 0.0)
        y, x = np.mgrid[0:n, 0:n]
        for _ in range(int(rng.integers(3, 7))):
            cy, cx = rng.uniform(0.2, 0.8, size=2) * n
            r = rng.uniform(0.05, 0.18) * n
            disc = (y - cy) ** 2 + (x - cx) ** 2 <= r**2
            img[disc] = rng.uniform(0.1, 1.0)
        img = np.clip(img, 0.0, None)
    else:  # texture-mix
        support = _ellipse(n, 0.0, 0.0, 0.9, 0.85, 0.0)
        smooth = 0.6 + 0.4 * _smooth_field(n, rng)
        noise = rng.standard_normal((n, n))
        texture = gaussian_filter(noise, 1.0, mode="wrap") - gaussian_filter(noise, 3.0, mode="wrap")
        peak = np.max(np.abs(texture))
        img = support * np.clip(smooth + 0.25 * texture / peak, 0.0, None)

    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    return img


def make_phantom(spec: PhantomSpec) -> np.ndarray:
    """Deterministic complex phantom for the given spec."""
    rng = np.random.default_rng(spec.seed)
    mag = _base_magnitude(spec, rng)
    phase_field = _smooth_field(spec.size, rng)

    if spec.contrast_exponent != 1.0:
        mag = mag**spec.contrast_exponent
    if spec.resolution_scale != 1.0:
        mag = gaussian_filter(mag, sigma=1.0 / spec.resolution_scale - 1.0)
    if spec.bias_amplitude != 0.0:
        bias_rng = np.random.default_rng((spec.seed, 77))
        mag = mag * (1.0 + spec.bias_amplitude * _smooth_field(spec.size, bias_rng))

    return mag * np.exp(1j * _PHASE_AMPLITUDE * phase_field)

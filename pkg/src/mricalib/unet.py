"""Small convolutional U-Net noise predictor with calibratable skips.

The network maps a 2-channel (re, im) field to a 2-channel noise estimate
and is conditioned on a discrete noise-level index through a learned
per-channel bias table at the bottleneck.  Each skip feature F_l can be
recomposed as  alpha_l * LOW(F_l) + beta_l * (F_l - LOW(F_l))  where LOW
keeps DFT coefficients inside a radius `band_cutoff` * Nyquist; the
all-ones calibration vector reproduces the uncalibrated network (the
high band is formed by subtraction, so the band partition is exact).

Everything is plain float64 numpy.  Training is denoising score matching
with hand-derived convolution gradients and plain SGD — the adaptation
machinery never differentiates through the network, so no autodiff
dependency is needed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


from .errors import FormatError, InvalidArgumentError
from .priors import ScorePrior, validate_delta
from .sampler import NoiseSchedule, build_schedule
from .tensorio import read_tensor, write_tensor


@dataclass(frozen=True)
class UNetArch:
    """Architecture descriptor; fully determines parameter names and shapes."""

    in_channels: int = 2
    widths: tuple[int, ...] = (8, 16)  # encoder widths, one per skip layer
    bottleneck: int = 32
    kernel: int = 3
    emb_steps: int = 100  # rows of the noise-level embedding table
    sigma_min: float = 0.01  # noise ladder the embedding indexes into
    sigma_max: float = 1.0
    band_cutoff: float = 0.25  # low/high split radius as a fraction of Nyquist

    def __post_init__(self):
        if len(self.widths) < 1:
            raise InvalidArgumentError("need at least one encoder level")
        if self.kernel % 2 != 1:
            raise InvalidArgumentError("kernel size must be odd")
        if not 0 < self.band_cutoff < 1:
            raise InvalidArgumentError("band_cutoff must lie in (0, 1)")

    @property
    def layer_count(self) -> int:
        return len(self.widths)

    def sigma_ladder(self) -> NoiseSchedule:
        return build_schedule(self.emb_steps, self.sigma_max, self.sigma_min)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.kernel
        shapes: dict[str, tuple[int, ...]] = {}
        prev = self.in_channels
        for i, w in enumerate(self.widths):
            shapes[f"enc{i}.c1.w"] = (w, prev, k, k)
            shapes[f"enc{i}.c1.b"] = (w,)
            shapes[f"enc{i}.c2.w"] = (w, w, k, k)
            shapes[f"enc{i}.c2.b"] = (w,)
            prev = w
        b = self.bottleneck
        shapes["bot.c1.w"] = (b, prev, k, k)
        shapes["bot.c1.b"] = (b,)
        shapes["bot.c2.w"] = (b, b, k, k)
        shapes["bot.c2.b"] = (b,)
        prev = b
        for i in reversed(range(self.layer_count)):
            w = self.widths[i]
            shapes[f"dec{i}.c1.w"] = (w, prev + w, k, k)
            shapes[f"dec{i}.c1.b"] = (w,)
            shapes[f"dec{i}.c2.w"] = (w, w, k, k)
            shapes[f"dec{i}.c2.b"] = (w,)
            prev = w
        shapes["head.w"] = (self.in_channels, prev, k, k)
        shapes["head.b"] = (self.in_channels,)
        shapes["emb"] = (self.emb_steps, self.bottleneck)
        return shapes


@dataclass
class UNetWeights:
    arch: UNetArch
    params: dict[str, np.ndarray]

    def copy(self) -> "UNetWeights":
        return UNetWeights(self.arch, {k: v.copy() for k, v in self.params.items()})


def init_weights(arch: UNetArch, seed: int = 0) -> UNetWeights:
    """He-normal kernels, zero biases, zero embedding table."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        else:
            params[name] = np.zeros(shape)
    return UNetWeights(arch, params)


# ---------------------------------------------------------------------------
# layer primitives (forward + hand-derived backward)
# ---------------------------------------------------------------------------


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, want_cache: bool):
    """Same-padded 2-D convolution as one GEMM per kernel tap.  x: (B, Cin, H, W)."""
    B, Cin, H, W = x.shape
    Cout, _, k, _ = w.shape
    p = k // 2
    xp = np.zeros((B, Cin, H + 2 * p, W + 2 * p))
    xp[:, :, p : p + H, p : p + W] = x
    acc = np.zeros((Cout, B, H, W))
    for i in range(k):
        for j in range(k):
            acc += np.tensordot(w[:, :, i, j], xp[:, :, i : i + H, j : j + W], axes=(1, 1))
    y = acc.transpose(1, 0, 2, 3) + b[None, :, None, None]
    cache = (xp, x.shape, w) if want_cache else None
    return y, cache


def _conv2d_bwd(dy: np.ndarray, cache):
    xp, x_shape, w = cache
    B, Cin, H, W = x_shape
    Cout, _, k, _ = w.shape
    p = k // 2
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + H, j : j + W]
            dw[:, :, i, j] = np.tensordot(dy, patch, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, i : i + H, j : j + W] += np.tensordot(
                w[:, :, i, j], dy, axes=(0, 1)
            ).transpose(1, 0, 2, 3)
    db = dy.sum(axis=(0, 2, 3))
    return dxp[:, :, p : p + H, p : p + W], dw, db


def _relu(x, want_cache):
    y = np.maximum(x, 0.0)
    return y, (x > 0) if want_cache else None


def _pool2(x):
    B, C, H, W = x.shape
    return x.reshape(B, C, H // 2, 2, W // 2, 2).mean(axis=(3, 5))


def _pool2_bwd(dy):
    return np.repeat(np.repeat(dy, 2, axis=2), 2, axis=3) / 4.0


def _up2(x):
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def _up2_bwd(dy):
    B, C, H, W = dy.shape
    return dy.reshape(B, C, H // 2, 2, W // 2, 2).sum(axis=(3, 5))


def low_band(feat: np.ndarray, cutoff: float) -> np.ndarray:
    """Project real feature maps onto DFT radii <= cutoff * Nyquist (last two axes)."""
    H, W = feat.shape[-2:]
    fy = np.fft.fftfreq(H) * 2.0  # Nyquist normalized to |1|
    fx = np.fft.fftfreq(W) * 2.0
    keep = (fy[:, None] ** 2 + fx[None, :] ** 2) <= cutoff**2
    return np.fft.ifft2(np.fft.fft2(feat, axes=(-2, -1)) * keep, axes=(-2, -1)).real


def modulate_bands(feat: np.ndarray, alpha: float, beta: float, cutoff: float) -> np.ndarray:
    """alpha * LOW(F) + beta * HIGH(F), with HIGH = F - LOW so the partition is exact."""
    low = low_band(feat, cutoff)
    return alpha * low + beta * (feat - low)


# ---------------------------------------------------------------------------
# full network
# ---------------------------------------------------------------------------


def _forward(
    x: np.ndarray,
    t_idx: np.ndarray,
    delta: np.ndarray | None,
    weights: UNetWeights,
    want_cache: bool = False,
):
    """x: (B, in_channels, H, W); t_idx: (B,) int.  Returns (out, cache)."""
    arch = weights.arch
    P = weights.params
    L = arch.layer_count
    B, C, H, W = x.shape
    if C != arch.in_channels:
        raise InvalidArgumentError(f"expected {arch.in_channels} channels, got {C}")
    if H % (1 << L) or W % (1 << L):
        raise InvalidArgumentError(f"spatial size {H}x{W} not divisible by {1 << L}")
    if delta is not None:
        delta = validate_delta(delta, L)
    t_idx = np.asarray(t_idx, dtype=np.int64)
    if np.any(t_idx < 0) or np.any(t_idx >= arch.emb_steps):
        raise InvalidArgumentError("noise-level index out of embedding range")

    # precondition: keep activations O(1) across noise levels
    sigma_t = arch.sigma_ladder().sigmas[t_idx]
    x = x / np.sqrt(1.0 + sigma_t**2)[:, None, None, None]

    cache: dict = {"skips": [], "t_idx": t_idx} if want_cache else None
    skips = []
    h = x
    for i in range(L):
        h, c1 = _conv2d(h, P[f"enc{i}.c1.w"], P[f"enc{i}.c1.b"], want_cache)
        h, r1 = _relu(h, want_cache)
        h, c2 = _conv2d(h, P[f"enc{i}.c2.w"], P[f"enc{i}.c2.b"], want_cache)
        skip, r2 = _relu(h, want_cache)
        skips.append(skip)
        h = _pool2(skip)
        if want_cache:
            cache[f"enc{i}"] = (c1, r1, c2, r2)

    h, c1 = _conv2d(h, P["bot.c1.w"], P["bot.c1.b"], want_cache)
    h = h + P["emb"][t_idx][:, :, None, None]
    h, r1 = _relu(h, want_cache)
    h, c2 = _conv2d(h, P["bot.c2.w"], P["bot.c2.b"], want_cache)
    h, r2 = _relu(h, want_cache)
    if want_cache:
        cache["bot"] = (c1, r1, c2, r2)

    for i in reversed(range(L)):
        up = _up2(h)
        skip = skips[i]
        if delta is not None:
            # layer numbering is shallow-first: (alpha_l, beta_l) at delta[2l], delta[2l+1]
            skip = modulate_bands(skip, delta[2 * i], delta[2 * i + 1], arch.band_cutoff)
        h = np.concatenate([up, skip], axis=1)
        h, c1 = _conv2d(h, P[f"dec{i}.c1.w"], P[f"dec{i}.c1.b"], want_cache)
        h, r1 = _relu(h, want_cache)
        h, c2 = _conv2d(h, P[f"dec{i}.c2.w"], P[f"dec{i}.c2.b"], want_cache)
        h, r2 = _relu(h, want_cache)
        if want_cache:
            cache[f"dec{i}"] = (c1, r1, c2, r2, up.shape[1])

    out, ch = _conv2d(h, P["head.w"], P["head.b"], want_cache)
    if want_cache:
        cache["head"] = ch
        cache["skip_tensors"] = skips
    return out, cache


def _backward(dout: np.ndarray, cache, weights: UNetWeights) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. all parameters.

    Only valid for the uncalibrated forward path (delta None); the skip
    branch gradient then flows through the raw skip tensor.
    """
    arch = weights.arch
    P = weights.params
    L = arch.layer_count
    grads = {name: np.zeros_like(p) for name, p in P.items()}

    dh, grads["head.w"], grads["head.b"] = _conv2d_bwd(dout, cache["head"])

    dskips: list[np.ndarray | None] = [None] * L
    for i in range(L):
        c1, r1, c2, r2, up_ch = cache[f"dec{i}"]
        dh = dh * r2
        dh, grads[f"dec{i}.c2.w"], grads[f"dec{i}.c2.b"] = _conv2d_bwd(dh, c2)
        dh = dh * r1
        dh, grads[f"dec{i}.c1.w"], grads[f"dec{i}.c1.b"] = _conv2d_bwd(dh, c1)
        dup, dskip = dh[:, :up_ch], dh[:, up_ch:]
        dskips[i] = dskip
        dh = _up2_bwd(dup)

    c1, r1, c2, r2 = cache["bot"]
    dh = dh * r2
    dh, grads["bot.c2.w"], grads["bot.c2.b"] = _conv2d_bwd(dh, c2)
    dh = dh * r1
    np.add.at(grads["emb"], cache["t_idx"], dh.sum(axis=(2, 3)))
    dh, grads["bot.c1.w"], grads["bot.c1.b"] = _conv2d_bwd(dh, c1)

    for i in reversed(range(L)):
        c1, r1, c2, r2 = cache[f"enc{i}"]
        dskip = _pool2_bwd(dh) + dskips[i]
        dskip = dskip * r2
        dh, grads[f"enc{i}.c2.w"], grads[f"enc{i}.c2.b"] = _conv2d_bwd(dskip, c2)
        dh = dh * r1
        dh, grads[f"enc{i}.c1.w"], grads[f"enc{i}.c1.b"] = _conv2d_bwd(dh, c1)

    return grads


def unet_forward(
    x: np.ndarray,
    t: int,
    delta: np.ndarray | None,
    weights: UNetWeights,
) -> np.ndarray:
    """Run the network on one complex image; returns the complex 2-channel output."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected an (H, W) image, got shape {x.shape}")
    x2 = np.stack([x.real, x.imag])[None]
    out, _ = _forward(x2, np.array([t]), delta, weights, want_cache=False)
    return out[0, 0] + 1j * out[0, 1]


class UNetScorePrior(ScorePrior):
    """Score adapter: the network predicts the noise, score = -prediction / sigma.

    The noise level is snapped to the nearest entry of the ladder the
    network was trained on.  With `calibratable=False` the prior reports
    layer_count 0 and always runs the raw (unmodulated) forward pass.
    """

    def __init__(self, weights: UNetWeights, calibratable: bool = True):
        self.weights = weights
        self.calibratable = calibratable
        self._sigmas = weights.arch.sigma_ladder().sigmas

    @property
    def layer_count(self) -> int:
        return self.weights.arch.layer_count if self.calibratable else 0

    def evaluate(self, x, sigma, delta=None):
        x = np.asarray(x, dtype=np.complex128)
        if sigma <= 0:
            return np.zeros_like(x)
        idx = int(np.argmin(np.abs(self._sigmas - sigma)))
        if not self.calibratable:
            delta = None
        eps_hat = unet_forward(x, idx, delta, self.weights)
        return -eps_hat / sigma


# ---------------------------------------------------------------------------
# weight I/O: flat float64 payload + plain-text architecture descriptor
# ---------------------------------------------------------------------------


def save_weights(path: str | os.PathLike, weights: UNetWeights) -> None:
    arch = weights.arch
    shapes = arch.param_shapes()
    flat = np.concatenate([weights.params[name].ravel() for name in shapes])
    write_tensor(path, flat)
    lines = [
        f"in_channels={arch.in_channels}",
        "widths=" + ",".join(str(w) for w in arch.widths),
        f"bottleneck={arch.bottleneck}",
        f"kernel={arch.kernel}",
        f"emb_steps={arch.emb_steps}",
        f"sigma_min={arch.sigma_min!r}",
        f"sigma_max={arch.sigma_max!r}",
        f"band_cutoff={arch.band_cutoff!r}",
    ]
    with open(f"{os.fspath(path)}.arch", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path: str | os.PathLike) -> UNetWeights:
    desc_path = f"{os.fspath(path)}.arch"
    if not os.path.exists(desc_path):
        raise FormatError(f"missing architecture descriptor {desc_path}")
    fields: dict[str, str] = {}
    with open(desc_path) as fh:
        for line in fh:
            line = line.strip()
            if line and "=" in line:
                key, val = line.split("=", 1)
                fields[key] = val
    try:
        arch = UNetArch(
            in_channels=int(fields["in_channels"]),
            widths=tuple(int(w) for w in fields["widths"].split(",")),
            bottleneck=int(fields["bottleneck"]),
            kernel=int(fields["kernel"]),
            emb_steps=int(fields["emb_steps"]),
            sigma_min=float(fields["sigma_min"]),
            sigma_max=float(fields["sigma_max"]),
            band_cutoff=float(fields["band_cutoff"]),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad architecture descriptor: {exc}") from exc

    flat = read_tensor(path)
    if flat.ndim != 1 or np.iscomplexobj(flat):
        raise FormatError("weight payload must be a rank-1 real tensor")
    shapes = arch.param_shapes()
    total = sum(int(np.prod(s)) for s in shapes.values())
    if flat.size != total:
        raise FormatError(
            f"payload length {flat.size} does not match descriptor total {total}"
        )
    params: dict[str, np.ndarray] = {}
    off = 0
    for name, shape in shapes.items():
        n = int(np.prod(shape))
        params[name] = flat[off : off + n].reshape(shape).copy()
        off += n
    return UNetWeights(arch, params)


# ---------------------------------------------------------------------------
# desk-scale training: denoising score matching with plain SGD
# ---------------------------------------------------------------------------


def dsm_loss(
    weights: UNetWeights,
    images: list[np.ndarray],
    seed: int = 0,
    draws_per_image: int = 4,
) -> float:
    """Mean squared noise-prediction error over seeded (image, level) draws."""
    arch = weights.arch
    sigmas = arch.sigma_ladder().sigmas
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    for img in images:
        x0 = np.stack([np.asarray(img).real, np.asarray(img).imag])[None]
        for _ in range(draws_per_image):
            t = int(rng.integers(arch.emb_steps))
            eps = rng.standard_normal(x0.shape)
            out, _ = _forward(x0 + sigmas[t] * eps, np.array([t]), None, weights)
            total += float(np.mean((out - eps) ** 2))
            count += 1
    return total / count


def train_toy_denoiser(
    images: list[np.ndarray],
    epochs: int,
    seed: int = 0,
    arch: UNetArch | None = None,
    lr: float = 0.1,
    batch_size: int = 4,
    clip_norm: float = 1.0,
) -> UNetWeights:
    """Train the noise predictor with plain SGD; deterministic given the seed.

    `epochs` counts passes over the dataset; zero epochs returns the
    seeded initialization untouched.  Gradients are clipped to a global
    norm bound, which keeps the constant learning rate stable over long
    runs.
    """
    if not images:
        raise InvalidArgumentError("training set must be nonempty")
    arch = arch or UNetArch()
    weights = init_weights(arch, seed)
    if epochs == 0:
        return weights

    sigmas = arch.sigma_ladder().sigmas
    stacked = [np.stack([np.asarray(im).real, np.asarray(im).imag]) for im in images]
    rng = np.random.default_rng((seed, 1))
    n = len(stacked)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            x0 = np.stack([stacked[i] for i in idx])
            t = rng.integers(arch.emb_steps, size=idx.size)
            eps = rng.standard_normal(x0.shape)
            x_in = x0 + sigmas[t][:, None, None, None] * eps
            out, cache = _forward(x_in, t, None, weights, want_cache=True)
            dout = 2.0 * (out - eps) / out.size
            grads = _backward(dout, cache, weights)
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            scale = lr if total <= clip_norm else lr * clip_norm / total
            for name in weights.params:
                weights.params[name] -= scale * grads[name]
    return weights

import numpy as np
import pytest

from mricalib import (
    UNetArch,
    UNetScorePrior,
    build_schedule,
    dsm_loss,
    init_weights,
    load_weights,
    low_band,
    modulate_bands,
    save_weights,
    train_toy_denoiser,
    tweedie_denoise,
    unet_forward,
)
from mricalib.errors import FormatError, InvalidArgumentError
from mricalib.phantom import PhantomSpec, make_phantom
from mricalib.unet import _backward, _forward

TINY = UNetArch(widths=(3, 4), bottleneck=5, emb_steps=6)


def _rand_image(rng, n=16):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


# ---------------------------------------------------------------------------
# band split
# ---------------------------------------------------------------------------


def test_band_partition_is_exact():
    rng = np.random.default_rng(0)
    feat = rng.standard_normal((2, 3, 16, 16))
    low = low_band(feat, 0.25)
    high = feat - low
    # high is formed by subtraction, so the partition reassembles the
    # feature to the last bit or one rounding ulp
    assert np.max(np.abs((low + high) - feat)) <= 2.0**-50 * np.max(np.abs(feat))


def test_low_band_is_projection():
    rng = np.random.default_rng(1)
    feat = rng.standard_normal((1, 2, 16, 16))
    low = low_band(feat, 0.25)
    again = low_band(low, 0.25)
    assert np.max(np.abs(again - low)) <= 1e-12 * max(np.max(np.abs(low)), 1.0)


def test_zeroing_low_band_kills_low_energy():
    rng = np.random.default_rng(2)
    feat = rng.standard_normal((1, 1, 32, 32))
    mod = modulate_bands(feat, alpha=0.0, beta=1.0, cutoff=0.25)
    residual_low = low_band(mod, 0.25)
    assert np.max(np.abs(residual_low)) <= 1e-12 * np.max(np.abs(feat))


def test_low_band_scaling_quadruples_energy():
    rng = np.random.default_rng(3)
    feat = rng.standard_normal((1, 1, 32, 32))
    base_low = low_band(feat, 0.25)
    mod = modulate_bands(feat, alpha=2.0, beta=1.0, cutoff=0.25)
    mod_low = low_band(mod, 0.25)
    e_base = np.sum(base_low**2)
    e_mod = np.sum(mod_low**2)
    assert abs(e_mod - 4.0 * e_base) <= 1e-9 * e_base


# ---------------------------------------------------------------------------
# forward contracts
# ---------------------------------------------------------------------------


def test_identity_delta_matches_uncalibrated():
    rng = np.random.default_rng(4)
    w = init_weights(TINY, seed=1)
    x = _rand_image(rng)
    plain = unet_forward(x, 2, None, w)
    calibrated = unet_forward(x, 2, np.ones(4), w)
    assert np.max(np.abs(plain - calibrated)) <= 1e-10 * max(np.max(np.abs(plain)), 1.0)


def test_delta_changes_output():
    rng = np.random.default_rng(5)
    w = init_weights(TINY, seed=1)
    x = _rand_image(rng)
    plain = unet_forward(x, 2, None, w)
    scaled = unet_forward(x, 2, np.array([0.2, 1.0, 1.7, 1.0]), w)
    assert np.max(np.abs(plain - scaled)) > 1e-6


def test_bad_delta_rejected():
    w = init_weights(TINY, seed=1)
    with pytest.raises(InvalidArgumentError):
        unet_forward(np.zeros((16, 16), complex), 0, np.ones(6), w)
    with pytest.raises(InvalidArgumentError):
        unet_forward(np.zeros((16, 16), complex), 0, np.array([1.0, 3.0, 1.0, 1.0]), w)


def test_indivisible_size_rejected():
    w = init_weights(TINY, seed=1)
    with pytest.raises(InvalidArgumentError):
        unet_forward(np.zeros((18, 18), complex), 0, None, w)


def test_embedding_index_changes_output():
    rng = np.random.default_rng(6)
    arch = UNetArch(widths=(3, 4), bottleneck=5, emb_steps=6)
    w = init_weights(arch, seed=2)
    w.params["emb"] = rng.standard_normal(w.params["emb"].shape)
    x = _rand_image(rng)
    a = unet_forward(x, 0, None, w)
    b = unet_forward(x, 5, None, w)
    assert np.max(np.abs(a - b)) > 1e-8


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_hand_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    w = init_weights(TINY, seed=3)
    x = rng.standard_normal((2, 2, 8, 8))
    t = np.array([1, 4])
    target = rng.standard_normal((2, 2, 8, 8))

    def loss():
        out, _ = _forward(x, t, None, w)
        return 0.5 * float(np.sum((out - target) ** 2))

    out, cache = _forward(x, t, None, w, want_cache=True)
    grads = _backward(out - target, cache, w)

    h = 1e-6
    for name in ("enc0.c1.w", "enc1.c2.b", "bot.c1.w", "dec1.c1.w", "dec0.c2.w", "head.w", "emb"):
        p = w.params[name]
        for _ in range(3):
            idx = tuple(rng.integers(0, s) for s in p.shape)
            p[idx] += h
            lp = loss()
            p[idx] -= 2 * h
            lm = loss()
            p[idx] += h
            fd = (lp - lm) / (2 * h)
            assert abs(fd - grads[name][idx]) <= 1e-5 * max(abs(fd), 1e-8), name


# ---------------------------------------------------------------------------
# weight I/O
# ---------------------------------------------------------------------------


def test_weight_roundtrip(tmp_path):
    w = init_weights(TINY, seed=4)
    path = tmp_path / "w.bt"
    save_weights(path, w)
    back = load_weights(path)
    assert back.arch == w.arch
    for name, p in w.params.items():
        assert np.array_equal(back.params[name], p)


def test_truncated_weights_rejected(tmp_path):
    w = init_weights(TINY, seed=4)
    path = tmp_path / "w.bt"
    save_weights(path, w)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(FormatError):
        load_weights(path)


def test_descriptor_mismatch_rejected(tmp_path):
    w = init_weights(TINY, seed=4)
    path = tmp_path / "w.bt"
    save_weights(path, w)
    arch_path = f"{path}.arch"
    text = open(arch_path).read().replace("widths=3,4", "widths=3,4,8")
    open(arch_path, "w").write(text)
    with pytest.raises(FormatError, match="payload length"):
        load_weights(path)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _toy_dataset(n=6, size=16):
    return [make_phantom(PhantomSpec(size=size, seed=s)) for s in range(n)]


def test_zero_epochs_returns_initialization():
    data = _toy_dataset()
    w = train_toy_denoiser(data, epochs=0, seed=5, arch=TINY)
    w0 = init_weights(TINY, seed=5)
    for name in w.params:
        assert np.array_equal(w.params[name], w0.params[name])


def test_training_determinism():
    data = _toy_dataset()
    w1 = train_toy_denoiser(data, epochs=3, seed=6, arch=TINY)
    w2 = train_toy_denoiser(data, epochs=3, seed=6, arch=TINY)
    for name in w1.params:
        assert np.array_equal(w1.params[name], w2.params[name])


def test_training_reduces_heldout_loss():
    arch = UNetArch(widths=(8, 16), bottleneck=24, emb_steps=8)
    data = _toy_dataset(n=8, size=32)
    held = [make_phantom(PhantomSpec(size=32, seed=50 + s)) for s in range(3)]
    w0 = init_weights(arch, seed=7)
    trained = train_toy_denoiser(data, epochs=200, seed=7, arch=arch, lr=0.3)
    loss0 = dsm_loss(w0, held, seed=11)
    loss1 = dsm_loss(trained, held, seed=11)
    assert loss1 < 0.5 * loss0


def test_empty_dataset_rejected():
    with pytest.raises(InvalidArgumentError):
        train_toy_denoiser([], epochs=1)


# ---------------------------------------------------------------------------
# score adapter
# ---------------------------------------------------------------------------


def test_prior_adapter_tweedie_consistency():
    rng = np.random.default_rng(8)
    w = init_weights(TINY, seed=9)
    prior = UNetScorePrior(w)
    assert prior.layer_count == 2
    x = _rand_image(rng)
    sigma = float(w.arch.sigma_ladder().sigmas[3])
    out = tweedie_denoise(x, sigma, prior, np.ones(4))
    eps_hat = unet_forward(x, 3, np.ones(4), w)
    assert np.allclose(out, x - sigma * eps_hat, atol=1e-12)


def test_uncalibratable_adapter_ignores_delta():
    rng = np.random.default_rng(9)
    w = init_weights(TINY, seed=10)
    prior = UNetScorePrior(w, calibratable=False)
    assert prior.layer_count == 0
    x = _rand_image(rng)
    a = prior.evaluate(x, 0.5, None)
    b = prior.evaluate(x, 0.5, np.array([0.0, 2.0, 0.5, 1.5]))
    assert np.array_equal(a, b)

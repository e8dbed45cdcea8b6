import math

import numpy as np
import pytest

import vlcest


def test_scalar_channel_functions():
    m = vlcest.lambertian_order(60.0)
    assert m == pytest.approx(1.0)
    assert vlcest.radiant_intensity(1.0, 0.0) == pytest.approx(1.0 / math.pi)
    assert vlcest.concentrator_gain(1.5, 50.0, 45.0) == 0.0
    assert vlcest.concentrator_gain(1.5, 10.0, 45.0) == pytest.approx(4.5)
    with pytest.raises(ValueError):
        vlcest.channel_gain(0.0, 0.0, 0.0, 1.0)


def test_channel_matrix_to_image():
    scene = vlcest.VlcScene.with_array_size(128)
    h = vlcest.build_channel_matrix(scene)
    assert h.shape == (128, 128)
    assert (h >= 0).all()
    x, lo, scale = vlcest.matrix_to_image(h)
    assert x.min() == 0.0 and x.max() == pytest.approx(1.0)
    np.testing.assert_allclose(x * scale + lo, h, rtol=1e-12, atol=1e-18)


def test_noise_and_psnr():
    x = np.full((16, 16), 0.5)
    y = vlcest.add_awgn(x, 25.0, 3)
    np.testing.assert_array_equal(y, vlcest.add_awgn(x, 25.0, 3))
    assert vlcest.psnr(x, y) == pytest.approx(20 * math.log10(255 / 25), abs=1.5)
    assert math.isinf(vlcest.psnr(x, x))


def test_shuffle_round_trip():
    t = np.random.default_rng(0).normal(size=(2, 3, 6, 8))
    u = vlcest.pixel_unshuffle(t)
    assert u.shape == (2, 12, 3, 4)
    np.testing.assert_array_equal(vlcest.pixel_shuffle(u), t)
    with pytest.raises(ValueError):
        vlcest.pixel_unshuffle(np.zeros((1, 1, 3, 4)))


def test_model_checkpoint_and_denoise(tmp_path):
    model = vlcest.init_model(depth=3, features=4, seed=2)
    path = tmp_path / "m.ffdn"
    model.save(path)
    loaded = vlcest.load_checkpoint(path)
    assert loaded.depth == 3 and loaded.parameter_count == model.parameter_count
    noisy = np.random.default_rng(1).uniform(size=(16, 16))
    np.testing.assert_array_equal(model.denoise(noisy, 25.0), loaded.denoise(noisy, 25.0))
    with pytest.raises(ValueError):
        model.denoise(np.zeros((15, 16)), 25.0)
    bad = tmp_path / "bad.ffdn"
    bad.write_bytes(b"NOPE")
    with pytest.raises(OSError):
        vlcest.load_checkpoint(bad)


def test_mmse_fit_and_limits(tmp_path):
    rng = np.random.default_rng(4)
    images = [rng.uniform(size=(32, 32)) for _ in range(4)]
    model = vlcest.fit_mmse(images, patch_size=8)
    assert model.sample_count == 64
    y = rng.uniform(size=(16, 16))
    np.testing.assert_allclose(model.denoise(y, 0.0), y, atol=1e-8)
    far = model.denoise(y, 1e6)
    np.testing.assert_allclose(far[:8, :8].ravel(), model.mean, atol=1e-6)
    model.save(tmp_path / "m.mmse")
    np.testing.assert_array_equal(vlcest.load_mmse(tmp_path / "m.mmse").mean, model.mean)

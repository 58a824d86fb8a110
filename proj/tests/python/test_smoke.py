import numpy as np
import pytest

import eyessl


def small_config(**extra):
    entries = dict(preset="desk", depth=2, base_channels=4, height=32, width=48, epochs=2,
                   synthetic_train=8, synthetic_subjects=4, synthetic_val=2, synthetic_val_subjects=1,
                   max_shift_px=4, k=2)
    entries.update(extra)
    return eyessl.config(**entries)


def test_config_overrides_and_errors():
    cfg = eyessl.config(method="SSL_D", k=4, seed=7)
    assert cfg.get("method") == "SSL_D"
    assert cfg.get("k") == "4"
    assert eyessl.Config.parse(cfg.to_text()) == cfg
    assert len(cfg.hash()) == 16
    with pytest.raises(eyessl.ConfigError):
        cfg.set("no_such_key", "1")
    with pytest.raises(eyessl.ValidationError):
        eyessl.config(epochs=0)
    assert "slope_u" in eyessl.config_keys()


def test_synthetic_frames_are_valid():
    frames = eyessl.generate_synthetic(3, seed=1, height=64, width=96, subjects=2)
    assert len(frames) == 3
    image, mask, frame_id = frames[0]
    assert image.shape == (64, 96) and image.dtype == np.float32
    assert mask.shape == (64, 96) and mask.dtype == np.uint8
    assert 0.0 <= image.min() and image.max() <= 1.0
    assert set(np.unique(mask)) <= {0, 1, 2, 3}
    again = eyessl.generate_synthetic(3, seed=1, height=64, width=96, subjects=2)
    assert np.array_equal(again[0][1], mask)
    assert frame_id.startswith("S")


def test_iou_matches_numpy():
    rng = np.random.default_rng(0)
    pred = rng.integers(0, 4, size=(16, 16), dtype=np.uint8)
    target = rng.integers(0, 4, size=(16, 16), dtype=np.uint8)
    got = eyessl.iou(pred, target)
    for c in range(4):
        inter = np.sum((pred == c) & (target == c))
        union = np.sum((pred == c) | (target == c))
        assert got[c] == pytest.approx(inter / union, abs=1e-12)
    assert eyessl.mean_iou(pred, pred) == 1.0


def test_integer_translation_round_trip_is_exact():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(4, 24, 32)).astype(np.float32)
    probs = np.exp(logits) / np.exp(logits).sum(axis=0, keepdims=True)
    moved = eyessl.apply_spatial(probs, 0.0, 3, -5)
    back, valid = eyessl.invert_spatial(moved, 0.0, 3, -5)
    region = valid > 0.99
    assert region.sum() == (24 - 3) * (32 - 5)
    assert np.array_equal(back[:, region], probs[:, region])


def test_signed_distance_signs():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[3:6, 3:6] = 3
    sdm = eyessl.signed_distance(mask)
    assert sdm.shape == (4, 9, 9)
    assert sdm[3, 4, 4] < 0 and sdm[3, 0, 0] > 0
    assert sdm[3, 3, 3] == 0.0


def test_losses_on_one_hot():
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[2:6, 2:6] = 1
    probs = np.full((4, 8, 8), 0.25, dtype=np.float32)
    assert eyessl.cross_entropy(probs, mask) == pytest.approx(np.log(4.0), rel=1e-6)
    assert eyessl.consistency_loss(probs, probs) == 0.0
    cfg = eyessl.config(slope_u=0.02, slope_ss=0.002)
    assert eyessl.schedule(10, cfg) == pytest.approx((0.2, 0.02))


def test_model_forward_and_checkpoint(tmp_path):
    cfg = small_config()
    model = eyessl.Model(cfg, seed=3)
    image = eyessl.generate_synthetic(1, seed=2, height=32, width=48)[0][0]
    probs = model.forward(image)
    assert probs.shape == (4, 32, 48)
    assert np.allclose(probs.sum(axis=0), 1.0, atol=1e-5)
    assert np.array_equal(model.predict(image), probs.argmax(axis=0))
    path = tmp_path / "m.bin"
    model.save(path, cfg)
    assert np.array_equal(eyessl.Model.load(path).forward(image), probs)
    with pytest.raises(eyessl.ShapeError):
        model.forward(np.zeros((16, 16), dtype=np.float32))


def test_tiny_training_run(tmp_path):
    cfg = small_config(method="SSL_SS", seed=4)
    model, history = eyessl.train(cfg, checkpoint=tmp_path / "best.bin", max_steps=2)
    assert [r["epoch"] for r in history] == [0, 1]
    assert all(r["method"] == "SSL_SS" for r in history)
    assert (tmp_path / "best.bin").exists()
    assert model.num_params > 0
    _, again = eyessl.train(cfg, max_steps=2)
    assert again == history

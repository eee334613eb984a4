import numpy as np
import pytest

from elvc.errors import BadDim, EmptyDataset, ModeMismatch, ShapeError
from elvc.gradcheck import check_conv1d, check_fusion, check_ft_gru, check_gru, check_linear, check_model
from elvc.io import FeatureMatrix, LayeredFeatureSet
from elvc.neural import (
    ModelConfig,
    TrainConfig,
    backward,
    build_model,
    convert,
    forward,
    load_checkpoint,
    masked_mse,
    save_checkpoint,
    train,
)
from elvc.neural import layers as L
from elvc.neural.checkpoint import tensors_equal
from elvc.neural.train import batch_loss_and_grads, pad_batch

SMALL = ModelConfig(conv_channels=6, kernel=3, hidden=5, acoustic_dim=80, out_dim=80)


def test_build_dims():
    p = build_model("audio_only")
    assert p.tensors["conv.W"].shape == (5, 80, 64)
    assert p.tensors["out.W"].shape == (64, 80)
    mm = build_model("multimodal", visual_dim=40)
    assert mm.trunk_in == 120 and mm.tensors["conv.W"].shape[1] == 120
    ft = build_model("multimodal_ft", visual_dim=40)
    assert ft.tensors["ft.Wh"].shape == (40, 120)
    vis = np.random.default_rng(0).standard_normal((1, 7, 40))
    fused = vis[0]
    out, _ = L.gru_forward(fused[None], ft.tensors["ft.Wx"], ft.tensors["ft.Wh"], ft.tensors["ft.bx"], ft.tensors["ft.bh"])
    assert out.shape == (1, 7, 40)
    kinds = [s.kind for s in ft.layer_specs()]
    assert kinds == ["GRU", "Conv1D", "Activation", "GRU", "Linear"]
    with pytest.raises(BadDim):
        build_model("multimodal", visual_dim=0)
    with pytest.raises(BadDim):
        ModelConfig(kernel=4)


def test_zero_model_gives_zero_output():
    p = build_model("multimodal_ft", visual_dim=3, visual_layers=2, config=SMALL)
    for v in p.tensors.values():
        v[...] = 0.0
    y, _ = forward(p, np.zeros((6, 80)), np.zeros((2, 6, 3)))
    assert y.shape == (6, 80) and np.all(y == 0.0)


@pytest.mark.parametrize("T", [1, 2, 9])
def test_output_shape(T, rng):
    p = build_model("audio_only", config=SMALL)
    y, _ = forward(p, rng.standard_normal((T, 80)))
    assert y.shape == (T, 80)
    y2, _ = forward(p, rng.standard_normal((3, T, 80)))
    assert y2.shape == (3, T, 80)


def test_linear_stack_scales(rng):
    x = rng.standard_normal((2, 4, 6))
    W1, b1 = rng.standard_normal((6, 5)), rng.standard_normal(5)
    W2, b2 = rng.standard_normal((5, 3)), rng.standard_normal(3)

    def stack(s):
        h, _ = L.linear_forward(x, s * W1, s * b1)
        return L.linear_forward(h, W2, b2)[0]

    # doubling the first layer's weights doubles its contribution downstream
    base = stack(0.0)
    assert np.allclose(stack(2.0) - base, 2 * (stack(1.0) - base))


def test_zero_grad_out_gives_zero_grads(rng):
    p = build_model("multimodal_ft", visual_dim=3, visual_layers=2, config=SMALL)
    _, cache = forward(p, rng.standard_normal((5, 80)), rng.standard_normal((2, 5, 3)))
    grads = backward(p, cache, np.zeros((5, 80)))
    assert grads.keys() == p.tensors.keys()
    assert all(np.all(g == 0) for g in grads.values())


def test_mse_gradient_zero_at_target(rng):
    p = build_model("audio_only", config=SMALL)
    y, cache = forward(p, rng.standard_normal((1, 5, 80)))
    loss, g = masked_mse(y, y.copy(), np.ones((1, 5), dtype=bool))
    assert loss == 0.0
    assert all(np.all(v == 0) for v in backward(p, cache, g).values())


@pytest.mark.parametrize("check", [check_conv1d, check_gru, check_linear, check_fusion, check_ft_gru])
def test_layer_gradients(check):
    rng = np.random.default_rng(7)
    assert max(check(rng) for _ in range(5)) < 1e-4


@pytest.mark.parametrize("mode", ["audio_only", "multimodal", "multimodal_ft"])
def test_whole_model_gradients(mode):
    rng = np.random.default_rng(11)
    assert max(check_model(rng, mode) for _ in range(3)) < 1e-4


def test_gru_is_causal(rng):
    p = build_model("audio_only", config=SMALL)
    x = rng.standard_normal((10, 80))
    Wx, Wh, bx, bh = (p.tensors[f"gru.{k}"] for k in ("Wx", "Wh", "bx", "bh"))
    h1, _ = L.gru_forward(x[None, :, :6], Wx, Wh, bx, bh)
    x2 = x.copy()
    x2[6:] = rng.standard_normal((4, 80))
    h2, _ = L.gru_forward(x2[None, :, :6], Wx, Wh, bx, bh)
    assert np.array_equal(h1[0, :6], h2[0, :6])
    assert not np.allclose(h1[0, 6:], h2[0, 6:])


def test_padding_contributes_nothing(rng):
    p = build_model("multimodal_ft", visual_dim=3, visual_layers=2, config=SMALL)
    lens = [4, 7, 5]
    acs = [rng.standard_normal((t, 80)) for t in lens]
    vis = [rng.standard_normal((2, t, 3)) for t in lens]
    tgs = [rng.standard_normal((t, 80)) for t in lens]
    loss, grads = batch_loss_and_grads(p, acs, vis, tgs)
    total = sum(lens)
    ref_loss = 0.0
    ref = {k: np.zeros_like(v) for k, v in p.tensors.items()}
    for a, v, t in zip(acs, vis, tgs):
        l_u, g_u = batch_loss_and_grads(p, [a], [v], [t])
        ref_loss += l_u * len(a) / total
        for k in ref:
            ref[k] += g_u[k] * len(a) / total
    assert loss == pytest.approx(ref_loss, rel=1e-12)
    for k in ref:
        assert np.allclose(grads[k], ref[k], rtol=1e-10, atol=1e-13), k


def test_pad_batch_mask():
    stacked, mask = pad_batch([np.ones((2, 3)), np.ones((4, 3))])
    assert stacked.shape == (2, 4, 3)
    assert mask.tolist() == [[True, True, False, False], [True] * 4]
    assert np.all(stacked[0, 2:] == 0)


def test_mode_nesting(rng):
    audio = build_model("audio_only", config=SMALL, seed=3)
    mm = build_model("multimodal", visual_dim=4, visual_layers=2, config=SMALL, seed=3)
    mm.tensors["conv.W"][:, :80, :] = audio.tensors["conv.W"]
    mm.tensors["conv.W"][:, 80:, :] = 0.0
    for k in audio.tensors:
        if k != "conv.W":
            mm.tensors[k] = audio.tensors[k].copy()
    x = rng.standard_normal((6, 80))
    ya, _ = forward(audio, x)
    ym, _ = forward(mm, x, rng.standard_normal((2, 6, 4)))
    assert np.allclose(ya, ym, atol=1e-12)


def test_forward_errors(rng):
    p = build_model("multimodal", visual_dim=4, config=SMALL)
    with pytest.raises(ModeMismatch):
        forward(p, rng.standard_normal((5, 80)))
    with pytest.raises(ShapeError):
        forward(p, rng.standard_normal((5, 80)), rng.standard_normal((1, 6, 4)))
    with pytest.raises(ShapeError):
        forward(build_model("audio_only", config=SMALL), rng.standard_normal((5, 70)))


def _identity_set(rng, n=10):
    items = []
    for _ in range(n):
        T = int(rng.integers(30, 60))
        base = np.cumsum(rng.standard_normal((T, 80)) * 0.3, axis=0) + rng.standard_normal(80) * 3
        items.append((base, None, base))
    return items


def test_identity_training_converges():
    from elvc.features import log_mel_spectrogram
    from elvc.synthetic import multitone_utterance

    rng = np.random.default_rng(100)
    data = []
    for _ in range(10):
        w, _ = multitone_utterance(rng, 4)
        lms = log_mel_spectrogram(w).data
        data.append((lms, None, lms))
    _, history = train(data, TrainConfig(epochs=200, seed=0))
    assert np.all(np.isfinite(history))
    assert history[-1] <= 0.1 * history[0]


def test_training_is_deterministic(rng):
    data = _identity_set(rng, 5)
    cfg = TrainConfig(epochs=3, batch_size=2, seed=9)
    p1, h1 = train(data, cfg, model_config=SMALL)
    p2, h2 = train(data, cfg, model_config=SMALL)
    assert h1 == h2
    assert tensors_equal(p1.tensors, p2.tensors)


def test_training_errors(rng):
    with pytest.raises(EmptyDataset):
        train([], TrainConfig(epochs=1))
    data = _identity_set(rng, 2)
    with pytest.raises(ModeMismatch):
        train(data, TrainConfig(epochs=1), mode="multimodal")


def test_convert_and_checkpoint(tmp_path, rng):
    vis = [LayeredFeatureSet(rng.standard_normal((2, 20, 3)) * 4 + 1) for _ in range(3)]
    data = [(rng.standard_normal((20, 80)), v, rng.standard_normal((20, 80))) for v in vis]
    params, _ = train(data, TrainConfig(epochs=2, seed=1), mode="multimodal_ft", model_config=SMALL)
    out = convert(params, FeatureMatrix(data[0][0], kind="LMS"), vis[0])
    assert out.kind == "LMS" and out.data.shape == (20, 80)
    with pytest.raises(ModeMismatch):
        convert(params, data[0][0])
    save_checkpoint(params, tmp_path / "ckpt")
    back = load_checkpoint(tmp_path / "ckpt")
    assert back.mode == "multimodal_ft" and back.config == SMALL
    assert tensors_equal(back.tensors, params.tensors)
    assert tensors_equal(back.stats, params.stats)
    assert np.array_equal(back.visual_norm.std, params.visual_norm.std)
    assert convert(back, data[0][0], vis[0]).data.tobytes() == out.data.tobytes()
    manifest = (tmp_path / "ckpt" / "manifest.txt").read_text()
    assert "layer.0=GRU in=3 out=3" in manifest

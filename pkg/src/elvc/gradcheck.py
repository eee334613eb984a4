"""Central finite-difference verification of the analytic gradients."""

from dataclasses import dataclass

import numpy as np

from elvc.neural import layers as L
from elvc.neural.model import ModelConfig, backward, build_model, forward
from elvc.visual import weighted_sum, weighted_sum_backward

STEP = 1e-5
TOLERANCE = 1e-4
LAYER_KINDS = ("Conv1D", "GRU", "Linear", "Fusion", "FT-GRU")


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor), maximised over the array.

    The floor keeps entries whose true gradient sits at the finite-difference
    noise level (about 1e-10 here) from dominating the score.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_grad(f, x, h=STEP):
    """Central differences of scalar ``f()`` with respect to array ``x``, perturbed in place."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


@dataclass
class CheckResult:
    kind: str
    configs: int
    max_rel_error: float

    @property
    def passed(self):
        return self.max_rel_error < TOLERANCE


def _dims(rng):
    return int(rng.integers(1, 4)), int(rng.integers(2, 9)), int(rng.integers(1, 7)), int(rng.integers(1, 7))


def _check_layer(fwd, bwd, inputs, gout_shape, rng):
    """Max relative error over every input/parameter of a layer under loss sum(G * y)."""
    G = rng.standard_normal(gout_shape)
    y, cache = fwd(*inputs)
    y0 = y.copy()

    def loss():
        return float(np.sum(G * (fwd(*inputs)[0] - y0)))

    gx, pgrads = bwd(cache, G)
    analytic = [gx] + list(pgrads)
    worst = 0.0
    for arr, ga in zip(inputs, analytic):
        worst = max(worst, relative_error(ga, numeric_grad(loss, arr)))
    return worst


def check_conv1d(rng):
    B, T, din, dout = _dims(rng)
    k = int(rng.choice([1, 3, 5]))
    x = rng.standard_normal((B, T, din))
    W = rng.standard_normal((k, din, dout)) * 0.5
    b = rng.standard_normal(dout)

    def bwd(cache, G):
        gx, p = L.conv1d_backward(cache, G)
        return gx, (p["W"], p["b"])

    return _check_layer(L.conv1d_forward, bwd, [x, W, b], (B, T, dout), rng)


def check_linear(rng):
    B, T, din, dout = _dims(rng)
    x = rng.standard_normal((B, T, din))
    W = rng.standard_normal((din, dout))
    b = rng.standard_normal(dout)

    def bwd(cache, G):
        gx, p = L.linear_backward(cache, W, G)
        return gx, (p["W"], p["b"])

    return _check_layer(L.linear_forward, bwd, [x, W, b], (B, T, dout), rng)


def check_gru(rng):
    B, T, din, H = _dims(rng)
    x = rng.standard_normal((B, T, din))
    Wx = rng.standard_normal((din, 3 * H)) * 0.7
    Wh = rng.standard_normal((H, 3 * H)) * 0.7
    bx = rng.standard_normal(3 * H) * 0.3
    bh = rng.standard_normal(3 * H) * 0.3

    def bwd(cache, G):
        gx, p = L.gru_backward(cache, G)
        return gx, (p["Wx"], p["Wh"], p["bx"], p["bh"])

    return _check_layer(L.gru_forward, bwd, [x, Wx, Wh, bx, bh], (B, T, H), rng)


def check_fusion(rng):
    B, T, _, D = _dims(rng)
    n_layers = int(rng.integers(1, 5))
    layers = rng.standard_normal((B, n_layers, T, D))
    logits = rng.standard_normal(n_layers)
    G = rng.standard_normal((B, T, D))

    def loss():
        return float(np.sum(G * weighted_sum(layers, logits)))

    return relative_error(weighted_sum_backward(layers, logits, G), numeric_grad(loss, logits))


def _model_check(rng, mode, names=None):
    B, T, _, _ = _dims(rng)
    vdim = int(rng.integers(1, 7))
    n_layers = int(rng.integers(1, 4))
    cfg = ModelConfig(
        conv_channels=int(rng.integers(1, 7)),
        kernel=int(rng.choice([1, 3, 5])),
        hidden=int(rng.integers(1, 7)),
        acoustic_dim=int(rng.integers(1, 7)),
        out_dim=int(rng.integers(1, 7)),
    )
    params = build_model(mode, vdim, n_layers, cfg, seed=int(rng.integers(2**31)))
    for k, v in params.tensors.items():
        v += rng.standard_normal(v.shape) * 0.3
    params.stats["in_std"] = rng.uniform(0.5, 2.0, cfg.acoustic_dim)
    params.stats["out_std"] = rng.uniform(0.5, 2.0, cfg.out_dim)
    x = rng.standard_normal((B, T, cfg.acoustic_dim))
    vis = rng.standard_normal((B, n_layers, T, vdim)) if mode != "audio_only" else None
    G = rng.standard_normal((B, T, cfg.out_dim))
    y0, cache = forward(params, x, vis)
    y0 = y0.copy()

    # differencing against y0 keeps the loss near zero, shrinking cancellation error
    def loss():
        return float(np.sum(G * (forward(params, x, vis)[0] - y0)))

    grads = backward(params, cache, G)
    names = names or list(params.tensors)
    return max(relative_error(grads[n], numeric_grad(loss, params.tensors[n])) for n in names)


def check_ft_gru(rng):
    names = ["ft.Wx", "ft.Wh", "ft.bx", "ft.bh", "fusion.logits"]
    return _model_check(rng, "multimodal_ft", names)


def check_model(rng, mode):
    return _model_check(rng, mode)


CHECKS = {
    "Conv1D": check_conv1d,
    "GRU": check_gru,
    "Linear": check_linear,
    "Fusion": check_fusion,
    "FT-GRU": check_ft_gru,
}


def run_gradcheck(n_configs=20, seed=0, kinds=LAYER_KINDS):
    """Check every layer kind on ``n_configs`` random small configurations."""
    results = []
    for idx, kind in enumerate(kinds):
        rng = np.random.default_rng([seed, idx])
        worst = max(CHECKS[kind](rng) for _ in range(n_configs))
        results.append(CheckResult(kind, n_configs, worst))
    return results


def format_table(results):
    lines = [f"{'layer':<8} {'configs':>7} {'max_rel_err':>12}  status"]
    for r in results:
        lines.append(f"{r.kind:<8} {r.configs:>7} {r.max_rel_error:>12.3e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)

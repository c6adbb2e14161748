"""Online-trained selective state-space predictor.

Two residual blocks, each: LayerNorm, input projection into an SSM half and a
gate half, causal depthwise convolution, SiLU, data-dependent diagonal state
recurrence, gated output projection. A final LayerNorm feeds a tied-shape
output head over the compact vocabulary. The model is never serialized: both
ends of the codec rebuild it from the seed and train it on the decoded stream,
so every operation here must be bit-reproducible. All reductions use numpy's
serial schedules in the configured dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFaultError

LN_EPS = 1e-5


@dataclass
class ModelConfig:
    d_model: int = 32
    d_state: int = 16
    d_inner: int = 64
    d_conv: int = 4
    n_layers: int = 2
    chunk_size: int = 32
    label_smoothing: float = 0.12
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 5.0
    rng_seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.d_inner != 2 * self.d_model:
            raise ValueError("d_inner must equal 2 * d_model")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must be in [0, 1)")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


def _param_shapes(cfg: ModelConfig, v_e: int) -> list[tuple[str, tuple[int, ...], str]]:
    """(name, shape, init class) in the fixed generation order."""
    dm, ds, di, dc = cfg.d_model, cfg.d_state, cfg.d_inner, cfg.d_conv
    shapes: list[tuple[str, tuple[int, ...], str]] = [
        ("embedding", (v_e, dm), "weight"),
        ("head", (v_e, dm), "weight"),
    ]
    for i in range(cfg.n_layers):
        p = f"l{i}."
        shapes += [
            (p + "ln_g", (dm,), "weight"),
            (p + "ln_b", (dm,), "bias"),
            (p + "w_in", (dm, 2 * di), "weight"),
            (p + "conv_w", (di, dc), "weight"),
            (p + "conv_b", (di,), "bias"),
            (p + "w_xp", (di, 2 * ds + 1), "weight"),
            (p + "w_delta", (di,), "weight"),
            (p + "b_delta", (di,), "bias"),
            (p + "a_log", (di, ds), "a_log"),
            (p + "d_skip", (di,), "ones"),
            (p + "w_out", (di, dm), "weight"),
        ]
    shapes += [("final_ln_g", (dm,), "weight"), ("final_ln_b", (dm,), "bias")]
    return shapes


def param_count(cfg: ModelConfig, v_e: int) -> int:
    return sum(math.prod(shape) for _, shape, _ in _param_shapes(cfg, v_e))


def init_params(cfg: ModelConfig, v_e: int) -> dict[str, np.ndarray]:
    """Seed-determined initial parameters.

    The counter-based Philox generator plus numpy's ziggurat normal transform
    are part of the archive format: the decoder must regenerate these arrays
    bit-for-bit. Draws happen in float64 in the fixed order of _param_shapes
    and are then cast to the working dtype.
    """
    rng = np.random.Generator(np.random.Philox(key=cfg.rng_seed))
    dt = cfg.np_dtype
    params: dict[str, np.ndarray] = {}
    for name, shape, kind in _param_shapes(cfg, v_e):
        if kind == "weight":
            arr = rng.standard_normal(shape) * 0.02
        elif kind == "bias":
            arr = rng.standard_normal(shape) * 0.1
        elif kind == "a_log":
            arr = np.tile(np.log(np.arange(1, shape[1] + 1, dtype=np.float64)), (shape[0], 1))
        elif kind == "ones":
            arr = np.ones(shape, dtype=np.float64)
        else:  # pragma: no cover
            raise AssertionError(kind)
        params[name] = np.ascontiguousarray(arr, dtype=dt)
    return params


@dataclass
class SsmState:
    hidden: np.ndarray  # (n_layers, d_inner, d_state)
    conv: np.ndarray    # (n_layers, d_inner, d_conv - 1)

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "SsmState":
        dt = cfg.np_dtype
        return cls(
            hidden=np.zeros((cfg.n_layers, cfg.d_inner, cfg.d_state), dtype=dt),
            conv=np.zeros((cfg.n_layers, cfg.d_inner, cfg.d_conv - 1), dtype=dt),
        )

    def copy(self) -> "SsmState":
        return SsmState(self.hidden.copy(), self.conv.copy())


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _softplus(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _layer_params(params: dict[str, np.ndarray], i: int) -> dict[str, np.ndarray]:
    p = f"l{i}."
    return {k[len(p):]: v for k, v in params.items() if k.startswith(p)}


def _layer_forward(lp, x, h, buf, cache: dict | None):
    """One token through one block; mutates h and buf in place."""
    mu = x.mean()
    inv = 1.0 / np.sqrt(x.var() + LN_EPS)
    xhat = (x - mu) * inv
    a = lp["ln_g"] * xhat + lp["ln_b"]
    z = a @ lp["w_in"]
    di = lp["conv_w"].shape[0]
    zs, zg = z[:di], z[di:]
    win = np.concatenate([buf, zs[:, None]], axis=1)
    u = (lp["conv_w"] * win).sum(axis=1) + lp["conv_b"]
    buf[:] = win[:, 1:]
    sig_u = _sigmoid(u)
    zt = u * sig_u
    proj = zt @ lp["w_xp"]
    ds = lp["a_log"].shape[1]
    bv, cv, delta = proj[:ds], proj[ds:2 * ds], proj[2 * ds]
    d_pre = delta * lp["w_delta"] + lp["b_delta"]
    big_delta = _softplus(d_pre)
    mult = np.exp(big_delta[:, None] * (-np.exp(lp["a_log"])))
    h_prev = h.copy() if cache is not None else None
    h *= mult
    h += (big_delta * zt)[:, None] * bv[None, :]
    y = h @ cv + lp["d_skip"] * zt
    sg = zg * _sigmoid(zg)
    o = y * sg
    x_out = o @ lp["w_out"] + x
    if cache is not None:
        cache.update(
            x=x, xhat=xhat, inv=inv, a=a, zg=zg, win=win, u=u, sig_u=sig_u, zt=zt,
            bv=bv, cv=cv, delta=delta, d_pre=d_pre, big_delta=big_delta, mult=mult,
            h_prev=h_prev, h_new=h.copy(), y=y, sg=sg, o=o,
        )
    return x_out


def _final_ln(params, x):
    mu = x.mean()
    inv = 1.0 / np.sqrt(x.var() + LN_EPS)
    xhat = (x - mu) * inv
    return params["final_ln_g"] * xhat + params["final_ln_b"]


def ssm_step_forward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    state: SsmState,
    prev_token: int,
    want_logits: bool = True,
) -> np.ndarray | None:
    """Advance the state by one token; optionally return head logits."""
    x = params["embedding"][prev_token].copy()
    for i in range(cfg.n_layers):
        x = _layer_forward(_layer_params(params, i), x, state.hidden[i], state.conv[i], None)
    if not want_logits:
        return None
    logits = params["head"] @ _final_ln(params, x)
    if not np.all(np.isfinite(logits)):
        raise NumericFaultError("non-finite model logits")
    return logits


def chunk_loss(logits: np.ndarray, targets: np.ndarray, eps: float) -> float:
    """Sum over positions of (1 - eps) * CE(target) + eps * CE(uniform), nats."""
    l64 = logits.astype(np.float64)
    l64 -= l64.max(axis=1, keepdims=True)
    e = np.exp(l64)
    logp = l64 - np.log(e.sum(axis=1, keepdims=True))
    logp = np.maximum(logp, math.log(1e-12))
    n = logits.shape[1]
    ce = -logp[np.arange(len(targets)), targets]
    hu = -logp.mean(axis=1)
    return float(((1.0 - eps) * ce + eps * hu).sum())


def backprop_chunk(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    snapshot: SsmState,
    chunk: np.ndarray,
) -> tuple[dict[str, np.ndarray], float]:
    """Exact gradients of the chunk loss; the snapshot state is a constant.

    The forward consumes chunk[:-1] and predicts chunk[1:]. Gradients flow
    through the recurrent state and the convolution windows within the chunk
    only (truncated backpropagation, detached at the chunk boundary).
    """
    dt = cfg.np_dtype
    nl, di, ds, dc, dm = cfg.n_layers, cfg.d_inner, cfg.d_state, cfg.d_conv, cfg.d_model
    tokens = np.asarray(chunk[:-1])
    targets = np.asarray(chunk[1:])
    npos = len(tokens)
    lps = [_layer_params(params, i) for i in range(nl)]

    state = snapshot.copy()
    caches: list[list[dict]] = []
    x_last = np.empty((npos, dm), dtype=dt)
    for t, tok in enumerate(tokens):
        x = params["embedding"][tok].copy()
        row = []
        for i in range(nl):
            c: dict = {}
            x = _layer_forward(lps[i], x, state.hidden[i], state.conv[i], c)
            row.append(c)
        caches.append(row)
        x_last[t] = x

    # final LayerNorm and head, batched over positions
    mu = x_last.mean(axis=1, keepdims=True)
    inv_f = 1.0 / np.sqrt(x_last.var(axis=1, keepdims=True) + LN_EPS)
    xhat_f = (x_last - mu) * inv_f
    x_fin = params["final_ln_g"] * xhat_f + params["final_ln_b"]
    logits = x_fin @ params["head"].T
    if not np.all(np.isfinite(logits)):
        raise NumericFaultError("non-finite logits during training")
    loss = chunk_loss(logits, targets, cfg.label_smoothing)

    l64 = logits.astype(np.float64)
    l64 -= l64.max(axis=1, keepdims=True)
    e = np.exp(l64)
    p = e / e.sum(axis=1, keepdims=True)
    v_e = logits.shape[1]
    dlogits = p.astype(dt)
    dlogits -= cfg.label_smoothing / v_e
    dlogits[np.arange(npos), targets] -= 1.0 - cfg.label_smoothing

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["head"] += dlogits.T @ x_fin
    dx_fin = dlogits @ params["head"]
    grads["final_ln_g"] += (dx_fin * xhat_f).sum(axis=0)
    grads["final_ln_b"] += dx_fin.sum(axis=0)
    dxhat = dx_fin * params["final_ln_g"]
    dx_all = inv_f * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat_f * (dxhat * xhat_f).mean(axis=1, keepdims=True)
    )

    dh_carry = [np.zeros((di, ds), dtype=dt) for _ in range(nl)]
    dzs_extra = [np.zeros((npos, di), dtype=dt) for _ in range(nl)]
    for t in range(npos - 1, -1, -1):
        dx = dx_all[t].copy()
        for i in range(nl - 1, -1, -1):
            lp, c = lps[i], caches[t][i]
            do = dx @ lp["w_out"].T
            grads[f"l{i}.w_out"] += np.outer(c["o"], dx)
            dy = do * c["sg"]
            sig_g = _sigmoid(c["zg"])
            dzg = do * c["y"] * (sig_g * (1.0 + c["zg"] * (1.0 - sig_g)))
            dh_new = dy[:, None] * c["cv"][None, :] + dh_carry[i]
            grads[f"l{i}.d_skip"] += dy * c["zt"]
            dzt = dy * lp["d_skip"]
            dcv = c["h_new"].T @ dy
            # recurrence: h_new = mult * h_prev + (Delta * zt) outer bv
            dmult = dh_new * c["h_prev"]
            dh_carry[i] = dh_new * c["mult"]
            a_mat = -np.exp(lp["a_log"])
            d_big = (dmult * c["mult"] * a_mat).sum(axis=1)
            d_big += (dh_new @ c["bv"]) * c["zt"]
            grads[f"l{i}.a_log"] += dmult * c["mult"] * c["big_delta"][:, None] * a_mat
            dzt += c["big_delta"] * (dh_new @ c["bv"])
            dbv = dh_new.T @ (c["big_delta"] * c["zt"])
            dd_pre = d_big * _sigmoid(c["d_pre"])
            ddelta = dd_pre @ lp["w_delta"]
            grads[f"l{i}.w_delta"] += dd_pre * c["delta"]
            grads[f"l{i}.b_delta"] += dd_pre
            dproj = np.concatenate([dbv, dcv, np.array([ddelta], dtype=dt)])
            grads[f"l{i}.w_xp"] += np.outer(c["zt"], dproj)
            dzt += lp["w_xp"] @ dproj
            du = dzt * (c["sig_u"] * (1.0 + c["u"] * (1.0 - c["sig_u"])))
            grads[f"l{i}.conv_b"] += du
            grads[f"l{i}.conv_w"] += du[:, None] * c["win"]
            dwin = du[:, None] * lp["conv_w"]
            dzs = dwin[:, -1] + dzs_extra[i][t]
            for k in range(dc - 1):
                src = t - (dc - 1 - k)
                if src >= 0:
                    dzs_extra[i][src] += dwin[:, k]
            dz = np.concatenate([dzs, dzg])
            grads[f"l{i}.w_in"] += np.outer(c["a"], dz)
            da = lp["w_in"] @ dz
            grads[f"l{i}.ln_g"] += da * c["xhat"]
            grads[f"l{i}.ln_b"] += da
            dxh = da * lp["ln_g"]
            dx += c["inv"] * (dxh - dxh.mean() - c["xhat"] * (dxh * c["xhat"]).mean())
        grads["embedding"][tokens[t]] += dx
    return grads, loss


def adam_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    adam: AdamState,
    cfg: ModelConfig,
) -> None:
    """Global-norm clip, then bias-corrected Adam; mutates params and adam."""
    sq = 0.0
    for name, _, _ in _param_shapes(cfg, len(params["embedding"])):
        g = grads[name]
        sq += float(np.dot(g.ravel().astype(np.float64), g.ravel().astype(np.float64)))
    norm = math.sqrt(sq)
    scale = cfg.grad_clip / norm if norm > cfg.grad_clip else 1.0
    adam.step_count += 1
    t = adam.step_count
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = grads[name] * scale if scale != 1.0 else grads[name]
        m, v = adam.m[name], adam.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def warmup_iters(chunk_index: int) -> int:
    """Training iterations per chunk: front-loaded schedule."""
    if chunk_index <= 10:
        return 8
    if chunk_index <= 30:
        return 4
    return 2


def train_chunk(
    params: dict[str, np.ndarray],
    adam: AdamState,
    snapshot: SsmState,
    chunk: np.ndarray,
    chunk_index: int,
    cfg: ModelConfig,
) -> tuple[SsmState, np.ndarray]:
    """Train on one full chunk, then rebuild the carry state with new weights.

    Each iteration restarts the forward from the chunk-start snapshot. The
    returned state is a full-chunk rollout under the updated parameters and
    replaces the caller's running state; the rollout's last step also yields
    the logits predicting the token after the chunk.
    """
    for _ in range(warmup_iters(chunk_index)):
        grads, _ = backprop_chunk(params, cfg, snapshot, chunk)
        adam_update(params, grads, adam, cfg)
    state = snapshot.copy()
    for tok in chunk[:-1]:
        ssm_step_forward(params, cfg, state, int(tok), want_logits=False)
    logits = ssm_step_forward(params, cfg, state, int(chunk[-1]), want_logits=True)
    return state, logits

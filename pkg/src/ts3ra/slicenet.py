"""Neural slice selection: encoder / mixer / decoder over request features.

A request is embedded as a short sequence (one position per feature).  The
input encoder stacks four convolution steps (ReLU, depthwise-separable
convolution, per-position layer normalization) with residual additions;
the I/O mixer concatenates the encoded input with the encoded output
history; the decoder runs the same convolution stack plus scaled
dot-product attention back onto the encoder output, and a linear head
produces one logit per slice.

Everything is implemented directly on float64 NumPy arrays with
hand-written backward passes so gradients can be finite-difference
checked.  Shapes are batched: (batch, length, channels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import ServiceType

LN_EPS = 1e-5
DROP_PROB = 0.5
N_CLASSES = 3
ENC_KERNELS = (3, 3, 15, 15)
ATTN_KERNEL = 5
DEFAULT_D_MODEL = 8
DEFAULT_N_FEATURES = 7
LEARNING_RATE_RANGE = (0.001, 0.1)


class DivergedModelError(RuntimeError):
    """Forward pass produced non-finite logits."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class SliceFeatureVector:
    """Normalized request features: service one-hot, SLA fairness, identity
    hash, capacity hint and mobility, each in [0, 1]."""

    service_type: ServiceType
    fair_sla: float
    imsi_hash: float
    capacity: float
    mobility: float

    def __post_init__(self):
        for name in ("fair_sla", "imsi_hash", "capacity", "mobility"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be normalized to [0, 1] (got {v!r})")

    def to_array(self) -> np.ndarray:
        onehot = [0.0, 0.0, 0.0]
        onehot[_CLASS_INDEX[self.service_type]] = 1.0
        return np.array(
            onehot + [self.fair_sla, self.imsi_hash, self.capacity, self.mobility],
            dtype=np.float64,
        )


_CLASS_INDEX = {ServiceType.EMBB: 0, ServiceType.URLLC: 1, ServiceType.MMTC: 2}
_INDEX_CLASS = {v: k for k, v in _CLASS_INDEX.items()}


@dataclass(frozen=True)
class SliceDecision:
    indicator: tuple[int, int, int]
    slice_id: str
    confidence: float

    def __post_init__(self):
        if self.indicator not in ((0, 0, 1), (0, 1, 0), (1, 1, 1)):
            raise ValueError(f"unknown slice indicator {self.indicator!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0, 1]")


# ---------------------------------------------------------------------------
# primitive ops (batched, with hand-written backward passes)
# ---------------------------------------------------------------------------


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def timing_signal(length: int, channels: int) -> np.ndarray:
    """Sinusoidal position table added to the attention target."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(channels, dtype=np.float64)[None, :]
    rates = 1.0 / np.power(10000.0, (2.0 * (idx // 2)) / max(channels, 1))
    table = pos * rates
    signal = np.where(idx % 2 == 0, np.sin(table), np.cos(table))
    return signal


@dataclass
class ConvStepParams:
    """One convolution step: depthwise kernel, pointwise mix, layer norm."""

    dw: np.ndarray  # (kernel, c_in)
    pw: np.ndarray  # (c_in, c_out)
    pb: np.ndarray  # (c_out,)
    ln_gain: np.ndarray  # (c_out,)
    ln_bias: np.ndarray  # (c_out,)
    dilation: int = 1

    @property
    def kernel(self) -> int:
        return self.dw.shape[0]

    def tensors(self) -> list[np.ndarray]:
        return [self.dw, self.pw, self.pb, self.ln_gain, self.ln_bias]


def _depthwise_fwd(a: np.ndarray, dw: np.ndarray, dilation: int):
    b, length, c = a.shape
    k = dw.shape[0]
    pad = (k - 1) * dilation // 2
    a_pad = np.zeros((b, length + 2 * pad, c))
    a_pad[:, pad : pad + length, :] = a
    out = np.zeros((b, length, c))
    for tap in range(k):
        out += dw[tap] * a_pad[:, tap * dilation : tap * dilation + length, :]
    return out, a_pad


def _depthwise_bwd(dout: np.ndarray, a_pad: np.ndarray, dw: np.ndarray, dilation: int):
    b, length, c = dout.shape
    k = dw.shape[0]
    pad = (k - 1) * dilation // 2
    d_dw = np.zeros_like(dw)
    d_apad = np.zeros_like(a_pad)
    for tap in range(k):
        seg = slice(tap * dilation, tap * dilation + length)
        d_dw[tap] = np.einsum("blc,blc->c", dout, a_pad[:, seg, :])
        d_apad[:, seg, :] += dw[tap] * dout
    return d_apad[:, pad : pad + length, :], d_dw


def _conv_step_fwd(p: ConvStepParams, x: np.ndarray):
    """LN(pointwise(depthwise(relu(x)))) with everything cached for backward."""
    a = np.maximum(x, 0.0)
    d, a_pad = _depthwise_fwd(a, p.dw, p.dilation)
    s = d @ p.pw + p.pb
    mu = s.mean(axis=-1, keepdims=True)
    var = s.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (s - mu) * inv
    out = p.ln_gain * xhat + p.ln_bias
    cache = (x, a_pad, d, xhat, inv)
    return out, cache


def _conv_step_bwd(p: ConvStepParams, cache, dout: np.ndarray, grads: dict, prefix: str):
    x, a_pad, d, xhat, inv = cache
    c = xhat.shape[-1]
    grads[prefix + "ln_gain"] += np.einsum("blc,blc->c", dout, xhat)
    grads[prefix + "ln_bias"] += dout.sum(axis=(0, 1))
    dxhat = dout * p.ln_gain
    ds = inv / c * (
        c * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    grads[prefix + "pw"] += np.einsum("blc,bld->cd", d, ds)
    grads[prefix + "pb"] += ds.sum(axis=(0, 1))
    dd = ds @ p.pw.T
    da, d_dw = _depthwise_bwd(dd, a_pad, p.dw, p.dilation)
    grads[prefix + "dw"] += d_dw
    dx = da * (x > 0.0)
    return dx


def conv_step(params: ConvStepParams, x: np.ndarray) -> np.ndarray:
    """Single-instance convolution step on a (length, channels) array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("conv_step input must be (length, channels)")
    if x.shape[1] != params.dw.shape[1]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[1]}, kernel expects {params.dw.shape[1]}"
        )
    out, _ = _conv_step_fwd(params, x[None])
    return out[0]


@dataclass
class ConvModuleParams:
    """Four convolution steps with residual additions after steps 2 and 4."""

    steps: list[ConvStepParams]

    def __post_init__(self):
        if len(self.steps) != 4:
            raise ValueError("the convolution module stacks exactly four steps")


def _conv_module_fwd(
    m: ConvModuleParams,
    x: np.ndarray,
    training: bool,
    rng: Optional[np.random.Generator],
):
    h1, c1 = _conv_step_fwd(m.steps[0], x)
    s2, c2 = _conv_step_fwd(m.steps[1], h1)
    h2 = x + s2
    h3, c3 = _conv_step_fwd(m.steps[2], h2)
    s4, c4 = _conv_step_fwd(m.steps[3], h3)
    h4 = x + s4
    if training:
        if rng is None:
            raise ValueError("training mode needs an rng for dropout")
        mask = (rng.random(h4.shape) >= DROP_PROB).astype(np.float64)
        out = h4 * mask / (1.0 - DROP_PROB)
    else:
        mask = None
        out = h4
    return out, (c1, c2, c3, c4, mask)


def _conv_module_bwd(m: ConvModuleParams, cache, dout: np.ndarray, grads: dict, prefix: str):
    c1, c2, c3, c4, mask = cache
    if mask is not None:
        dout = dout * mask / (1.0 - DROP_PROB)
    dx = dout.copy()  # residual into h4
    dh3 = _conv_step_bwd(m.steps[3], c4, dout, grads, prefix + "4_")
    dh2 = _conv_step_bwd(m.steps[2], c3, dh3, grads, prefix + "3_")
    dx += dh2  # residual into h2
    dh1 = _conv_step_bwd(m.steps[1], c2, dh2, grads, prefix + "2_")
    dx += _conv_step_bwd(m.steps[0], c1, dh1, grads, prefix + "1_")
    return dx


def conv_module(
    params: ConvModuleParams,
    x: np.ndarray,
    mode: str = "inference",
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Single-instance module: h1..h4 with residuals, dropout when training."""
    if mode not in ("training", "inference"):
        raise ValueError("mode must be 'training' or 'inference'")
    x = np.asarray(x, dtype=np.float64)
    out, _ = _conv_module_fwd(params, x[None], mode == "training", rng)
    return out[0]


@dataclass
class AttentionParams:
    """Two projection steps feeding scaled dot-product attention."""

    proj1: ConvStepParams  # target channels -> target channels
    proj2: ConvStepParams  # target channels -> source channels


def _attention_fwd(p: AttentionParams, source: np.ndarray, target: np.ndarray):
    b, lt, ct = target.shape
    t_in = target + timing_signal(lt, ct)
    q1, c1 = _conv_step_fwd(p.proj1, t_in)
    q2, c2 = _conv_step_fwd(p.proj2, q1)
    cs = source.shape[-1]
    scale = 1.0 / math.sqrt(cs)
    scores = np.einsum("btc,bsc->bts", q2, source) * scale
    weights = softmax(scores, axis=-1)
    out = np.einsum("bts,bsc->btc", weights, source)
    cache = (c1, c2, q2, source, weights, scale)
    return out, cache


def _attention_bwd(p: AttentionParams, cache, dout: np.ndarray, grads: dict, prefix: str):
    c1, c2, q2, source, weights, scale = cache
    d_weights = np.einsum("btc,bsc->bts", dout, source)
    d_source = np.einsum("bts,btc->bsc", weights, dout)
    # softmax backward per target row
    tmp = (d_weights * weights).sum(axis=-1, keepdims=True)
    d_scores = weights * (d_weights - tmp)
    d_q2 = np.einsum("bts,bsc->btc", d_scores, source) * scale
    d_source += np.einsum("bts,btc->bsc", d_scores, q2) * scale
    d_q1 = _conv_step_bwd(p.proj2, c2, d_q2, grads, prefix + "2_")
    d_tin = _conv_step_bwd(p.proj1, c1, d_q1, grads, prefix + "1_")
    return d_source, d_tin  # timing signal is constant


def attention_module(
    params: AttentionParams, source: np.ndarray, target: np.ndarray
) -> np.ndarray:
    """Single-instance attention of the target onto the source positions."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.ndim != 2 or target.ndim != 2:
        raise ValueError("source and target must be (length, channels)")
    out, _ = _attention_fwd(params, source[None], target[None])
    return out[0]


def attention_weights(
    params: AttentionParams, source: np.ndarray, target: np.ndarray
) -> np.ndarray:
    """The softmax weight matrix (target positions x source positions)."""
    _, cache = _attention_fwd(params, source[None], target[None])
    return cache[4][0]


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------


def _init_conv_step(rng: np.random.Generator, kernel: int, c_in: int, c_out: int) -> ConvStepParams:
    return ConvStepParams(
        dw=rng.uniform(-1, 1, size=(kernel, c_in)) / math.sqrt(kernel),
        pw=rng.uniform(-1, 1, size=(c_in, c_out)) / math.sqrt(c_in),
        pb=np.zeros(c_out),
        ln_gain=np.ones(c_out),
        ln_bias=np.zeros(c_out),
    )


class SliceNetModel:
    """Encoder, I/O mixer and decoder over request feature sequences."""

    def __init__(
        self,
        n_features: int = DEFAULT_N_FEATURES,
        d_model: int = DEFAULT_D_MODEL,
        rng: Optional[np.random.Generator] = None,
    ):
        if rng is None:
            rng = np.random.default_rng(0)
        self.n_features = n_features
        self.d_model = d_model
        c, c2 = d_model, 2 * d_model
        self.lift_w = rng.uniform(-1, 1, size=(n_features, c))
        self.lift_b = np.zeros((n_features, c))
        self.encoder = ConvModuleParams(
            [_init_conv_step(rng, k, c, c) for k in ENC_KERNELS]
        )
        self.decoder = ConvModuleParams(
            [_init_conv_step(rng, k, c2, c2) for k in ENC_KERNELS]
        )
        self.attention = AttentionParams(
            proj1=_init_conv_step(rng, ATTN_KERNEL, c2, c2),
            proj2=_init_conv_step(rng, ATTN_KERNEL, c2, c),
        )
        self.head_w = rng.uniform(-1, 1, size=(3 * c, N_CLASSES)) / math.sqrt(3 * c)
        self.head_b = np.zeros(N_CLASSES)

    # -- parameter bookkeeping ------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """All trainable tensors in fixed declaration order."""
        params: dict[str, np.ndarray] = {
            "lift_w": self.lift_w,
            "lift_b": self.lift_b,
        }
        for prefix, module in (("enc", self.encoder), ("dec", self.decoder)):
            for i, step in enumerate(module.steps, start=1):
                params[f"{prefix}{i}_dw"] = step.dw
                params[f"{prefix}{i}_pw"] = step.pw
                params[f"{prefix}{i}_pb"] = step.pb
                params[f"{prefix}{i}_ln_gain"] = step.ln_gain
                params[f"{prefix}{i}_ln_bias"] = step.ln_bias
        for i, step in enumerate((self.attention.proj1, self.attention.proj2), start=1):
            params[f"attn{i}_dw"] = step.dw
            params[f"attn{i}_pw"] = step.pw
            params[f"attn{i}_pb"] = step.pb
            params[f"attn{i}_ln_gain"] = step.ln_gain
            params[f"attn{i}_ln_bias"] = step.ln_bias
        params["head_w"] = self.head_w
        params["head_b"] = self.head_b
        return params

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        current = self.parameters()[name]
        if current.shape != value.shape:
            raise ValueError(f"shape mismatch for {name}")
        current[...] = value

    # -- forward / backward ----------------------------------------------------

    def _lift(self, features: np.ndarray) -> np.ndarray:
        # (batch, n_features) scalars -> (batch, length, channels)
        return features[:, :, None] * self.lift_w[None] + self.lift_b[None]

    def _forward(
        self,
        features: np.ndarray,
        history: Optional[np.ndarray],
        training: bool,
        rng: Optional[np.random.Generator],
    ):
        x = self._lift(features)
        enc, enc_cache = _conv_module_fwd(self.encoder, x, training, rng)
        if history is None:
            hist = np.zeros_like(enc)
        else:
            hist = np.broadcast_to(history, enc.shape).astype(np.float64)
        mix = np.concatenate([enc, hist], axis=-1)
        dec, dec_cache = _conv_module_fwd(self.decoder, mix, training, rng)
        attn, attn_cache = _attention_fwd(self.attention, enc, dec)
        combined = np.concatenate([dec, attn], axis=-1)
        pooled = combined.mean(axis=1)
        logits = pooled @ self.head_w + self.head_b
        cache = (features, x, enc_cache, dec_cache, attn_cache, dec, attn, pooled)
        return logits, cache

    def _backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        features, x, enc_cache, dec_cache, attn_cache, dec, attn, pooled = cache
        grads = {name: np.zeros_like(p) for name, p in self.parameters().items()}
        grads["head_w"] += pooled.T @ dlogits
        grads["head_b"] += dlogits.sum(axis=0)
        d_pooled = dlogits @ self.head_w.T
        b, length = dec.shape[0], dec.shape[1]
        d_combined = np.repeat(d_pooled[:, None, :], length, axis=1) / length
        c2 = dec.shape[-1]
        d_dec = d_combined[:, :, :c2].copy()
        d_attn = d_combined[:, :, c2:]
        d_enc_src, d_dec_t = _attention_bwd(self.attention, attn_cache, d_attn, grads, "attn")
        d_dec += d_dec_t
        d_mix = _conv_module_bwd(self.decoder, dec_cache, d_dec, grads, "dec")
        c = self.d_model
        d_enc = d_mix[:, :, :c] + d_enc_src  # history half is constant
        d_x = _conv_module_bwd(self.encoder, enc_cache, d_enc, grads, "enc")
        grads["lift_w"] += np.einsum("blc,bl->lc", d_x, features)
        grads["lift_b"] += d_x.sum(axis=0)
        return grads

    def logits(self, features: np.ndarray) -> np.ndarray:
        """Inference-mode logits for a batch of feature rows."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        out, _ = self._forward(features, None, training=False, rng=None)
        return out

    def loss_and_grads(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ):
        """Mean cross-entropy over a batch plus gradients for every tensor."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        labels = np.asarray(labels, dtype=np.int64).ravel()
        logits, cache = self._forward(features, None, training, rng)
        probs = softmax(logits, axis=-1)
        n = len(labels)
        eps = 1e-300
        loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())
        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        grads = self._backward(cache, dlogits)
        return loss, grads


def encode_mix_decode(
    model: SliceNetModel,
    input_features: Sequence[float],
    output_history: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Full forward pass of one feature row; returns the slice logit row."""
    features = np.asarray(input_features, dtype=np.float64)[None, :]
    logits, _ = model._forward(features, output_history, training=False, rng=None)
    return logits[0]


def select_slice(model: SliceNetModel, features: SliceFeatureVector) -> SliceDecision:
    """Deterministic inference: softmax over slices, first-max tie break."""
    logits = encode_mix_decode(model, features.to_array())
    if not np.all(np.isfinite(logits)):
        raise DivergedModelError(f"non-finite logits {logits!r}")
    probs = softmax(logits)
    cls = int(np.argmax(probs))
    service = _INDEX_CLASS[cls]
    return SliceDecision(
        indicator=service.indicator,
        slice_id=service.slice_id,
        confidence=float(probs[cls]),
    )


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class LossCurve:
    epochs: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)

    def rows(self) -> list[str]:
        header = "epoch,loss,accuracy"
        body = [
            f"{e},{l:.9g},{a:.9g}"
            for e, l, a in zip(self.epochs, self.losses, self.accuracies)
        ]
        return [header] + body


class AdamOptimizer:
    """Adaptive-moment gradient descent."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def accuracy(model: SliceNetModel, features: np.ndarray, labels: np.ndarray) -> float:
    preds = np.argmax(model.logits(features), axis=-1)
    return float(np.mean(preds == np.asarray(labels).ravel()))


def train(
    model: SliceNetModel,
    features: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    learning_rate: float,
    rng: np.random.Generator,
    batch_size: int = 32,
) -> LossCurve:
    """Cross-entropy training with Adam; loss and accuracy logged per epoch."""
    lo, hi = LEARNING_RATE_RANGE
    if not (lo <= learning_rate <= hi):
        raise ValueError(f"learning_rate must be within [{lo}, {hi}]")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if len(features) == 0:
        raise ValueError("dataset must be nonempty")

    params = model.parameters()
    opt = AdamOptimizer(params, learning_rate)
    curve = LossCurve()
    n = len(features)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = model.loss_and_grads(
                features[idx], labels[idx], training=True, rng=rng
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch offset {start}"
                )
            opt.step(params, grads)
            epoch_loss += loss * len(idx)
        curve.epochs.append(epoch)
        curve.losses.append(epoch_loss / n)
        curve.accuracies.append(accuracy(model, features, labels))
    return curve


def make_separable_dataset(
    n: int, rng: np.random.Generator, n_features: int = DEFAULT_N_FEATURES
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic labeled rows whose class is encoded in the leading one-hot,
    with mild noise on every component."""
    labels = rng.integers(0, N_CLASSES, size=n)
    features = rng.uniform(0.0, 1.0, size=(n, n_features))
    onehot = np.zeros((n, N_CLASSES))
    onehot[np.arange(n), labels] = 1.0
    noise = rng.uniform(-0.1, 0.1, size=(n, N_CLASSES))
    features[:, :N_CLASSES] = np.clip(onehot + noise, 0.0, 1.0)
    return features, labels

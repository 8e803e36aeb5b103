"""Dense sigmoid autoencoder with hand-written backpropagation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerParams:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if W.ndim != 2 or b.shape != (W.shape[1],):
            raise ValueError(f"layer shapes W{W.shape}, b{b.shape} do not match")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class AutoencoderParams:
    encoder: tuple
    decoder: tuple

    def __post_init__(self):
        enc, dec = tuple(self.encoder), tuple(self.decoder)
        if len(enc) < 1 or len(enc) != len(dec):
            raise ValueError("encoder and decoder need the same number (>= 1) of layers")
        for chain in (enc, dec):
            for a, b in zip(chain, chain[1:]):
                if a.out_dim != b.in_dim:
                    raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if dec[0].in_dim != enc[-1].out_dim or dec[-1].out_dim != enc[0].in_dim:
            raise ValueError("decoder must map code dim k back to input dim d")
        object.__setattr__(self, "encoder", enc)
        object.__setattr__(self, "decoder", dec)

    @property
    def layers(self) -> tuple:
        return self.encoder + self.decoder

    @property
    def l(self) -> int:
        return len(self.encoder)

    @property
    def d(self) -> int:
        return self.encoder[0].in_dim

    @property
    def k(self) -> int:
        return self.encoder[-1].out_dim

    @property
    def dims(self) -> list[int]:
        return [self.d] + [lay.out_dim for lay in self.encoder]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.concatenate([lay.W.ravel(), lay.b]) for lay in self.layers])

    def from_vector(self, v: np.ndarray) -> "AutoencoderParams":
        out, pos = [], 0
        for lay in self.layers:
            nw = lay.W.size
            W = v[pos:pos + nw].reshape(lay.W.shape)
            pos += nw
            b = v[pos:pos + lay.out_dim]
            pos += lay.out_dim
            out.append(LayerParams(W.copy(), b.copy()))
        if pos != v.size:
            raise ValueError(f"vector has {v.size} entries, expected {pos}")
        return AutoencoderParams(tuple(out[: self.l]), tuple(out[self.l:]))

    def scale(self, c: float) -> "AutoencoderParams":
        return self.from_vector(c * self.to_vector())

    def to_dict(self) -> dict:
        def layer(lay):
            return {"W": lay.W.tolist(), "b": lay.b.tolist()}

        return {
            "format_version": FORMAT_VERSION,
            "dims": self.dims,
            "encoder": [layer(x) for x in self.encoder],
            "decoder": [layer(x) for x in self.decoder],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AutoencoderParams":
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported autoencoder format version {obj.get('format_version')!r}")

        def layer(x):
            return LayerParams(np.asarray(x["W"], dtype=float).reshape(len(x["W"]), -1), np.asarray(x["b"], dtype=float))

        return cls(tuple(layer(x) for x in obj["encoder"]), tuple(layer(x) for x in obj["decoder"]))


def default_hidden_dims(d: int, k: int, l: int) -> list[int]:
    """Geometric interpolation between ``d`` and ``k``, floored."""
    return [int(np.floor(d ** (1 - j / l) * k ** (j / l) + 1e-9)) for j in range(1, l)]


def init_params(d: int, k: int, l: int = 2, hidden_dims=None, seed: int = 0) -> AutoencoderParams:
    """Glorot-uniform weights, zero biases."""
    if k >= d:
        raise ValueError(f"code dim k={k} must be smaller than input dim d={d}")
    if l < 1:
        raise ValueError("l must be >= 1")
    if hidden_dims is None:
        hidden_dims = default_hidden_dims(d, k, l)
    hidden_dims = [int(h) for h in hidden_dims]
    if len(hidden_dims) != l - 1:
        raise ValueError(f"hidden_dims must have l-1={l - 1} entries, got {len(hidden_dims)}")
    if any(h < 1 for h in hidden_dims):
        raise ValueError("hidden dims must be >= 1")
    chain = [d, *hidden_dims, k]
    if any(b > a for a, b in zip(chain, chain[1:])):
        warnings.warn(f"encoder chain {chain} is not non-increasing")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return LayerParams(rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out))

    enc = tuple(glorot(a, b) for a, b in zip(chain, chain[1:]))
    rev = chain[::-1]
    dec = tuple(glorot(a, b) for a, b in zip(rev, rev[1:]))
    return AutoencoderParams(enc, dec)


def _check_cols(X: np.ndarray, m: int, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m:
        raise ValueError(f"{what} expects {m} columns, got shape {X.shape}")
    return X


def _forward(layers, X) -> list[np.ndarray]:
    acts = [X]
    for lay in layers:
        acts.append(expit(acts[-1] @ lay.W + lay.b))
    return acts


def encode(params: AutoencoderParams, X: np.ndarray) -> np.ndarray:
    X = _check_cols(X, params.d, "encode")
    return _forward(params.encoder, X)[-1]


def decode(params: AutoencoderParams, code: np.ndarray) -> np.ndarray:
    code = _check_cols(code, params.k, "decode")
    return _forward(params.decoder, code)[-1]


def forward(params: AutoencoderParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(code, reconstruction)``."""
    code = encode(params, X)
    return code, decode(params, code)


def reconstruction_loss(X: np.ndarray, Xhat: np.ndarray) -> float:
    X, Xhat = np.asarray(X, dtype=float), np.asarray(Xhat, dtype=float)
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Xhat.shape}")
    R = X - Xhat
    return float(np.sum(R * R)) / (2 * X.shape[0])


def reconstruction_grad(X: np.ndarray, Xhat: np.ndarray) -> np.ndarray:
    """Gradient of the reconstruction loss with respect to ``Xhat``."""
    return (np.asarray(Xhat, dtype=float) - X) / X.shape[0]


def regularization_loss(params: AutoencoderParams) -> float:
    v = params.to_vector()
    return float(v @ v)


def regularization_grad(params: AutoencoderParams) -> AutoencoderParams:
    return params.scale(2.0)


def _backward(layers, acts, grad_out, grads):
    """Backpropagate ``grad_out`` (w.r.t. the last activation) through sigmoid layers.

    Fills ``grads`` (aligned with ``layers``) and returns the gradient with
    respect to the chain's input.
    """
    g = grad_out
    for idx in range(len(layers) - 1, -1, -1):
        s = acts[idx + 1]
        delta = g * s * (1.0 - s)
        grads[idx] = LayerParams(acts[idx].T @ delta, delta.sum(axis=0))
        g = delta @ layers[idx].W.T
    return g


def network_gradients(params: AutoencoderParams, X: np.ndarray, grad_at_output: np.ndarray,
                      grad_at_code: np.ndarray | None = None) -> AutoencoderParams:
    """Parameter gradients given upstream gradients at the reconstruction and the code.

    ``grad_at_output`` is dL/dXhat (n x d); ``grad_at_code`` collects the
    code-level terms dL/dcode (n x k) and is added to the gradient arriving
    from the decoder.
    """
    X = _check_cols(X, params.d, "network_gradients")
    n = X.shape[0]
    grad_at_output = np.asarray(grad_at_output, dtype=float)
    if grad_at_output.shape != (n, params.d):
        raise ValueError(f"grad_at_output must be {(n, params.d)}, got {grad_at_output.shape}")
    if grad_at_code is None:
        grad_at_code = np.zeros((n, params.k))
    grad_at_code = np.asarray(grad_at_code, dtype=float)
    if grad_at_code.shape != (n, params.k):
        raise ValueError(f"grad_at_code must be {(n, params.k)}, got {grad_at_code.shape}")

    enc_acts = _forward(params.encoder, X)
    dec_acts = _forward(params.decoder, enc_acts[-1])
    dec_grads = [None] * params.l
    enc_grads = [None] * params.l
    g_code = _backward(params.decoder, dec_acts, grad_at_output, dec_grads)
    _backward(params.encoder, enc_acts, g_code + grad_at_code, enc_grads)
    return AutoencoderParams(tuple(enc_grads), tuple(dec_grads))


class MinMaxTarget:
    """Affine map of standardized inputs onto [0, 1] used as the reconstruction target."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        self.lo = np.asarray(lo, dtype=float)
        span = np.asarray(hi, dtype=float) - self.lo
        self.span = np.where(span > 0, span, 1.0)

    @classmethod
    def fit(cls, X: np.ndarray) -> "MinMaxTarget":
        X = np.asarray(X, dtype=float)
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.lo) / self.span

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "span": self.span.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "MinMaxTarget":
        lo = np.asarray(obj["lo"], dtype=float)
        return cls(lo, lo + np.asarray(obj["span"], dtype=float))

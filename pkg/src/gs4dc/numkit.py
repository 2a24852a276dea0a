"""Dense numeric kernel: MLPs, single-head cross attention, analytic gradients.

Everything here is a pure function of float64 numpy arrays. The batch
convention is rows-as-samples: an input of shape (n, width) runs through
layers as ``y = x @ W.T + b`` with ``W`` shaped (out, in). Accumulation
order is fixed by numpy, so identical inputs give bit-identical outputs.

The cross-attention update is the recurrent hidden-state step used by the
voxel coder: tokens are spatial positions of a row feature, the attended
value stream carries the previous decoded row, and the previous row is
added back as a residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ShapeError

ACTIVATIONS = ("identity", "relu", "softplus", "exp")


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths plus one activation tag per layer.

    ``widths`` has length n_layers + 1; ``activations`` has length n_layers.
    """

    widths: tuple
    activations: tuple

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ShapeError("MlpSpec needs at least one layer")
        if len(self.activations) != len(self.widths) - 1:
            raise ShapeError("one activation tag per layer required")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {act!r}")

    @property
    def n_layers(self):
        return len(self.widths) - 1


def init_mlp_weights(spec: MlpSpec, rng: np.random.Generator, scale: float = 1.0):
    """Xavier-style seeded init; returns [(W, b), ...] float64."""
    weights = []
    for w_in, w_out in zip(spec.widths[:-1], spec.widths[1:]):
        std = scale / np.sqrt(w_in)
        weights.append((rng.normal(0.0, std, size=(w_out, w_in)), np.zeros(w_out)))
    return weights


def _act(tag, z):
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "softplus":
        return np.logaddexp(0.0, z)
    if tag == "exp":
        return np.exp(z)
    raise ShapeError(f"unknown activation {tag!r}")


def _act_grad(tag, z):
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0.0).astype(z.dtype)
    if tag == "softplus":
        return expit(z)
    if tag == "exp":
        return np.exp(z)
    raise ShapeError(f"unknown activation {tag!r}")


def mlp_forward(spec: MlpSpec, weights, x: np.ndarray) -> np.ndarray:
    """Affine + activation chain; x is (n, widths[0])."""
    y, _ = mlp_forward_trace(spec, weights, x)
    return y


def mlp_forward_trace(spec: MlpSpec, weights, x: np.ndarray):
    """Forward pass that records per-layer inputs and pre-activations."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.widths[0]:
        raise ShapeError(
            f"input width {x.shape} does not match spec width {spec.widths[0]}"
        )
    if len(weights) != spec.n_layers:
        raise ShapeError("weight count does not match spec layer count")
    inputs, preacts = [], []
    h = x
    for (W, b), w_in, w_out, act in zip(
        weights, spec.widths[:-1], spec.widths[1:], spec.activations
    ):
        if W.shape != (w_out, w_in) or b.shape != (w_out,):
            raise ShapeError(f"layer weight shape {W.shape} != ({w_out}, {w_in})")
        inputs.append(h)
        z = h @ W.T + b
        preacts.append(z)
        h = _act(act, z)
    return h, (inputs, preacts)


def mlp_backward(spec: MlpSpec, weights, trace, dy: np.ndarray):
    """Analytic gradients for every weight and the input.

    Returns ([(dW, db), ...], dx) matching the layout of ``weights``.
    """
    inputs, preacts = trace
    grads = [None] * spec.n_layers
    d = np.asarray(dy, dtype=np.float64)
    for layer in reversed(range(spec.n_layers)):
        W, _ = weights[layer]
        dz = d * _act_grad(spec.activations[layer], preacts[layer])
        grads[layer] = (dz.T @ inputs[layer], dz.sum(axis=0))
        d = dz @ W
    return grads, d


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; rows sum to 1 within float tolerance."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_attention_update(h_prev, f_prev, Wq, Wk, Wv) -> np.ndarray:
    """One recurrent hidden-state step.

    q comes from the previous hidden state, k and v from the previous row;
    the previous row is added back as a residual:

        h = softmax(q k^T / sqrt(d)) v + f_prev
    """
    h, _ = cross_attention_trace(h_prev, f_prev, Wq, Wk, Wv)
    return h


def cross_attention_trace(h_prev, f_prev, Wq, Wk, Wv):
    h_prev = np.asarray(h_prev, dtype=np.float64)
    f_prev = np.asarray(f_prev, dtype=np.float64)
    if h_prev.ndim != 2 or h_prev.shape != f_prev.shape:
        raise ShapeError("h_prev and f_prev must be matching (L, d) matrices")
    d = h_prev.shape[1]
    if d == 0:
        raise ShapeError("token width d must be positive")
    for name, W in (("Wq", Wq), ("Wk", Wk), ("Wv", Wv)):
        if W.shape != (d, d):
            raise ShapeError(f"{name} must be ({d}, {d}), got {W.shape}")
    q = h_prev @ Wq.T
    k = f_prev @ Wk.T
    v = f_prev @ Wv.T
    scores = (q @ k.T) / np.sqrt(d)
    attn = softmax(scores, axis=1)
    h = attn @ v + f_prev
    return h, (h_prev, f_prev, Wq, Wk, Wv, q, k, v, attn)


def cross_attention_backward(trace, dh):
    """Gradients of the attention step w.r.t. all inputs and projections."""
    h_prev, f_prev, Wq, Wk, Wv, q, k, v, attn = trace
    d = h_prev.shape[1]
    dh = np.asarray(dh, dtype=np.float64)
    dattn = dh @ v.T
    dv = attn.T @ dh
    # softmax rows: dS = A * (dA - sum(dA * A, rows))
    dscores = attn * (dattn - (dattn * attn).sum(axis=1, keepdims=True))
    dq = dscores @ k / np.sqrt(d)
    dk = dscores.T @ q / np.sqrt(d)
    dWq = dq.T @ h_prev
    dWk = dk.T @ f_prev
    dWv = dv.T @ f_prev
    dh_prev = dq @ Wq
    df_prev = dk @ Wk + dv @ Wv + dh
    return {
        "Wq": dWq,
        "Wk": dWk,
        "Wv": dWv,
        "h_prev": dh_prev,
        "f_prev": df_prev,
    }


def backward(graph: str, inputs: dict, upstream):
    """Dispatch analytic gradients for a supported computation graph.

    graph tags: "mlp", "attention", "rate-loss". ``inputs`` carries the
    recorded forward inputs for that graph; ``upstream`` is the incoming
    gradient (a scalar for "rate-loss", which is already a scalar loss).
    """
    if graph == "mlp":
        y, trace = mlp_forward_trace(inputs["spec"], inputs["weights"], inputs["x"])
        grads, dx = mlp_backward(inputs["spec"], inputs["weights"], trace, upstream)
        return {"weights": grads, "x": dx, "y": y}
    if graph == "attention":
        h, trace = cross_attention_trace(
            inputs["h_prev"], inputs["f_prev"], inputs["Wq"], inputs["Wk"], inputs["Wv"]
        )
        out = cross_attention_backward(trace, upstream)
        out["h"] = h
        return out
    if graph == "rate-loss":
        from .entropy import noisy_rate_bits_grad

        bits, dmu, dsigma, dx = noisy_rate_bits_grad(
            inputs["x"], inputs["mu"], inputs["sigma"]
        )
        scale = float(upstream)
        return {
            "bits": bits,
            "mu": scale * dmu,
            "sigma": scale * dsigma,
            "x": scale * dx,
        }
    raise ShapeError(f"unsupported graph tag {graph!r}")


def finite_difference_grad(f, x: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central differences (f(x+e) - f(x-e)) / 2e per coordinate. Test oracle."""
    x = np.array(x, dtype=np.float64, copy=True)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xflat = x.reshape(-1)
    for i in range(xflat.size):
        orig = xflat[i]
        xflat[i] = orig + eps
        fp = f(x)
        xflat[i] = orig - eps
        fm = f(x)
        xflat[i] = orig
        flat[i] = (fp - fm) / (2.0 * eps)
    return grad

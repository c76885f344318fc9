"""From-scratch sequence layers with exact reverse-mode gradients, plus Adam.

A network is an ordered stack of layers mapping a (T, dim) sequence to
per-frame logits (or a single logits row after a last-step selection).
Forward passes cache what the matching backward pass needs; gradients are
exact, so they survive central-difference checks at 1e-4 relative error.
Everything runs in double precision.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))[None, :]


class GruLayer:
    """Gated recurrent unit over a full sequence.

    Update rule per step (row-vector convention, h0 = 0):
        z = sigmoid(x W_z + h_prev U_z + b_z)
        r = sigmoid(x W_r + h_prev U_r + b_r)
        hh = tanh(x W_h + (r * h_prev) U_h + b_h)
        h = z * h_prev + (1 - z) * hh
    so a saturated update gate copies the previous state forward.
    """

    param_names = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        if input_size < 1 or hidden_size < 1:
            raise ValueError(f"invalid GRU sizes: {input_size} -> {hidden_size}")
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.params = {
            "W_z": _glorot(rng, input_size, hidden_size),
            "W_r": _glorot(rng, input_size, hidden_size),
            "W_h": _glorot(rng, input_size, hidden_size),
            "U_z": _orthogonal(rng, hidden_size),
            "U_r": _orthogonal(rng, hidden_size),
            "U_h": _orthogonal(rng, hidden_size),
            "b_z": np.zeros(hidden_size),
            "b_r": np.zeros(hidden_size),
            "b_h": np.zeros(hidden_size),
        }
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def spec(self) -> dict:
        return {"kind": "gru", "input_size": self.input_size, "hidden_size": self.hidden_size}

    def step(self, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
        """Single recurrence step; used directly only in tests and streaming."""
        p = self.params
        if x_t.shape[-1] != self.input_size or h_prev.shape[-1] != self.hidden_size:
            raise ValueError("shape mismatch in GRU step")
        z = sigmoid(x_t @ p["W_z"] + h_prev @ p["U_z"] + p["b_z"])
        r = sigmoid(x_t @ p["W_r"] + h_prev @ p["U_r"] + p["b_r"])
        hh = np.tanh(x_t @ p["W_h"] + (r * h_prev) @ p["U_h"] + p["b_h"])
        return z * h_prev + (1.0 - z) * hh

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ValueError(
                f"shape mismatch: GRU expects (T, {self.input_size}), got {x.shape}"
            )
        p = self.params
        t_len, n = x.shape[0], self.hidden_size
        # Input projections for the whole sequence in three matmuls; the time
        # loop then only touches the recurrent terms.
        a_zr_in = x @ np.hstack((p["W_z"], p["W_r"])) + np.concatenate((p["b_z"], p["b_r"]))
        a_h_in = x @ p["W_h"] + p["b_h"]
        u_zr = np.hstack((p["U_z"], p["U_r"]))
        u_h = p["U_h"]

        h_prev_all = np.empty((t_len, n))
        z_all = np.empty((t_len, n))
        r_all = np.empty((t_len, n))
        hh_all = np.empty((t_len, n))
        h_all = np.empty((t_len, n))
        h = np.zeros(n)
        for t in range(t_len):
            h_prev_all[t] = h
            a_zr = a_zr_in[t] + h @ u_zr
            z = sigmoid(a_zr[:n])
            r = sigmoid(a_zr[n:])
            hh = np.tanh(a_h_in[t] + (r * h) @ u_h)
            h = z * h + (1.0 - z) * hh
            z_all[t] = z
            r_all[t] = r
            hh_all[t] = hh
            h_all[t] = h
        self._cache = (x, h_prev_all, z_all, r_all, hh_all)
        return h_all

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("no forward state: call forward before backward")
        x, h_prev_all, z_all, r_all, hh_all = self._cache
        p = self.params
        t_len, n = d_out.shape[0], self.hidden_size
        u_zr_t = np.hstack((p["U_z"], p["U_r"])).T
        u_h_t = p["U_h"].T

        d_a_zr = np.empty((t_len, 2 * n))
        d_a_h = np.empty((t_len, n))
        carry = np.zeros(n)
        for t in range(t_len - 1, -1, -1):
            g = d_out[t] + carry
            h_prev = h_prev_all[t]
            z, r, hh = z_all[t], r_all[t], hh_all[t]
            dz = g * (h_prev - hh)
            da_h = g * (1.0 - z) * (1.0 - hh * hh)
            q = da_h @ u_h_t  # gradient w.r.t. (r * h_prev)
            da_r = q * h_prev * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            d_a_h[t] = da_h
            d_a_zr[t, :n] = da_z
            d_a_zr[t, n:] = da_r
            carry = g * z + q * r + np.concatenate((da_z, da_r)) @ u_zr_t

        da_z_all, da_r_all = d_a_zr[:, :n], d_a_zr[:, n:]
        self.grads = {
            "W_z": x.T @ da_z_all,
            "W_r": x.T @ da_r_all,
            "W_h": x.T @ d_a_h,
            "U_z": h_prev_all.T @ da_z_all,
            "U_r": h_prev_all.T @ da_r_all,
            "U_h": (r_all * h_prev_all).T @ d_a_h,
            "b_z": da_z_all.sum(axis=0),
            "b_r": da_r_all.sum(axis=0),
            "b_h": d_a_h.sum(axis=0),
        }
        return da_z_all @ p["W_z"].T + da_r_all @ p["W_r"].T + d_a_h @ p["W_h"].T


class Dropout:
    """Inverted dropout on the frame sequence; identity at inference.

    A fresh mask is drawn per time step and unit, kept fixed for the matching
    backward pass.
    """

    param_names = ()

    def __init__(self, rate: float):
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"invalid rate: dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._mask = None

    def spec(self) -> dict:
        return {"kind": "dropout", "rate": self.rate}

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return d_out
        return d_out * self._mask


class Dense:
    """Affine map with optional pointwise activation, shared across frames.

    Applied row-wise to a (T, in) sequence this is the usual time-distributed
    dense layer.
    """

    param_names = ("W", "b")
    activations = ("identity", "sigmoid", "relu")

    def __init__(self, input_size: int, output_size: int, activation: str, rng: np.random.Generator):
        if activation not in self.activations:
            raise ValueError(f"unknown activation {activation!r}")
        self.input_size = input_size
        self.output_size = output_size
        self.activation = activation
        self.params = {
            "W": _glorot(rng, input_size, output_size),
            "b": np.zeros(output_size),
        }
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def spec(self) -> dict:
        return {
            "kind": "dense",
            "input_size": self.input_size,
            "output_size": self.output_size,
            "activation": self.activation,
        }

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ValueError(
                f"shape mismatch: dense expects (T, {self.input_size}), got {x.shape}"
            )
        a = x @ self.params["W"] + self.params["b"]
        if self.activation == "sigmoid":
            y = sigmoid(a)
        elif self.activation == "relu":
            y = np.maximum(a, 0.0)
        else:
            y = a
        self._cache = (x, a, y)
        return y

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("no forward state: call forward before backward")
        x, a, y = self._cache
        if self.activation == "sigmoid":
            da = d_out * y * (1.0 - y)
        elif self.activation == "relu":
            da = d_out * (a > 0.0)
        else:
            da = d_out
        self.grads = {"W": x.T @ da, "b": da.sum(axis=0)}
        return da @ self.params["W"].T


class LastStep:
    """Select the final frame: (T, d) -> (1, d)."""

    param_names = ()

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._t = None

    def spec(self) -> dict:
        return {"kind": "last_step"}

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        self._t = x.shape[0]
        return x[-1:].copy()

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        if self._t is None:
            raise RuntimeError("no forward state: call forward before backward")
        dx = np.zeros((self._t, d_out.shape[1]))
        dx[-1] = d_out[0]
        return dx


class Network:
    """Ordered layer stack producing logits; softmax lives in the loss."""

    def __init__(self, layers: list):
        self.layers = layers
        self._ready = False

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        self._ready = True
        return out

    def backward(self, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        if not self._ready:
            raise RuntimeError("no forward state: call forward before backward")
        d = d_logits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return self.gradients()

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": layer.params[name]
            for i, layer in enumerate(self.layers)
            for name in layer.param_names
        }

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": layer.grads[name]
            for i, layer in enumerate(self.layers)
            for name in layer.param_names
        }

    def output_dim(self) -> int:
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.output_size
        raise ValueError("network has no dense layer")

    def input_dim(self) -> int:
        for layer in self.layers:
            if isinstance(layer, (GruLayer, Dense)):
                return layer.input_size
        raise ValueError("network has no sized layer")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise max-subtracted softmax."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("non-finite input to softmax")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_one_hot(targets: np.ndarray) -> None:
    if not (np.all((targets == 0.0) | (targets == 1.0)) and np.all(targets.sum(axis=-1) == 1.0)):
        raise ValueError("targets must be one-hot rows")


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood over frames, with a 1e-12 floor inside the log."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {targets.shape}")
    _check_one_hot(targets)
    picked = (probs * targets).sum(axis=-1)
    return float(-np.mean(np.log(np.maximum(picked, 1e-12))))


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and exact gradient w.r.t. logits for a softmax + cross-entropy head."""
    probs = softmax(logits)
    loss = cross_entropy(probs, targets)
    d_logits = (probs - np.asarray(targets, dtype=np.float64)) / logits.shape[0]
    return loss, d_logits


def loss_and_gradients(
    net: Network,
    x: np.ndarray,
    targets: np.ndarray,
    train: bool = False,
    rng=None,
) -> tuple[float, dict[str, np.ndarray]]:
    """One forward/backward pass: mean cross-entropy and gradients for every parameter."""
    logits = net.forward(x, train=train, rng=rng)
    loss, d_logits = softmax_cross_entropy(logits, targets)
    grads = net.backward(d_logits)
    return loss, grads


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def accumulate(total: dict[str, np.ndarray], grads: dict[str, np.ndarray], scale: float = 1.0) -> None:
    for k, g in grads.items():
        total[k] += scale * g


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = global_norm(grads)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


class Adam:
    """Adam with bias correction; state is keyed like the parameter dict."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """In-place parameter update; one call is one optimization step."""
        if set(params) != set(grads) or set(params) != set(self.m):
            raise ValueError("shape mismatch: params/grads/state keys differ")
        self.step += 1
        b1c = 1.0 - self.beta1**self.step
        b2c = 1.0 - self.beta2**self.step
        for k, g in grads.items():
            if g.shape != params[k].shape:
                raise ValueError(f"shape mismatch for {k}: {g.shape} vs {params[k].shape}")
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.epsilon)

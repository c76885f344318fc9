"""Shared test oracles: finite-difference gradients and a Jacobi eigensolver."""

import numpy as np

from eegvad import nn


def zero_params(layer_or_net):
    layers = layer_or_net.layers if isinstance(layer_or_net, nn.Network) else [layer_or_net]
    for layer in layers:
        for k in layer.params:
            layer.params[k][:] = 0.0


def numeric_gradient(net, x, targets, key, index, step=1e-5, rng_seed=None):
    """Central-difference oracle for one parameter coordinate."""
    params = net.parameters()
    flat = params[key].reshape(-1)
    original = flat[index]

    def loss_at(value):
        flat[index] = value
        rng = None if rng_seed is None else np.random.default_rng(rng_seed)
        logits = net.forward(x, train=rng_seed is not None, rng=rng)
        loss, _ = nn.softmax_cross_entropy(logits, targets)
        return loss

    up = loss_at(original + step)
    down = loss_at(original - step)
    flat[index] = original
    return (up - down) / (2.0 * step)


def check_gradients(net, x, targets, n_coords=20, seed=0, step=1e-5, rng_seed=None):
    """Worst relative error of analytic vs central-difference gradients."""
    rng_fd = None if rng_seed is None else np.random.default_rng(rng_seed)
    _, grads = nn.loss_and_gradients(net, x, targets, train=rng_seed is not None, rng=rng_fd)
    picker = np.random.default_rng(seed)
    keys = sorted(net.parameters().keys())
    worst = 0.0
    for _ in range(n_coords):
        key = keys[picker.integers(len(keys))]
        index = int(picker.integers(net.parameters()[key].size))
        analytic = grads[key].reshape(-1)[index]
        numeric = numeric_gradient(net, x, targets, key, index, step=step, rng_seed=rng_seed)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def jacobi_eigenvalues(a, sweeps=100, tol=1e-14):
    """From-scratch cyclic Jacobi eigensolver for symmetric matrices."""
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))[::-1]


def centered_gram(x, params):
    gamma = params.resolved_gamma(x.shape[1])
    k = (gamma * (x @ x.T) + params.coef0) ** params.degree
    n = k.shape[0]
    one = np.full((n, n), 1.0 / n)
    return k - one @ k - k @ one + one @ k @ one

"""Training loop: unrolled forward, timestep-averaged cross-entropy, and
backpropagation through both layer depth and time.

The backward pass composes, per layer and timestep, the spatial path
(loss -> spike -> membrane) with the temporal path (loss -> next-step
membrane -> this-step membrane). The temporal factor dU^{t+1}/dU^t is tau on
entries that did not fire at t and 0 on entries that were reset, i.e. the
reset truncates gradient flow through time. Weight gradients accumulate over
all timesteps; binarized layers route them through the straight-through
window, and learnable amplitudes receive the per-channel sum of
grad_u * (sign(W) . O).

Optimization is plain SGD with classical momentum and a cosine learning-rate
schedule decaying to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers as L
from .errors import DimensionError, StateError, TrainingError
from .network import Network
from .neuron import LifState, fire, fire_backward, membrane_update, threshold_for
from .numerics import as_f64, conv2d_input_grad, conv2d_kernel_grad


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    lr0: float = 0.1
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.lr0 < 0:
            raise ValueError("lr0 must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class ForwardCache:
    """Per-timestep, per-layer activations retained for the backward pass."""

    net_ref: Network
    timesteps: int
    surrogate: bool
    inputs: list          # [t][l] layer input exactly as fed (flattened for dense)
    u_pre: list           # [t][l] membrane after integration, before fire/reset
    raw_current: list     # [t][l] pre-affine synaptic current (None without affine)


def _feed_shape(layer: L.BinaryLayer, x: np.ndarray) -> np.ndarray:
    if layer.kind == L.DENSE and x.ndim > 2:
        return x.reshape(x.shape[0], -1)
    return x


def _per_channel_col(vec: np.ndarray, like: np.ndarray) -> np.ndarray:
    shape = [1] * like.ndim
    shape[1] = vec.shape[0]
    return vec.reshape(shape)


def forward_pass(net: Network, batch: np.ndarray, timesteps: int | None = None,
                 surrogate: bool = False):
    """Run the network for T steps under direct encoding.

    The static input is presented identically at every timestep. Every layer
    except the last integrates and fires; the classifier head is a non-firing
    integrator whose per-timestep output is its membrane potential, so the
    averaged logits stay real-valued and trainable (a spike gate on the
    logits would zero their gradient whenever a class unit went silent).
    Returns the list of per-timestep outputs and the activation cache
    consumed by backward_stbp.
    """
    batch = as_f64(batch)
    if batch.ndim < 2:
        raise DimensionError(f"batch must have a leading sample axis, got {batch.shape}")
    if tuple(batch.shape[1:]) != tuple(net.input_shape):
        raise DimensionError(
            f"batch samples of shape {batch.shape[1:]} do not match "
            f"network input {net.input_shape}"
        )
    T = net.timesteps if timesteps is None else timesteps
    states: list[LifState | None] = [None] * len(net.layers)
    cache = ForwardCache(net, T, surrogate, [], [], [])
    outputs = []
    for _ in range(T):
        x = batch
        cache.inputs.append([])
        cache.u_pre.append([])
        cache.raw_current.append([])
        for l, (layer, nrn) in enumerate(zip(net.layers, net.neurons)):
            x = _feed_shape(layer, x)
            cache.inputs[-1].append(x)
            current = L.forward(layer, x, surrogate)
            if layer.has_affine:
                cache.raw_current[-1].append(current)
                current = _per_channel_col(layer.affine_gamma, current) * current \
                    + _per_channel_col(layer.affine_beta, current)
            else:
                cache.raw_current[-1].append(None)
            state = states[l] if states[l] is not None else LifState.zeros(current.shape)
            state = membrane_update(state, current, nrn)
            cache.u_pre[-1].append(state.u)
            if l == len(net.layers) - 1:
                x, states[l] = state.u, state
            else:
                x, states[l] = fire(state, nrn)
        outputs.append(x)
    return outputs, cache


def aggregate_output(outputs: list[np.ndarray]) -> np.ndarray:
    """Elementwise mean over the per-timestep outputs (1/T sum_t O^t)."""
    if not outputs:
        raise ValueError("aggregate_output requires at least one timestep output")
    return np.mean(np.stack(outputs, axis=0), axis=0)


def _log_softmax(o: np.ndarray) -> np.ndarray:
    z = o - o.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def ce_loss(o_out: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy of softmax(o_out) against integer labels."""
    o_out = as_f64(o_out)
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= o_out.shape[1]):
        raise IndexError(f"labels out of range for {o_out.shape[1]} classes")
    logp = _log_softmax(o_out)
    return float(-logp[np.arange(len(labels)), labels].mean())


def ce_loss_grad(o_out: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(o_out): (softmax - onehot) / batch."""
    o_out = as_f64(o_out)
    p = np.exp(_log_softmax(o_out))
    p[np.arange(len(labels)), labels] -= 1.0
    return p / len(labels)


@dataclass
class Gradients:
    w: list[np.ndarray]
    alpha: list[np.ndarray | None]
    gamma: list[np.ndarray | None]
    beta: list[np.ndarray | None]


def backward_stbp(net: Network, cache: ForwardCache, loss_grad: np.ndarray) -> Gradients:
    """Backpropagate through time and depth from d(loss)/d(aggregated output).

    Implements both summands of the chain rule per layer and step: the
    spatial term dL/dO * dO/dU and the temporal term
    dL/dU^{t+1} * dU^{t+1}/dU^t with the reset-truncated factor
    tau * (1 - fired).
    """
    if cache.net_ref is not net:
        raise StateError("cache was produced by a different network")
    if len(cache.u_pre) != cache.timesteps:
        raise StateError("cache is incomplete or stale")
    T = cache.timesteps
    nl = len(net.layers)
    surrogate = cache.surrogate

    grads = Gradients(
        w=[np.zeros_like(layer.w_latent) for layer in net.layers],
        alpha=[np.zeros_like(l.alpha) if (l.binarize and l.learn_alpha) else None
               for l in net.layers],
        gamma=[np.zeros_like(l.affine_gamma) if l.has_affine else None for l in net.layers],
        beta=[np.zeros_like(l.affine_beta) if l.has_affine else None for l in net.layers],
    )
    # dL/dO^t for the output layer: the mean over timesteps spreads loss_grad/T.
    g_out_t = as_f64(loss_grad) / T
    g_u_next: list[np.ndarray | None] = [None] * nl

    for t in reversed(range(T)):
        g_spike = None  # gradient flowing into layer l's output at this timestep
        for l in reversed(range(nl)):
            layer, nrn = net.layers[l], net.neurons[l]
            u_pre = cache.u_pre[t][l]

            if l == nl - 1:
                # Non-firing head: output is the membrane itself, and with no
                # reset the temporal factor is plain tau.
                g_u = g_out_t.copy()
                if g_u_next[l] is not None:
                    g_u += g_u_next[l] * nrn.tau
            else:
                fired = u_pre >= threshold_for(u_pre, nrn)
                g_u = g_spike * fire_backward(u_pre, nrn)
                if g_u_next[l] is not None:
                    g_u = g_u + g_u_next[l] * (nrn.tau * (~fired))
            g_u_next[l] = g_u

            if layer.has_affine:
                raw = cache.raw_current[t][l]
                grads.gamma[l] += _sum_per_channel(g_u * raw)
                grads.beta[l] += _sum_per_channel(g_u)
                g_c = _per_channel_col(layer.affine_gamma, g_u) * g_u
            else:
                g_c = g_u

            x_in = cache.inputs[t][l]
            if layer.kind == L.DENSE:
                g_w_eff = np.einsum("bi,bj->ij", g_c, x_in)
            else:
                g_w_eff = conv2d_kernel_grad(x_in, g_c, layer.stride, layer.padding,
                                             layer.w_latent.shape[2])
            if layer.binarize:
                g_w_b = L._alpha_over_outputs(layer) * g_w_eff
                grads.w[l] += L.ste_weight_grad(g_w_b, layer.w_latent)
                if layer.learn_alpha:
                    grads.alpha[l] += L.alpha_grad(layer, g_c, x_in, surrogate)
            else:
                grads.w[l] += g_w_eff

            if l > 0:
                w = L.effective_weights(layer, surrogate) if layer.binarize else layer.w_latent
                if layer.kind == L.DENSE:
                    g_x = np.einsum("bi,ij->bj", g_c, w)
                else:
                    g_x = conv2d_input_grad(g_c, w, layer.stride, layer.padding,
                                            x_in.shape[2:])
                g_spike = g_x.reshape(cache.u_pre[t][l - 1].shape)
    return grads


def _sum_per_channel(arr: np.ndarray) -> np.ndarray:
    axes = (0,) + tuple(range(2, arr.ndim))
    return arr.sum(axis=axes)


def sgd_step(params, grads, velocity, lr: float, momentum: float) -> None:
    """Classical momentum update, in place: v <- m*v + g; p <- p - lr*v."""
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v += g
        p -= lr * v


class SgdOptimizer:
    """Momentum SGD over all network parameters, re-imposing the layer
    invariants (latent clip window, positive amplitude floor) after each step."""

    def __init__(self, net: Network, momentum: float = 0.9):
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p) for name, p in net.parameters()}

    def step(self, net: Network, grads: Gradients, lr: float) -> None:
        params, gs, vs = [], [], []
        for i, layer in enumerate(net.layers):
            params.append(layer.w_latent)
            gs.append(grads.w[i])
            vs.append(self.velocity[f"layer{i}.w"])
            if grads.alpha[i] is not None:
                params.append(layer.alpha)
                gs.append(grads.alpha[i])
                vs.append(self.velocity[f"layer{i}.alpha"])
            if layer.has_affine:
                params.append(layer.affine_gamma)
                gs.append(grads.gamma[i])
                vs.append(self.velocity[f"layer{i}.gamma"])
                params.append(layer.affine_beta)
                gs.append(grads.beta[i])
                vs.append(self.velocity[f"layer{i}.beta"])
        sgd_step(params, gs, vs, lr, self.momentum)
        for layer in net.layers:
            if layer.binarize:
                L.clip_latent(layer)
                np.maximum(layer.alpha, L.ALPHA_FLOOR, out=layer.alpha)


def cosine_lr(epoch: int, total_epochs: int, lr0: float) -> float:
    """lr0 * 0.5 * (1 + cos(pi * epoch / total)): lr0 at 0, zero at the end."""
    if not 0 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs}]")
    if total_epochs == 0:
        return lr0
    return lr0 * 0.5 * (1.0 + np.cos(np.pi * epoch / total_epochs))


def train(net: Network, data, cfg: TrainConfig):
    """Run the full training loop; returns (net, per-epoch metric records).

    Deterministic given cfg.seed: the only randomness is the epoch shuffle.
    Raises TrainingError (with the epoch index) if the loss goes non-finite.
    """
    x, y = data
    x = as_f64(x)
    y = np.asarray(y)
    if len(x) == 0:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    opt = SgdOptimizer(net, cfg.momentum)
    metrics = []
    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg.epochs, cfg.lr0)
        order = rng.permutation(len(x))
        losses = []
        correct = 0
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            outputs, cache = forward_pass(net, xb)
            o = aggregate_output(outputs)
            loss = ce_loss(o, yb)
            if not np.isfinite(loss):
                raise TrainingError("loss diverged to non-finite value", epoch=epoch)
            losses.append(loss)
            correct += int((o.argmax(axis=1) == yb).sum())
            grads = backward_stbp(net, cache, ce_loss_grad(o, yb))
            opt.step(net, grads, lr)
        metrics.append({
            "epoch": epoch,
            "lr": float(lr),
            "loss": float(np.mean(losses)),
            "acc": correct / len(x),
        })
    return net, metrics


def evaluate_accuracy(net: Network, x, y, batch_size: int = 256) -> float:
    """Top-1 accuracy of the aggregated output over a dataset (dense path)."""
    x = as_f64(x)
    y = np.asarray(y)
    correct = 0
    for start in range(0, len(x), batch_size):
        outputs, _ = forward_pass(net, x[start : start + batch_size])
        o = aggregate_output(outputs)
        correct += int((o.argmax(axis=1) == y[start : start + batch_size]).sum())
    return correct / len(x)


@dataclass
class GradCheckReport:
    max_rel_w: float
    max_rel_alpha: float
    checked: int
    skipped: int
    tolerance: float
    max_rel_affine: float = 0.0

    @property
    def max_rel(self) -> float:
        return max(self.max_rel_w, self.max_rel_alpha, self.max_rel_affine)

    @property
    def passed(self) -> bool:
        return self.max_rel <= self.tolerance


def gradient_check(net: Network, batch, labels, eps: float = 1e-6,
                   boundary_margin: float = 1e-4, tolerance: float = 1e-3,
                   corrupt=None) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Both sides run the surrogate forward in which sign(w) is replaced by
    clip(w, -1, 1); its exact derivative is the straight-through window, so
    the analytic backward is unbiased for it. Latent entries within
    `boundary_margin` of the binarization boundaries (0 and +/-1) are
    skipped. `corrupt` is a test hook mutating the analytic gradients before
    comparison.
    """
    batch = as_f64(batch)
    labels = np.asarray(labels)

    def loss_now() -> float:
        outputs, _ = forward_pass(net, batch, surrogate=True)
        return ce_loss(aggregate_output(outputs), labels)

    outputs, cache = forward_pass(net, batch, surrogate=True)
    o = aggregate_output(outputs)
    grads = backward_stbp(net, cache, ce_loss_grad(o, labels))
    if corrupt is not None:
        corrupt(grads)

    def rel_err(analytic: float, numeric: float) -> float:
        return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)

    def fd_sweep(param: np.ndarray, analytic: np.ndarray, skip=None):
        worst = 0.0
        n_checked = n_skipped = 0
        flat, aflat = param.reshape(-1), analytic.reshape(-1)
        for i in range(flat.size):
            if skip is not None and skip(flat[i]):
                n_skipped += 1
                continue
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_now()
            flat[i] = orig - eps
            lm = loss_now()
            flat[i] = orig
            fd = (lp - lm) / (2 * eps)
            worst = max(worst, rel_err(aflat[i], fd))
            n_checked += 1
        return worst, n_checked, n_skipped

    max_w = max_a = max_f = 0.0
    checked = skipped = 0
    for l, layer in enumerate(net.layers):
        near_boundary = None
        if layer.binarize:
            near_boundary = lambda v: min(abs(v), abs(abs(v) - 1.0)) <= boundary_margin
        worst, n, s = fd_sweep(layer.w_latent, grads.w[l], near_boundary)
        max_w, checked, skipped = max(max_w, worst), checked + n, skipped + s
        if grads.alpha[l] is not None:
            worst, n, _ = fd_sweep(layer.alpha, grads.alpha[l])
            max_a, checked = max(max_a, worst), checked + n
        if layer.has_affine:
            for param, analytic in ((layer.affine_gamma, grads.gamma[l]),
                                    (layer.affine_beta, grads.beta[l])):
                worst, n, _ = fd_sweep(param, analytic)
                max_f, checked = max(max_f, worst), checked + n
    return GradCheckReport(max_w, max_a, checked, skipped, tolerance, max_f)

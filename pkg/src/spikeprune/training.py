"""Backpropagation-through-time training for the LIF decoder.

The forward spike step is non-differentiable, so the backward pass swaps in
a triangular surrogate derivative centered on the threshold; the reset
assignment is detached so no gradient flows through it. A test-only
"differentiable" mode replaces the forward step with a sigmoid of
(u - threshold)/width and differentiates the *whole* graph (reset included),
which makes analytic gradients directly checkable against finite
differences.

The loss is mean squared error between the output membranes and the velocity
labels at every labeled timestep. Gradients are accumulated over truncated
windows of `batch_length` timesteps and applied once per window; membrane
state carries across windows within a contiguous segment and resets between
segments. The prune mask is reapplied after every parameter update, so
pruned weights are exactly zero at every observation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LifParams, Network, NetworkConfig

__all__ = [
    "TrainConfig",
    "TrainingDivergedError",
    "surrogate_spike_grad",
    "mse_loss",
    "compute_gradients",
    "SgdOptimizer",
    "AdamOptimizer",
    "make_optimizer",
    "train_epoch",
    "validate",
    "pretrain",
]

SPIKING = "spiking"
DIFFERENTIABLE = "differentiable"


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    max_epochs: int = 100
    batch_length: int = 100
    surrogate_width: float = 1.0
    optimizer: str = "adam"
    seed: int = 0
    spike_mode: str = SPIKING  # DIFFERENTIABLE is test-only

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_length < 1:
            raise ValueError("batch_length must be >= 1")
        if not self.surrogate_width > 0:
            raise ValueError("surrogate_width must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.spike_mode not in (SPIKING, DIFFERENTIABLE):
            raise ValueError(f"unknown spike_mode {self.spike_mode!r}")


def surrogate_spike_grad(u, params: LifParams, width: float):
    """Triangular stand-in for d(spike)/d(membrane), peak 1/width at threshold."""
    u = np.asarray(u, dtype=np.float64)
    return np.maximum(0.0, 1.0 - np.abs(u - params.threshold) / width) / width


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mse_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction")
    return float(np.mean((pred - truth) ** 2))


class _WindowCache:
    """Forward-pass tensors needed by the backward pass, one truncated window."""

    __slots__ = ("activations", "membranes", "spikes", "pred")

    def __init__(self, activations, membranes, spikes, pred):
        self.activations = activations  # a[0]=input window, a[l]=layer l output
        self.membranes = membranes      # pre-reset u per layer, [Tw x B x H]
        self.spikes = spikes            # spike output per hidden layer
        self.pred = pred


def _forward_window(net: Network, x: np.ndarray, state: list[np.ndarray],
                    mode: str, width: float):
    """Run one window, returning (cache, final_state). State is not mutated.

    x is [Tw x B x input_dim]: B independent equal-length sequences advance in
    lockstep (a deterministic, order-fixed batching of the same arithmetic).
    """
    Tw, B = x.shape[0], x.shape[1]
    n_layers = net.config.n_layers
    eff_t = [l.effective().T.copy() for l in net.layers]
    decays = [p.decay for p in net.config.lif_params]
    acts = [x] + [np.zeros((Tw, B, net.config.layer_dims[i + 1]))
                  for i in range(n_layers)]
    membranes = [np.zeros((Tw, B, net.config.layer_dims[i + 1]))
                 for i in range(n_layers)]
    spikes = [np.zeros((Tw, B, net.config.layer_dims[i + 1]))
              for i in range(n_layers - 1)]
    v = [m.copy() for m in state]
    for t in range(Tw):
        a = x[t]
        for i in range(n_layers):
            p = net.config.lif_params[i]
            u = v[i] * decays[i] + a @ eff_t[i]
            membranes[i][t] = u
            if net.config.spiking_flags[i]:
                if mode == SPIKING:
                    s = (u >= p.threshold).astype(np.float64)
                else:
                    s = _sigmoid((u - p.threshold) / width)
                spikes[i][t] = s
                v[i] = u * (1.0 - s) + p.reset_value * s
                a = s
            else:
                v[i] = u
                a = u
            acts[i + 1][t] = a
    pred = acts[n_layers]
    return _WindowCache(acts, membranes, spikes, pred), v


def _backward_window(net: Network, cache: _WindowCache, truth: np.ndarray,
                     mode: str, width: float):
    """Gradients of the window MSE w.r.t. every weight matrix."""
    Tw, B = truth.shape[0], truth.shape[1]
    n_layers = net.config.n_layers
    eff = [l.effective().copy() for l in net.layers]
    decays = [p.decay for p in net.config.lif_params]
    deltas = [np.zeros_like(cache.membranes[i]) for i in range(n_layers)]
    carry = [np.zeros((B, net.config.layer_dims[i + 1])) for i in range(n_layers)]
    dpred = (cache.pred - truth) * (2.0 / cache.pred.size)

    out = n_layers - 1
    for t in range(Tw - 1, -1, -1):
        # readout layer: membrane feeds the loss directly and the next step
        du = dpred[t] + decays[out] * carry[out]
        deltas[out][t] = du
        carry[out] = du
        da = du @ eff[out]
        for i in range(n_layers - 2, -1, -1):
            p = net.config.lif_params[i]
            u = cache.membranes[i][t]
            s = cache.spikes[i][t]
            if mode == SPIKING:
                g = surrogate_spike_grad(u, p, width)
            else:
                g = s * (1.0 - s) / width
            dv = decays[i] * carry[i]
            du = da * g + dv * (1.0 - s)
            if mode == DIFFERENTIABLE:
                # reset path differentiated too: v = u(1-s) + r*s
                du = du + dv * (p.reset_value - u) * g
            deltas[i][t] = du
            carry[i] = du
            if i > 0:
                da = du @ eff[i]
    grads = []
    for i in range(n_layers):
        d = deltas[i].reshape(Tw * B, -1)
        a = cache.activations[i].reshape(Tw * B, -1)
        g = d.T @ a
        g *= net.layers[i].mask
        grads.append(g)
    return grads


def compute_gradients(net: Network, spikes: np.ndarray, velocity: np.ndarray,
                      mode: str = SPIKING, width: float = 1.0,
                      state: list[np.ndarray] | None = None):
    """Loss and weight gradients for one contiguous window.

    Returns (loss, grads, final_state); state defaults to zeros.
    """
    x = np.asarray(spikes, dtype=np.float64)
    y = np.asarray(velocity, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"expected [T x {net.input_dim}] input, got {x.shape}")
    if y.shape != (x.shape[0], 2):
        raise ValueError(f"expected [T x 2] labels, got {y.shape}")
    if state is None:
        state = [np.zeros(net.config.layer_dims[i + 1])
                 for i in range(net.config.n_layers)]
    batched_state = [np.asarray(s, dtype=np.float64).reshape(1, -1) for s in state]
    cache, final_state = _forward_window(net, x[:, None, :], batched_state,
                                         mode, width)
    loss = mse_loss(cache.pred[:, 0, :], y)
    grads = _backward_window(net, cache, y[:, None, :], mode, width)
    return loss, grads, [s[0] for s in final_state]


class SgdOptimizer:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, net: Network, grads) -> None:
        for layer, g in zip(net.layers, grads):
            layer.weights -= self.lr * g

    def reset(self) -> None:
        pass


class AdamOptimizer:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.reset()

    def reset(self) -> None:
        self._m = None
        self._v = None
        self._t = 0

    def step(self, net: Network, grads) -> None:
        if self._m is None:
            self._m = [np.zeros_like(g) for g in grads]
            self._v = [np.zeros_like(g) for g in grads]
        self._t += 1
        b1t = 1.0 - self.beta1 ** self._t
        b2t = 1.0 - self.beta2 ** self._t
        for layer, g, m, v in zip(net.layers, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            layer.weights -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SgdOptimizer(cfg.learning_rate)
    return AdamOptimizer(cfg.learning_rate)


def _length_groups(segments):
    """Equal-length segments batch together; order is first-occurrence stable."""
    groups: dict[int, list] = {}
    for seg in segments:
        if seg.timesteps > 0:
            groups.setdefault(seg.timesteps, []).append(seg)
    return groups


def _batch_group(group):
    x = np.stack([s.spikes for s in group], axis=1).astype(np.float64)
    y = np.stack([s.velocity for s in group], axis=1)
    return x, y  # (T, B, channels), (T, B, 2)


def train_epoch(net: Network, segments, cfg: TrainConfig, optimizer) -> float:
    """One pass over the training segments; returns the epoch training loss.

    Equal-length segments advance in lockstep and share each window's update;
    the loss is the MSE of the forward predictions made during the pass
    (before the window's update), pooled over all labeled timesteps.
    """
    groups = _length_groups(segments)
    if not groups:
        raise ValueError("empty training dataset")
    total_sq = 0.0
    total_n = 0
    for length, group in groups.items():
        x, y = _batch_group(group)
        state = [np.zeros((len(group), net.config.layer_dims[i + 1]))
                 for i in range(net.config.n_layers)]
        for lo in range(0, length, cfg.batch_length):
            hi = min(lo + cfg.batch_length, length)
            cache, state = _forward_window(net, x[lo:hi], state,
                                           cfg.spike_mode, cfg.surrogate_width)
            grads = _backward_window(net, cache, y[lo:hi],
                                     cfg.spike_mode, cfg.surrogate_width)
            total_sq += float(np.sum((cache.pred - y[lo:hi]) ** 2))
            total_n += cache.pred.size
            optimizer.step(net, grads)
            net.apply_masks()
    return total_sq / total_n


def validate(net: Network, segments) -> float:
    """Forward-only MSE over the given segments; no state is mutated."""
    groups = _length_groups(segments)
    if not groups:
        raise ValueError("empty validation dataset")
    total_sq = 0.0
    total_n = 0
    for length, group in groups.items():
        x, y = _batch_group(group)
        state = [np.zeros((len(group), net.config.layer_dims[i + 1]))
                 for i in range(net.config.n_layers)]
        cache, _ = _forward_window(net, x, state, SPIKING, 1.0)
        total_sq += float(np.sum((cache.pred - y) ** 2))
        total_n += cache.pred.size
    return total_sq / total_n


def pretrain(config: NetworkConfig, split: dict, cfg: TrainConfig,
             log=None, init_scale: float = 1.0):
    """Train a fresh dense network; returns (net, target_loss).

    target_loss is the final validation loss, frozen as the reference the
    pruning controller must hold. Raises TrainingDivergedError if the loss
    goes non-finite.
    """
    net = Network.from_config(config, init_scale=init_scale)
    optimizer = make_optimizer(cfg)
    val_loss = validate(net, split["val"])
    for epoch in range(cfg.max_epochs):
        train_loss = train_epoch(net, split["train"], cfg, optimizer)
        val_loss = validate(net, split["val"])
        if log is not None:
            log(epoch, train_loss, val_loss)
        if not np.isfinite(train_loss) or not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch}: train={train_loss}, val={val_loss}"
            )
    return net, val_loss

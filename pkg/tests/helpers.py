"""Shared test oracles and simulated trainers.

Everything here is deliberately independent of the library's fast paths:
the forward reference is a plain-Python scalar loop, gradient checks use
central finite differences over the public loss, and operation counts come
from a brute-force quadruple loop.
"""

import math

import numpy as np
import pytest

from spikeprune.network import Network, NetworkConfig
from spikeprune.pruning import prunable_zero_fraction
from spikeprune.training import DIFFERENTIABLE, compute_gradients


def indy_net(seed=0):
    return Network.from_config(NetworkConfig.snn3(96, seed=seed))


def small_net(seed=0):
    return Network.from_config(NetworkConfig.snn3(12, hidden=(10, 10, 10), seed=seed))


def scalar_reference_forward(net, spikes):
    """Independent plain-Python re-derivation of the network dynamics."""
    dims = net.config.layer_dims
    n_layers = net.config.n_layers
    v = [[0.0] * dims[i + 1] for i in range(n_layers)]
    preds = []
    for t in range(len(spikes)):
        a = [float(x) for x in spikes[t]]
        for i in range(n_layers):
            p = net.config.lif_params[i]
            w = net.layers[i].weights
            m = net.layers[i].mask
            decay = math.exp(-p.dt / p.tau)
            nxt = []
            for post in range(dims[i + 1]):
                cur = 0.0
                for pre in range(dims[i]):
                    cur += w[post, pre] * m[post, pre] * a[pre]
                nxt.append(v[i][post] * decay + cur)
            if net.config.spiking_flags[i]:
                out = [1.0 if u >= p.threshold else 0.0 for u in nxt]
                v[i] = [p.reset_value if s else u for u, s in zip(nxt, out)]
                a = out
            else:
                v[i] = nxt
                a = nxt
        preds.append(list(a))
    return np.array(preds).reshape(len(spikes), 2)


def finite_difference_grads(net, x, y, width=1.0, h=1e-6):
    """Central-difference oracle over the differentiable-mode loss."""
    grads = []
    for layer in net.layers:
        g = np.zeros_like(layer.weights)
        it = np.nditer(layer.weights, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = layer.weights[idx]
            layer.weights[idx] = orig + h
            lp, _, _ = compute_gradients(net, x, y, mode=DIFFERENTIABLE, width=width)
            layer.weights[idx] = orig - h
            lm, _, _ = compute_gradients(net, x, y, mode=DIFFERENTIABLE, width=width)
            layer.weights[idx] = orig
            g[idx] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4, floor=1e-9):
    for a, n in zip(analytic, numeric):
        diff = np.abs(a - n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        bad = (diff > floor) & (diff / denom > rel)
        assert not bad.any(), f"max rel err {(diff / denom).max():.2e}"


def brute_force_ops(record, net):
    """Quadruple loop over (timestep, layer, post, pre); the ops oracle."""
    total = 0
    for t in range(record.timesteps):
        for li, layer in enumerate(net.layers):
            eff = layer.effective()
            pre_acts = record.layer_inputs(li)[t]
            for post in range(eff.shape[0]):
                for pre in range(eff.shape[1]):
                    if pre_acts[pre] != 0 and eff[post, pre] != 0.0:
                        total += 1
    return total


class FakeTrainer:
    """Scripted stand-in for the training engine.

    `val_fn(call_index)` produces each validation loss; the first call
    establishes the frozen target. Captures the controller's working network
    so tests can inspect live masks.
    """

    def __init__(self, val_fn, target=1.0):
        self.val_fn = val_fn
        self.target = target
        self.calls = 0
        self.resets = 0
        self.net = None

    def train_epoch(self, net):
        self.net = net
        return 0.5 * self.target

    def validate(self, net):
        self.net = net
        if self.calls == 0:
            self.calls += 1
            return self.target
        v = self.val_fn(self.calls)
        self.calls += 1
        return v

    def reset_optimizer(self):
        self.resets += 1


def always_fail(target=1.0):
    return FakeTrainer(lambda i: 10.0 * target, target=target)


def always_succeed(target=1.0):
    return FakeTrainer(lambda i: target, target=target)


class RandomTrainer(FakeTrainer):
    """Passes or fails each epoch's tolerance check at a seeded rate."""

    def __init__(self, rng, fail_prob, target=1.0, tolerance=0.1):
        self.rng = rng
        self.fail_prob = fail_prob
        good = target
        bad = target * (1.0 + tolerance) * 3
        super().__init__(
            lambda i: bad if self.rng.random() < self.fail_prob else good,
            target=target,
        )


class TraceInvariantChecker:
    """Validates the controller's state-machine invariants over one run."""

    def __init__(self, hp, target=1.0):
        self.hp = hp
        self.target = target
        self.observations = []  # (event, mask snapshot, recomputed fraction)
        self.trainer = None

    def sink(self, event):
        net = self.trainer.net
        masks = tuple(l.mask.copy() for l in net.layers)
        self.observations.append((event, masks, prunable_zero_fraction(net)))

    def check(self, total_prunable):
        hp = self.hp
        gate = self.target * (1.0 + hp.tolerance)
        prev_masks = None
        checkpoint_masks = None
        epochs_since_prune = 0
        prune_seen = 0
        last_rate = hp.p_start
        for k, (ev, masks, fraction) in enumerate(self.observations):
            if ev.pruned is not None:
                assert abs(ev.pruned - fraction) <= 1.0 / total_prunable
            if ev.kind == "prune-applied":
                assert ev.rate <= last_rate  # rate never increases
                last_rate = ev.rate
                if prune_seen > 0:
                    prev_ev = self.observations[k - 1][0]
                    assert prev_ev.kind in ("epoch", "rollback")
                    if prev_ev.kind == "epoch":
                        assert prev_ev.val_loss <= gate * (1 + 1e-12)
                if prev_masks is not None:
                    for m_new, m_old in zip(masks, prev_masks):
                        assert not m_new[m_old == 0].any()  # zeros only grow
                checkpoint_masks = prev_masks
                prune_seen += 1
                epochs_since_prune = 0
            elif ev.kind == "epoch":
                epochs_since_prune += 1
                assert epochs_since_prune <= hp.patience + 1
                for m_new, m_old in zip(masks, prev_masks):
                    assert np.array_equal(m_new, m_old)
            elif ev.kind == "rollback":
                assert epochs_since_prune == hp.patience + 1
                assert ev.rate == pytest.approx(last_rate / 2)
                last_rate = ev.rate
                if checkpoint_masks is not None:
                    for m_new, m_ckpt in zip(masks, checkpoint_masks):
                        assert np.array_equal(m_new, m_ckpt)
            prev_masks = masks
        assert self.observations[-1][0].kind == "terminated"

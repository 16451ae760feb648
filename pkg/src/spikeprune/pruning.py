"""Adaptive magnitude pruning with tolerance gating, patience, and rollback.

The controller starts from a pretrained dense network whose validation loss
is frozen as the target. Each iteration checkpoints the network, removes the
lowest-magnitude unmasked weights at the current rate (per-layer or pooled
globally over the hidden layers), then fine-tunes until validation loss is
back within `tolerance` of the target. If that takes more than `patience`
epochs the checkpoint is restored and the rate is halved. The run ends when
the rate falls below the minimum or the cumulative pruned fraction reaches
its cap. Masks only ever gain zeros, except at a rollback where they revert
exactly to the checkpointed set.

Rates are percentage points of each layer's (or the pool's) *original*
weight count, so cumulative bookkeeping stays coherent as layers thin out.
After a rollback the cumulative fraction is recomputed from the restored
masks, i.e. the attempted rate is subtracted back out; the trace records the
drop. Prune steps are clamped so the cumulative fraction never exceeds the
cap. The readout layer is never pruned.

Two ablation modes: "tolerance-only" keeps the tolerance gate but terminates
(restoring the last good network) the first time patience is exhausted;
"fixed" prunes at the starting rate after every `patience`-epoch block,
unconditionally, until the cap.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .network import Network, WeightLayer
from .training import TrainConfig, TrainingDivergedError, make_optimizer, train_epoch, validate

__all__ = [
    "PruneHyperParams",
    "TraceEvent",
    "PruneTrace",
    "PruneStepInfo",
    "select_prune_targets",
    "prune_step",
    "prunable_zero_fraction",
    "checkpoint",
    "restore",
    "EngineTrainer",
    "adaptive_prune",
    "TRACE_COLUMNS",
]

FULL_ADAPTIVE = "full-adaptive"
TOLERANCE_ONLY = "tolerance-only"
FIXED = "fixed"

PER_LAYER = "per-layer"
GLOBAL = "global"

TRACE_COLUMNS = ("event_index", "event_type", "epoch", "train_loss", "val_loss",
                 "p_curr", "pruned")


@dataclass(frozen=True)
class PruneHyperParams:
    p_start: float = 10.0      # percentage points per prune step
    patience: int = 5          # fine-tune epochs granted per step
    tolerance: float = 0.1     # fractional slack on the target loss
    p_min: float = 0.1         # minimum rate, percentage points
    pruned_max: float = 0.95   # cap on cumulative pruned fraction
    scope: str = PER_LAYER
    mode: str = FULL_ADAPTIVE

    def __post_init__(self):
        if not (self.p_start >= self.p_min > 0):
            raise ValueError("need p_start >= p_min > 0")
        if not (0 < self.pruned_max < 1):
            raise ValueError("pruned_max must be in (0,1)")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.scope not in (PER_LAYER, GLOBAL):
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.mode not in (FULL_ADAPTIVE, TOLERANCE_ONLY, FIXED):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class TraceEvent:
    index: int
    kind: str                  # prune-applied | epoch | rollback | terminated
    epoch: int
    train_loss: float | None
    val_loss: float | None
    rate: float | None
    pruned: float | None
    reason: str = ""

    def csv_row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x))
        return [str(self.index), self.kind, str(self.epoch),
                fmt(self.train_loss), fmt(self.val_loss), fmt(self.rate),
                fmt(self.pruned)]


class PruneTrace:
    """Ordered event log of one controller run, streamable to a CSV sink."""

    def __init__(self, sink=None):
        self.events: list[TraceEvent] = []
        self._sink = sink

    def _emit(self, kind, epoch, train_loss=None, val_loss=None, rate=None,
              pruned=None, reason=""):
        ev = TraceEvent(len(self.events), kind, epoch, train_loss, val_loss,
                        rate, pruned, reason)
        self.events.append(ev)
        if self._sink is not None:
            self._sink(ev)
        return ev

    def prune_applied(self, epoch, rate, pruned):
        return self._emit("prune-applied", epoch, rate=rate, pruned=pruned)

    def epoch(self, epoch, train_loss, val_loss, rate, pruned):
        return self._emit("epoch", epoch, train_loss=train_loss,
                          val_loss=val_loss, rate=rate, pruned=pruned)

    def rollback(self, epoch, restored_pruned, new_rate):
        return self._emit("rollback", epoch, rate=new_rate, pruned=restored_pruned)

    def terminated(self, epoch, reason, rate, pruned):
        return self._emit("terminated", epoch, rate=rate, pruned=pruned,
                          reason=reason)

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def total_epochs(self) -> int:
        return len(self.of_kind("epoch"))


@dataclass
class PruneStepInfo:
    removed_per_layer: list[int] = field(default_factory=list)
    clamped: bool = False

    @property
    def total_removed(self) -> int:
        return sum(self.removed_per_layer)


def prunable_zero_fraction(net: Network) -> float:
    """Mask-zero fraction over the prunable layers (the bookkept `pruned`)."""
    layers = net.prunable_layers()
    total = sum(l.n_weights for l in layers)
    if total == 0:
        return 0.0
    return sum(l.n_masked for l in layers) / total


def select_prune_targets(layer: WeightLayer, count: int):
    """Indices of the `count` smallest-magnitude unmasked weights.

    Ties break by (row, col) lexicographic order. A count beyond the number
    of unmasked weights is clamped. Returns (rows, cols) index arrays.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    rows, cols = np.nonzero(layer.mask)
    count = min(count, rows.size)
    if count == 0:
        return rows[:0], cols[:0]
    magnitudes = np.abs(layer.weights[rows, cols])
    order = np.lexsort((cols, rows, magnitudes))[:count]
    return rows[order], cols[order]


def prune_step(net: Network, rate: float, scope: str = PER_LAYER,
               max_total_zeros: int | None = None) -> PruneStepInfo:
    """Mask out the lowest-magnitude weights at `rate`% of original counts.

    Per-layer scope removes round(rate% * layer size) in each prunable layer;
    global scope pools all prunable layers and removes round(rate% * pool
    size) overall. Masks are monotone. `max_total_zeros` caps the total
    mask-zero count across prunable layers (cumulative-cap clamping).
    """
    if scope not in (PER_LAYER, GLOBAL):
        raise ValueError(f"unknown scope {scope!r}")
    prunable = net.prunable_layers()
    info = PruneStepInfo(removed_per_layer=[0] * len(prunable))
    if not prunable:
        info.clamped = True
        return info
    budget = None
    if max_total_zeros is not None:
        budget = max_total_zeros - sum(l.n_masked for l in prunable)
        if budget <= 0:
            info.clamped = True
            return info

    if scope == PER_LAYER:
        for i, layer in enumerate(prunable):
            count = round(rate / 100.0 * layer.n_weights)
            available = layer.n_weights - layer.n_masked
            if count > available:
                count = available
                info.clamped = True
            if budget is not None:
                if count > budget:
                    count = budget
                    info.clamped = True
                budget -= count
            rows, cols = select_prune_targets(layer, count)
            layer.mask[rows, cols] = 0
            layer.apply_mask()
            info.removed_per_layer[i] = rows.size
        return info

    total = sum(l.n_weights for l in prunable)
    count = round(rate / 100.0 * total)
    available = sum(l.n_weights - l.n_masked for l in prunable)
    if count > available:
        count = available
        info.clamped = True
    if budget is not None and count > budget:
        count = budget
        info.clamped = True
    mags, layer_idx, rows, cols = [], [], [], []
    for i, layer in enumerate(prunable):
        r, c = np.nonzero(layer.mask)
        mags.append(np.abs(layer.weights[r, c]))
        layer_idx.append(np.full(r.size, i))
        rows.append(r)
        cols.append(c)
    mags = np.concatenate(mags)
    layer_idx = np.concatenate(layer_idx)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    order = np.lexsort((cols, rows, layer_idx, mags))[:count]
    for i, layer in enumerate(prunable):
        sel = order[layer_idx[order] == i]
        layer.mask[rows[sel], cols[sel]] = 0
        layer.apply_mask()
        info.removed_per_layer[i] = sel.size
    return info


def checkpoint(net: Network) -> dict:
    """Full in-memory snapshot (weights, masks, parameters)."""
    return net.snapshot()


def restore(net: Network, snap: dict) -> Network:
    """Bitwise restore of a snapshot into `net`."""
    net.restore(snap)
    return net


class EngineTrainer:
    """Bridges the controller to the training engine over one data split.

    Holds the optimizer so fine-tuning momentum persists across prune steps;
    a rollback resets it (weights and masks are restored, the optimizer
    restarts).
    """

    def __init__(self, split: dict, cfg: TrainConfig):
        self.split = split
        self.cfg = cfg
        self.optimizer = make_optimizer(cfg)

    def train_epoch(self, net: Network) -> float:
        return train_epoch(net, self.split["train"], self.cfg, self.optimizer)

    def validate(self, net: Network) -> float:
        return validate(net, self.split["val"])

    def reset_optimizer(self) -> None:
        self.optimizer.reset()


def adaptive_prune(dense_net: Network, datasets: dict | None,
                   hp: PruneHyperParams, tc: TrainConfig | None = None,
                   trainer=None, trace_sink=None):
    """Run the pruning controller; returns (pruned net, PruneTrace).

    The input network is not modified. `trainer` may be any object exposing
    train_epoch(net) -> loss, validate(net) -> loss and reset_optimizer();
    by default an EngineTrainer over `datasets` and `tc` is used.
    """
    if trainer is None:
        if datasets is None or tc is None:
            raise ValueError("need datasets and a TrainConfig (or an explicit trainer)")
        trainer = EngineTrainer(datasets, tc)
    net = Network(dense_net.config, [
        WeightLayer(l.weights.copy(), l.mask.copy(), l.prunable)
        for l in dense_net.layers
    ])
    trace = PruneTrace(trace_sink)
    if hp.mode == FIXED:
        return _run_fixed(net, trainer, hp, trace)
    return _run_adaptive(net, trainer, hp, trace)


def _zero_budget(pruned_max: float, total: int) -> int:
    # tiny epsilon so an exactly-representable cap (e.g. 0.95 * 9800) is not
    # floored away by float rounding
    return int(np.floor(pruned_max * total + 1e-6))


def _run_adaptive(net: Network, trainer, hp: PruneHyperParams, trace: PruneTrace):
    target_loss = trainer.validate(net)
    total_prunable = sum(l.n_weights for l in net.prunable_layers())
    max_zeros = _zero_budget(hp.pruned_max, total_prunable)
    rate = hp.p_start
    pruned = prunable_zero_fraction(net)
    epoch_count = 0
    reason = ""

    while rate >= hp.p_min and pruned < hp.pruned_max:
        snap = checkpoint(net)
        info = prune_step(net, rate, hp.scope, max_total_zeros=max_zeros)
        if info.total_removed == 0:
            restore(net, snap)
            reason = "nothing-left-to-prune"
            break
        pruned = prunable_zero_fraction(net)
        trace.prune_applied(epoch_count, rate, pruned)

        current = np.inf
        fine_tune_epochs = 0
        while current > target_loss * (1.0 + hp.tolerance):
            if fine_tune_epochs > hp.patience:
                if hp.mode == TOLERANCE_ONLY:
                    restore(net, snap)
                    pruned = prunable_zero_fraction(net)
                    trace.rollback(epoch_count, pruned, rate)
                    reason = "patience-exhausted"
                    break
                restore(net, snap)
                pruned = prunable_zero_fraction(net)
                rate = rate / 2.0
                trainer.reset_optimizer()
                trace.rollback(epoch_count, pruned, rate)
                break
            train_loss = trainer.train_epoch(net)
            current = trainer.validate(net)
            epoch_count += 1
            fine_tune_epochs += 1
            trace.epoch(epoch_count, train_loss, current, rate, pruned)
            if not np.isfinite(train_loss) or not np.isfinite(current):
                # diverged: treat exactly like an exhausted patience
                fine_tune_epochs = hp.patience + 1
                current = np.inf
        if reason:
            break

    if not reason:
        reason = "min-rate" if rate < hp.p_min else "pruned-max"
    trace.terminated(epoch_count, reason, rate, pruned)
    return net, trace


def _run_fixed(net: Network, trainer, hp: PruneHyperParams, trace: PruneTrace):
    """Ablation: prune p_start every `patience` epochs, no gate, no rollback."""
    total_prunable = sum(l.n_weights for l in net.prunable_layers())
    max_zeros = _zero_budget(hp.pruned_max, total_prunable)
    pruned = prunable_zero_fraction(net)
    epoch_count = 0
    while pruned < hp.pruned_max:
        info = prune_step(net, hp.p_start, hp.scope, max_total_zeros=max_zeros)
        if info.total_removed == 0:
            break
        pruned = prunable_zero_fraction(net)
        trace.prune_applied(epoch_count, hp.p_start, pruned)
        for _ in range(hp.patience):
            train_loss = trainer.train_epoch(net)
            val_loss = trainer.validate(net)
            epoch_count += 1
            trace.epoch(epoch_count, train_loss, val_loss, hp.p_start, pruned)
            if not np.isfinite(train_loss) or not np.isfinite(val_loss):
                raise TrainingDivergedError(
                    f"fixed-mode fine-tuning diverged at epoch {epoch_count}"
                )
    trace.terminated(epoch_count, "pruned-max", hp.p_start, pruned)
    return net, trace

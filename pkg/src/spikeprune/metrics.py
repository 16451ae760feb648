"""Decoding and sparsity metrics for one evaluated session.

Four metrics: coefficient of determination of the velocity prediction
(averaged over X and Y), connection sparsity (fraction of zero weights),
activation sparsity (fraction of zero activation values pooled over layers
and timesteps), and effective synaptic operations per timestep (ACs for the
spiking network, MACs for a dense-equivalent comparison).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .network import ActivationRecord, Network, network_forward

__all__ = [
    "DegenerateTruthError",
    "MetricsReport",
    "r_squared",
    "connection_sparsity",
    "activation_sparsity",
    "effective_ops",
    "merge_records",
    "evaluate_segments",
    "evaluate_network",
]


class DegenerateTruthError(ValueError):
    """Ground-truth velocity is constant in some component; R^2 is undefined."""


@dataclass
class MetricsReport:
    r2: float
    connection_sparsity: float
    connection_sparsity_prunable: float
    activation_sparsity: float
    effective_ops: float
    ops_kind: str

    def as_dict(self) -> dict:
        return asdict(self)


def r_squared(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean of the per-component coefficients of determination.

    For each velocity component: 1 - sum((y - yhat)^2) / sum((y - ybar)^2).
    Raises DegenerateTruthError if any truth component is constant.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    if pred.ndim != 2 or pred.shape[0] < 2:
        raise ValueError("need a [T x k] series with T >= 2")
    ss_tot = np.sum((truth - truth.mean(axis=0)) ** 2, axis=0)
    if np.any(ss_tot == 0):
        raise DegenerateTruthError("a truth component is constant; R^2 denominator is 0")
    ss_res = np.sum((truth - pred) ** 2, axis=0)
    return float(np.mean(1.0 - ss_res / ss_tot))


def connection_sparsity(net: Network, prunable_only: bool = False) -> float:
    """Fraction of zero-valued effective weights.

    Default counts every layer including the readout; prunable_only restricts
    to the layers the pruning controller may touch.
    """
    layers = net.prunable_layers() if prunable_only else net.layers
    total = sum(l.n_weights for l in layers)
    zeros = sum(int(np.count_nonzero(l.effective() == 0.0)) for l in layers)
    return zeros / total if total else 0.0


def activation_sparsity(record: ActivationRecord, include_input: bool = True,
                        per_layer_average: bool = False) -> float:
    """Fraction of zero activation values across layers and timesteps.

    Pools all values globally by default; per_layer_average instead averages
    each layer's own zero fraction. Input spikes count as activations (they
    drive first-layer synaptic events), as do output membrane values.
    """
    if record.timesteps == 0:
        raise ValueError("empty activation record")
    fractions = []
    zeros = 0
    total = 0
    for _, acts in record.all_activations(include_input=include_input):
        z = int(np.count_nonzero(acts == 0))
        n = acts.size
        zeros += z
        total += n
        fractions.append(z / n)
    if per_layer_average:
        return float(np.mean(fractions))
    return zeros / total


def effective_ops(record: ActivationRecord, net: Network, kind: str = "AC"):
    """Average synaptic operations actually triggered per timestep.

    AC mode counts one accumulate per (nonzero presynaptic activation,
    nonzero effective weight) pair, summed over connection layers and
    averaged over timesteps. MAC mode emulates a dense ANN-style layer:
    every nonzero-weight connection counts each timestep, regardless of
    activations.
    """
    if kind not in ("AC", "MAC"):
        raise ValueError(f"kind must be 'AC' or 'MAC', got {kind!r}")
    T = record.timesteps
    if record.input_spikes.shape[1] != net.input_dim or \
            len(record.hidden_spikes) != net.config.n_layers - 1:
        raise ValueError("activation record does not match network topology")
    for i, s in enumerate(record.hidden_spikes):
        if s.shape[1] != net.config.layer_dims[i + 1]:
            raise ValueError("activation record does not match network topology")

    if kind == "MAC":
        return float(sum(np.count_nonzero(l.effective()) for l in net.layers)), "MAC"
    if T == 0:
        return 0.0, "AC"
    total = 0
    for i, layer in enumerate(net.layers):
        # ops at step t = sum_j [pre_j(t) != 0] * (nonzero weights in column j)
        col_nnz = np.count_nonzero(layer.effective() != 0.0, axis=0)
        pre = record.layer_inputs(i)
        total += int(np.sum((pre != 0).astype(np.int64) @ col_nnz))
    return total / T, "AC"


def merge_records(records) -> ActivationRecord:
    """Concatenate per-segment activation records along time."""
    records = list(records)
    if not records:
        raise ValueError("no records to merge")
    return ActivationRecord(
        input_spikes=np.concatenate([r.input_spikes for r in records]),
        hidden_spikes=[
            np.concatenate([r.hidden_spikes[i] for r in records])
            for i in range(len(records[0].hidden_spikes))
        ],
        output_membrane=np.concatenate([r.output_membrane for r in records]),
        timesteps=sum(r.timesteps for r in records),
    )


def evaluate_segments(net: Network, segments) -> MetricsReport:
    """Forward every segment (state reset at each) and pool the metrics."""
    preds, truths, records = [], [], []
    for seg in segments:
        pred, record = network_forward(net, seg.spikes)
        preds.append(pred)
        truths.append(seg.velocity)
        records.append(record)
    return evaluate_network(net, np.concatenate(preds), np.concatenate(truths),
                            merge_records(records))


def evaluate_network(net: Network, pred: np.ndarray, truth: np.ndarray,
                     record: ActivationRecord) -> MetricsReport:
    """Bundle all four metrics for one prediction run."""
    acs, kind = effective_ops(record, net, kind="AC")
    return MetricsReport(
        r2=r_squared(pred, truth),
        connection_sparsity=connection_sparsity(net),
        connection_sparsity_prunable=connection_sparsity(net, prunable_only=True),
        activation_sparsity=activation_sparsity(record),
        effective_ops=acs,
        ops_kind=kind,
    )

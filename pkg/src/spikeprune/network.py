"""Leaky integrate-and-fire network core.

A network is a stack of dense layers with binary prune masks. Hidden layers
hold spiking LIF neurons; the final layer holds two non-spiking LIF neurons
whose membrane potentials are read out directly as the X/Y velocity
prediction. Per timestep each neuron decays its membrane by exp(-dt/tau),
integrates the masked weighted sum of presynaptic spikes, and (if spiking)
fires and resets wherever the membrane reaches the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LifParams",
    "NetworkConfig",
    "WeightLayer",
    "NeuronState",
    "ActivationRecord",
    "Network",
    "lif_membrane_update",
    "spike_and_reset",
    "layer_forward",
    "network_forward",
    "reset_state",
]


@dataclass(frozen=True)
class LifParams:
    """LIF neuron parameters for one layer.

    tau and dt share a unit (milliseconds); the per-step decay factor is
    exp(-dt/tau). threshold=1 and reset_value=0 match the reference decoder
    configuration but remain configurable.
    """

    tau: float = 5.0
    threshold: float = 1.0
    reset_value: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    @property
    def decay(self) -> float:
        return math.exp(-self.dt / self.tau)


@dataclass
class NetworkConfig:
    """Topology and neuron parameters for the velocity decoder.

    layer_dims is [input, hidden..., output]; the output layer has exactly
    2 neurons (X/Y velocity) and does not spike. With hidden widths
    (50, 50, 50) the bias-free synapse count is 9,900 for 96 input channels
    and 14,700 for 192.
    """

    layer_dims: tuple[int, ...]
    spiking_flags: tuple[bool, ...] = ()
    lif_params: tuple[LifParams, ...] = ()
    seed: int = 0

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ValueError("layer_dims needs at least an input and an output layer")
        if any(d <= 0 for d in self.layer_dims):
            raise ValueError(f"layer dimensions must be positive, got {self.layer_dims}")
        if self.layer_dims[-1] != 2:
            raise ValueError(
                f"output layer must have 2 neurons (X/Y velocity), got {self.layer_dims[-1]}"
            )
        n_layers = len(self.layer_dims) - 1
        if not self.spiking_flags:
            self.spiking_flags = tuple([True] * (n_layers - 1) + [False])
        else:
            self.spiking_flags = tuple(bool(f) for f in self.spiking_flags)
        if len(self.spiking_flags) != n_layers:
            raise ValueError("spiking_flags must have one entry per connection layer")
        if self.spiking_flags[-1] or not all(self.spiking_flags[:-1]):
            raise ValueError("hidden layers must spike and the output layer must not")
        if not self.lif_params:
            self.lif_params = tuple(LifParams() for _ in range(n_layers))
        if len(self.lif_params) != n_layers:
            raise ValueError("lif_params must have one entry per connection layer")

    @classmethod
    def snn3(cls, channels: int, hidden=(50, 50, 50), lif: LifParams | None = None,
             seed: int = 0) -> "NetworkConfig":
        """Standard 3-hidden-layer decoder for a given input channel count."""
        dims = (channels, *hidden, 2)
        params = tuple(lif or LifParams() for _ in range(len(dims) - 1))
        return cls(layer_dims=dims, lif_params=params, seed=seed)

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def synapse_count(self) -> int:
        return sum(self.layer_dims[i] * self.layer_dims[i + 1]
                   for i in range(self.n_layers))


@dataclass
class WeightLayer:
    """Dense weight matrix (rows = postsynaptic) with a binary prune mask.

    Wherever mask is 0 the stored weight is kept at exactly 0; the forward
    pass additionally multiplies by the mask so stored values under a 0 mask
    can never leak into the computation.
    """

    weights: np.ndarray
    mask: np.ndarray
    prunable: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.weights.shape != self.mask.shape:
            raise ValueError(
                f"weights shape {self.weights.shape} != mask shape {self.mask.shape}"
            )

    def effective(self) -> np.ndarray:
        """Weights with the mask applied."""
        return self.weights * self.mask

    def apply_mask(self) -> None:
        """Force stored weights to exactly 0 wherever the mask is 0."""
        self.weights[self.mask == 0] = 0.0

    @property
    def n_weights(self) -> int:
        return self.weights.size

    @property
    def n_masked(self) -> int:
        return int(np.count_nonzero(self.mask == 0))


@dataclass
class NeuronState:
    """Per-layer membrane potentials carried across timesteps."""

    membranes: list[np.ndarray]
    t: int = 0

    def copy(self) -> "NeuronState":
        return NeuronState([m.copy() for m in self.membranes], self.t)


@dataclass
class ActivationRecord:
    """Everything a metrics pass needs from one forward run.

    Stores the binary input spikes, the binary spike train of every hidden
    layer, and the real-valued output membranes, all time-major.
    """

    input_spikes: np.ndarray
    hidden_spikes: list[np.ndarray]
    output_membrane: np.ndarray
    timesteps: int = field(default=0)

    def layer_inputs(self, layer_index: int) -> np.ndarray:
        """Activations feeding connection layer `layer_index` (0-based)."""
        if layer_index == 0:
            return self.input_spikes
        return self.hidden_spikes[layer_index - 1]

    def all_activations(self, include_input: bool = True):
        """Yield (name, array) for every activation group in the record."""
        if include_input:
            yield "input", self.input_spikes
        for i, s in enumerate(self.hidden_spikes):
            yield f"hidden{i + 1}", s
        yield "output", self.output_membrane


def lif_membrane_update(u_prev: np.ndarray, input_current: np.ndarray,
                        params: LifParams) -> np.ndarray:
    """One membrane step: decay the previous potential, add the input current."""
    u_prev = np.asarray(u_prev, dtype=np.float64)
    input_current = np.asarray(input_current, dtype=np.float64)
    if u_prev.shape != input_current.shape:
        raise ValueError(
            f"membrane shape {u_prev.shape} != input current shape {input_current.shape}"
        )
    return u_prev * params.decay + input_current


def spike_and_reset(u: np.ndarray, params: LifParams):
    """Fire wherever the membrane reaches the threshold (>=), reset those neurons.

    Returns (spikes, u_after) with spikes in {0.0, 1.0}.
    """
    u = np.asarray(u, dtype=np.float64)
    spikes = (u >= params.threshold).astype(np.float64)
    u_after = np.where(spikes > 0, params.reset_value, u)
    return spikes, u_after


def layer_forward(pre_spikes: np.ndarray, layer: WeightLayer,
                  membrane: np.ndarray, params: LifParams, spiking: bool):
    """Advance one layer by one timestep.

    Input current is (weights * mask) @ pre_spikes. Spiking layers return
    their binary spike vector and the post-reset membrane; the non-spiking
    readout returns the raw membrane unchanged.
    """
    pre_spikes = np.asarray(pre_spikes, dtype=np.float64)
    if pre_spikes.shape[-1] != layer.weights.shape[1]:
        raise ValueError(
            f"presynaptic dim {pre_spikes.shape[-1]} != layer input dim "
            f"{layer.weights.shape[1]}"
        )
    current = layer.effective() @ pre_spikes
    u = lif_membrane_update(membrane, current, params)
    if spiking:
        spikes, u_after = spike_and_reset(u, params)
        return spikes, u_after
    return u, u


class Network:
    """A configured LIF decoder: config plus one WeightLayer per connection.

    The final (readout) layer is exempt from pruning.
    """

    def __init__(self, config: NetworkConfig, layers: list[WeightLayer]):
        if len(layers) != config.n_layers:
            raise ValueError("layer count does not match config")
        for i, layer in enumerate(layers):
            expect = (config.layer_dims[i + 1], config.layer_dims[i])
            if layer.weights.shape != expect:
                raise ValueError(
                    f"layer {i} shape {layer.weights.shape}, expected {expect}"
                )
        self.config = config
        self.layers = layers

    @classmethod
    def from_config(cls, config: NetworkConfig, init_scale: float = 1.0) -> "Network":
        """Seeded dense initialization; weights ~ N(0, init_scale^2/fan_in)."""
        rng = np.random.default_rng(config.seed)
        layers = []
        for i in range(config.n_layers):
            fan_in = config.layer_dims[i]
            fan_out = config.layer_dims[i + 1]
            w = rng.normal(0.0, init_scale / math.sqrt(fan_in), size=(fan_out, fan_in))
            mask = np.ones((fan_out, fan_in), dtype=np.uint8)
            prunable = i < config.n_layers - 1
            layers.append(WeightLayer(weights=w, mask=mask, prunable=prunable))
        return cls(config, layers)

    @property
    def input_dim(self) -> int:
        return self.config.layer_dims[0]

    def hidden_dims(self) -> list[int]:
        return [self.config.layer_dims[i + 1] for i in range(self.config.n_layers - 1)]

    def prunable_layers(self) -> list[WeightLayer]:
        return [l for l in self.layers if l.prunable]

    def apply_masks(self) -> None:
        for layer in self.layers:
            layer.apply_mask()

    def snapshot(self) -> dict:
        """Deep copy of weights, masks, and parameters (in-memory checkpoint)."""
        return {
            "config": self.config,
            "weights": [l.weights.copy() for l in self.layers],
            "masks": [l.mask.copy() for l in self.layers],
            "prunable": [l.prunable for l in self.layers],
        }

    def restore(self, snap: dict) -> None:
        """Bitwise restore of a snapshot taken from this topology."""
        if snap["config"].layer_dims != self.config.layer_dims:
            raise ValueError("snapshot topology does not match network")
        for layer, w, m, p in zip(self.layers, snap["weights"], snap["masks"],
                                  snap["prunable"]):
            layer.weights = w.copy()
            layer.mask = m.copy()
            layer.prunable = p

    def forward(self, spikes: np.ndarray):
        return network_forward(self, spikes)


def reset_state(net: Network) -> NeuronState:
    """All-zero membranes for every layer."""
    return NeuronState(
        membranes=[np.zeros(net.config.layer_dims[i + 1]) for i in range(net.config.n_layers)],
        t=0,
    )


def network_forward(net: Network, spikes: np.ndarray):
    """Run a full input sequence, carrying membrane state across timesteps.

    spikes is time-major [T x input_dim] binary. Returns the [T x 2] velocity
    prediction and an ActivationRecord of every spike and output membrane.
    State starts at zero; the sequence is processed strictly in time order.
    """
    spikes = np.asarray(spikes, dtype=np.float64)
    if spikes.ndim != 2 or spikes.shape[1] != net.input_dim:
        raise ValueError(
            f"expected [T x {net.input_dim}] input, got shape {spikes.shape}"
        )
    T = spikes.shape[0]
    n_layers = net.config.n_layers
    hidden = [np.zeros((T, net.config.layer_dims[i + 1]), dtype=np.uint8)
              for i in range(n_layers - 1)]
    out = np.zeros((T, 2))

    state = reset_state(net)
    effective = [l.effective() for l in net.layers]
    decays = [p.decay for p in net.config.lif_params]
    for t in range(T):
        a = spikes[t]
        for i in range(n_layers):
            params = net.config.lif_params[i]
            u = state.membranes[i] * decays[i] + effective[i] @ a
            if net.config.spiking_flags[i]:
                s, u = spike_and_reset(u, params)
                hidden[i][t] = s.astype(np.uint8)
                a = s
            else:
                out[t] = u
                a = u
            state.membranes[i] = u
        state.t = t + 1

    record = ActivationRecord(
        input_spikes=np.asarray(spikes != 0, dtype=np.uint8),
        hidden_spikes=hidden,
        output_membrane=out,
        timesteps=T,
    )
    return out, record

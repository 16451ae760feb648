"""spikeprune: adaptive magnitude pruning for small LIF spiking decoders.

Library layout:

- network: LIF dynamics, masked dense layers, full-sequence execution
- training: surrogate-gradient BPTT, optimizers, pretraining
- pruning: the adaptive prune/fine-tune/rollback controller and its trace
- metrics: R^2, connection/activation sparsity, effective synaptic ops
- energy: per-timestep energy and average power on neuromorphic hardware
- data: session container, portable file format, splits, synthetic tasks
- checkpoint: bit-exact binary network checkpoints
- cli: the `spikeprune` command (synth / pretrain / prune / eval)
"""

from .network import (
    ActivationRecord,
    LifParams,
    Network,
    NetworkConfig,
    NeuronState,
    WeightLayer,
    layer_forward,
    lif_membrane_update,
    network_forward,
    reset_state,
    spike_and_reset,
)
from .training import (
    AdamOptimizer,
    SgdOptimizer,
    TrainConfig,
    TrainingDivergedError,
    compute_gradients,
    make_optimizer,
    mse_loss,
    pretrain,
    surrogate_spike_grad,
    train_epoch,
    validate,
)
from .pruning import (
    EngineTrainer,
    PruneHyperParams,
    PruneTrace,
    adaptive_prune,
    checkpoint,
    prunable_zero_fraction,
    prune_step,
    restore,
    select_prune_targets,
)
from .metrics import (
    DegenerateTruthError,
    MetricsReport,
    activation_sparsity,
    connection_sparsity,
    effective_ops,
    evaluate_network,
    evaluate_segments,
    r_squared,
)
from .energy import EnergyParams, EnergyReport, average_power, energy_per_timestep, energy_report
from .data import (
    BadMagicError,
    NonBinarySpikeError,
    SessionDimensionError,
    SessionFormatError,
    SpikeSession,
    SplitSpec,
    TruncatedSessionError,
    generate_synthetic,
    load_session,
    save_session,
    split_session,
)
from .checkpoint import CheckpointError, CheckpointVersionError, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

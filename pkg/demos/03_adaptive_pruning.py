"""Watch the adaptive pruning controller work, event by event.

Starts from a pretrained dense decoder and runs the controller: prune the
lowest-magnitude weights, fine-tune until validation loss is back within
tolerance of the dense target, roll back and halve the rate when patience
runs out. A scripted trainer stands in for real fine-tuning first so the
state machine is easy to see; a real run on the synthetic task follows. Run:

    python demos/03_adaptive_pruning.py
"""

from spikeprune import (
    LifParams,
    Network,
    NetworkConfig,
    PruneHyperParams,
    TrainConfig,
    adaptive_prune,
    evaluate_segments,
    generate_synthetic,
    prunable_zero_fraction,
    pretrain,
    split_session,
)

# --- part 1: the state machine under a hostile trainer -------------------
print("=" * 70)
print("part 1: fine-tuning that never recovers -> halve until the floor")
print("=" * 70)


class StubbornTrainer:
    """Validation loss never returns to tolerance after the first call."""

    def __init__(self):
        self.calls = 0

    def train_epoch(self, net):
        return 0.5

    def validate(self, net):
        self.calls += 1
        return 1.0 if self.calls == 1 else 5.0

    def reset_optimizer(self):
        pass


dense = Network.from_config(NetworkConfig.snn3(96, seed=0))
hp = PruneHyperParams(p_start=10.0, patience=5, tolerance=0.1)
net, trace = adaptive_prune(dense, None, hp, trainer=StubbornTrainer())
for ev in trace.events:
    if ev.kind == "prune-applied":
        print(f"  prune at rate {ev.rate:g}% -> pruned {ev.pruned:.4f}")
    elif ev.kind == "rollback":
        print(f"  rollback: restore to {ev.pruned:.4f}, halve rate to {ev.rate:g}%")
    elif ev.kind == "terminated":
        print(f"  terminated ({ev.reason}) after {trace.total_epochs()} epochs")
print(f"  final sparsity {prunable_zero_fraction(net):.4f} "
      f"(every attempt was rolled back)\n")

# --- part 2: a real run on the synthetic task -----------------------------
print("=" * 70)
print("part 2: real run on a synthetic session (about a minute)")
print("=" * 70)

session = generate_synthetic(seed=11, channels=16, T=8_000, rate=0.3)
split = split_session(session)
config = NetworkConfig.snn3(16, hidden=(40, 40, 40),
                            lif=LifParams(tau=20.0, dt=4.0), seed=7)
dense, target_loss = pretrain(
    config, split,
    TrainConfig(learning_rate=2e-3, max_epochs=80, batch_length=25),
)
dense_r2 = evaluate_segments(dense, split["test"]).r2
print(f"dense: test R^2 {dense_r2:.4f}, target loss {target_loss:.4f}")

finetune = TrainConfig(learning_rate=5e-3, max_epochs=0, batch_length=25)
pruned, trace = adaptive_prune(dense, split, hp, finetune)
for ev in trace.events:
    if ev.kind == "prune-applied":
        print(f"  prune {ev.rate:g}% -> {ev.pruned:.3f} pruned")
    elif ev.kind == "rollback":
        print(f"  rollback -> {ev.pruned:.3f}, rate now {ev.rate:g}%")
    elif ev.kind == "terminated":
        print(f"  terminated: {ev.reason}")

report = evaluate_segments(pruned, split["test"])
print(f"\npruned: {prunable_zero_fraction(pruned):.3f} of prunable weights gone, "
      f"test R^2 {report.r2:.4f} (dense was {dense_r2:.4f})")
print(f"fine-tune epochs spent: {trace.total_epochs()}")
print(f"effective ops: {report.effective_ops:.1f} ACs/timestep")

"""The four CLI commands end to end in a scratch directory.

Every command is a pure function of (config, input files, seed): rerunning
any of them reproduces its output files byte for byte, and every output
embeds the sha256 digest of the config that produced it. Run:

    python demos/05_cli_workflow.py
"""

import json
import tempfile
from pathlib import Path

from spikeprune.cli import main

scratch = Path(tempfile.mkdtemp(prefix="spikeprune_demo_"))
config = {
    "seed": 5,
    "network": {"hidden": [16, 16, 16]},
    "train": {"learning_rate": 2e-3, "max_epochs": 15, "batch_length": 25},
    "finetune": {"learning_rate": 5e-3},
    "prune": {"p_start": 10.0, "patience": 2, "tolerance": 0.3, "pruned_max": 0.6},
    "synth": {"channels": 8, "timesteps": 2000, "rate": 0.3, "session_id": "demo"},
    "data": {"session": str(scratch / "demo.spk")},
    "out_dir": str(scratch / "out"),
}
config_path = scratch / "config.json"
config_path.write_text(json.dumps(config, indent=2))
print(f"scratch dir: {scratch}\n")

for argv in (
    ["synth", "--config", str(config_path)],
    ["pretrain", "--config", str(config_path)],
    ["prune", "--config", str(config_path),
     "--checkpoint", str(scratch / "out" / "dense.ckpt")],
    ["eval", "--config", str(config_path),
     "--checkpoint", str(scratch / "out" / "pruned.ckpt")],
):
    print(f"$ spikeprune {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"exit code {code}"
    print()

print("files produced:")
for path in sorted(scratch.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(scratch)}  ({path.stat().st_size} bytes)")

trace = (scratch / "out" / "prune_trace.csv").read_text().splitlines()
print("\nfirst lines of the pruning trace CSV:")
for line in trace[:8]:
    print(f"  {line}")

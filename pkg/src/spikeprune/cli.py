"""Command-line harness: synth, pretrain, prune, eval.

One experiment is one JSON config document; every command is a pure function
of (config, input files, seed) and reruns produce byte-identical outputs.
Each output file embeds the sha256 digest of the canonical config that
produced it: checkpoints carry it in their metadata header, CSV traces and
reports carry it on a leading comment line, and synthesized sessions append
"#cfg:<12 hex>" to the stored session id (the session byte format has no
metadata field).

Exit codes: 0 success, 2 config error, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import data as dataio
from .energy import PAPER_CONSISTENT, PER_NEURON, EnergyParams, energy_report
from .metrics import DegenerateTruthError, evaluate_segments
from .network import LifParams, NetworkConfig
from .pruning import TRACE_COLUMNS, PruneHyperParams, adaptive_prune
from .training import TrainConfig, TrainingDivergedError, pretrain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

DEFAULT_CONFIG = {
    "seed": 0,
    "network": {"hidden": [50, 50, 50]},
    "lif": {"tau_factor": 5.0, "threshold": 1.0, "reset_value": 0.0},
    "train": {"learning_rate": 2e-3, "max_epochs": 100, "batch_length": 100,
              "surrogate_width": 1.0, "optimizer": "adam"},
    "finetune": {},  # overrides applied to "train" during pruning
    "prune": {"p_start": 10.0, "patience": 5, "tolerance": 0.1, "p_min": 0.1,
              "pruned_max": 0.95, "scope": "per-layer", "mode": "full-adaptive"},
    "energy": {"e_ac_pj": 12.7, "e_update_pj": 14.6, "dt_ms": 4.0},
    "synth": {"channels": 32, "timesteps": 20000, "rate": 0.2,
              "mixing_density": 0.25, "label_tau_steps": 5.0,
              "session_id": "synthetic", "dt_ms": 4.0},
    "data": {"session": "session.spk", "n_subsessions": 4},
    "out_dir": "out",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            user = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(DEFAULT_CONFIG, user)
    if "seed" not in user:
        raise ConfigError("config must set an explicit seed")
    return cfg


def config_digest(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _train_config(cfg: dict, finetune: bool = False) -> TrainConfig:
    t = cfg["train"]
    if finetune:
        t = _merge(t, cfg["finetune"])
    return TrainConfig(learning_rate=t["learning_rate"], max_epochs=t["max_epochs"],
                       batch_length=t["batch_length"],
                       surrogate_width=t["surrogate_width"],
                       optimizer=t["optimizer"], seed=cfg["seed"])


def _prune_params(cfg: dict, mode=None, scope=None) -> PruneHyperParams:
    p = dict(cfg["prune"])
    if mode:
        p["mode"] = mode
    if scope:
        p["scope"] = scope
    return PruneHyperParams(p_start=p["p_start"], patience=p["patience"],
                            tolerance=p["tolerance"], p_min=p["p_min"],
                            pruned_max=p["pruned_max"], scope=p["scope"],
                            mode=p["mode"])


def _network_config(cfg: dict, channels: int, dt_ms: float) -> NetworkConfig:
    lif_cfg = cfg["lif"]
    tau = lif_cfg.get("tau", lif_cfg["tau_factor"] * dt_ms)
    lif = LifParams(tau=tau, threshold=lif_cfg["threshold"],
                    reset_value=lif_cfg["reset_value"], dt=dt_ms)
    return NetworkConfig.snn3(channels, hidden=tuple(cfg["network"]["hidden"]),
                              lif=lif, seed=cfg["seed"])


def _load_split(cfg: dict):
    session = dataio.load_session(cfg["data"]["session"])
    spec = dataio.SplitSpec(n_subsessions=cfg["data"]["n_subsessions"])
    return session, dataio.split_session(session, spec)


class CsvTraceSink:
    """Append-only trace CSV, flushed per event so interrupted runs survive."""

    def __init__(self, path, digest: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "w", encoding="utf-8", newline="")
        self._f.write(f"# config_digest={digest}\n")
        self._f.write(",".join(TRACE_COLUMNS) + "\n")
        self._f.flush()

    def __call__(self, event) -> None:
        self.row(event.csv_row())

    def row(self, fields) -> None:
        self._f.write(",".join(fields) + "\n")
        self._f.flush()

    def comment(self, text: str) -> None:
        self._f.write(f"# {text}\n")
        self._f.flush()

    def close(self) -> None:
        self._f.close()


def cmd_synth(cfg: dict, out_dir: Path) -> int:
    s = cfg["synth"]
    digest = config_digest(cfg)
    session = dataio.generate_synthetic(
        seed=cfg["seed"], channels=s["channels"], T=s["timesteps"],
        rate=s["rate"], mixing_density=s["mixing_density"],
        label_tau_steps=s["label_tau_steps"], dt_ms=s["dt_ms"],
        session_id=f"{s['session_id']}#cfg:{digest[:12]}",
    )
    path = Path(cfg["data"]["session"])
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    dataio.save_session(path, session)
    print(f"wrote session {session.session_id}: T={session.timesteps} "
          f"channels={session.channels} rate={session.spikes.mean():.4f} -> {path}")
    return EXIT_OK


def cmd_pretrain(cfg: dict, out_dir: Path) -> int:
    digest = config_digest(cfg)
    session, split = _load_split(cfg)
    net_config = _network_config(cfg, session.channels, session.dt_ms)
    tc = _train_config(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = CsvTraceSink(out_dir / "pretrain_trace.csv", digest)

    def log(epoch, train_loss, val_loss):
        sink.row([str(epoch), "epoch", str(epoch + 1),
                  repr(float(train_loss)), repr(float(val_loss)), "", "0.0"])

    net, target_loss = pretrain(net_config, split, tc, log=log)
    sink.close()
    ckpt_path = out_dir / "dense.ckpt"
    ckpt.save_checkpoint(ckpt_path, net, meta={
        "config_digest": digest, "stage": "pretrain",
        "target_loss": target_loss, "epochs": tc.max_epochs,
        "session_id": session.session_id,
    })
    print(f"pretrained {tc.max_epochs} epochs, target loss {target_loss!r} -> {ckpt_path}")
    return EXIT_OK


def cmd_prune(cfg: dict, out_dir: Path, checkpoint_path, mode=None, scope=None) -> int:
    digest = config_digest(cfg)
    net, meta = ckpt.load_checkpoint(checkpoint_path)
    session, split = _load_split(cfg)
    if session.channels != net.input_dim:
        raise dataio.SessionDimensionError(
            f"checkpoint expects {net.input_dim} channels, session has {session.channels}"
        )
    hp = _prune_params(cfg, mode=mode, scope=scope)
    tc = _train_config(cfg, finetune=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = CsvTraceSink(out_dir / "prune_trace.csv", digest)
    pruned_net, trace = adaptive_prune(net, split, hp, tc, trace_sink=sink)
    final = trace.events[-1]
    sink.comment(f"terminated: {final.reason}")
    sink.close()
    ckpt_path = out_dir / "pruned.ckpt"
    ckpt.save_checkpoint(ckpt_path, pruned_net, meta={
        "config_digest": digest, "stage": "prune",
        "mode": hp.mode, "scope": hp.scope,
        "pruned": final.pruned, "fine_tune_epochs": trace.total_epochs(),
        "source_checkpoint_meta": meta,
    })
    print(f"pruning terminated ({final.reason}): pruned={final.pruned:.4f} "
          f"over {trace.total_epochs()} fine-tune epochs -> {ckpt_path}")
    return EXIT_OK


def cmd_eval(cfg: dict, out_dir: Path, checkpoint_path) -> int:
    digest = config_digest(cfg)
    net, meta = ckpt.load_checkpoint(checkpoint_path)
    session, split = _load_split(cfg)
    if session.channels != net.input_dim:
        raise dataio.SessionDimensionError(
            f"checkpoint expects {net.input_dim} channels, session has {session.channels}"
        )
    report = evaluate_segments(net, split["test"])
    e = cfg["energy"]
    n_neurons = sum(net.config.layer_dims[1:])
    energies = {}
    for mode in (PAPER_CONSISTENT, PER_NEURON):
        params = EnergyParams(e_ac_pj=e["e_ac_pj"], e_update_pj=e["e_update_pj"],
                              dt_ms=e["dt_ms"], update_count_mode=mode)
        energies[mode] = energy_report(report.effective_ops, n_neurons, params).as_dict()

    payload = {
        "config_digest": digest,
        "checkpoint_meta": meta,
        "session_id": session.session_id,
        "metrics": report.as_dict(),
        "energy": energies,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
    lines = [f"# config_digest={digest}"]
    for k, v in sorted(report.as_dict().items()):
        lines.append(f"{k} = {v!r}")
    for mode, rep in energies.items():
        for k, v in sorted(rep.items()):
            lines.append(f"energy[{mode}].{k} = {v!r}")
    text = "\n".join(lines) + "\n"
    with open(out_dir / "metrics.txt", "w", encoding="utf-8") as f:
        f.write(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeprune",
        description="Train, prune, and benchmark small LIF velocity decoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_ckpt in (("synth", False), ("pretrain", False),
                             ("prune", True), ("eval", True)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory")
        if needs_ckpt:
            p.add_argument("--checkpoint", required=True)
        if name == "prune":
            p.add_argument("--mode",
                           choices=["full-adaptive", "tolerance-only", "fixed"])
            p.add_argument("--scope", choices=["per-layer", "global"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out) if args.out else Path(cfg["out_dir"])
        if args.command == "synth":
            return cmd_synth(cfg, out_dir)
        if args.command == "pretrain":
            return cmd_pretrain(cfg, out_dir)
        if args.command == "prune":
            return cmd_prune(cfg, out_dir, args.checkpoint,
                             mode=args.mode, scope=args.scope)
        return cmd_eval(cfg, out_dir, args.checkpoint)
    except (ConfigError, ValueError) as e:
        if isinstance(e, (dataio.SessionFormatError, ckpt.CheckpointError,
                          DegenerateTruthError)):
            print(f"data error: {e}", file=sys.stderr)
            return EXIT_DATA
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: simulate -> inject -> train -> eval -> report.

Every command reads the same INI config (all keys defaulted), derives its
randomness from the master seed, and writes a JSON manifest recording the
config hash, the seed and per-file row counts and digests, so a rerun
with the same inputs is byte-identical and verifiable.

Exit codes: 0 success, 2 configuration/validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, seeding
from .channel import VERDICT_NAMES
from .checkpoint import load as load_checkpoint
from .checkpoint import save_dae, save_ocsvm, save_scaler
from .config import ConfigError, RunConfig, config_hash, load_config
from .dae import Architecture, init_model, train
from .evalmetrics import compare_loss_distributions, roc_curve, tpr_at_fpr
from .inject import AccessibleRegion, build_anomaly_dataset
from .ocsvm import score_ocsvm, train_ocsvm
from .scenario import build_scenario
from .simulate import read_mobility_csv, run_simulation
from .tracelog import (
    apply_scaler,
    extract_features_bulk,
    fit_scaler,
    read_features,
    read_log,
    reconcile,
    split,
    write_features,
    write_log,
)
from .dae import score as dae_score


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out: Path, command: str, cfg: RunConfig, files: dict, counts: dict) -> Path:
    chash = config_hash(cfg)
    entry = {}
    for name, extra in files.items():
        path = out / name
        entry[name] = {
            "sha256": _sha256_file(path),
            "config_sha256": chash,
            "master_seed": cfg.seed,
            **extra,
        }
    manifest = {
        "command": command,
        "version": __version__,
        "config_sha256": chash,
        "master_seed": cfg.seed,
        "counts": counts,
        "files": entry,
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def cmd_simulate(cfg: RunConfig, out: Path) -> Path:
    """Run the beacon simulation and write the packet log plus manifest."""
    out.mkdir(parents=True, exist_ok=True)
    traces = read_mobility_csv(cfg.mobility_trace) if cfg.mobility_trace else None
    log = run_simulation(cfg.scenario, cfg.channel, traces=traces)
    log_path = out / "packets.log"
    write_log(log, log_path)
    stats = log.stats
    counts = {
        "n_beacons": stats.n_beacons,
        "n_tx_records": stats.n_tx,
        "n_rx_records": stats.n_rx,
        "n_link_evaluations": stats.n_evaluated,
        "n_distance_clamped": stats.n_clamped,
        "verdicts": stats.verdict_counts,
    }
    return _write_manifest(
        out, "simulate", cfg, {"packets.log": {"records": stats.n_tx + stats.n_rx}}, counts
    )


def cmd_inject(cfg: RunConfig, log_path: Path, out: Path) -> Path:
    """Partition the reconciled log into training / hold-out / anomaly
    pools and emit the anomaly datasets."""
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    log = read_log(log_path)
    linked = reconcile(log)
    region = AccessibleRegion.from_scenario(build_scenario(cfg.scenario))

    max_band = max(band.sample_count for band in cfg.bands)
    needed = cfg.train_pool + cfg.holdout + max_band
    if len(linked) < needed:
        raise RuntimeError(
            f"log provides {len(linked)} linked packets but the pools need at least {needed}; "
            "extend sim_duration_s or shrink features.train_pool"
        )
    perm = seeding.substream(cfg.seed, seeding.POOL).permutation(len(linked))
    train_part = linked.subset(perm[: cfg.train_pool])
    holdout_part = linked.subset(perm[cfg.train_pool : cfg.train_pool + cfg.holdout])
    anomaly_pool = linked.subset(perm[cfg.train_pool + cfg.holdout :])

    files = {}
    counts = {"linked_packets": len(linked), "band_failures": {}}
    write_features(extract_features_bulk(train_part), feat_dir / "normal_train.csv")
    files["features/normal_train.csv"] = {"rows": len(train_part)}
    write_features(extract_features_bulk(holdout_part), feat_dir / "normal_holdout.csv")
    files["features/normal_holdout.csv"] = {"rows": len(holdout_part)}
    for i, band in enumerate(cfg.bands):
        rng = seeding.substream(cfg.seed, seeding.INJECT, i)
        dataset = build_anomaly_dataset(anomaly_pool, band, region, rng)
        name = f"features/{band.name.lower()}.csv"
        write_features(dataset.features, feat_dir / f"{band.name.lower()}.csv")
        files[name] = {"rows": len(dataset.features)}
        counts["band_failures"][band.name] = dataset.failures
    return _write_manifest(out, "inject", cfg, files, counts)


def cmd_train(cfg: RunConfig, features_path: Path, out: Path) -> Path:
    """Train the autoencoder and the one-class SVM on anomaly-free data."""
    model_dir = out / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    features = read_features(features_path)
    if np.any(features.label != 0):
        raise RuntimeError("training features must be anomaly-free")
    train_fs, val_fs = split(features, 0.8, seeding.substream(cfg.seed, seeding.SPLIT))
    scaler = fit_scaler(train_fs)
    x_tr = apply_scaler(scaler, train_fs.x)
    x_va = apply_scaler(scaler, val_fs.x)

    arch = Architecture(layer_widths=cfg.dae_widths)
    model = init_model(arch, seeding.substream(cfg.seed, seeding.DAE, 0))
    model, report = train(
        model,
        x_tr,
        x_va,
        epochs=cfg.dae_epochs,
        lr=cfg.dae_learning_rate,
        batch_size=cfg.dae_batch_size,
        seed=seeding.substream(cfg.seed, seeding.DAE, 1),
    )
    svm = train_ocsvm(
        x_tr, nu=cfg.ocsvm_nu, epochs=cfg.ocsvm_epochs, lr=cfg.ocsvm_learning_rate, seed=cfg.seed
    )

    save_dae(model, model_dir / "dae.npz")
    save_ocsvm(svm, model_dir / "ocsvm.npz")
    save_scaler(scaler, model_dir / "scaler.npz")

    with open(out / "train_report.csv", "w") as fh:
        fh.write("epoch,mean_train_loss\n")
        for i, value in enumerate(report.epoch_losses):
            fh.write(f"{i},{value!r}\n")

    train_losses = dae_score(model, x_tr)
    comparison = compare_loss_distributions(train_losses, report.val_losses, seed=cfg.seed)
    with open(out / "loss_comparison.csv", "w") as fh:
        fh.write("split,ami,mean,variance\n")
        fh.write(f"train,{comparison.ami!r},{comparison.mean_train!r},{comparison.var_train!r}\n")
        fh.write(f"validation,{comparison.ami!r},{comparison.mean_val!r},{comparison.var_val!r}\n")

    files = {
        "models/dae.npz": {},
        "models/ocsvm.npz": {},
        "models/scaler.npz": {},
        "train_report.csv": {"rows": len(report.epoch_losses)},
        "loss_comparison.csv": {"rows": 2},
    }
    counts = {
        "n_train": len(train_fs),
        "n_validation": len(val_fs),
        "final_train_loss": report.epoch_losses[-1],
        "mean_val_loss": float(np.mean(report.val_losses)),
        "loss_ami": comparison.ami,
    }
    return _write_manifest(out, "train", cfg, files, counts)


def cmd_eval(cfg: RunConfig, models_dir: Path, features_dir: Path, out: Path) -> Path:
    """Score every anomaly dataset with both detectors and emit ROC CSVs,
    the summary table and the detection-rate-at-FPR table."""
    eval_dir = out / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    dae_model = load_checkpoint(models_dir / "dae.npz")
    svm = load_checkpoint(models_dir / "ocsvm.npz")
    scaler = load_checkpoint(models_dir / "scaler.npz")
    holdout = read_features(features_dir / "normal_holdout.csv")
    x_normal = apply_scaler(scaler, holdout.x)
    normal_scores = {
        "dae": dae_score(dae_model, x_normal),
        "ocsvm": score_ocsvm(svm, x_normal),
    }

    fpr_col = f"tpr_at_fpr_{cfg.target_fpr:g}"
    summary_rows = []
    files = {}
    for band in cfg.bands:
        fs = read_features(features_dir / f"{band.name.lower()}.csv")
        x_anom = apply_scaler(scaler, fs.x)
        anom_scores = {
            "dae": dae_score(dae_model, x_anom),
            "ocsvm": score_ocsvm(svm, x_anom),
        }
        for detector in ("dae", "ocsvm"):
            report = roc_curve(
                normal_scores[detector], anom_scores[detector], detector=detector, dataset=band.name
            )
            rate = tpr_at_fpr(report, cfg.target_fpr)
            name = f"eval/roc_{detector}_{band.name.lower()}.csv"
            with open(out / name, "w") as fh:
                fh.write("threshold,fpr,tpr\n")
                for t, fp, tp in report.points:
                    fh.write(f"{t!r},{fp!r},{tp!r}\n")
            files[name] = {"rows": len(report.fpr)}
            summary_rows.append((detector, band.name, report.auc, rate))

    with open(out / "eval" / "summary.csv", "w") as fh:
        fh.write(f"detector,dataset,auc,{fpr_col}\n")
        for detector, dataset, auc, rate in summary_rows:
            fh.write(f"{detector},{dataset},{auc!r},{rate!r}\n")
    files["eval/summary.csv"] = {"rows": len(summary_rows)}

    with open(out / "eval" / "detection_rate_at_fpr.csv", "w") as fh:
        fh.write(f"detector,dataset,{fpr_col}\n")
        for detector, dataset, _, rate in summary_rows:
            fh.write(f"{detector},{dataset},{rate!r}\n")
    files["eval/detection_rate_at_fpr.csv"] = {"rows": len(summary_rows)}

    counts = {
        "n_roc_files": sum(1 for n in files if n.startswith("eval/roc_")),
        "n_summary_rows": len(summary_rows),
    }
    return _write_manifest(out, "eval", cfg, files, counts)


def cmd_report(cfg: RunConfig, out: Path) -> Path:
    """Assemble a human-readable run summary from the emitted artifacts."""
    lines = [f"ghostbeacon run report ({out})", ""]
    for command in ("simulate", "inject", "train", "eval"):
        path = out / f"manifest_{command}.json"
        if not path.exists():
            continue
        manifest = json.loads(path.read_text())
        lines.append(f"[{command}] config {manifest['config_sha256'][:12]} seed {manifest['master_seed']}")
        for key, value in sorted(manifest["counts"].items()):
            lines.append(f"  {key}: {value}")
        lines.append("")
    summary = out / "eval" / "summary.csv"
    if summary.exists():
        lines.append("detector performance:")
        lines.extend("  " + row for row in summary.read_text().strip().splitlines())
        lines.append("")
    loss_cmp = out / "loss_comparison.csv"
    if loss_cmp.exists():
        lines.append("train/validation loss comparison:")
        lines.extend("  " + row for row in loss_cmp.read_text().strip().splitlines())
        lines.append("")
    path = out / "report.txt"
    path.write_text("\n".join(lines))
    return path


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostbeacon",
        description="V2V beacon simulation and reported-location anomaly detection pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file (defaults reproduce the stock scenario)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the output directory")

    p = sub.add_parser("simulate", help="run the beacon simulation and write the packet log")
    common(p)
    p = sub.add_parser("inject", help="build normal/anomalous feature datasets from a log")
    common(p)
    p.add_argument("--log", help="packet log path (default <out>/packets.log)")
    p = sub.add_parser("train", help="train the detectors on anomaly-free features")
    common(p)
    p.add_argument("--features", help="training CSV (default <out>/features/normal_train.csv)")
    p = sub.add_parser("eval", help="score the anomaly datasets and emit ROC/AUC tables")
    common(p)
    p.add_argument("--models", help="model directory (default <out>/models)")
    p.add_argument("--features-dir", help="feature directory (default <out>/features)")
    p = sub.add_parser("report", help="summarize the artifacts of a run directory")
    common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        out = Path(cfg.out_dir)
        if args.command == "simulate":
            path = cmd_simulate(cfg, out)
        elif args.command == "inject":
            log_path = Path(args.log) if args.log else out / "packets.log"
            if not log_path.exists():
                raise RuntimeError(f"packet log not found: {log_path}")
            path = cmd_inject(cfg, log_path, out)
        elif args.command == "train":
            feat = Path(args.features) if args.features else out / "features" / "normal_train.csv"
            if not feat.exists():
                raise RuntimeError(f"feature file not found: {feat}")
            path = cmd_train(cfg, feat, out)
        elif args.command == "eval":
            models = Path(args.models) if args.models else out / "models"
            feats = Path(args.features_dir) if args.features_dir else out / "features"
            for required in (models / "dae.npz", models / "ocsvm.npz", models / "scaler.npz"):
                if not required.exists():
                    raise RuntimeError(f"missing model checkpoint: {required}")
            path = cmd_eval(cfg, models, feats, out)
        else:
            path = cmd_report(cfg, out)
        print(path)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

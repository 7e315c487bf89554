"""Command-line entry points.

Subcommands: train, eval, simulate {density | variance | sampler-hist |
pairwise-hist | stability}, isotonic, dataset gen. Every run writes its
resolved configuration next to the outputs; all outputs are reproducible
from (config, seed).

Exit codes: 0 success, 2 bad configuration/usage, 3 numeric failure,
4 dataset capacity failure.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import (ConfigError, parse_config_file, render_config,
                     resolve_config, train_config)
from .datasets import (DatasetFormatError, load_dataset_file,
                       synthetic_dataset, write_dataset_file)
from .evaluation import recall_at_k, kmeans, nmi
from .isotonic import check_equivalence, random_instance
from .net import (TrainingDiverged, config_hash, forward, load_checkpoint,
                  save_checkpoint, train)
from .sampling import CapacityError
from .simlab import (density_curve, gradient_variance_curve,
                     pairwise_histogram, sampler_histogram, stability_curve)
from .tables import Table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CAPACITY = 4


def _load_config(args):
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return resolve_config(file_values, overrides)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(cfg, out):
    text = render_config(cfg)
    (out / "config.resolved").write_text(text, encoding="utf-8")
    return config_hash(text)


def _dataset_from_config(cfg):
    if cfg.dataset:
        return load_dataset_file(cfg.dataset)
    return synthetic_dataset(cfg.synthetic_classes, cfg.synthetic_per_class,
                             cfg.synthetic_dim, cfg.synthetic_spread,
                             cfg.dataset_seed, cfg.synthetic_radius)


def _metrics_csv(log, path):
    ks = sorted(log.records[0].recall) if log.records else []
    cols = (["epoch", "mean_loss", "spread"]
            + [f"recall_at_{k}" for k in ks]
            + ["nmi", "verification_threshold", "verification_accuracy",
               "beta0", "semihard_fallbacks", "degenerate_pairs"])
    rows = [[r.epoch, r.mean_loss, r.spread]
            + [r.recall[k] for k in ks]
            + [r.nmi, r.verification_threshold, r.verification_accuracy,
               r.beta0, r.semihard_fallbacks, r.degenerate_pairs]
            for r in log.records]
    Table(cols, np.asarray(rows, dtype=np.float64)).write_csv(path)


def cmd_train(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    chash = _write_resolved(cfg, out)
    dataset = _dataset_from_config(cfg)
    result = train(dataset, train_config(cfg))
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.log:
            fh.write(json.dumps(rec.to_dict()) + "\n")
    _metrics_csv(result.log, out / "metrics.csv")
    save_checkpoint(out / "checkpoint.json", result.params, result.beta, chash)
    last = result.log.last()
    print(f"trained {cfg.epochs} epochs; "
          f"final recall@1={last.recall.get(1, float('nan')):.4f} "
          f"nmi={last.nmi:.4f} -> {out}")
    return EXIT_OK


def cmd_eval(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    _write_resolved(cfg, out)
    params, _, _ = load_checkpoint(args.checkpoint)
    dataset = _dataset_from_config(cfg)
    emb, _ = forward(params, dataset.features)
    ks = [k for k in cfg.eval_ks if k < len(dataset)]
    recall = recall_at_k(emb, dataset.labels, ks)
    assign = kmeans(emb, len(dataset.class_ids), cfg.seed)
    payload = {
        "recall": {str(k): v for k, v in recall.items()},
        "nmi": nmi(assign, dataset.labels),
        "examples": len(dataset),
    }
    (out / "eval.json").write_text(json.dumps(payload, indent=2) + "\n",
                                   encoding="utf-8")
    print(json.dumps(payload))
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    _write_resolved(cfg, out)
    rng = np.random.default_rng(cfg.seed)
    kind = args.kind
    if kind == "density":
        grid = np.arange(0.0, 2.0 + cfg.sim_bin_width, cfg.sim_bin_width)
        table = density_curve(cfg.sim_dims, np.clip(grid, 0.0, 2.0))
        path = out / "density.csv"
    elif kind == "variance":
        grid = np.arange(cfg.sim_grid_start, cfg.sim_grid_stop,
                         cfg.sim_grid_step)
        table = gradient_variance_curve(cfg.sim_dim, cfg.sim_sigma, grid,
                                        cfg.sim_replicates, rng,
                                        cfg.sim_noise_mode)
        path = out / "variance.csv"
    elif kind == "sampler-hist":
        table, _ = sampler_histogram(cfg.sampler, cfg.embed_dim,
                                     cfg.sim_classes, cfg.sim_m,
                                     cfg.sim_draws, rng,
                                     bin_width=cfg.sim_bin_width,
                                     semihard_floor=cfg.semihard_floor)
        path = out / f"sampler_hist_{cfg.sampler}.csv"
    elif kind == "pairwise-hist":
        dataset = _dataset_from_config(cfg)
        result = train(dataset, train_config(cfg))
        emb, _ = forward(result.params, result.eval_dataset.features)
        table, _ = pairwise_histogram(emb, result.eval_dataset.labels,
                                      bin_width=cfg.sim_bin_width)
        path = out / "pairwise_hist.csv"
    else:  # stability
        dataset = _dataset_from_config(cfg)
        configs = []
        for loss, sampler in (("margin", "distance_weighted"),
                              ("triplet_l22", "semihard")):
            for m in cfg.sim_stability_ms:
                tc = train_config(cfg)
                configs.append(dataclasses.replace(
                    tc, loss=loss, sampler=sampler, m_per_class=m,
                    epochs=cfg.sim_stability_epochs))
        table = stability_curve(dataset, configs,
                                log_interval=cfg.sim_log_interval)
        path = out / "stability.csv"
    table.write_csv(path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_isotonic(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    _write_resolved(cfg, out)
    rows = []
    worst = 0.0
    for k in range(cfg.isotonic_instances):
        rng = np.random.default_rng(cfg.isotonic_seed + k)
        inst = random_instance(rng, cfg.isotonic_max_pos, cfg.isotonic_max_neg)
        report = check_equivalence(inst)
        worst = max(worst, report["abs_diff"])
        rows.append([cfg.isotonic_seed + k, report["margin_risk"],
                     report["lp_risk"], report["abs_diff"]])
    table = Table(["instance_seed", "margin_risk", "lp_risk", "abs_diff"],
                  np.asarray(rows))
    path = out / "isotonic.csv"
    table.write_csv(path)
    print(f"wrote {path}; max |margin - lp| = {worst:.3e}")
    return EXIT_OK


def cmd_dataset_gen(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    _write_resolved(cfg, out)
    ds = synthetic_dataset(cfg.synthetic_classes, cfg.synthetic_per_class,
                           cfg.synthetic_dim, cfg.synthetic_spread,
                           cfg.dataset_seed, cfg.synthetic_radius)
    path = out / "dataset.csv"
    write_dataset_file(path, ds)
    print(f"wrote {path} ({len(ds)} examples, {len(ds.class_ids)} classes)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embkit",
        description="Embedding-learning experiments: training, evaluation, "
                    "simulations, and the margin/isotonic equivalence check.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any configuration key (repeatable)")

    common(sub.add_parser("train", help="train an embedding network"))
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_sim = sub.add_parser("simulate", help="emit simulation tables")
    p_sim.add_argument("kind", choices=["density", "variance", "sampler-hist",
                                        "pairwise-hist", "stability"])
    common(p_sim)
    common(sub.add_parser("isotonic",
                          help="margin-risk vs LP equivalence sweep"))
    p_ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = p_ds.add_subparsers(dest="dataset_command", required=True)
    common(ds_sub.add_parser("gen", help="generate a synthetic dataset file"))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "simulate": cmd_simulate,
        "isotonic": cmd_isotonic,
        "dataset": cmd_dataset_gen,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: train, eval, infoplane, verify-bounds,
make-clusters, make-data.

Every subcommand validates its inputs, writes its outputs under --out, and
exits nonzero with a categorized message on any contract violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import clusters as cl
from . import datagen
from . import encoder as enc
from . import info as im
from . import pipeline as pl
from .data import load_dataset, load_hierarchy, save_dataset, save_hierarchy, split_dataset
from .errors import ClnceError, ParameterError


def _apply_thread_cap():
    cap = os.environ.get("CLNCE_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _load_run_config(path: str):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {"data", "hierarchy", "train", "train_fraction"}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    if "data" not in raw or "train" not in raw:
        raise ParameterError("config must contain 'data' and 'train'")
    d = load_dataset(raw["data"])
    if raw.get("hierarchy"):
        hierarchy = load_hierarchy(raw["hierarchy"])
        d = pl.Dataset(
            features=d.features, ids=d.ids, attributes=d.attributes,
            labels=d.labels, hierarchy=hierarchy,
        )
    cfg = pl.TrainConfig.from_dict(raw["train"])
    return d, cfg, float(raw.get("train_fraction", 0.7))


def _cmd_train(args) -> int:
    d, cfg, train_fraction = _load_run_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    train, eval_data = split_dataset(d, train_fraction, cfg.seed)
    ckpt = os.path.join(args.out, "checkpoint.bin")
    if cfg.cluster_source.get("source") == "kmeans":
        report = pl.train_kmeans_loop(train, cfg, eval_data=eval_data, checkpoint_path=ckpt)
    else:
        clusters = pl.build_clusters(train, cfg.cluster_source)
        report = pl.train_predetermined(
            train, clusters, cfg, eval_data=eval_data, checkpoint_path=ckpt
        )
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(os.path.join(args.out, "loss.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for e, v in enumerate(report.loss_curve, start=1):
            fh.write(f"{e},{v!r}\n")
    if report.info_plane_curve:
        im.save_info_plane_csv(
            report.info_plane_curve, os.path.join(args.out, "info_plane.csv")
        )
    print(f"final loss {report.loss_curve[-1]:.6f}", end="")
    if report.final_linear_accuracy is not None:
        print(f", linear accuracy {report.final_linear_accuracy:.4f}", end="")
    print(f"\ncheckpoint: {ckpt}")
    return 0


def _cmd_eval(args) -> int:
    model, _ = enc.load_checkpoint(args.checkpoint)
    train = load_dataset(args.train_data)
    eval_data = load_dataset(args.eval_data)
    acc = pl.linear_evaluate(
        model, train, eval_data, epochs=args.epochs, lr=args.lr, seed=args.seed
    )
    print(f"linear accuracy {acc:.4f}")
    return 0


def _cmd_infoplane(args) -> int:
    d, cfg, train_fraction = _load_run_config(args.config)
    with open(args.configs, encoding="utf-8") as fh:
        cluster_specs = json.load(fh)
    os.makedirs(args.out, exist_ok=True)
    points = pl.run_info_plane_experiment(
        d, cluster_specs, cfg, train_fraction=train_fraction,
        csv_path=os.path.join(args.out, "info_plane.csv"),
    )
    for p in points:
        score = im.selection_score(p)
        print(
            f"{p.config_label}: I(Z;T)={p.mi_zt:.4f} H(Z|T)={p.h_z_given_t:.4f} "
            f"score={score:.4f} acc={p.downstream_accuracy:.4f}"
        )
    return 0


def _cmd_verify_bounds(args) -> int:
    rng = np.random.default_rng(args.seed)
    all_ok = True
    for i in range(args.models):
        nz = int(rng.integers(1, 4))
        nx = int(rng.integers(2, 5))
        ny = int(rng.integers(2, 5))
        m = im.DiscreteJointModel.random(nz, nx, ny, seed=int(rng.integers(2**31)))
        report = im.verify_bound_chain(m, n=args.n)
        status = "ok" if report.all_inequalities_hold else "VIOLATED"
        print(
            f"model {i:3d} |Z|={nz} |X|={nx} |Y|={ny}: "
            f"obj={report.objective_at_fstar:.6f} kl={report.kl:.6f} "
            f"minMI={min(report.mi_zx, report.mi_zy):.6f} H(Z)={report.h_z:.6f} "
            f"[{status}]"
        )
        all_ok = all_ok and report.all_inequalities_hold
    print("all chains hold" if all_ok else "chain violation found")
    return 0 if all_ok else 1


def _cmd_make_clusters(args) -> int:
    d = load_dataset(args.data)
    if args.hierarchy:
        d = pl.Dataset(
            features=d.features, ids=d.ids, attributes=d.attributes,
            labels=d.labels, hierarchy=load_hierarchy(args.hierarchy),
        )
    spec = {"source": args.source}
    if args.source == "attributes":
        spec["k"] = args.k
    elif args.source == "hierarchy":
        spec["level"] = args.level
    elif args.source == "kmeans":
        spec["K"] = args.K
        spec["seed"] = args.seed
    clusters = pl.build_clusters(d, spec)
    cl.save_assignment(clusters, d.ids, args.out)
    print(f"{clusters.num_clusters} clusters ({clusters.provenance}) -> {args.out}")
    return 0


def _cmd_make_data(args) -> int:
    if args.preset == "mixture":
        d = datagen.make_mixture_dataset(seed=args.seed)
    elif args.preset == "blobs":
        d = datagen.make_blob_dataset(seed=args.seed)
    else:
        raise ParameterError(f"unknown preset {args.preset!r}")
    os.makedirs(args.out, exist_ok=True)
    data_path = os.path.join(args.out, f"{args.preset}.csv")
    save_dataset(d, data_path)
    if d.hierarchy is not None:
        save_hierarchy(d.hierarchy, os.path.join(args.out, f"{args.preset}_hierarchy.tsv"))
    print(f"wrote {d.num_samples} samples to {data_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clnce",
        description="Weakly-supervised contrastive learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an encoder with cluster-based contrast")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="linear-probe a frozen checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--eval-data", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("infoplane", help="sweep synthetic cluster configs")
    p.add_argument("--config", required=True)
    p.add_argument("--configs", required=True, help="JSON list of cluster specs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infoplane)

    p = sub.add_parser("verify-bounds", help="check the inequality chain exactly")
    p.add_argument("--models", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=3)
    p.set_defaults(func=_cmd_verify_bounds)

    p = sub.add_parser("make-clusters", help="export a cluster assignment CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--hierarchy", default=None)
    p.add_argument("--source", required=True,
                   choices=["attributes", "hierarchy", "kmeans", "labels", "instance_id"])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_clusters)

    p = sub.add_parser("make-data", help="generate a synthetic dataset CSV")
    p.add_argument("--preset", choices=["mixture", "blobs"], default="mixture")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_make_data)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ClnceError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

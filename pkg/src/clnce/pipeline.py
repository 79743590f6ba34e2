"""Training orchestration: the two clustering+contrastive loops, the linear
evaluation protocol, and the synthetic info-plane sweep.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import clusters as cl
from . import encoder as enc
from . import info as im
from . import objective as obj
from .data import AugmentConfig, Dataset, augment_rows, split_dataset
from .errors import DataError, NumericError, ParameterError


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    cluster_source: dict = field(default_factory=lambda: {"source": "labels"})
    temperature: float = 0.1
    peak_lr: float = 0.1
    momentum: float = 0.95
    weight_decay: float = 1e-4
    warmup_steps: int | None = None
    noise_sigma: float = 0.1
    mask_prob: float = 0.0
    recluster_every_epoch: bool = True
    encoder_widths: tuple = (128, 128)
    projection_widths: tuple = (64, 32)
    eval_epochs: int = 200
    eval_lr: float = 0.5

    def __post_init__(self):
        if self.batch_size < 2:
            raise ParameterError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        object.__setattr__(self, "encoder_widths", tuple(self.encoder_widths))
        object.__setattr__(self, "projection_widths", tuple(self.projection_widths))

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def critic(self) -> obj.CriticConfig:
        return obj.CriticConfig(temperature=self.temperature)

    def augment(self) -> AugmentConfig:
        return AugmentConfig(
            noise_sigma=self.noise_sigma, mask_prob=self.mask_prob, seed=self.seed
        )


@dataclass
class RunReport:
    loss_curve: list
    info_plane_curve: list
    final_linear_accuracy: float | None
    checkpoint_path: str | None
    kmeans_trace: list = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "loss_curve": self.loss_curve,
            "info_plane_curve": [dataclasses.asdict(p) for p in self.info_plane_curve],
            "final_linear_accuracy": self.final_linear_accuracy,
            "checkpoint_path": self.checkpoint_path,
            "kmeans_trace": self.kmeans_trace,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        raw = json.loads(text)
        return cls(
            loss_curve=raw["loss_curve"],
            info_plane_curve=[im.InfoPlanePoint(**p) for p in raw["info_plane_curve"]],
            final_linear_accuracy=raw["final_linear_accuracy"],
            checkpoint_path=raw["checkpoint_path"],
            kmeans_trace=raw.get("kmeans_trace", []),
        )


def build_clusters(d: Dataset, spec: dict, embeddings: np.ndarray | None = None):
    """Construct a ClusterAssignment from a cluster-source spec dict."""
    source = spec.get("source")
    if source == "labels":
        if d.labels is None:
            raise DataError("labels cluster source needs a labeled dataset")
        return cl.clusters_from_labels(d.labels)
    if source == "instance_id":
        return cl.clusters_instance_id(d.num_samples)
    if source == "attributes":
        if d.attributes is None:
            raise DataError("attributes cluster source needs an attribute matrix")
        return cl.clusters_from_attributes(d.attributes, int(spec["k"]))
    if source == "hierarchy":
        if d.hierarchy is None:
            raise DataError("hierarchy cluster source needs a hierarchy")
        tree = cl.prune_to_tree(d.hierarchy)
        return cl.clusters_from_hierarchy(tree, int(spec["level"]), d)
    if source == "kmeans":
        points = embeddings if embeddings is not None else d.features
        result = cl.kmeans(
            points,
            int(spec["K"]),
            max_iters=int(spec.get("max_iters", 100)),
            tol=float(spec.get("tol", 1e-8)),
            seed=int(spec.get("seed", 0)),
        )
        return result.assignment
    if source == "synthetic":
        if d.labels is None:
            raise DataError("synthetic cluster source needs labels")
        return cl.synthesize_clusters(
            d.labels, {k: v for k, v in spec.items() if k != "source"}
        )
    raise ParameterError(f"unknown cluster source {source!r}")


def _init_run(d: Dataset, cfg: TrainConfig):
    encoder_dims = [d.feature_dim, *cfg.encoder_widths]
    projection_dims = [encoder_dims[-1], *cfg.projection_widths]
    model = enc.init_model(encoder_dims, projection_dims, seed=cfg.seed)
    steps_per_epoch = max(1, d.num_samples // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    warmup = cfg.warmup_steps if cfg.warmup_steps is not None else max(1, total_steps // 10)
    hyper = enc.OptimizerHyper(
        peak_lr=cfg.peak_lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        warmup_steps=min(warmup, total_steps),
        total_steps=total_steps,
    )
    state = enc.OptimizerState.for_model(model, hyper)
    return model, state, steps_per_epoch


def _train_one_epoch(d, clusters, cfg, model, state, rng, steps_per_epoch) -> float:
    critic = cfg.critic()
    aug = cfg.augment()
    losses = []
    for _ in range(steps_per_epoch):
        batch = obj.sample_pair_batch(clusters, cfg.batch_size, rng)
        view_x = augment_rows(d.features[batch.x_indices], aug, rng)
        view_y = augment_rows(d.features[batch.y_indices], aug, rng)
        _, px, cache_x = enc.forward(model, view_x)
        _, py, cache_y = enc.forward(model, view_y)
        scores = obj.critic_matrix(px, py, critic)
        loss = obj.cl_infonce_loss(scores)
        if not np.isfinite(loss):
            raise NumericError(f"loss diverged at step {state.step_count}")
        g_scores = obj.cl_infonce_grad(scores)
        g_px, g_py = obj.critic_backward(g_scores, px, py, critic)
        grads = enc.add_grads(
            enc.backward(model, cache_x, g_px), enc.backward(model, cache_y, g_py)
        )
        enc.sgd_step(model, grads, state)
        losses.append(loss)
    return float(np.mean(losses))


def train_predetermined(
    d: Dataset,
    clusters: cl.ClusterAssignment,
    cfg: TrainConfig,
    eval_data: Dataset | None = None,
    checkpoint_path: str | None = None,
) -> RunReport:
    """Fixed clusters + contrastive training (the pre-determined-cluster loop)."""
    if clusters.num_samples != d.num_samples:
        raise DataError("cluster assignment does not cover the dataset")
    model, state, steps_per_epoch = _init_run(d, cfg)
    rng = np.random.default_rng(cfg.seed)
    loss_curve = []
    info_curve = []
    point = None
    if d.labels is not None:
        point = im.info_plane_point(
            clusters.assignment, d.labels, config_label=clusters.provenance
        )
    for _ in range(cfg.epochs):
        loss_curve.append(_train_one_epoch(d, clusters, cfg, model, state, rng, steps_per_epoch))
        if point is not None:
            info_curve.append(point)
    accuracy = None
    if eval_data is not None and d.labels is not None and eval_data.labels is not None:
        accuracy = linear_evaluate(
            model, d, eval_data, epochs=cfg.eval_epochs, lr=cfg.eval_lr, seed=cfg.seed
        )
    if checkpoint_path:
        enc.save_checkpoint(model, state, checkpoint_path)
    report = RunReport(loss_curve, info_curve, accuracy, checkpoint_path)
    report.model = model  # convenience for in-process callers
    return report


def train_kmeans_loop(
    d: Dataset,
    cfg: TrainConfig,
    eval_data: Dataset | None = None,
    checkpoint_path: str | None = None,
) -> RunReport:
    """Alternate k-means on current embeddings with contrastive updates.

    Clusters are recomputed before epoch 1 and after every epoch, so epoch e
    always trains against clusters from the encoder state after epoch e-1.
    """
    spec = cfg.cluster_source
    if spec.get("source") != "kmeans":
        raise ParameterError("train_kmeans_loop requires a kmeans cluster source")
    K = int(spec["K"])
    if K > d.num_samples:
        raise ParameterError("K exceeds the number of training samples")
    model, state, steps_per_epoch = _init_run(d, cfg)
    rng = np.random.default_rng(cfg.seed)

    def recluster():
        embeddings, _, _ = enc.forward(model, d.features)
        result = cl.kmeans(
            embeddings,
            K,
            max_iters=int(spec.get("max_iters", 50)),
            tol=float(spec.get("tol", 1e-8)),
            seed=cfg.seed,
        )
        return result

    result = recluster()
    clusters = result.assignment
    trace = [{"epoch": 0, "encoder_step_count": state.step_count,
              "inertia_history": list(result.inertia_history)}]
    loss_curve = []
    info_curve = []
    for epoch in range(1, cfg.epochs + 1):
        loss_curve.append(_train_one_epoch(d, clusters, cfg, model, state, rng, steps_per_epoch))
        if d.labels is not None:
            info_curve.append(
                im.info_plane_point(
                    clusters.assignment, d.labels,
                    config_label=f"{clusters.provenance}@epoch{epoch}",
                )
            )
        if cfg.recluster_every_epoch or epoch == cfg.epochs:
            result = recluster()
            clusters = result.assignment
            trace.append({"epoch": epoch, "encoder_step_count": state.step_count,
                          "inertia_history": list(result.inertia_history)})
    accuracy = None
    if eval_data is not None and d.labels is not None and eval_data.labels is not None:
        accuracy = linear_evaluate(
            model, d, eval_data, epochs=cfg.eval_epochs, lr=cfg.eval_lr, seed=cfg.seed
        )
    if checkpoint_path:
        enc.save_checkpoint(model, state, checkpoint_path)
    report = RunReport(loss_curve, info_curve, accuracy, checkpoint_path, kmeans_trace=trace)
    report.model = model
    return report


def linear_evaluate(
    model: enc.EncoderModel,
    train: Dataset,
    eval_data: Dataset,
    epochs: int = 200,
    lr: float = 0.5,
    seed: int = 0,
) -> float:
    """Top-1 accuracy of a multinomial-logistic probe on frozen encoder output.

    The projection head plays no part here; only the encoder embedding is
    read. Full-batch gradient descent from a zero init is deterministic.
    """
    if train.labels is None or eval_data.labels is None:
        raise DataError("linear evaluation needs labeled train and eval sets")
    x_train, _, _ = enc.forward(model, train.features)
    x_eval, _, _ = enc.forward(model, eval_data.features)
    # standardize with train statistics for a well-conditioned probe
    mu = x_train.mean(axis=0)
    sd = x_train.std(axis=0)
    sd[sd == 0] = 1.0
    x_train = (x_train - mu) / sd
    x_eval = (x_eval - mu) / sd
    n, dim = x_train.shape
    num_classes = max(train.num_classes, eval_data.num_classes)
    w = np.zeros((dim, num_classes))
    b = np.zeros(num_classes)
    y = train.labels
    onehot = np.eye(num_classes)[y]
    for _ in range(epochs):
        logits = x_train @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        g = (probs - onehot) / n
        w -= lr * (x_train.T @ g)
        b -= lr * g.sum(axis=0)
    preds = (x_eval @ w + b).argmax(axis=1)
    return float((preds == eval_data.labels).mean())


def run_info_plane_experiment(
    d: Dataset,
    configs: list,
    cfg: TrainConfig,
    train_fraction: float = 0.7,
    csv_path: str | None = None,
) -> list:
    """Train once per cluster config and emit an InfoPlanePoint per config."""
    if d.labels is None:
        raise DataError("info-plane experiment needs a labeled dataset")
    if len(configs) < 2:
        raise ParameterError("need at least 2 cluster configs")
    train, eval_data = split_dataset(d, train_fraction, cfg.seed)
    points = []
    for spec in configs:
        clusters = build_clusters(train, spec)
        report = train_predetermined(train, clusters, cfg, eval_data=eval_data)
        points.append(
            im.InfoPlanePoint(
                mi_zt=report.info_plane_curve[-1].mi_zt,
                h_z_given_t=report.info_plane_curve[-1].h_z_given_t,
                h_z=report.info_plane_curve[-1].h_z,
                downstream_accuracy=report.final_linear_accuracy,
                config_label=clusters.provenance,
            )
        )
    if csv_path:
        im.save_info_plane_csv(points, csv_path)
    return points

"""Training orchestration: robust warm-up, then joint epochs combining the
raw-label loss (robust on the ambiguous set, negative learning on the noisy
set), the pseudo-label loss on strongly augmented inputs, and the confidence
penalty; plus baselines, ablations and the low-resource semi-supervised mode.

The per-step objective lives in `step_objective`, a pure function of the
parameters and pre-computed batch data (augmented views, selection splits,
pseudo-labels). That keeps the training loop honest and lets tests freeze
the stochastic parts and finite-difference the whole pipeline.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from . import losses, nn, selection
from .data import UNLABELED, AugmentSpec, Dataset, NoiseSpec
from .losses import LossSpec
from .rng import stream

MODES = (
    "pars",
    "ce-baseline",
    "rl-only",
    "pars-no-pseudo",
    "pars-no-nl",
    "pars-ssl",
)
PENALTY_SCOPES = ("pseudo", "raw", "union")


@dataclass(frozen=True)
class TrainConfig:
    """Full experiment description for one run (one seed)."""

    dataset_kind: str = "blobs"
    num_classes: int = 5
    dim: int = 2
    per_class: int = 400
    spread: float = 1.0
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec("symmetric", 0.0))
    augment: AugmentSpec | None = None  # derived from spread when omitted
    mode: str = "pars"
    warmup_loss: LossSpec = field(default_factory=lambda: LossSpec(kind="apl"))
    ambiguous_loss: LossSpec | None = None  # defaults to warmup_loss
    tau: float = 0.95
    lambda_n: float = 0.1
    lambda_s: float = 1.0
    lambda_r: float = 1.0
    warmup_epochs: int = 10
    epochs: int = 60
    batch_size: int = 64
    pseudo_batch_factor: int = 3
    lr: float = 0.03
    momentum: float = 0.9
    weight_decay: float = 5e-4
    ema_decay: float = 0.999
    hidden: tuple = (64, 64)
    labeled_count: int | None = None  # required iff mode == "pars-ssl"
    penalty_scope: str = "pseudo"
    seed: int = 0

    def resolved_augment(self):
        return self.augment or AugmentSpec.for_spread(self.spread)

    def resolved_ambiguous_loss(self):
        return self.ambiguous_loss or self.warmup_loss

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if self.dataset_kind not in data_mod.GENERATOR_KINDS:
            raise ValueError(
                f"dataset.kind: must be one of {data_mod.GENERATOR_KINDS}, "
                f"got {self.dataset_kind!r}"
            )
        if self.num_classes < 2:
            raise ValueError("dataset.classes: must be >= 2")
        min_dim = 1 if self.dataset_kind == "blobs" else 2
        if self.dim < min_dim:
            raise ValueError(f"dataset.dim: must be >= {min_dim} for {self.dataset_kind}")
        if self.per_class < 1:
            raise ValueError("dataset.per_class: must be >= 1")
        if self.spread < 0:
            raise ValueError("dataset.spread: must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau: must be within [0, 1] (got {self.tau})")
        for name in ("lambda_n", "lambda_s", "lambda_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name}: must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs: must be >= 1")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError(
                f"warmup_epochs: must satisfy 0 <= warmup_epochs < epochs "
                f"(got {self.warmup_epochs} vs {self.epochs})"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.pseudo_batch_factor < 1:
            raise ValueError("pseudo_batch_factor: must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr: must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum: must be within [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay: must be >= 0")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ValueError("ema_decay: must be within [0, 1]")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden: layer widths must be >= 1")
        if self.penalty_scope not in PENALTY_SCOPES:
            raise ValueError(f"penalty_scope: must be one of {PENALTY_SCOPES}")
        self.noise.validate()
        self.resolved_augment().validate()
        self.warmup_loss.validate()
        self.resolved_ambiguous_loss().validate()
        if self.mode != "ce-baseline":
            if not self.warmup_loss.is_robust():
                raise ValueError(
                    f"warmup_loss: {self.warmup_loss.kind!r} is not a robust loss "
                    f"(expected one of {losses.ROBUST_KINDS})"
                )
            if not self.resolved_ambiguous_loss().is_robust():
                raise ValueError("ambiguous_loss: not a robust loss")
        n_train = self.num_classes * self.per_class
        if self.mode == "pars-ssl" and self.labeled_count is None:
            raise ValueError("labeled_count: required when mode is 'pars-ssl'")
        if self.labeled_count is not None:
            # Baselines may restrict to the same labeled subset so that
            # low-resource comparisons share their labels.
            if self.mode not in ("pars-ssl", "ce-baseline", "rl-only"):
                raise ValueError(
                    "labeled_count: only valid for pars-ssl, ce-baseline or rl-only"
                )
            if not 0 <= self.labeled_count <= n_train:
                raise ValueError(
                    f"labeled_count: must be within [0, {n_train}] "
                    f"(got {self.labeled_count})"
                )
        return self


@dataclass(frozen=True)
class MetricsRecord:
    """Per-epoch diagnostics. Loss components are unweighted term means over
    the epoch's steps; selection and pseudo-label statistics are measured on
    the full train split with the online network at the end of the epoch."""

    epoch: int
    lr: float
    test_acc_online: float
    test_acc_ema: float
    loss_raw_ambiguous: float
    loss_raw_negative: float
    loss_pseudo_positive: float
    loss_pseudo_negative: float
    loss_penalty: float
    ambiguous_count: int
    ambiguous_precision: float
    pseudo_label_accuracy: float

    CSV_COLUMNS = (
        "epoch",
        "lr",
        "test_acc_online",
        "test_acc_ema",
        "loss_raw_ambiguous",
        "loss_raw_negative",
        "loss_pseudo_positive",
        "loss_pseudo_negative",
        "loss_penalty",
        "ambiguous_count",
        "ambiguous_precision",
        "pseudo_label_accuracy",
    )

    def row(self):
        return [getattr(self, c) for c in self.CSV_COLUMNS]


@dataclass(frozen=True)
class StepTerms:
    """Unweighted values of the five loss terms on one step's batches."""

    raw_ambiguous: float = 0.0
    raw_negative: float = 0.0
    pseudo_positive: float = 0.0
    pseudo_negative: float = 0.0
    penalty: float = 0.0

    def total(self, lambda_n, lambda_s, lambda_r):
        raw = self.raw_ambiguous + lambda_n * self.raw_negative
        pseudo = self.pseudo_positive + lambda_n * self.pseudo_negative
        return raw + lambda_s * pseudo + lambda_r * self.penalty


@dataclass(frozen=True)
class TrainResult:
    records: list
    final_params: nn.ModelParams
    final_ema: nn.ModelParams
    best_params: nn.ModelParams
    best_ema: nn.ModelParams
    best_epoch_online: int
    best_epoch_ema: int
    best_acc_online: float
    best_acc_ema: float
    train_dataset: Dataset
    test_dataset: Dataset
    config: TrainConfig


def evaluate(params, dataset):
    """Top-1 accuracy on clean labels plus per-sample max confidences."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    probs = nn.predict_probs(params, dataset.features)
    accuracy = float((probs.argmax(axis=1) == dataset.clean_labels).mean())
    return accuracy, probs.max(axis=1)


def ssl_prepare(dataset, labeled_count, seed):
    """Keep noisy labels on a uniform subset, mark the rest unlabeled."""
    n = len(dataset)
    if not 0 <= labeled_count <= n:
        raise ValueError(f"labeled_count must be within [0, {n}]")
    out = dataset.copy()
    keep = stream(seed, "ssl").choice(n, size=labeled_count, replace=False)
    mask = np.ones(n, dtype=bool)
    mask[keep] = False
    out.noisy_labels[mask] = UNLABELED
    return out


# ---------------------------------------------------------------------------
# objectives


def supervised_objective(params, loss_spec, x, labels, want_grads=True):
    """Mean loss over a batch; gradients via one backward pass."""
    logits, cache = nn.forward_batch(params, x)
    probs = nn.softmax_batch(logits)
    values, g = losses.batch_eval(loss_spec, probs, labels)
    value = float(np.mean(values))
    if not want_grads:
        return value, None
    return value, nn.backward_batch(params, cache, g / len(labels))


def _labeled_subset(indices, labels):
    return indices[labels[indices] != UNLABELED]


def step_objective(
    params,
    robust_loss,
    raw_x,
    raw_labels,
    raw_split,
    pseudo_x,
    pseudo_split,
    pseudo_labels,
    lambda_n,
    lambda_s,
    lambda_r,
    prior,
    penalty_scope="pseudo",
    want_grads=True,
):
    """One joint-training step objective on pre-computed batch data.

    raw_x is the weakly augmented raw batch with its (noisy) labels and the
    selection split computed on the un-augmented inputs; pseudo_x is the
    strongly augmented pseudo batch with its split and generated labels.
    Unlabeled raw samples are excluded from the raw-label terms. Means over
    empty sets contribute zero. Returns (StepTerms, total, grads).
    """
    logits_r, cache_r = nn.forward_batch(params, raw_x)
    probs_r = nn.softmax_batch(logits_r)
    logits_p, cache_p = nn.forward_batch(params, pseudo_x)
    probs_p = nn.softmax_batch(logits_p)
    dl_r = np.zeros_like(logits_r)
    dl_p = np.zeros_like(logits_p)

    terms = {}
    amb = _labeled_subset(raw_split.ambiguous, raw_labels)
    if amb.size:
        values, g = losses.batch_eval(robust_loss, probs_r[amb], raw_labels[amb])
        terms["raw_ambiguous"] = float(np.mean(values))
        dl_r[amb] += g / amb.size
    noisy = _labeled_subset(raw_split.noisy, raw_labels)
    if noisy.size:
        values, g = losses.batch_eval(
            LossSpec(kind="nl"), probs_r[noisy], raw_labels[noisy]
        )
        terms["raw_negative"] = float(np.mean(values))
        dl_r[noisy] += lambda_n * g / noisy.size
    amb_p = pseudo_split.ambiguous
    if amb_p.size:
        values, g = losses.batch_eval(
            LossSpec(kind="ce"), probs_p[amb_p], pseudo_labels.positive[amb_p]
        )
        terms["pseudo_positive"] = float(np.mean(values))
        dl_p[amb_p] += lambda_s * g / amb_p.size
    noisy_p = pseudo_split.noisy
    if noisy_p.size:
        values, g = losses.batch_eval(
            LossSpec(kind="nl"), probs_p[noisy_p], pseudo_labels.complementary[noisy_p]
        )
        terms["pseudo_negative"] = float(np.mean(values))
        dl_p[noisy_p] += lambda_s * lambda_n * g / noisy_p.size

    if penalty_scope == "pseudo":
        scope = [(probs_p, dl_p)]
    elif penalty_scope == "raw":
        scope = [(probs_r, dl_r)]
    else:
        scope = [(probs_r, dl_r), (probs_p, dl_p)]
    scope = [(pr, dl) for pr, dl in scope if pr.shape[0] > 0]
    if scope:
        stacked = scope[0][0] if len(scope) == 1 else np.vstack([pr for pr, _ in scope])
        value, g = losses.batch_confidence_penalty(stacked, prior)
        terms["penalty"] = value
        offset = 0
        for pr, dl in scope:
            dl += lambda_r * g[offset : offset + pr.shape[0]]
            offset += pr.shape[0]

    out = StepTerms(**terms)
    total = out.total(lambda_n, lambda_s, lambda_r)
    if not want_grads:
        return out, total, None
    grads = nn.backward_batch(params, cache_r, dl_r)
    nn.add_grads(grads, nn.backward_batch(params, cache_p, dl_p))
    return out, total, grads


# ---------------------------------------------------------------------------
# epoch drivers


class TrainerState:
    """Mutable state of one training run (model, optimizer, RNG streams)."""

    def __init__(self, config, train_ds, test_ds):
        self.cfg = config
        self.train_ds = train_ds
        self.test_ds = test_ds
        self.aug = config.resolved_augment()
        self.robust_loss = config.resolved_ambiguous_loss()
        self.prior = losses.uniform_prior(config.num_classes)
        self.labeled_idx = np.flatnonzero(train_ds.labeled_mask)
        self.rng_batches = stream(config.seed, "batches")
        self.rng_weak = stream(config.seed, "augment", "weak")
        self.rng_strong = stream(config.seed, "augment", "strong")
        self.rng_pseudo = stream(config.seed, "pseudo")
        self.params = nn.init_mlp(
            train_ds.dim,
            config.hidden,
            config.num_classes,
            stream(config.seed, "model", "init"),
        )
        self.ema = nn.EmaParams.from_params(self.params, config.ema_decay)
        self.lambda_n = 0.0 if config.mode == "pars-no-nl" else config.lambda_n
        self.lambda_s = 0.0 if config.mode == "pars-no-pseudo" else config.lambda_s
        self.opt = nn.OptimState.for_params(
            self.params,
            sum(self._epoch_steps(e) for e in range(config.epochs)),
            config.lr,
            config.momentum,
            config.weight_decay,
        )

    def _epoch_kind(self, epoch):
        if self.cfg.mode in ("ce-baseline", "rl-only"):
            return "supervised"
        return "supervised" if epoch < self.cfg.warmup_epochs else "pars"

    def _epoch_steps(self, epoch):
        if self._epoch_kind(epoch) == "supervised":
            n = len(self.labeled_idx)
        else:
            n = len(self.train_ds)
        return max(1, math.ceil(n / self.cfg.batch_size)) if n else 0

    def supervised_loss_spec(self):
        if self.cfg.mode == "ce-baseline":
            return LossSpec(kind="ce")
        return self.cfg.warmup_loss


def _supervised_epoch(state):
    """One epoch of minibatch SGD on (weakly augmented x, noisy y)."""
    cfg = state.cfg
    spec = state.supervised_loss_spec()
    feats = state.train_ds.features
    labels = state.train_ds.noisy_labels
    order = state.rng_batches.permutation(state.labeled_idx)
    loss_sum, steps, first_lr = 0.0, 0, None
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        xw = data_mod.weak_augment_batch(feats[idx], state.aug, state.rng_weak)
        value, grads = supervised_objective(state.params, spec, xw, labels[idx])
        lr = nn.sgd_step(state.params, grads, state.opt)
        nn.ema_update(state.ema, state.params)
        first_lr = lr if first_lr is None else first_lr
        loss_sum += value
        steps += 1
    mean = loss_sum / steps if steps else 0.0
    return StepTerms(raw_ambiguous=mean), first_lr


def _pars_epoch(state):
    """One joint-training epoch over the full train split."""
    cfg = state.cfg
    feats = state.train_ds.features
    labels = state.train_ds.noisy_labels
    n = len(state.train_ds)
    pseudo_size = min(cfg.pseudo_batch_factor * cfg.batch_size, n)
    order = state.rng_batches.permutation(n)
    sums = np.zeros(5)
    steps, first_lr = 0, None
    for start in range(0, n, cfg.batch_size):
        raw_idx = order[start : start + cfg.batch_size]
        pseudo_idx = state.rng_batches.choice(n, size=pseudo_size, replace=False)
        # Selection and pseudo-labels read the online net on un-augmented inputs.
        probs_raw = nn.predict_probs(state.params, feats[raw_idx])
        probs_pseudo = nn.predict_probs(state.params, feats[pseudo_idx])
        raw_split = selection.select(probs_raw, cfg.tau)
        pseudo_split = selection.select(probs_pseudo, cfg.tau)
        pseudo_lbl = selection.make_pseudo(probs_pseudo, state.rng_pseudo)
        xw = data_mod.weak_augment_batch(feats[raw_idx], state.aug, state.rng_weak)
        xs = data_mod.strong_augment_batch(
            feats[pseudo_idx], state.aug, state.rng_strong
        )
        terms, _, grads = step_objective(
            state.params,
            state.robust_loss,
            xw,
            labels[raw_idx],
            raw_split,
            xs,
            pseudo_split,
            pseudo_lbl,
            state.lambda_n,
            state.lambda_s,
            cfg.lambda_r,
            state.prior,
            cfg.penalty_scope,
        )
        lr = nn.sgd_step(state.params, grads, state.opt)
        nn.ema_update(state.ema, state.params)
        first_lr = lr if first_lr is None else first_lr
        sums += (
            terms.raw_ambiguous,
            terms.raw_negative,
            terms.pseudo_positive,
            terms.pseudo_negative,
            terms.penalty,
        )
        steps += 1
    means = sums / steps if steps else sums
    return StepTerms(*means), first_lr


def _epoch_record(state, epoch, terms, lr):
    cfg = state.cfg
    train_ds = state.train_ds
    probs = nn.predict_probs(state.params, train_ds.features)
    max_conf = probs.max(axis=1)
    amb_mask = max_conf > cfg.tau
    sel = amb_mask & train_ds.labeled_mask
    if sel.any():
        precision = float(
            (train_ds.noisy_labels[sel] == train_ds.clean_labels[sel]).mean()
        )
    else:
        precision = 0.0
    pseudo_acc = float((probs.argmax(axis=1) == train_ds.clean_labels).mean())
    acc_online, _ = evaluate(state.params, state.test_ds)
    acc_ema, _ = evaluate(state.ema.params, state.test_ds)
    return MetricsRecord(
        epoch=epoch,
        lr=lr if lr is not None else float("nan"),
        test_acc_online=acc_online,
        test_acc_ema=acc_ema,
        loss_raw_ambiguous=terms.raw_ambiguous,
        loss_raw_negative=terms.raw_negative,
        loss_pseudo_positive=terms.pseudo_positive,
        loss_pseudo_negative=terms.pseudo_negative,
        loss_penalty=terms.penalty,
        ambiguous_count=int(amb_mask.sum()),
        ambiguous_precision=precision,
        pseudo_label_accuracy=pseudo_acc,
    )


def warmup(state, on_epoch=None):
    """Robust warm-up epochs (none when warmup_epochs == 0)."""
    records = []
    for epoch in range(state.cfg.warmup_epochs):
        terms, lr = _supervised_epoch(state)
        records.append(_epoch_record(state, epoch, terms, lr))
        if on_epoch is not None:
            on_epoch(records[-1])
    return records


def pars_epoch(state, epoch):
    """One joint-training epoch plus its metrics record."""
    terms, lr = _pars_epoch(state)
    return _epoch_record(state, epoch, terms, lr)


def build_datasets(config):
    """Generate the train/test pair and apply noise (and SSL masking)."""
    train_ds, test_ds = data_mod.generate(
        config.dataset_kind,
        config.num_classes,
        config.dim,
        config.per_class,
        config.spread,
        config.seed,
    )
    if config.noise.ratio > 0:
        train_ds = data_mod.inject_noise(train_ds, config.noise, config.seed)
    if config.labeled_count is not None:
        # The subset depends only on the seed, so baselines sharing a seed
        # train on exactly the labels the SSL run sees.
        train_ds = ssl_prepare(train_ds, config.labeled_count, config.seed)
    return train_ds, test_ds


class _BestTracker:
    """Keeps the best-accuracy epochs and parameter snapshots."""

    def __init__(self, state):
        self.state = state
        self.online = (-1.0, -1, None)
        self.ema = (-1.0, -1, None)

    def note(self, record):
        if record.test_acc_online > self.online[0]:
            self.online = (
                record.test_acc_online,
                record.epoch,
                self.state.params.copy(),
            )
        if record.test_acc_ema > self.ema[0]:
            self.ema = (
                record.test_acc_ema,
                record.epoch,
                self.state.ema.params.copy(),
            )


def train(config):
    """Run the configured mode end to end; deterministic given the seed."""
    config.validate()
    train_ds, test_ds = build_datasets(config)
    state = TrainerState(config, train_ds, test_ds)
    tracker = _BestTracker(state)
    records = []
    if config.mode in ("ce-baseline", "rl-only"):
        for epoch in range(config.epochs):
            terms, lr = _supervised_epoch(state)
            records.append(_epoch_record(state, epoch, terms, lr))
            tracker.note(records[-1])
    else:
        records.extend(warmup(state, on_epoch=tracker.note))
        for epoch in range(config.warmup_epochs, config.epochs):
            records.append(pars_epoch(state, epoch))
            tracker.note(records[-1])

    return TrainResult(
        records=records,
        final_params=state.params,
        final_ema=state.ema.params,
        best_params=tracker.online[2],
        best_ema=tracker.ema[2],
        best_epoch_online=tracker.online[1],
        best_epoch_ema=tracker.ema[1],
        best_acc_online=tracker.online[0],
        best_acc_ema=tracker.ema[0],
        train_dataset=train_ds,
        test_dataset=test_ds,
        config=config,
    )

"""Experiment config files: strict JSON schema with defaults and resolution.

Configs are plain JSON mirroring TrainConfig plus an output directory and a
seed list. Validation is strict (unknown keys are rejected) and every error
is a one-line message naming the offending key. A resolved config has every
default filled in, so it fully determines the run.
"""

import json

from .data import AugmentSpec, NoiseSpec
from .losses import LossSpec
from .trainer import MODES, PENALTY_SCOPES, TrainConfig


class ConfigError(ValueError):
    """Config problem; the message starts with the offending key."""


_DATASET_KEYS = {"kind", "classes", "dim", "per_class", "spread"}
_NOISE_KEYS = {"kind", "ratio"}
_AUGMENT_KEYS = {"weak_sigma", "strong_sigma", "mask_prob", "count"}
_TOP_KEYS = {
    "out_dir",
    "seeds",
    "dataset",
    "noise",
    "augment",
    "mode",
    "warmup_loss",
    "ambiguous_loss",
    "tau",
    "lambda_n",
    "lambda_s",
    "lambda_r",
    "warmup_epochs",
    "epochs",
    "batch_size",
    "pseudo_batch_factor",
    "lr",
    "momentum",
    "weight_decay",
    "ema_decay",
    "hidden",
    "labeled_count",
    "penalty_scope",
}

_DEFAULT_WARMUP_LOSS = {
    "kind": "apl",
    "active": "nce",
    "passive": "mae",
    "alpha": 1.0,
    "beta": 1.0,
}


def _reject_unknown(obj, allowed, path):
    unknown = set(obj) - allowed
    if unknown:
        key = sorted(unknown)[0]
        where = f"{path}.{key}" if path else key
        raise ConfigError(f"{where}: unknown key")


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: must be an integer (got {value!r})")
    return value


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: must be a number (got {value!r})")
    return float(value)


def _as_str(value, path):
    if not isinstance(value, str):
        raise ConfigError(f"{path}: must be a string (got {value!r})")
    return value.strip().lower()


def _as_obj(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: must be an object")
    return value


def _parse_loss(value, path):
    try:
        return LossSpec.parse(value)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path):
    """Read a JSON config file; errors name the path."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    return raw


def resolve_config(raw):
    """Validate a raw config dict and fill in every default.

    Returns a plain dict that round-trips through JSON and fully determines
    the run (augmentation defaults are materialized to absolute values).
    """
    _reject_unknown(raw, _TOP_KEYS, "")

    dataset = _as_obj(raw.get("dataset", {}), "dataset")
    _reject_unknown(dataset, _DATASET_KEYS, "dataset")
    kind = _as_str(dataset.get("kind", "blobs"), "dataset.kind")
    classes = _as_int(dataset.get("classes", 5), "dataset.classes")
    dim = _as_int(dataset.get("dim", 2), "dataset.dim")
    per_class = _as_int(dataset.get("per_class", 400), "dataset.per_class")
    spread = _as_float(dataset.get("spread", 1.0), "dataset.spread")

    noise = _as_obj(raw.get("noise", {}), "noise")
    _reject_unknown(noise, _NOISE_KEYS, "noise")
    noise_spec = NoiseSpec(
        _as_str(noise.get("kind", "symmetric"), "noise.kind"),
        _as_float(noise.get("ratio", 0.0), "noise.ratio"),
    )

    if "augment" in raw:
        aug_obj = _as_obj(raw["augment"], "augment")
        _reject_unknown(aug_obj, _AUGMENT_KEYS, "augment")
        base = AugmentSpec.for_spread(spread)
        augment = AugmentSpec(
            _as_float(aug_obj.get("weak_sigma", base.weak_sigma), "augment.weak_sigma"),
            _as_float(
                aug_obj.get("strong_sigma", base.strong_sigma), "augment.strong_sigma"
            ),
            _as_float(aug_obj.get("mask_prob", base.mask_prob), "augment.mask_prob"),
            _as_int(aug_obj.get("count", base.count), "augment.count"),
        )
    else:
        augment = AugmentSpec.for_spread(spread)

    warmup_loss = _parse_loss(raw.get("warmup_loss", _DEFAULT_WARMUP_LOSS), "warmup_loss")
    ambiguous_loss = (
        _parse_loss(raw["ambiguous_loss"], "ambiguous_loss")
        if "ambiguous_loss" in raw
        else warmup_loss
    )

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds: must be a non-empty list of integers")
    seeds = [_as_int(s, "seeds") for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds: entries must be distinct")

    hidden = raw.get("hidden", [64, 64])
    if not isinstance(hidden, list):
        raise ConfigError("hidden: must be a list of layer widths")
    hidden = [_as_int(h, "hidden") for h in hidden]

    labeled_count = raw.get("labeled_count")
    if labeled_count is not None:
        labeled_count = _as_int(labeled_count, "labeled_count")

    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir: must be a string path")

    cfg = TrainConfig(
        dataset_kind=kind,
        num_classes=classes,
        dim=dim,
        per_class=per_class,
        spread=spread,
        noise=noise_spec,
        augment=augment,
        mode=_as_str(raw.get("mode", "pars"), "mode"),
        warmup_loss=warmup_loss,
        ambiguous_loss=ambiguous_loss,
        tau=_as_float(raw.get("tau", 0.95), "tau"),
        lambda_n=_as_float(raw.get("lambda_n", 0.1), "lambda_n"),
        lambda_s=_as_float(raw.get("lambda_s", 1.0), "lambda_s"),
        lambda_r=_as_float(raw.get("lambda_r", 1.0), "lambda_r"),
        warmup_epochs=_as_int(raw.get("warmup_epochs", 10), "warmup_epochs"),
        epochs=_as_int(raw.get("epochs", 60), "epochs"),
        batch_size=_as_int(raw.get("batch_size", 64), "batch_size"),
        pseudo_batch_factor=_as_int(
            raw.get("pseudo_batch_factor", 3), "pseudo_batch_factor"
        ),
        lr=_as_float(raw.get("lr", 0.03), "lr"),
        momentum=_as_float(raw.get("momentum", 0.9), "momentum"),
        weight_decay=_as_float(raw.get("weight_decay", 5e-4), "weight_decay"),
        ema_decay=_as_float(raw.get("ema_decay", 0.999), "ema_decay"),
        hidden=tuple(hidden),
        labeled_count=labeled_count,
        penalty_scope=_as_str(raw.get("penalty_scope", "pseudo"), "penalty_scope"),
        seed=seeds[0],
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    resolved = {
        "out_dir": out_dir,
        "seeds": seeds,
        "dataset": {
            "kind": kind,
            "classes": classes,
            "dim": dim,
            "per_class": per_class,
            "spread": spread,
        },
        "noise": {"kind": noise_spec.kind, "ratio": noise_spec.ratio},
        "augment": {
            "weak_sigma": augment.weak_sigma,
            "strong_sigma": augment.strong_sigma,
            "mask_prob": augment.mask_prob,
            "count": augment.count,
        },
        "mode": cfg.mode,
        "warmup_loss": warmup_loss.to_dict(),
        "ambiguous_loss": ambiguous_loss.to_dict(),
        "tau": cfg.tau,
        "lambda_n": cfg.lambda_n,
        "lambda_s": cfg.lambda_s,
        "lambda_r": cfg.lambda_r,
        "warmup_epochs": cfg.warmup_epochs,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "pseudo_batch_factor": cfg.pseudo_batch_factor,
        "lr": cfg.lr,
        "momentum": cfg.momentum,
        "weight_decay": cfg.weight_decay,
        "ema_decay": cfg.ema_decay,
        "hidden": list(cfg.hidden),
        "labeled_count": labeled_count,
        "penalty_scope": cfg.penalty_scope,
    }
    return resolved


def build_train_config(resolved, seed):
    """TrainConfig for one seed of a resolved config."""
    ds = resolved["dataset"]
    return TrainConfig(
        dataset_kind=ds["kind"],
        num_classes=ds["classes"],
        dim=ds["dim"],
        per_class=ds["per_class"],
        spread=ds["spread"],
        noise=NoiseSpec(resolved["noise"]["kind"], resolved["noise"]["ratio"]),
        augment=AugmentSpec(**resolved["augment"]),
        mode=resolved["mode"],
        warmup_loss=LossSpec.parse(resolved["warmup_loss"]),
        ambiguous_loss=LossSpec.parse(resolved["ambiguous_loss"]),
        tau=resolved["tau"],
        lambda_n=resolved["lambda_n"],
        lambda_s=resolved["lambda_s"],
        lambda_r=resolved["lambda_r"],
        warmup_epochs=resolved["warmup_epochs"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch_size"],
        pseudo_batch_factor=resolved["pseudo_batch_factor"],
        lr=resolved["lr"],
        momentum=resolved["momentum"],
        weight_decay=resolved["weight_decay"],
        ema_decay=resolved["ema_decay"],
        hidden=tuple(resolved["hidden"]),
        labeled_count=resolved["labeled_count"],
        penalty_scope=resolved["penalty_scope"],
        seed=seed,
    ).validate()


def set_by_path(resolved, param, value):
    """Override a (possibly dotted) numeric key in a resolved config."""
    node = resolved
    parts = param.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"param: no config key named {param!r}")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"param: no config key named {param!r}")
    current = node[leaf]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(f"param: {param!r} is not a numeric key")
    if isinstance(current, int):
        if float(value) != int(value):
            raise ConfigError(f"param: {param!r} takes integer values")
        node[leaf] = int(value)
    else:
        node[leaf] = float(value)
    return resolved

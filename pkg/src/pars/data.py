"""Synthetic datasets, label-noise injection, augmentation analogs, CSV I/O.

The generators are desk-scale stand-ins for image benchmarks: Gaussian
blobs, interleaved spirals and concentric rings in feature space. Noise
injection follows two conventions: symmetric noise flips a chosen fraction
of labels uniformly to a *different* class; asymmetric noise maps class k
to (k+1) mod K for the chosen fraction.

Augmentations are vector-space analogs of the usual image transforms (the
method only needs a weak/strong asymmetry): weak = Gaussian jitter, strong
= larger jitter plus random feature masking, composed a fixed number of
times. This analog is a modeling choice, not something the underlying
method prescribes for non-image data.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .rng import stream

UNLABELED = -1

GENERATOR_KINDS = ("blobs", "spiral", "rings")
NOISE_KINDS = ("symmetric", "asymmetric")

# Blob centers sit on a circle of this radius (first two feature dims);
# "spread" is the per-coordinate Gaussian scale around them.
_BLOB_RADIUS = 4.0


class DatasetFormatError(ValueError):
    """Raised for malformed dataset CSV files."""


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    clean_label: int
    noisy_label: int  # UNLABELED marks an unlabeled sample (SSL mode)
    id: int


@dataclass
class Dataset:
    features: np.ndarray  # (n, dim) float64
    clean_labels: np.ndarray  # (n,) int64
    noisy_labels: np.ndarray  # (n,) int64, UNLABELED allowed on train splits
    num_classes: int
    split: str = "train"

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def labeled_mask(self):
        return self.noisy_labels != UNLABELED

    def sample(self, i):
        return Sample(
            self.features[i],
            int(self.clean_labels[i]),
            int(self.noisy_labels[i]),
            int(i),
        )

    def validate(self):
        n = len(self)
        if self.features.ndim != 2 or not np.isfinite(self.features).all():
            raise ValueError("features must be a finite (n, dim) array")
        if self.clean_labels.shape != (n,) or self.noisy_labels.shape != (n,):
            raise ValueError("label arrays must match the number of samples")
        k = self.num_classes
        if self.clean_labels.size and not (
            (self.clean_labels >= 0).all() and (self.clean_labels < k).all()
        ):
            raise ValueError(f"clean labels out of range for {k} classes")
        bad = (self.noisy_labels < UNLABELED) | (self.noisy_labels >= k)
        if bad.any():
            raise ValueError(f"noisy labels out of range for {k} classes")
        if self.split == "test" and not np.array_equal(
            self.clean_labels, self.noisy_labels
        ):
            raise ValueError("test split must keep noisy_label == clean_label")
        return self

    def copy(self):
        return Dataset(
            self.features.copy(),
            self.clean_labels.copy(),
            self.noisy_labels.copy(),
            self.num_classes,
            self.split,
        )


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    ratio: float

    def validate(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("noise ratio must be within [0, 1]")
        return self


@dataclass(frozen=True)
class AugmentSpec:
    weak_sigma: float
    strong_sigma: float
    mask_prob: float = 0.1
    count: int = 2  # strong augmentation rounds applied compositionally

    def validate(self):
        if self.weak_sigma < 0 or self.strong_sigma < self.weak_sigma:
            raise ValueError("need 0 <= weak_sigma <= strong_sigma")
        if not 0.0 <= self.mask_prob < 1.0:
            raise ValueError("mask_prob must be within [0, 1)")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        return self

    @classmethod
    def for_spread(cls, spread, mask_prob=0.1, count=2):
        return cls(0.05 * spread, 0.2 * spread, mask_prob, count)


# ---------------------------------------------------------------------------
# generation


def _blob_centers(num_classes, dim):
    centers = np.zeros((num_classes, dim))
    if dim == 1:
        centers[:, 0] = _BLOB_RADIUS * (np.arange(num_classes) - (num_classes - 1) / 2.0)
    elif dim == 2:
        ang = 2.0 * np.pi * np.arange(num_classes) / num_classes
        centers[:, 0] = _BLOB_RADIUS * np.cos(ang)
        centers[:, 1] = _BLOB_RADIUS * np.sin(ang)
    else:
        # Spread centers out in the full feature space: rows of a fixed
        # random Gaussian matrix, orthonormalized when dim allows, are
        # near-uniform directions on the sphere. Deterministic in (K, dim).
        rng = np.random.default_rng(
            np.random.SeedSequence([0x62106273, num_classes, dim])
        )
        gauss = rng.normal(size=(num_classes, dim))
        if dim >= num_classes:
            q, _ = np.linalg.qr(gauss.T)
            directions = q.T[:num_classes]
        else:
            directions = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
        centers = _BLOB_RADIUS * directions
    return centers


def _draw_split(kind, num_classes, dim, per_class, spread, rng, split):
    n = num_classes * per_class
    labels = np.repeat(np.arange(num_classes), per_class)
    if kind == "blobs":
        feats = _blob_centers(num_classes, dim)[labels] + rng.normal(
            0.0, spread, size=(n, dim)
        )
    elif kind == "spiral":
        r = rng.uniform(0.5, 4.0, size=n)
        theta = (
            2.0 * np.pi * labels / num_classes
            + 0.9 * r
            + rng.normal(0.0, 0.25 * spread, size=n)
        )
        feats = rng.normal(0.0, 0.25 * spread, size=(n, dim))
        feats[:, 0] += r * np.cos(theta)
        feats[:, 1] += r * np.sin(theta)
    elif kind == "rings":
        radius = 1.5 * (labels + 1.0)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        feats = rng.normal(0.0, 0.25 * spread, size=(n, dim))
        feats[:, 0] += radius * np.cos(theta)
        feats[:, 1] += radius * np.sin(theta)
    else:
        raise ValueError(f"unsupported generator kind {kind!r}")
    order = rng.permutation(n)
    feats = np.ascontiguousarray(feats[order])
    labels = labels[order]
    return Dataset(feats, labels.copy(), labels.copy(), num_classes, split).validate()


def generate(kind, num_classes, dim, per_class, spread, seed):
    """Train/test pair, deterministic in seed, classes balanced.

    The test split is an i.i.d. draw of the same size from the same
    distribution; its noisy labels equal the clean ones.
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("need at least 1 sample per class")
    if dim < 1:
        raise ValueError("need at least 1 feature dimension")
    if spread < 0:
        raise ValueError("spread must be >= 0")
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unsupported generator kind {kind!r}")
    if kind in ("spiral", "rings") and dim < 2:
        raise ValueError(f"{kind} generator needs dim >= 2")
    train = _draw_split(
        kind, num_classes, dim, per_class, spread, stream(seed, "data", kind, "train"), "train"
    )
    test = _draw_split(
        kind, num_classes, dim, per_class, spread, stream(seed, "data", kind, "test"), "test"
    )
    return train, test


# ---------------------------------------------------------------------------
# label noise


def _pick_flipped(n, ratio, rng):
    count = int(round(ratio * n))
    return rng.choice(n, size=count, replace=False)


def inject_symmetric(dataset, ratio, seed):
    """Flip a fraction `ratio` of labels uniformly to one of the K-1 others."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("noise ratio must be within [0, 1]")
    if dataset.split != "train" or not dataset.labeled_mask.all():
        raise ValueError("noise injection needs a fully labeled train split")
    out = dataset.copy()
    rng = stream(seed, "noise", "symmetric")
    flip = _pick_flipped(len(out), ratio, rng)
    if flip.size:
        k = out.num_classes
        offset = rng.integers(1, k, size=flip.size)
        out.noisy_labels[flip] = (out.clean_labels[flip] + offset) % k
    return out


def inject_asymmetric(dataset, ratio, seed):
    """Map label k to (k+1) mod K for a fraction `ratio` of the samples."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("noise ratio must be within [0, 1]")
    if dataset.split != "train" or not dataset.labeled_mask.all():
        raise ValueError("noise injection needs a fully labeled train split")
    out = dataset.copy()
    rng = stream(seed, "noise", "asymmetric")
    flip = _pick_flipped(len(out), ratio, rng)
    if flip.size:
        out.noisy_labels[flip] = (out.clean_labels[flip] + 1) % out.num_classes
    return out


def inject_noise(dataset, spec, seed):
    spec.validate()
    if spec.kind == "symmetric":
        return inject_symmetric(dataset, spec.ratio, seed)
    return inject_asymmetric(dataset, spec.ratio, seed)


# ---------------------------------------------------------------------------
# augmentation analogs


def weak_augment_batch(x, spec, rng):
    return x + rng.normal(0.0, spec.weak_sigma, size=x.shape)


def strong_augment_batch(x, spec, rng):
    out = np.array(x, dtype=np.float64)
    for _ in range(spec.count):
        out += rng.normal(0.0, spec.strong_sigma, size=out.shape)
        out[rng.random(out.shape) < spec.mask_prob] = 0.0
    return out


def weak_augment(x, spec, rng):
    """Weak view: Gaussian jitter with scale weak_sigma."""
    return weak_augment_batch(np.asarray(x, dtype=np.float64)[None, :], spec, rng)[0]


def strong_augment(x, spec, rng):
    """Strong view: jitter + feature masking, `count` rounds composed."""
    return strong_augment_batch(np.asarray(x, dtype=np.float64)[None, :], spec, rng)[0]


# ---------------------------------------------------------------------------
# CSV dataset files


def save_csv(dataset, path):
    """Write id,f_0..f_{D-1},clean_label,noisy_label rows (17 sig. digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id"]
            + [f"f_{j}" for j in range(dataset.dim)]
            + ["clean_label", "noisy_label"]
        )
        for i in range(len(dataset)):
            writer.writerow(
                [i]
                + [f"{v:.17g}" for v in dataset.features[i]]
                + [int(dataset.clean_labels[i]), int(dataset.noisy_labels[i])]
            )


def load_csv(path, num_classes=None, split="train"):
    """Inverse of save_csv. Malformed rows raise with their line number.

    When num_classes is omitted it is inferred from the largest label seen.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError("line 1: missing header row") from None
        if (
            len(header) < 4
            or header[0] != "id"
            or header[-2:] != ["clean_label", "noisy_label"]
            or header[1:-2] != [f"f_{j}" for j in range(len(header) - 3)]
        ):
            raise DatasetFormatError("line 1: malformed header row")
        dim = len(header) - 3
        feats, clean, noisy = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                feats.append([float(v) for v in row[1:-2]])
                clean.append(int(row[-2]))
                noisy.append(int(row[-1]))
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            if not all(np.isfinite(feats[-1])):
                raise DatasetFormatError(f"line {lineno}: non-finite feature value")
    clean = np.asarray(clean, dtype=np.int64)
    noisy = np.asarray(noisy, dtype=np.int64)
    if num_classes is None:
        num_classes = int(max(clean.max(initial=0), noisy.max(initial=0)) + 1)
    ds = Dataset(
        np.asarray(feats, dtype=np.float64).reshape(len(clean), dim),
        clean,
        noisy,
        int(num_classes),
        split,
    )
    try:
        return ds.validate()
    except ValueError as exc:
        raise DatasetFormatError(str(exc)) from None

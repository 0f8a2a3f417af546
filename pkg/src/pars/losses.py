"""Loss functions on softmax probabilities with analytic logit gradients.

Covers plain cross entropy (positive learning), MAE, reverse CE, focal loss,
symmetric CE, the normalized variants (NCE/NFL/NMAE/NRCE), active-passive
combinations, negative learning on complementary labels, and the batch-level
confidence penalty (KL of a prior from the mean prediction).

All gradients are with respect to the *logits* feeding the softmax, so they
can be pushed straight into the MLP backward pass. Per-sample losses return
a (K,) gradient; the confidence penalty returns an (n, K) gradient spread
over the batch that produced the mean prediction.

Probabilities are clamped to [1e-7, 1] before any logarithm; the reverse-CE
log-zero constant is A = -4, which makes rce(p, y) = 4*(1 - p_y) and keeps
the usual sce/apl weighting conventions intact.
"""

from dataclasses import dataclass

import numpy as np

from .nn import PROB_EPS

# Reverse cross entropy treats log(0) on the one-hot label side as A = -4.
RCE_LOG_ZERO = -4.0

ACTIVE_KINDS = ("ce", "nce", "fl", "nfl")
PASSIVE_KINDS = ("mae", "nmae", "rce", "nrce")
# Losses eligible for robust warm-up / ambiguous-set training.
ROBUST_KINDS = ("mae", "sce", "nce", "apl")
ALL_KINDS = ("ce", "pl", "mae", "rce", "fl", "sce", "nce", "nfl", "nmae", "nrce", "apl", "nl")


@dataclass(frozen=True)
class LossOutput:
    """Loss value plus gradient w.r.t. logits ((K,) or (n, K) for the penalty)."""

    value: float
    dlogits: np.ndarray


@dataclass(frozen=True)
class LossSpec:
    """Tagged loss choice, expressible in experiment configs.

    gamma is the focal exponent (fl/nfl, including as an apl active part);
    alpha/beta weight the two parts of sce and apl; active/passive name the
    apl components.
    """

    kind: str
    gamma: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    active: str = "nce"
    passive: str = "mae"

    def validate(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.kind == "apl":
            if self.active not in ACTIVE_KINDS:
                raise ValueError(
                    f"apl active part must be one of {ACTIVE_KINDS}, got {self.active!r}"
                )
            if self.passive not in PASSIVE_KINDS:
                raise ValueError(
                    f"apl passive part must be one of {PASSIVE_KINDS}, got {self.passive!r}"
                )
        return self

    def is_robust(self):
        return self.kind in ROBUST_KINDS

    @classmethod
    def parse(cls, obj):
        """Build from a config value: either a kind string or a dict."""
        if isinstance(obj, str):
            return cls(kind=obj.strip().lower()).validate()
        if not isinstance(obj, dict):
            raise ValueError("loss spec must be a name or an object")
        allowed = {"kind", "gamma", "alpha", "beta", "active", "passive"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown loss spec key {sorted(unknown)[0]!r}")
        if "kind" not in obj:
            raise ValueError("loss spec requires 'kind'")
        kwargs = {"kind": str(obj["kind"]).strip().lower()}
        for key in ("gamma", "alpha", "beta"):
            if key in obj:
                kwargs[key] = float(obj[key])
        for key in ("active", "passive"):
            if key in obj:
                kwargs[key] = str(obj[key]).strip().lower()
        return cls(**kwargs).validate()

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind in ("fl", "nfl"):
            out["gamma"] = self.gamma
        if self.kind in ("sce", "apl"):
            out["alpha"] = self.alpha
            out["beta"] = self.beta
        if self.kind == "apl":
            out["active"] = self.active
            out["passive"] = self.passive
            if self.active in ("fl", "nfl"):
                out["gamma"] = self.gamma
        return out


# ---------------------------------------------------------------------------
# input checks


def _clamp(p):
    return np.clip(p, PROB_EPS, 1.0)


def _as_prob_vector(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("probability vector must be 1-d")
    if not np.isfinite(p).all() or (p < 0).any():
        raise ValueError("probability vector entries must be finite and >= 0")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("probability vector must sum to 1 within 1e-6")
    return p


def _check_labels(y, k):
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"label index out of range for {k} classes")
    return y


# ---------------------------------------------------------------------------
# batched implementations (P is (n, K), y is (n,))


def _label_grad(s, py, p, y):
    """Gradient of a loss depending on p_y only, given s_i = dval_i/dp_y.

    d/df_j = s * p_y * (delta_{yj} - p_j).
    """
    g = -(s * py)[:, None] * p
    g[np.arange(p.shape[0]), y] += s * py
    return g


def _batch_ce(p, y):
    idx = np.arange(p.shape[0])
    values = -np.log(_clamp(p[idx, y]))
    g = p.copy()
    g[idx, y] -= 1.0
    return values, g


def _batch_mae(p, y):
    idx = np.arange(p.shape[0])
    py = p[idx, y]
    values = 2.0 * (1.0 - py)
    return values, _label_grad(np.full_like(py, -2.0), py, p, y)


def _batch_rce(p, y):
    idx = np.arange(p.shape[0])
    py = p[idx, y]
    values = -RCE_LOG_ZERO * (1.0 - py)
    return values, _label_grad(np.full_like(py, RCE_LOG_ZERO), py, p, y)


def _focal_terms(p, gamma):
    """Per-entry focal value and its derivative w.r.t. the probability."""
    pc = _clamp(p)
    u = 1.0 - p
    logp = np.log(pc)
    with np.errstate(divide="ignore", invalid="ignore"):
        ug = np.where(u > 0.0, u, 1.0) ** gamma
        ug = np.where(u > 0.0, ug, 0.0 if gamma > 0 else 1.0)
        ugm1 = np.where(u > 0.0, np.where(u > 0.0, u, 1.0) ** (gamma - 1.0), 0.0)
    values = -ug * logp
    deriv = gamma * ugm1 * logp - ug / pc
    return values, deriv


def _batch_fl(p, y, gamma):
    if gamma == 0.0:
        return _batch_ce(p, y)
    idx = np.arange(p.shape[0])
    py = p[idx, y]
    values, deriv = _focal_terms(py, gamma)
    return values, _label_grad(deriv, py, p, y)


def _batch_sce(p, y, alpha, beta):
    cv, cg = _batch_ce(p, y)
    rv, rg = _batch_rce(p, y)
    return alpha * cv + beta * rv, alpha * cg + beta * rg


def _batch_nmae(p, y):
    # sum_k mae(p, k) = 2(K-1) for any simplex point, so the denominator is
    # constant and the gradient is the mae gradient rescaled.
    k = p.shape[1]
    values, g = _batch_mae(p, y)
    return values / (2.0 * (k - 1)), g / (2.0 * (k - 1))


def _batch_nrce(p, y):
    k = p.shape[1]
    values, g = _batch_rce(p, y)
    denom = -RCE_LOG_ZERO * (k - 1)
    return values / denom, g / denom


def _normalized_quotient(v, vp, p, y):
    """Gradient of v_y / sum_k v_k where v_k depends on p_k only.

    vp holds dv_k/dp_k. Returns (values, dlogits).
    """
    idx = np.arange(p.shape[0])
    s = v.sum(axis=1)
    vy = v[idx, y]
    values = vy / s
    c = (vp * p).sum(axis=1)
    num = _label_grad(vp[idx, y], p[idx, y], p, y)
    den = p * (vp - c[:, None])
    g = (num * s[:, None] - vy[:, None] * den) / (s * s)[:, None]
    return values, g


def _batch_nce(p, y):
    pc = _clamp(p)
    v = -np.log(pc)
    vp = np.where(p > PROB_EPS, -1.0 / pc, 0.0)
    return _normalized_quotient(v, vp, p, y)


def _batch_nfl(p, y, gamma):
    if gamma == 0.0:
        return _batch_nce(p, y)
    v, vp = _focal_terms(p, gamma)
    vp = np.where(p > PROB_EPS, vp, 0.0)
    return _normalized_quotient(v, vp, p, y)


def _batch_nl(p, ybar):
    idx = np.arange(p.shape[0])
    pb = p[idx, ybar]
    comp = _clamp(1.0 - pb)
    values = -np.log(comp)
    # Closed form: d/df_i = p_ybar at i = ybar, -p_ybar*p_i/(1-p_ybar) else.
    g = -(pb / comp)[:, None] * p
    g[idx, ybar] = pb
    return values, g


_BASE_BATCH = {
    "ce": _batch_ce,
    "pl": _batch_ce,
    "mae": _batch_mae,
    "rce": _batch_rce,
    "nce": _batch_nce,
    "nmae": _batch_nmae,
    "nrce": _batch_nrce,
    "nl": _batch_nl,
}


def batch_eval(spec, p, y):
    """Evaluate a LossSpec on a batch: (values (n,), dlogits (n, K))."""
    p = np.asarray(p, dtype=np.float64)
    y = _check_labels(y, p.shape[1])
    if spec.kind in _BASE_BATCH:
        return _BASE_BATCH[spec.kind](p, y)
    if spec.kind == "fl":
        return _batch_fl(p, y, spec.gamma)
    if spec.kind == "nfl":
        return _batch_nfl(p, y, spec.gamma)
    if spec.kind == "sce":
        return _batch_sce(p, y, spec.alpha, spec.beta)
    if spec.kind == "apl":
        gam = spec.gamma
        av, ag = batch_eval(LossSpec(kind=spec.active, gamma=gam), p, y)
        pv, pg = batch_eval(LossSpec(kind=spec.passive), p, y)
        return spec.alpha * av + spec.beta * pv, spec.alpha * ag + spec.beta * pg
    raise ValueError(f"unknown loss kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# per-sample operations (the contract surface; thin wrappers over the batch)


def _single(fn, p, y, *args):
    p = _as_prob_vector(p)
    y = int(y)
    _check_labels([y], p.shape[0])
    values, g = fn(p[None, :], np.array([y]), *args)
    return LossOutput(float(values[0]), g[0])


def ce(p, y):
    """Cross entropy -log p_y; gradient w.r.t. logits is p - onehot(y)."""
    return _single(_batch_ce, p, y)


# Positive learning is plain cross entropy on a label believed correct.
pl = ce


def mae(p, y):
    """Mean absolute error, identically 2*(1 - p_y)."""
    return _single(_batch_mae, p, y)


def rce(p, y):
    """Reverse cross entropy with log(0) := -4, identically 4*(1 - p_y)."""
    return _single(_batch_rce, p, y)


def fl(p, y, gamma):
    """Focal loss -(1 - p_y)^gamma * log p_y (gamma=0 reduces to ce)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return _single(_batch_fl, p, y, float(gamma))


def sce(p, y, alpha, beta):
    """Symmetric cross entropy alpha*ce + beta*rce."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be >= 0")
    p = _as_prob_vector(p)
    values, g = _batch_sce(p[None, :], _check_labels([int(y)], p.shape[0]), alpha, beta)
    return LossOutput(float(values[0]), g[0])


def normalized(kind, p, y, gamma=0.5):
    """Normalized base loss: L(p, y) / sum_k L(p, k), in (0, 1)."""
    kind = kind.strip().lower()
    table = {"ce": _batch_nce, "mae": _batch_nmae, "rce": _batch_nrce}
    if kind in table:
        return _single(table[kind], p, y)
    if kind == "fl":
        return _single(_batch_nfl, p, y, float(gamma))
    raise ValueError(f"normalized() supports ce/fl/mae/rce, got {kind!r}")


def apl(active, passive, alpha, beta, p, y, gamma=0.5):
    """Active-passive combination alpha*L_active + beta*L_passive."""
    spec = LossSpec(
        kind="apl",
        active=active.strip().lower(),
        passive=passive.strip().lower(),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
    ).validate()
    p = _as_prob_vector(p)
    values, g = batch_eval(spec, p[None, :], [int(y)])
    return LossOutput(float(values[0]), g[0])


def nl(p, ybar):
    """Negative learning -log(1 - p_ybar) on a complementary label."""
    return _single(_batch_nl, p, ybar)


def uniform_prior(k):
    return np.full(int(k), 1.0 / int(k))


def confidence_penalty(batch_probs, prior):
    """KL(prior || mean prediction) over a batch of probability vectors.

    Returns the penalty value and an (n, K) gradient w.r.t. each sample's
    logits, distributed through the batch mean.
    """
    p = np.asarray(batch_probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ValueError("confidence penalty requires a non-empty batch")
    prior = _as_prob_vector(prior)
    if prior.shape[0] != p.shape[1]:
        raise ValueError("prior length does not match the class count")
    return LossOutput(*batch_confidence_penalty(p, prior))


def batch_confidence_penalty(p, prior):
    n = p.shape[0]
    mean = p.mean(axis=0)
    mean_c = _clamp(mean)
    pos = prior > 0.0
    value = float(
        np.sum(np.where(pos, prior * np.log(np.where(pos, prior, 1.0) / mean_c), 0.0))
    )
    # dvalue/dp[i, k] = -prior_k / (n * mean_k); zero where the mean is clamped.
    q = np.where(mean > PROB_EPS, -prior / (n * mean_c), 0.0)
    g = p * (q[None, :] - (p @ q)[:, None])
    return value, g

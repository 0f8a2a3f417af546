"""Trainer contracts: term-elimination identities, objective assembly,
whole-pipeline gradients, SSL behavior, evaluation, determinism."""

import numpy as np
import pytest

from gradcheck import fd_gradient, flatten_params, random_params, relative_error
from pars import data, losses, nn, selection, trainer
from pars.data import AugmentSpec, NoiseSpec
from pars.losses import LossSpec
from pars.rng import stream
from pars.trainer import TrainConfig, step_objective, supervised_objective

ROBUST = LossSpec(kind="apl", active="nce", passive="mae")


def _step_inputs(seed=0, n_raw=8, n_pseudo=8, k=4, dim=3, tau=0.6, labels=None):
    rng = np.random.default_rng(seed)
    params = random_params(rng, [dim, 6, k])
    raw_x = np.ascontiguousarray(rng.normal(size=(n_raw, dim)))
    pseudo_x = np.ascontiguousarray(rng.normal(size=(n_pseudo, dim)))
    raw_labels = (
        labels if labels is not None else rng.integers(0, k, size=n_raw).astype(np.int64)
    )
    probs_raw = nn.predict_probs(params, raw_x)
    probs_pseudo = nn.predict_probs(params, pseudo_x)
    raw_split = selection.select(probs_raw, tau)
    pseudo_split = selection.select(probs_pseudo, tau)
    pseudo_lbl = selection.make_pseudo(probs_pseudo, stream(seed, "pseudo"))
    prior = losses.uniform_prior(k)
    return params, raw_x, raw_labels, raw_split, pseudo_x, pseudo_split, pseudo_lbl, prior


def test_all_terms_disabled_equals_plain_robust_training():
    params, raw_x, raw_labels, _, pseudo_x, _, _, prior = _step_inputs(seed=1)
    # tau = 0 puts every sample in the ambiguous set
    probs_raw = nn.predict_probs(params, raw_x)
    probs_pseudo = nn.predict_probs(params, pseudo_x)
    raw_split = selection.select(probs_raw, 0.0)
    pseudo_split = selection.select(probs_pseudo, 0.0)
    pseudo_lbl = selection.make_pseudo(probs_pseudo, stream(1, "pseudo"))
    terms, total, grads = step_objective(
        params, ROBUST, raw_x, raw_labels, raw_split,
        pseudo_x, pseudo_split, pseudo_lbl,
        lambda_n=0.0, lambda_s=0.0, lambda_r=0.0, prior=prior,
    )
    value, sup_grads = supervised_objective(params, ROBUST, raw_x, raw_labels)
    assert total == value
    assert terms.raw_negative == 0.0
    np.testing.assert_array_equal(flatten_params(grads), flatten_params(sup_grads))


def test_tau_one_reduces_to_negative_learning_terms():
    params, raw_x, raw_labels, _, pseudo_x, _, _, prior = _step_inputs(seed=2)
    probs_raw = nn.predict_probs(params, raw_x)
    probs_pseudo = nn.predict_probs(params, pseudo_x)
    raw_split = selection.select(probs_raw, 1.0)
    pseudo_split = selection.select(probs_pseudo, 1.0)
    pseudo_lbl = selection.make_pseudo(probs_pseudo, stream(2, "pseudo"))
    terms, _, _ = step_objective(
        params, ROBUST, raw_x, raw_labels, raw_split,
        pseudo_x, pseudo_split, pseudo_lbl,
        lambda_n=0.1, lambda_s=1.0, lambda_r=0.0, prior=prior,
    )
    assert terms.raw_ambiguous == 0.0 and terms.pseudo_positive == 0.0
    nl_vals, _ = losses.batch_eval(LossSpec(kind="nl"), probs_raw, raw_labels)
    assert terms.raw_negative == float(np.mean(nl_vals))
    nl_ps, _ = losses.batch_eval(
        LossSpec(kind="nl"), probs_pseudo, pseudo_lbl.complementary
    )
    assert terms.pseudo_negative == float(np.mean(nl_ps))


def test_objective_assembly_matches_independent_recomputation():
    """Total equals an Eq.-style recomputation from per-sample scalar losses."""
    (params, raw_x, raw_labels, raw_split, pseudo_x, pseudo_split,
     pseudo_lbl, prior) = _step_inputs(seed=3, tau=0.5)
    lam_n, lam_s, lam_r = 0.1, 1.0, 1.0
    terms, total, _ = step_objective(
        params, ROBUST, raw_x, raw_labels, raw_split,
        pseudo_x, pseudo_split, pseudo_lbl, lam_n, lam_s, lam_r, prior,
    )
    probs_raw = nn.predict_probs(params, raw_x)
    probs_pseudo = nn.predict_probs(params, pseudo_x)
    amb = [i for i in raw_split.ambiguous]
    noisy = [i for i in raw_split.noisy]
    ra = (
        float(np.mean([losses.apl("nce", "mae", 1.0, 1.0, probs_raw[i], raw_labels[i]).value for i in amb]))
        if amb else 0.0
    )
    rn = (
        float(np.mean([losses.nl(probs_raw[i], raw_labels[i]).value for i in noisy]))
        if noisy else 0.0
    )
    pp = (
        float(np.mean([losses.ce(probs_pseudo[i], pseudo_lbl.positive[i]).value for i in pseudo_split.ambiguous]))
        if len(pseudo_split.ambiguous) else 0.0
    )
    pn = (
        float(np.mean([losses.nl(probs_pseudo[i], pseudo_lbl.complementary[i]).value for i in pseudo_split.noisy]))
        if len(pseudo_split.noisy) else 0.0
    )
    pen = losses.confidence_penalty(probs_pseudo, prior).value
    assert terms.raw_ambiguous == ra
    assert terms.raw_negative == rn
    assert terms.pseudo_positive == pp
    assert terms.pseudo_negative == pn
    assert terms.penalty == pen
    assert total == (ra + lam_n * rn) + lam_s * (pp + lam_n * pn) + lam_r * pen


@pytest.mark.parametrize("scope", ["pseudo", "raw", "union"])
def test_step_gradient_matches_fd_through_pipeline(scope):
    (params, raw_x, raw_labels, raw_split, pseudo_x, pseudo_split,
     pseudo_lbl, prior) = _step_inputs(seed=4, tau=0.45)

    def total_of(p):
        _, total, _ = step_objective(
            p, ROBUST, raw_x, raw_labels, raw_split,
            pseudo_x, pseudo_split, pseudo_lbl,
            0.1, 1.0, 1.0, prior, penalty_scope=scope, want_grads=False,
        )
        return total

    _, _, grads = step_objective(
        params, ROBUST, raw_x, raw_labels, raw_split,
        pseudo_x, pseudo_split, pseudo_lbl,
        0.1, 1.0, 1.0, prior, penalty_scope=scope,
    )
    numeric = fd_gradient(total_of, params)
    assert relative_error(flatten_params(grads), numeric) < 1e-4


def test_unlabeled_samples_are_excluded_from_raw_terms():
    k = 4
    labels = np.array([data.UNLABELED] * 8, dtype=np.int64)
    (params, raw_x, raw_labels, raw_split, pseudo_x, pseudo_split,
     pseudo_lbl, prior) = _step_inputs(seed=5, labels=labels)
    terms, _, _ = step_objective(
        params, ROBUST, raw_x, raw_labels, raw_split,
        pseudo_x, pseudo_split, pseudo_lbl, 0.1, 1.0, 1.0, prior,
    )
    assert terms.raw_ambiguous == 0.0 and terms.raw_negative == 0.0
    # pseudo terms and penalty still active
    assert terms.penalty > 0.0 or terms.pseudo_positive >= 0.0


# -- ssl_prepare ----------------------------------------------------------------


def test_ssl_prepare_full_count_is_identity():
    train, _ = data.generate("blobs", 3, 2, 20, 1.0, seed=6)
    out = trainer.ssl_prepare(train, len(train), seed=6)
    np.testing.assert_array_equal(out.noisy_labels, train.noisy_labels)


def test_ssl_prepare_counts_and_determinism():
    train, _ = data.generate("blobs", 3, 2, 40, 1.0, seed=7)
    a = trainer.ssl_prepare(train, 30, seed=7)
    b = trainer.ssl_prepare(train, 30, seed=7)
    assert a.labeled_mask.sum() == 30
    np.testing.assert_array_equal(a.noisy_labels, b.noisy_labels)
    # clean labels survive for evaluation
    np.testing.assert_array_equal(a.clean_labels, train.clean_labels)


def test_ssl_prepare_rejects_bad_count():
    train, _ = data.generate("blobs", 3, 2, 10, 1.0, seed=8)
    with pytest.raises(ValueError):
        trainer.ssl_prepare(train, len(train) + 1, seed=0)


# -- evaluate ----------------------------------------------------------------------


def test_evaluate_uniform_model_on_balanced_test():
    _, test = data.generate("blobs", 10, 2, 30, 1.0, seed=9)
    params = nn.ModelParams([np.zeros((10, 2))], [np.zeros(10)])
    acc, conf = trainer.evaluate(params, test)
    # uniform output predicts class 0 everywhere; balanced classes give 1/K
    assert acc == pytest.approx(0.1)
    np.testing.assert_allclose(conf, 0.1, atol=1e-12)


def test_evaluate_perfect_model():
    _, test = data.generate("blobs", 4, 2, 25, 0.0, seed=10)
    centers = np.array(
        [[np.cos(2 * np.pi * k / 4), np.sin(2 * np.pi * k / 4)] for k in range(4)]
    )
    params = nn.ModelParams([4.0 * centers], [np.zeros(4)])
    acc, _ = trainer.evaluate(params, test)
    assert acc == 1.0


def test_evaluate_rejects_empty_dataset():
    empty = data.Dataset(
        np.empty((0, 2)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), 3
    )
    with pytest.raises(ValueError):
        trainer.evaluate(nn.ModelParams([np.zeros((3, 2))], [np.zeros(3)]), empty)


# -- training loop ------------------------------------------------------------------


def _tiny_config(**overrides):
    base = dict(
        per_class=30,
        num_classes=3,
        spread=1.0,
        noise=NoiseSpec("symmetric", 0.3),
        warmup_epochs=1,
        epochs=3,
        batch_size=16,
        hidden=(16,),
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_warmup_zero_epochs_leaves_model_unchanged():
    cfg = _tiny_config(warmup_epochs=0)
    train_ds, test_ds = trainer.build_datasets(cfg)
    state = trainer.TrainerState(cfg, train_ds, test_ds)
    before = flatten_params(state.params).copy()
    records = trainer.warmup(state)
    assert records == []
    np.testing.assert_array_equal(flatten_params(state.params), before)


def test_train_is_deterministic():
    cfg = _tiny_config()
    a = trainer.train(cfg)
    b = trainer.train(cfg)
    assert len(a.records) == len(b.records) == cfg.epochs
    for ra, rb in zip(a.records, b.records):
        assert ra == rb
    np.testing.assert_array_equal(
        flatten_params(a.final_params), flatten_params(b.final_params)
    )


def test_metrics_rows_cover_every_epoch_with_late_warmup():
    cfg = _tiny_config(epochs=4, warmup_epochs=3)
    result = trainer.train(cfg)
    assert [r.epoch for r in result.records] == [0, 1, 2, 3]
    assert result.best_epoch_online < 4
    for record in result.records:
        assert 0.0 <= record.test_acc_online <= 1.0
        assert 0.0 <= record.test_acc_ema <= 1.0
        assert 0 <= record.ambiguous_count <= cfg.num_classes * cfg.per_class


def test_warmup_beats_chance_on_noisy_blobs():
    cfg = _tiny_config(
        num_classes=5,
        per_class=60,
        noise=NoiseSpec("symmetric", 0.5),
        warmup_epochs=3,
        epochs=4,
        hidden=(32, 32),
    )
    result = trainer.train(cfg)
    assert result.records[cfg.warmup_epochs - 1].test_acc_online > 0.2


def test_warmup_loss_decreases_on_clean_data():
    cfg = _tiny_config(
        noise=NoiseSpec("symmetric", 0.0),
        warmup_epochs=5,
        epochs=6,
        per_class=60,
    )
    result = trainer.train(cfg)
    warm = [r.loss_raw_ambiguous for r in result.records[:5]]
    assert all(a > b for a, b in zip(warm, warm[1:]))


def test_ema_tracks_online_on_clean_data():
    cfg = _tiny_config(
        noise=NoiseSpec("symmetric", 0.0),
        per_class=80,
        warmup_epochs=1,
        epochs=12,
        ema_decay=0.98,
    )
    result = trainer.train(cfg)
    last = result.records[-1]
    assert abs(last.test_acc_ema - last.test_acc_online) <= 0.05


def test_modes_rl_only_and_ce_baseline_run_all_epochs_supervised():
    for mode in ("rl-only", "ce-baseline"):
        cfg = _tiny_config(mode=mode, epochs=2, warmup_epochs=1)
        result = trainer.train(cfg)
        assert len(result.records) == 2
        for record in result.records:
            assert record.loss_pseudo_positive == 0.0
            assert record.loss_penalty == 0.0


def test_ablation_modes_zero_their_terms():
    cfg_np = _tiny_config(mode="pars-no-pseudo", epochs=2, warmup_epochs=1)
    cfg_nl = _tiny_config(mode="pars-no-nl", epochs=2, warmup_epochs=1)
    res_np = trainer.train(cfg_np)
    res_nl = trainer.train(cfg_nl)
    assert res_np.records[-1].loss_penalty >= 0.0
    # equivalent weight-zeroing runs match the ablation modes exactly
    res_l0 = trainer.train(_tiny_config(mode="pars", lambda_s=0.0, epochs=2, warmup_epochs=1))
    assert res_np.records[-1].test_acc_online == res_l0.records[-1].test_acc_online
    res_n0 = trainer.train(_tiny_config(mode="pars", lambda_n=0.0, epochs=2, warmup_epochs=1))
    assert res_nl.records[-1].test_acc_online == res_n0.records[-1].test_acc_online


def test_pars_ssl_runs_and_restricts_raw_loss():
    cfg = _tiny_config(
        mode="pars-ssl", labeled_count=30, epochs=3, warmup_epochs=1
    )
    result = trainer.train(cfg)
    assert result.train_dataset.labeled_mask.sum() == 30
    assert len(result.records) == 3


def test_config_validation_messages_name_fields():
    with pytest.raises(ValueError, match="tau"):
        _tiny_config(tau=1.5).validate()
    with pytest.raises(ValueError, match="warmup_epochs"):
        _tiny_config(warmup_epochs=3, epochs=3).validate()
    with pytest.raises(ValueError, match="mode"):
        _tiny_config(mode="fancy").validate()
    with pytest.raises(ValueError, match="labeled_count"):
        _tiny_config(mode="pars-ssl").validate()
    with pytest.raises(ValueError, match="labeled_count"):
        _tiny_config(mode="pars", labeled_count=10).validate()
    with pytest.raises(ValueError, match="warmup_loss"):
        _tiny_config(warmup_loss=LossSpec(kind="ce")).validate()

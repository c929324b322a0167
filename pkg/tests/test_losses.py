"""Loss values against hand-derived numbers and gradients against finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symkge.config import BINARY_CROSS_ENTROPY, MARGIN_RANKING, TrainConfig
from symkge.errors import DegenerateVectorError
from symkge.losses import (
    combined_gradients,
    combined_loss,
    contrastive_loss,
    contrastive_loss_cosine_form,
    positive_sample_seed,
    task_loss,
)
from symkge.mining import PositiveDict, sample_positives
from symkge.model import EmbeddingTable, ScorerKind, init_embeddings


def _dict_of(targets, k=2):
    return PositiveDict(targets=tuple(frozenset(t) for t in targets), hop_bound=k)


# ---------------------------------------------------------------------------
# alignment loss
# ---------------------------------------------------------------------------


def test_identical_vectors_zero():
    v = np.array([0.3, -1.2, 4.0])
    assert contrastive_loss(v, [v]) == pytest.approx(0.0, abs=1e-12)


def test_orthogonal_unit_vectors():
    assert contrastive_loss(np.array([1.0, 0.0]), [np.array([0.0, 1.0])]) == pytest.approx(2.0)


def test_antipodal_mean():
    anchor = np.array([1.0, 0.0])
    positives = [np.array([1.0, 0.0]), np.array([-1.0, 0.0])]
    assert contrastive_loss(anchor, positives) == pytest.approx(2.0)  # mean of 0 and 4


def test_empty_positives():
    assert contrastive_loss(np.array([1.0, 0.0]), []) == 0.0


def test_degenerate_vector_rejected():
    with pytest.raises(DegenerateVectorError):
        contrastive_loss(np.zeros(3), [np.ones(3)])
    with pytest.raises(DegenerateVectorError):
        contrastive_loss(np.ones(3), [np.zeros(3)])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(2, 8))
def test_two_forms_agree_and_bounded(seed, n_pos, dim):
    rng = np.random.default_rng(seed)
    anchor = rng.normal(size=dim)
    positives = rng.normal(size=(n_pos, dim))
    if np.linalg.norm(anchor) < 1e-6 or np.any(np.linalg.norm(positives, axis=1) < 1e-6):
        return
    mse_form = contrastive_loss(anchor, positives)
    cos_form = contrastive_loss_cosine_form(anchor, positives)
    assert mse_form == pytest.approx(cos_form, abs=1e-6)
    assert 0.0 <= mse_form <= 4.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_scale_invariance(seed):
    rng = np.random.default_rng(seed)
    anchor = rng.normal(size=5)
    positives = rng.normal(size=(3, 5))
    if np.linalg.norm(anchor) < 1e-6 or np.any(np.linalg.norm(positives, axis=1) < 1e-6):
        return
    scales = rng.uniform(0.1, 50.0, size=3)
    base = contrastive_loss(anchor, positives)
    scaled = contrastive_loss(anchor * rng.uniform(0.1, 50.0), positives * scales[:, None])
    assert scaled == pytest.approx(base, abs=1e-6)


def test_zero_only_for_aligned_positives():
    anchor = np.array([2.0, 1.0])
    assert contrastive_loss(anchor, [anchor * 3.5, anchor * 0.01]) == pytest.approx(0.0, abs=1e-12)
    assert contrastive_loss(anchor, [anchor, np.array([1.0, 2.0])]) > 1e-3


# ---------------------------------------------------------------------------
# task loss (DistMult with d=1 makes scores easy to stage)
# ---------------------------------------------------------------------------


def _staged_table():
    # score(0, 0, i) equals the value of entity i
    return EmbeddingTable(
        entity_vecs=np.array([[1.0], [5.0], [1.0], [0.0]]),
        relation_vecs=np.array([[1.0]]),
    )


def test_margin_satisfied():
    cfg = TrainConfig(task_loss=MARGIN_RANKING, margin=1.0, dim=1)
    batch = np.array([[0, 0, 1]])  # score 5
    negatives = np.array([[[0, 0, 2]]])  # score 1
    assert task_loss(_staged_table(), ScorerKind.DISTMULT, batch, negatives, cfg) == 0.0


def test_margin_tied_scores():
    cfg = TrainConfig(task_loss=MARGIN_RANKING, margin=1.0, dim=1)
    batch = np.array([[0, 0, 1]])
    negatives = np.array([[[0, 0, 1]]])
    assert task_loss(_staged_table(), ScorerKind.DISTMULT, batch, negatives, cfg) == 1.0


def test_bce_at_zero_scores():
    cfg = TrainConfig(task_loss=BINARY_CROSS_ENTROPY, dim=1)
    batch = np.array([[0, 0, 3]])  # score 0
    negatives = np.array([[[0, 0, 3]]])
    value = task_loss(_staged_table(), ScorerKind.DISTMULT, batch, negatives, cfg)
    assert value == pytest.approx(2.0 * np.log(2.0))


# ---------------------------------------------------------------------------
# combined objective
# ---------------------------------------------------------------------------


def _small_setup(seed=0, alpha=0.001, task=MARGIN_RANKING, kind=ScorerKind.TRANSE):
    cfg = TrainConfig(
        k=2, m=3, alpha=alpha, dim=8, epochs=1, batch_size=4, n_negatives=3,
        seed=seed, scorer=kind, task_loss=task,
    )
    table = init_embeddings(10, 3, cfg.dim, seed=seed)
    rng = np.random.default_rng(seed + 1)
    batch = np.stack(
        [rng.integers(0, 10, 4), rng.integers(0, 3, 4), rng.integers(0, 10, 4)], axis=1
    ).astype(np.int64)
    negatives = np.stack(
        [
            rng.integers(0, 10, (4, 3)),
            np.repeat(batch[:, 1][:, None], 3, axis=1),
            rng.integers(0, 10, (4, 3)),
        ],
        axis=2,
    ).astype(np.int64)
    pos_dict = _dict_of(
        [{1, 2}, {0, 2}, {0, 1}, {4}, {3}, set(), {7}, {6}, {9}, {8}], k=2
    )
    return table, cfg, batch, negatives, pos_dict


def test_alpha_zero_total_is_task():
    table, cfg, batch, negatives, pos_dict = _small_setup(alpha=0.0)
    breakdown = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg)
    assert breakdown.total == breakdown.task
    assert breakdown.contrastive > 0.0


def test_empty_dict_contrastive_zero():
    table, cfg, batch, negatives, _ = _small_setup(alpha=0.5)
    empty = _dict_of([set()] * 10, k=2)
    breakdown = combined_loss(table, cfg.scorer, batch, negatives, empty, cfg)
    assert breakdown.contrastive == 0.0
    assert breakdown.total == breakdown.task
    no_dict = combined_loss(table, cfg.scorer, batch, negatives, None, cfg)
    assert no_dict == breakdown


def test_breakdown_additivity():
    table, cfg, batch, negatives, pos_dict = _small_setup(alpha=0.001)
    b = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg)
    assert b.total == b.task + cfg.alpha * b.contrastive
    assert 0.0 <= b.contrastive <= 4.0


def test_combined_loss_matches_straight_line_recompute():
    """Independent elementwise reimplementation of the objective."""
    table, cfg, batch, negatives, pos_dict = _small_setup(alpha=0.001)
    breakdown = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg, epoch=4)

    def transe(h, r, t):
        d = table.entity_vecs[h] + table.relation_vecs[r] - table.entity_vecs[t]
        return -float(np.sqrt((d * d).sum()))

    hinge_terms = []
    for (h, r, t), negs in zip(batch.tolist(), negatives.tolist()):
        sp = transe(h, r, t)
        for nh, nr, nt in negs:
            hinge_terms.append(max(0.0, cfg.margin - sp + transe(nh, nr, nt)))
    expected_task = sum(hinge_terms) / len(hinge_terms)

    anchor_terms = []
    for anchor in [row[0] for row in batch.tolist()] + [row[2] for row in batch.tolist()]:
        chosen = sample_positives(
            pos_dict, anchor, cfg.m, positive_sample_seed(cfg.seed, 4, anchor)
        )
        if not chosen:
            continue
        a = table.entity_vecs[anchor]
        a = a / np.linalg.norm(a)
        terms = []
        for p in chosen:
            v = table.entity_vecs[p]
            v = v / np.linalg.norm(v)
            terms.append(float(((a - v) ** 2).sum()))
        anchor_terms.append(sum(terms) / len(terms))
    expected_contr = sum(anchor_terms) / len(anchor_terms)

    assert breakdown.task == pytest.approx(expected_task, rel=1e-12)
    assert breakdown.contrastive == pytest.approx(expected_contr, rel=1e-12)
    assert breakdown.total == pytest.approx(expected_task + cfg.alpha * expected_contr, rel=1e-12)


def test_combined_loss_deterministic_per_epoch():
    table, cfg, batch, negatives, _ = _small_setup()
    # entity 4 anchors the batch and has more positives than m, so per-epoch
    # resampling actually matters
    assert 4 in set(batch[:, 0].tolist()) | set(batch[:, 2].tolist())
    targets = [{4}] * 10
    targets[4] = set(range(10)) - {4}
    pos_dict = _dict_of(targets, k=2)
    a = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg, epoch=2)
    b = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg, epoch=2)
    c = combined_loss(table, cfg.scorer, batch, negatives, pos_dict, cfg, epoch=3)
    assert a == b
    assert a != c  # resampled positives move the contrastive term


# ---------------------------------------------------------------------------
# gradients vs central finite differences
# ---------------------------------------------------------------------------


def _touched_indices(batch, negatives, pos_dict, cfg, epoch):
    entities = set(batch[:, 0].tolist()) | set(batch[:, 2].tolist())
    flat = negatives.reshape(-1, 3)
    entities |= set(flat[:, 0].tolist()) | set(flat[:, 2].tolist())
    if pos_dict is not None:
        for anchor in batch[:, 0].tolist() + batch[:, 2].tolist():
            entities.add(anchor)
            entities.update(
                sample_positives(pos_dict, anchor, cfg.m,
                                 positive_sample_seed(cfg.seed, epoch, anchor))
            )
    relations = set(batch[:, 1].tolist()) | set(flat[:, 1].tolist())
    return sorted(entities), sorted(relations)


def _finite_difference_check(table, cfg, batch, negatives, pos_dict, epoch=0,
                             step=1e-5, tol=1e-4):
    _, grads = combined_gradients(
        table, cfg.scorer, batch, negatives, pos_dict, cfg, epoch
    )

    def loss_at(t):
        return combined_loss(t, cfg.scorer, batch, negatives, pos_dict, cfg, epoch).total

    entities, relations = _touched_indices(batch, negatives, pos_dict, cfg, epoch)
    worst = 0.0
    for kind, rows in (("entity", entities), ("relation", relations)):
        vecs = table.entity_vecs if kind == "entity" else table.relation_vecs
        analytic = grads.entity if kind == "entity" else grads.relation
        for row in rows:
            for j in range(vecs.shape[1]):
                original = vecs[row, j]
                vecs[row, j] = original + step
                up = loss_at(table)
                vecs[row, j] = original - step
                down = loss_at(table)
                vecs[row, j] = original
                fd = (up - down) / (2 * step)
                err = abs(fd - analytic[row, j]) / max(abs(fd), abs(analytic[row, j]), 1e-6)
                worst = max(worst, err)
                assert err < tol, (
                    f"{kind}[{row},{j}]: analytic {analytic[row, j]:.8g} vs fd {fd:.8g}"
                )
    return worst


@pytest.mark.parametrize("kind", [ScorerKind.TRANSE, ScorerKind.DISTMULT])
@pytest.mark.parametrize("task", [MARGIN_RANKING, BINARY_CROSS_ENTROPY])
@pytest.mark.parametrize("alpha", [0.0, 0.001, 1.0])
def test_gradients_match_finite_differences(kind, task, alpha):
    table, cfg, batch, negatives, pos_dict = _small_setup(
        seed=7, alpha=alpha, task=task, kind=kind
    )
    _finite_difference_check(table, cfg, batch, negatives, pos_dict, epoch=1)


def test_gradients_zero_when_margin_satisfied():
    # staged scores: positive 5, negative 1, margin 1 -> inactive hinge
    table = EmbeddingTable(
        entity_vecs=np.array([[1.0], [5.0], [1.0], [0.0]]),
        relation_vecs=np.array([[1.0]]),
    )
    cfg = TrainConfig(task_loss=MARGIN_RANKING, margin=1.0, dim=1, alpha=0.0,
                      scorer=ScorerKind.DISTMULT)
    batch = np.array([[0, 0, 1]])
    negatives = np.array([[[0, 0, 2]]])
    breakdown, grads = combined_gradients(
        table, ScorerKind.DISTMULT, batch, negatives, None, cfg
    )
    assert breakdown.total == 0.0
    assert not grads.entity.any()
    assert not grads.relation.any()


def test_contrastive_gradient_zero_at_alignment():
    # positive embedding identical to the anchor: loss minimum, zero gradient
    vec = np.array([0.4, -0.3, 1.1])
    table = EmbeddingTable(
        entity_vecs=np.stack([vec, vec, np.array([5.0, 0.0, 0.0])]),
        relation_vecs=np.ones((1, 3)),
    )
    cfg = TrainConfig(k=1, m=1, alpha=1.0, dim=3, task_loss=MARGIN_RANKING)
    pos_dict = _dict_of([{1}, {0}, set()], k=1)
    batch = np.array([[0, 0, 0]])
    negatives = np.array([[[2, 0, 2]]])
    _, grads = combined_gradients(table, ScorerKind.TRANSE, batch, negatives, pos_dict, cfg)
    # isolate the contrastive part: alpha=0 run removes it
    cfg0 = TrainConfig(k=1, m=1, alpha=0.0, dim=3, task_loss=MARGIN_RANKING)
    _, grads0 = combined_gradients(table, ScorerKind.TRANSE, batch, negatives, pos_dict, cfg0)
    contrastive_part = grads.entity - grads0.entity
    assert np.allclose(contrastive_part[0], 0.0, atol=1e-12)
    assert np.allclose(contrastive_part[1], 0.0, atol=1e-12)

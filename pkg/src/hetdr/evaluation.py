"""Cross-validation, ranking metrics and candidate extraction.

AUROC uses the Mann-Whitney formulation with midrank tie handling; AUPR
uses step-wise summation over recall increments (average-precision style),
never trapezoidal interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from hetdr.completion import (
    CompletionConfig,
    InteractionMatrix,
    Pair,
    pumc_fit,
    sample_negatives,
)
from hetdr.seeding import derive_seed


@dataclass(frozen=True)
class FoldPlan:
    """Repeated k-fold partition of the positive pairs, reproducible from seed."""

    k: int
    repeats: int
    seed: int
    pairs: tuple[Pair, ...]
    assignments: np.ndarray  # (repeats, len(pairs)) fold ids

    def fold_pairs(self, repeat: int, fold: int) -> list[Pair]:
        mask = self.assignments[repeat] == fold
        return [self.pairs[t] for t in np.flatnonzero(mask)]


@dataclass
class MetricReport:
    auroc: float
    aupr: float
    per_fold: list[tuple[float, float]]
    roc_points: list[tuple[float, float, float]]  # threshold, fpr, tpr
    pr_points: list[tuple[float, float, float]]  # threshold, recall, precision
    pooled_auroc: float | None = None
    pooled_aupr: float | None = None


@dataclass(frozen=True)
class ExternalValidationSet:
    """Known-positive drug IDs used to score a full drug ranking."""

    positive_drug_ids: tuple[str, ...]
    description: str = ""

    def __post_init__(self):
        if not self.positive_drug_ids:
            raise ValueError("external validation set is empty")


@dataclass(frozen=True)
class ScoreTable:
    """Labeled dense score block over drug and protein external IDs."""

    drug_ids: tuple[str, ...]
    protein_ids: tuple[str, ...]
    values: np.ndarray
    provenance: str = ""


def make_folds(positives: Iterable[Pair], k: int, repeats: int, seed: int) -> FoldPlan:
    """Uniform random partition into k folds per repeat, sizes differing by <= 1."""
    pairs = tuple(sorted(positives))
    n = len(pairs)
    if k < 2:
        raise ValueError(f"fold count must be >= 2, got {k}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if k > n:
        raise ValueError(f"cannot split {n} positives into {k} folds")
    assignments = np.empty((repeats, n), dtype=np.int64)
    for r in range(repeats):
        rng = np.random.default_rng(derive_seed(seed, f"folds:repeat{r}"))
        perm = rng.permutation(n)
        assignments[r, perm] = np.arange(n) % k
    return FoldPlan(k=k, repeats=repeats, seed=seed, pairs=pairs, assignments=assignments)


def _check_binary(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be 0 or 1")
    return n_pos, n_neg


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos, n_neg = _check_binary(labels)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def aupr(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the PR curve via step-wise summation, ties grouped by score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos, _ = _check_binary(labels)
    if n_pos == 0:
        raise ValueError("AUPR needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = labels[order]
    # group boundaries: last index of each run of equal scores
    boundary = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.concatenate([boundary, [s_sorted.size - 1]])
    tp = np.cumsum(y_sorted)[ends]
    predicted = ends + 1.0
    precision = tp / predicted
    recall = tp / n_pos
    recall_prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - recall_prev) * precision))


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float, float]]:
    """ROC polyline (threshold, fpr, tpr), from (0, 0) to (1, 1), ties grouped."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = float(labels.sum())
    n_neg = float(labels.size - labels.sum())
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = labels[order]
    boundary = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.concatenate([boundary, [s_sorted.size - 1]])
    tp = np.cumsum(y_sorted)[ends]
    fp = (ends + 1.0) - tp
    points = [(math.inf, 0.0, 0.0)]
    for t, e in enumerate(ends):
        points.append((float(s_sorted[e]), float(fp[t] / n_neg), float(tp[t] / n_pos)))
    return points


def pr_points(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float, float]]:
    """PR polyline (threshold, recall, precision), ties grouped by score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = float(labels.sum())
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = labels[order]
    boundary = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.concatenate([boundary, [s_sorted.size - 1]])
    tp = np.cumsum(y_sorted)[ends]
    points = [(math.inf, 0.0, 1.0)]
    for t, e in enumerate(ends):
        points.append((float(s_sorted[e]), float(tp[t] / n_pos), float(tp[t] / (e + 1.0))))
    return points


def cross_validate(
    inter: InteractionMatrix,
    drug_features: np.ndarray,
    protein_features: np.ndarray,
    cfg: CompletionConfig,
    plan: FoldPlan,
) -> MetricReport:
    """Repeated k-fold CV over positive pairs.

    Per fold: held-out positives are removed from the training positives and
    excluded from the training pseudo-negative pool; the fitted model scores
    them against an equal-size sample of never-observed negatives. Reports
    the fold mean and the pooled-score metrics.
    """
    all_pos = set(plan.pairs)
    if all_pos != set(inter.positives):
        raise ValueError("fold plan does not cover the interaction positives")
    per_fold: list[tuple[float, float]] = []
    pooled_scores: list[np.ndarray] = []
    pooled_labels: list[np.ndarray] = []
    for r in range(plan.repeats):
        for f in range(plan.k):
            test_pos = plan.fold_pairs(r, f)
            if not test_pos:
                raise ValueError(f"fold {f} of repeat {r} holds zero positives")
            train_pos = frozenset(all_pos - set(test_pos))
            train_neg = sample_negatives(
                train_pos,
                inter.shape,
                cfg.negative_ratio,
                derive_seed(plan.seed, f"cv:train-neg:r{r}f{f}"),
                exclude=all_pos,
            )
            test_neg = sample_negatives(
                test_pos,
                inter.shape,
                1.0,
                derive_seed(plan.seed, f"cv:test-neg:r{r}f{f}"),
                exclude=all_pos,
            )
            fold_cfg = replace(cfg, seed=derive_seed(plan.seed, f"cv:fit:r{r}f{f}"))
            model = pumc_fit(
                InteractionMatrix(inter.shape, train_pos, train_neg),
                drug_features,
                protein_features,
                fold_cfg,
            )
            d_std = model.standardize_drugs(drug_features)
            p_std = model.standardize_proteins(protein_features)
            cells = list(test_pos) + sorted(test_neg)
            ri = np.array([c[0] for c in cells])
            cj = np.array([c[1] for c in cells])
            s = np.einsum("tk,tk->t", d_std[ri] @ model.w, p_std[cj] @ model.h)
            y = np.concatenate([np.ones(len(test_pos)), np.zeros(len(test_neg))])
            per_fold.append((auroc(s, y), aupr(s, y)))
            pooled_scores.append(s)
            pooled_labels.append(y)
    scores = np.concatenate(pooled_scores)
    labels = np.concatenate(pooled_labels)
    return MetricReport(
        auroc=float(np.mean([a for a, _ in per_fold])),
        aupr=float(np.mean([p for _, p in per_fold])),
        per_fold=per_fold,
        roc_points=roc_points(scores, labels),
        pr_points=pr_points(scores, labels),
        pooled_auroc=auroc(scores, labels),
        pooled_aupr=aupr(scores, labels),
    )


def external_validate(
    ranked_drugs: Sequence[tuple[str, float]], ext: ExternalValidationSet
) -> MetricReport:
    """Score a full drug ranking against an external positive-drug list."""
    ids = [d for d, _ in ranked_drugs]
    scores = np.array([s for _, s in ranked_drugs], dtype=np.float64)
    present = set(ids) & set(ext.positive_drug_ids)
    if not present:
        raise ValueError("no external-set drug appears in the ranking")
    labels = np.array([1 if d in ext.positive_drug_ids else 0 for d in ids])
    return MetricReport(
        auroc=auroc(scores, labels),
        aupr=aupr(scores, labels),
        per_fold=[],
        roc_points=roc_points(scores, labels),
        pr_points=pr_points(scores, labels),
    )


def top_k_associations(table: ScoreTable, k: int) -> list[tuple[str, str, float]]:
    """The k highest-scoring (drug, protein) pairs, descending.

    Ties are broken by (drugID, proteinID) lexicographic order so the output
    is deterministic.
    """
    n, m = table.values.shape
    cells = n * m
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if k > cells:
        raise ValueError(f"k={k} exceeds the {cells} scored cells")
    drug_rank = np.argsort(np.argsort(np.array(table.drug_ids)))
    prot_rank = np.argsort(np.argsort(np.array(table.protein_ids)))
    flat = np.asarray(table.values, dtype=np.float64).ravel()
    ri = np.repeat(np.arange(n), m)
    cj = np.tile(np.arange(m), n)
    order = np.lexsort((prot_rank[cj], drug_rank[ri], -flat))
    out = []
    for t in order[:k]:
        i, j = int(ri[t]), int(cj[t])
        out.append((table.drug_ids[i], table.protein_ids[j], float(flat[t])))
    return out

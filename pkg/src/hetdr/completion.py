"""PU-weighted inductive matrix completion.

Learns projection matrices (W, H) linking drug features D and protein
features P to the observed interaction matrix, minimizing

    sum_{(i,j) in pos} (1 - D_i W H^T P_j^T)^2
    + alpha * sum_{(i,j) in neg} (0 - D_i W H^T P_j^T)^2
    + l2 * (||W||_F^2 + ||H||_F^2)

by alternating exact weighted ridge solves, which makes the objective
non-increasing per step. Scores are the bilinear form D_i W H^T P_j^T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from hetdr.errors import NumericalError

Pair = tuple[int, int]


@dataclass(frozen=True)
class CompletionConfig:
    rank: int = 32
    alpha: float = 0.1
    l2: float = 0.25
    max_iters: int = 100
    tol: float = 1e-6
    seed: int = 0
    negative_ratio: float = 1.0
    standardize: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.negative_ratio <= 0:
            raise ValueError("negative_ratio must be positive")


@dataclass(frozen=True)
class InteractionMatrix:
    """Observed positive cells and sampled pseudo-negative cells."""

    shape: tuple[int, int]
    positives: frozenset[Pair]
    negatives: frozenset[Pair] = frozenset()

    def __post_init__(self):
        n, m = self.shape
        for i, j in self.positives | self.negatives:
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError(f"cell ({i}, {j}) outside shape {self.shape}")
        overlap = self.positives & self.negatives
        if overlap:
            raise ValueError(f"positives and negatives overlap: {sorted(overlap)[:5]}")


@dataclass
class CompletionModel:
    """Fitted projection pair plus the standardization applied before fitting."""

    w: np.ndarray
    h: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    drug_mean: np.ndarray | None = None
    drug_std: np.ndarray | None = None
    protein_mean: np.ndarray | None = None
    protein_std: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return int(self.w.shape[1])

    def standardize_drugs(self, features: np.ndarray) -> np.ndarray:
        f = np.asarray(_values(features), dtype=np.float64)
        if self.drug_mean is None:
            return f
        return (f - self.drug_mean) / self.drug_std

    def standardize_proteins(self, features: np.ndarray) -> np.ndarray:
        f = np.asarray(_values(features), dtype=np.float64)
        if self.protein_mean is None:
            return f
        return (f - self.protein_mean) / self.protein_std


def _values(features) -> np.ndarray:
    """Accept either a FeatureMatrix-like object or a plain array."""
    return getattr(features, "values", features)


def sample_negatives(
    positives: Iterable[Pair],
    shape: tuple[int, int],
    ratio: float,
    seed: int,
    exclude: Iterable[Pair] | None = None,
) -> frozenset[Pair]:
    """Sample round(ratio * |positives|) unobserved cells uniformly without
    replacement, disjoint from `exclude` (default: the positives themselves).
    Deterministic given seed.
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    positives = set(positives)
    excluded = set(exclude) if exclude is not None else positives
    n, m = shape
    count = int(round(ratio * len(positives)))
    available = n * m - len(excluded)
    if count > available:
        raise ValueError(
            f"requested {count} negatives but only {available} unobserved cells exist"
        )
    rng = np.random.default_rng(seed)
    chosen: list[Pair] = []
    taken: set[Pair] = set()
    while len(chosen) < count:
        draw = rng.integers(0, n * m, size=max(64, 2 * (count - len(chosen))))
        for lin in draw:
            cell = (int(lin) // m, int(lin) % m)
            if cell in excluded or cell in taken:
                continue
            taken.add(cell)
            chosen.append(cell)
            if len(chosen) == count:
                break
    return frozenset(chosen)


def _zscore(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = f.mean(axis=0)
    std = f.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return (f - mean) / std, mean, std


def _objective(
    d_obs: np.ndarray,
    p_obs: np.ndarray,
    y: np.ndarray,
    wgt: np.ndarray,
    w: np.ndarray,
    h: np.ndarray,
    l2: float,
) -> float:
    scores = np.einsum("tk,tk->t", d_obs @ w, p_obs @ h)
    resid = y - scores
    return float(
        np.sum(wgt * resid * resid)
        + l2 * (np.sum(w * w) + np.sum(h * h))
    )


def _solve_side(
    left_obs: np.ndarray, right_vecs: np.ndarray, y: np.ndarray, wgt: np.ndarray, l2: float
) -> np.ndarray:
    """Exact ridge solve for the projection on one side.

    Minimizes sum_t wgt_t (y_t - left_t X right_t)^2 + l2 ||X||_F^2 over X,
    with `right_vecs` already projected (T x k).
    """
    t, d = left_obs.shape
    k = right_vecs.shape[1]
    phi = (left_obs[:, :, None] * right_vecs[:, None, :]).reshape(t, d * k)
    a = phi.T @ (phi * wgt[:, None]) + l2 * np.eye(d * k)
    b = phi.T @ (wgt * y)
    return np.linalg.solve(a, b).reshape(d, k)


def pumc_fit(
    inter: InteractionMatrix,
    drug_features: np.ndarray,
    protein_features: np.ndarray,
    cfg: CompletionConfig,
) -> CompletionModel:
    """Alternating weighted ridge minimization of the PU completion objective.

    Positive cells carry weight 1 and label 1, negative cells weight
    cfg.alpha and label 0. Stops at max_iters or when the relative
    objective change drops below cfg.tol.
    """
    d = np.asarray(_values(drug_features), dtype=np.float64)
    p = np.asarray(_values(protein_features), dtype=np.float64)
    n, m = inter.shape
    if d.shape[0] != n:
        raise ValueError(f"drug features have {d.shape[0]} rows, interactions have {n}")
    if p.shape[0] != m:
        raise ValueError(f"protein features have {p.shape[0]} rows, interactions have {m}")
    if cfg.rank > min(d.shape[1], p.shape[1]):
        raise ValueError(
            f"rank {cfg.rank} exceeds feature width {min(d.shape[1], p.shape[1])}"
        )
    if not inter.positives:
        raise ValueError("no positive cells to fit")

    if cfg.standardize:
        d, d_mean, d_std = _zscore(d)
        p, p_mean, p_std = _zscore(p)
    else:
        d_mean = d_std = p_mean = p_std = None

    pos = sorted(inter.positives)
    neg = sorted(inter.negatives)
    cells = pos + neg
    ri = np.array([c[0] for c in cells], dtype=np.int64)
    cj = np.array([c[1] for c in cells], dtype=np.int64)
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    wgt = np.concatenate([np.ones(len(pos)), np.full(len(neg), cfg.alpha)])
    d_obs = d[ri]
    p_obs = p[cj]

    rng = np.random.default_rng(cfg.seed)
    k = cfg.rank
    w = rng.normal(0.0, 1.0 / np.sqrt(k), size=(d.shape[1], k))
    h = rng.normal(0.0, 1.0 / np.sqrt(k), size=(p.shape[1], k))

    history = [_objective(d_obs, p_obs, y, wgt, w, h, cfg.l2)]
    for _ in range(cfg.max_iters):
        w = _solve_side(d_obs, p_obs @ h, y, wgt, cfg.l2)
        h = _solve_side(p_obs, d_obs @ w, y, wgt, cfg.l2)
        obj = _objective(d_obs, p_obs, y, wgt, w, h, cfg.l2)
        if not np.isfinite(obj):
            raise NumericalError(
                "non-finite completion objective; check feature scaling"
            )
        history.append(obj)
        prev = history[-2]
        if abs(prev - obj) < cfg.tol * max(abs(prev), 1e-30):
            break
    return CompletionModel(
        w=w,
        h=h,
        objective_history=history,
        drug_mean=d_mean,
        drug_std=d_std,
        protein_mean=p_mean,
        protein_std=p_std,
    )


def score(
    drug_features: np.ndarray, model: CompletionModel, protein_features: np.ndarray,
    i: int, j: int,
) -> float:
    """Predicted association score: the bilinear form D_i W H^T P_j^T."""
    d = np.asarray(_values(drug_features), dtype=np.float64)
    p = np.asarray(_values(protein_features), dtype=np.float64)
    if not (0 <= i < d.shape[0]):
        raise ValueError(f"drug index {i} out of range [0, {d.shape[0]})")
    if not (0 <= j < p.shape[0]):
        raise ValueError(f"protein index {j} out of range [0, {p.shape[0]})")
    return float((d[i] @ model.w) @ (p[j] @ model.h))


def score_matrix(
    drug_features: np.ndarray,
    model: CompletionModel,
    protein_features: np.ndarray,
    row_subset: np.ndarray | None = None,
    col_subset: np.ndarray | None = None,
) -> np.ndarray:
    """Dense block of bilinear scores for the given row/column subsets."""
    d = np.asarray(_values(drug_features), dtype=np.float64)
    p = np.asarray(_values(protein_features), dtype=np.float64)
    if row_subset is not None:
        row_subset = np.asarray(row_subset, dtype=np.int64)
        if row_subset.size == 0:
            raise ValueError("empty drug subset")
        d = d[row_subset]
    if col_subset is not None:
        col_subset = np.asarray(col_subset, dtype=np.int64)
        if col_subset.size == 0:
            raise ValueError("empty protein subset")
        p = p[col_subset]
    return (d @ model.w) @ (p @ model.h).T


def save_model(
    model: CompletionModel,
    path: str | Path,
    config_hash: str = "",
    provenance: dict | None = None,
) -> None:
    """Persist W, H and the standardization vectors as JSON (exact float64)."""
    def arr(a):
        return None if a is None else np.asarray(a, dtype=np.float64).tolist()

    payload = {
        "config_hash": config_hash,
        "provenance": provenance or {},
        "w": arr(model.w),
        "h": arr(model.h),
        "objective_history": [float(v) for v in model.objective_history],
        "drug_mean": arr(model.drug_mean),
        "drug_std": arr(model.drug_std),
        "protein_mean": arr(model.protein_mean),
        "protein_std": arr(model.protein_std),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> tuple[CompletionModel, dict]:
    """Reload a persisted model; returns (model, metadata)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))

    def arr(x):
        return None if x is None else np.asarray(x, dtype=np.float64)

    model = CompletionModel(
        w=arr(payload["w"]),
        h=arr(payload["h"]),
        objective_history=list(payload.get("objective_history", [])),
        drug_mean=arr(payload.get("drug_mean")),
        drug_std=arr(payload.get("drug_std")),
        protein_mean=arr(payload.get("protein_mean")),
        protein_std=arr(payload.get("protein_std")),
    )
    meta = {
        "config_hash": payload.get("config_hash", ""),
        "provenance": payload.get("provenance", {}),
    }
    return model, meta


def build_interactions(
    positives: Iterable[Pair],
    shape: tuple[int, int],
    cfg: CompletionConfig,
    seed: int | None = None,
    exclude: Iterable[Pair] | None = None,
) -> InteractionMatrix:
    """Pair observed positives with a sampled pseudo-negative set."""
    positives = frozenset(positives)
    negatives = sample_negatives(
        positives,
        shape,
        cfg.negative_ratio,
        cfg.seed if seed is None else seed,
        exclude=exclude,
    )
    return InteractionMatrix(shape=shape, positives=positives, negatives=negatives)


__all__ = [
    "CompletionConfig",
    "CompletionModel",
    "InteractionMatrix",
    "build_interactions",
    "load_model",
    "pumc_fit",
    "sample_negatives",
    "save_model",
    "score",
    "score_matrix",
]

"""Synthetic desk-scale fixture universe.

Generates a 50-drug / 40-protein / 20-disease world with planted latent
structure: 5 association networks plus 8 drug and 4 protein similarity
networks (17 total), an external positive-drug list, a protein subset, and
a ready-to-run pipeline config. CI never needs real data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hetdr.seeding import derive_seed


@dataclass(frozen=True)
class FixtureSpec:
    n_drugs: int = 50
    n_proteins: int = 40
    n_diseases: int = 20
    latent_dim: int = 6
    n_drug_sims: int = 8
    n_protein_sims: int = 4
    interaction_density: float = 0.06
    assoc_density: float = 0.08
    homog_density: float = 0.10
    subset_size: int = 10
    external_size: int = 12
    seed: int = 20240501


def _unit_rows(z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return z / norms


def _top_density_pairs(scores: np.ndarray, density: float) -> list[tuple[int, int]]:
    """Cells whose score falls in the top `density` fraction."""
    flat = scores.ravel()
    count = max(1, int(round(density * flat.size)))
    cutoff_idx = np.argsort(-flat, kind="stable")[:count]
    m = scores.shape[1]
    return sorted((int(t) // m, int(t) % m) for t in cutoff_idx)


def _homog_edges(z: np.ndarray, density: float) -> list[tuple[int, int]]:
    """Top-density unordered pairs by latent cosine similarity."""
    zc = _unit_rows(z)
    sim = zc @ zc.T
    n = sim.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    vals = sim[iu, ju]
    count = max(1, int(round(density * vals.size)))
    keep = np.argsort(-vals, kind="stable")[:count]
    return sorted((int(iu[t]), int(ju[t])) for t in keep)


def _similarity_matrix(z: np.ndarray, rng: np.random.Generator, noise: float = 0.05) -> np.ndarray:
    """A noisy cosine-similarity view of the latent factors, clipped to [0, 1]."""
    proj = rng.normal(size=(z.shape[1], z.shape[1]))
    y = _unit_rows(z @ proj)
    raw = y @ y.T
    jitter = rng.normal(scale=noise, size=raw.shape)
    raw = raw + (jitter + jitter.T) / 2.0
    sim = np.clip(raw, 0.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def _write_ids(path: Path, names: list[str]) -> None:
    path.write_text("\n".join(names) + "\n", encoding="utf-8")


def _write_pairs(path: Path, pairs, row_names, col_names, weights=None) -> None:
    lines = []
    for t, (i, j) in enumerate(pairs):
        w = 1.0 if weights is None else float(weights[t])
        lines.append(f"{row_names[i]}\t{col_names[j]}\t{w!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_similarity(path: Path, sim: np.ndarray, names: list[str]) -> None:
    # upper triangle incl. diagonal; the loader's symmetric closure restores the rest
    lines = []
    n = sim.shape[0]
    for i in range(n):
        for j in range(i, n):
            if sim[i, j] > 0:
                lines.append(f"{names[i]}\t{names[j]}\t{float(sim[i, j])!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_features(path: Path, values: np.ndarray, kind: str, name: str) -> None:
    header = f"# kind={kind} network={name} rows={values.shape[0]} dim={values.shape[1]}"
    rows = ["\t".join(repr(float(v)) for v in row) for row in values]
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def generate_fixture(out_dir: str | Path, spec: FixtureSpec = FixtureSpec()) -> dict:
    """Write the full fixture universe under `out_dir`; returns key paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    drugs = [f"DR{i:04d}" for i in range(spec.n_drugs)]
    proteins = [f"PR{i:04d}" for i in range(spec.n_proteins)]
    diseases = [f"DI{i:04d}" for i in range(spec.n_diseases)]
    zd = rng.normal(size=(spec.n_drugs, spec.latent_dim))
    zp = rng.normal(size=(spec.n_proteins, spec.latent_dim))
    zq = rng.normal(size=(spec.n_diseases, spec.latent_dim))

    _write_ids(out / "drugs.txt", drugs)
    _write_ids(out / "proteins.txt", proteins)
    _write_ids(out / "diseases.txt", diseases)

    planted_dp = zd @ zp.T
    dp_pairs = _top_density_pairs(planted_dp, spec.interaction_density)
    _write_pairs(out / "drug_protein.tsv", dp_pairs, drugs, proteins)
    dd_pairs = _top_density_pairs(zd @ zq.T, spec.assoc_density)
    _write_pairs(out / "drug_disease.tsv", dd_pairs, drugs, diseases)
    pd_pairs = _top_density_pairs(zp @ zq.T, spec.assoc_density)
    _write_pairs(out / "protein_disease.tsv", pd_pairs, proteins, diseases)
    _write_pairs(out / "drug_drug.tsv", _homog_edges(zd, spec.homog_density), drugs, drugs)
    _write_pairs(
        out / "protein_protein.tsv", _homog_edges(zp, spec.homog_density), proteins, proteins
    )

    drug_sim_names, protein_sim_names = [], []
    for t in range(spec.n_drug_sims):
        sim_rng = np.random.default_rng(derive_seed(spec.seed, f"drug-sim-{t}"))
        name = f"drug_sim_{t + 1}"
        _write_similarity(out / f"{name}.tsv", _similarity_matrix(zd, sim_rng), drugs)
        drug_sim_names.append(name)
    for t in range(spec.n_protein_sims):
        sim_rng = np.random.default_rng(derive_seed(spec.seed, f"protein-sim-{t}"))
        name = f"protein_sim_{t + 1}"
        _write_similarity(out / f"{name}.tsv", _similarity_matrix(zp, sim_rng), proteins)
        protein_sim_names.append(name)

    # hidden widths must sit strictly below the smallest input width
    n_min = min(spec.n_drugs, spec.n_proteins)
    h1 = max(4, min(24, n_min // 2))
    h2 = max(2, min(10, h1 // 2))

    subset_idx = sorted(
        rng.choice(spec.n_proteins, size=spec.subset_size, replace=False).tolist()
    )
    subset = [proteins[j] for j in subset_idx]
    _write_ids(out / "protein_subset.txt", subset)
    drug_level = planted_dp[:, subset_idx].max(axis=1)
    ext_idx = np.argsort(-drug_level, kind="stable")[: spec.external_size]
    _write_ids(out / "external_drugs.txt", sorted(drugs[i] for i in ext_idx))

    # planted feature matrices for evaluation without the embedding stage
    _write_features(out / "planted_drug_features.tsv", zd, "drug", "planted")
    _write_features(out / "planted_protein_features.tsv", zp, "protein", "planted")

    config = {
        "seed": spec.seed,
        "out_dir": "out",
        "id_maps": {"drug": "drugs.txt", "protein": "proteins.txt", "disease": "diseases.txt"},
        "interactions": "drug_protein",
        "associations": [
            {
                "name": "drug_protein",
                "path": "drug_protein.tsv",
                "row_kind": "drug",
                "col_kind": "protein",
                "jaccard_sides": ["rows", "cols"],
            },
            {
                "name": "drug_disease",
                "path": "drug_disease.tsv",
                "row_kind": "drug",
                "col_kind": "disease",
                "jaccard_sides": ["rows"],
            },
            {
                "name": "protein_disease",
                "path": "protein_disease.tsv",
                "row_kind": "protein",
                "col_kind": "disease",
                "jaccard_sides": ["rows"],
            },
        ],
        "homogeneous": [
            {"name": "drug_drug", "path": "drug_drug.tsv", "kind": "drug"},
            {"name": "protein_protein", "path": "protein_protein.tsv", "kind": "protein"},
        ],
        "similarity_files": (
            [{"name": n, "path": f"{n}.tsv", "kind": "drug"} for n in drug_sim_names]
            + [{"name": n, "path": f"{n}.tsv", "kind": "protein"} for n in protein_sim_names]
        ),
        "similarity_cutoff": 0.0,
        "surf": {"alpha": 0.98, "steps": 10},
        "ppmi_shift": 0.0,
        "sdae": {
            "hidden_sizes": [h1, h2],
            "noise_rate": 0.2,
            "weight_decay": 1e-4,
            "learning_rate": 5e-4,
            "epochs": 40,
            "batch_size": 16,
        },
        "completion": {
            "rank": 8,
            "alpha": 0.1,
            "l2": 0.25,
            "max_iters": 30,
            "tol": 1e-6,
            "negative_ratio": 1.0,
        },
        "cv": {"folds": 5, "repeats": 2},
        "external_set": "external_drugs.txt",
        "protein_subset": "protein_subset.txt",
        "external_aggregate": "max",
        "rank_top_k": min(100, spec.n_drugs * spec.subset_size),
    }
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")

    planted_config = dict(config)
    planted_config["out_dir"] = "out_planted"
    planted_config["precomputed_features"] = {
        "drug": "planted_drug_features.tsv",
        "protein": "planted_protein_features.tsv",
    }
    planted_config["completion"] = {
        **config["completion"],
        "rank": min(config["completion"]["rank"], spec.latent_dim),
    }
    (out / "config_planted.json").write_text(
        json.dumps(planted_config, indent=2), encoding="utf-8"
    )

    return {
        "dir": out,
        "config": out / "config.json",
        "planted_config": out / "config_planted.json",
        "interaction_pairs": dp_pairs,
        "drug_factors": zd,
        "protein_factors": zp,
    }


def planted_completion_instance(
    n_drugs: int = 50,
    n_proteins: int = 40,
    n_features: int = 8,
    rank: int = 3,
    density: float = 0.08,
    seed: int = 0,
):
    """Random features, a rank-`rank` true projection pair, and interactions
    planted as the top-density cells of the true score matrix.

    Returns (drug_features, protein_features, positive_pairs, true_scores).
    """
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n_drugs, n_features))
    p = rng.normal(size=(n_proteins, n_features))
    w_true = rng.normal(size=(n_features, rank))
    h_true = rng.normal(size=(n_features, rank))
    true_scores = (d @ w_true) @ (p @ h_true).T
    pairs = _top_density_pairs(true_scores, density)
    return d, p, pairs, true_scores

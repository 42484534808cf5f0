"""Pipeline orchestration: similarity -> embed -> fit -> evaluate -> rank.

Every stage is cached under a content hash of (inputs, stage config, code
version, effective seed); reruns with unchanged hashes are no-ops, and a
corrupted or mismatched hash forces the stage to rerun. Every artifact
embeds the config hash that produced it.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import hetdr
from hetdr.completion import (
    CompletionConfig,
    InteractionMatrix,
    load_model,
    pumc_fit,
    sample_negatives,
    save_model,
    score_matrix,
)
from hetdr.embedding import (
    Embedding,
    SdaeConfig,
    SurfConfig,
    embed_network,
    fuse_embeddings,
)
from hetdr.errors import NumericalError
from hetdr.evaluation import (
    ExternalValidationSet,
    MetricReport,
    ScoreTable,
    cross_validate,
    external_validate,
    make_folds,
    top_k_associations,
)
from hetdr.networks import (
    EntityIdMap,
    jaccard_similarity,
    load_edge_list,
    load_id_map,
    write_edge_list,
)
from hetdr.seeding import derive_seed

STAGES = ("similarity", "embed", "fit", "evaluate", "rank")


@dataclass(frozen=True)
class NetworkRef:
    name: str
    path: Path
    kind: str


@dataclass(frozen=True)
class AssociationRef:
    name: str
    path: Path
    row_kind: str
    col_kind: str
    jaccard_sides: tuple[str, ...] = ()


@dataclass
class PipelineConfig:
    seed: int
    out_dir: Path
    id_maps: dict[str, Path]
    interactions: str
    associations: list[AssociationRef]
    homogeneous: list[NetworkRef] = field(default_factory=list)
    similarity_files: list[NetworkRef] = field(default_factory=list)
    similarity_cutoff: float = 0.0
    surf: SurfConfig = field(default_factory=SurfConfig)
    ppmi_shift: float = 0.0
    sdae: dict = field(default_factory=dict)
    completion: dict = field(default_factory=dict)
    cv_folds: int = 5
    cv_repeats: int = 10
    external_set: Path | None = None
    protein_subset: Path | None = None
    external_aggregate: str = "max"
    rank_top_k: int = 100
    precomputed_features: dict[str, Path] | None = None

    @classmethod
    def from_json(
        cls,
        path: str | Path,
        out_override: str | Path | None = None,
        seed_override: int | None = None,
    ) -> "PipelineConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def p(rel) -> Path:
            return (base / rel).resolve() if rel is not None else None

        assoc = [
            AssociationRef(
                name=a["name"],
                path=p(a["path"]),
                row_kind=a["row_kind"],
                col_kind=a["col_kind"],
                jaccard_sides=tuple(a.get("jaccard_sides", ())),
            )
            for a in raw.get("associations", [])
        ]
        homog = [
            NetworkRef(name=x["name"], path=p(x["path"]), kind=x["kind"])
            for x in raw.get("homogeneous", [])
        ]
        sims = [
            NetworkRef(name=x["name"], path=p(x["path"]), kind=x["kind"])
            for x in raw.get("similarity_files", [])
        ]
        pre = raw.get("precomputed_features")
        cfg = cls(
            seed=int(raw["seed"]) if seed_override is None else int(seed_override),
            out_dir=Path(out_override) if out_override else base / raw.get("out_dir", "out"),
            id_maps={k: p(v) for k, v in raw["id_maps"].items()},
            interactions=raw["interactions"],
            associations=assoc,
            homogeneous=homog,
            similarity_files=sims,
            similarity_cutoff=float(raw.get("similarity_cutoff", 0.0)),
            surf=SurfConfig(**raw.get("surf", {})),
            ppmi_shift=float(raw.get("ppmi_shift", 0.0)),
            sdae=dict(raw.get("sdae", {})),
            completion=dict(raw.get("completion", {})),
            cv_folds=int(raw.get("cv", {}).get("folds", 5)),
            cv_repeats=int(raw.get("cv", {}).get("repeats", 10)),
            external_set=p(raw.get("external_set")),
            protein_subset=p(raw.get("protein_subset")),
            external_aggregate=raw.get("external_aggregate", "max"),
            rank_top_k=int(raw.get("rank_top_k", 100)),
            precomputed_features={k: p(v) for k, v in pre.items()} if pre else None,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.external_aggregate not in ("max", "mean"):
            raise ValueError(
                f"external_aggregate must be 'max' or 'mean', got {self.external_aggregate!r}"
            )
        if self.interactions not in {a.name for a in self.associations}:
            raise ValueError(
                f"interactions network {self.interactions!r} not among the associations"
            )
        for kind in ("drug", "protein"):
            if kind not in self.id_maps:
                raise ValueError(f"id_maps must include {kind!r}")
        paths = list(self.id_maps.values())
        paths += [a.path for a in self.associations]
        paths += [x.path for x in self.homogeneous + self.similarity_files]
        if self.external_set:
            paths.append(self.external_set)
        if self.protein_subset:
            paths.append(self.protein_subset)
        if self.precomputed_features:
            paths += list(self.precomputed_features.values())
        for q in paths:
            if not Path(q).exists():
                raise FileNotFoundError(f"configured input does not exist: {q}")

    def completion_config(self, seed: int) -> CompletionConfig:
        return CompletionConfig(seed=seed, **self.completion)

    def sdae_config(self, input_width: int, seed: int) -> SdaeConfig:
        opts = dict(self.sdae)
        hidden = tuple(opts.pop("hidden_sizes", (128,)))
        return SdaeConfig(layer_sizes=(input_width, *hidden), seed=seed, **opts)


@dataclass
class StageContext:
    out_dir: Path
    seed: int
    jobs: int = 1
    force: bool = False


# --------------------------------------------------------------------------
# hashing and artifact I/O


def _file_sha(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _stage_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _meta_path(out_dir: Path, stage: str) -> Path:
    return out_dir / f"{stage}.meta.json"


def _stage_cached(out_dir: Path, stage: str, expected: str, outputs: list[Path]) -> bool:
    meta = _meta_path(out_dir, stage)
    if not meta.exists():
        return False
    try:
        recorded = json.loads(meta.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if recorded.get("hash") != expected:
        return False
    return all(p.exists() for p in outputs)


def _write_meta(out_dir: Path, stage: str, stage_hash: str, outputs: list[Path]) -> None:
    meta = {
        "stage": stage,
        "hash": stage_hash,
        "code_version": hetdr.__version__,
        "outputs": [str(p.relative_to(out_dir)) for p in outputs],
    }
    _meta_path(out_dir, stage).write_text(json.dumps(meta, indent=2), encoding="utf-8")


def write_matrix(path: Path, values: np.ndarray, header: dict) -> None:
    """TSV matrix with one '#' header line; repr round-trips float64 exactly."""
    head = "# " + " ".join(f"{k}={v}" for k, v in header.items())
    rows = ["\t".join(repr(float(v)) for v in row) for row in np.atleast_2d(values)]
    path.write_text(head + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def read_matrix(path: Path) -> tuple[np.ndarray, dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header: dict = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        if line.strip():
            body.append([float(x) for x in line.split("\t")])
    return np.array(body, dtype=np.float64), header


def _read_id_lines(path: Path) -> list[str]:
    return [s.strip() for s in Path(path).read_text(encoding="utf-8").splitlines() if s.strip()]


# --------------------------------------------------------------------------
# similarity stage


def _derived_sim_name(assoc: AssociationRef, side: str) -> str:
    kind = assoc.row_kind if side == "rows" else assoc.col_kind
    return f"{assoc.name}__{kind}_jaccard"


def run_similarity(cfg: PipelineConfig, ctx: StageContext) -> list[Path]:
    sim_dir = ctx.out_dir / "similarity"
    jobs = [
        (assoc, side) for assoc in cfg.associations for side in assoc.jaccard_sides
    ]
    outputs = [sim_dir / f"{_derived_sim_name(a, s)}.tsv" for a, s in jobs]
    payload = {
        "stage": "similarity",
        "code": hetdr.__version__,
        "cutoff": cfg.similarity_cutoff,
        "jobs": [[a.name, s] for a, s in jobs],
        "inputs": {a.name: _file_sha(a.path) for a, _ in jobs},
        "id_maps": {k: _file_sha(v) for k, v in cfg.id_maps.items()},
    }
    h = _stage_hash(payload)
    if not ctx.force and _stage_cached(ctx.out_dir, "similarity", h, outputs):
        print(f"[similarity] up to date ({h})")
        return outputs
    sim_dir.mkdir(parents=True, exist_ok=True)
    maps = {k: load_id_map(v, k) for k, v in cfg.id_maps.items()}
    for (assoc, side), out_path in zip(jobs, outputs):
        net = load_edge_list(assoc.path, maps[assoc.row_kind], maps[assoc.col_kind])
        sim = jaccard_similarity(net, axis=side, cutoff=cfg.similarity_cutoff)
        id_map = maps[sim.row_kind]
        write_edge_list(
            sim,
            out_path,
            id_map,
            id_map,
            header=[f"config_hash={h} source={sim.source}"],
        )
    _write_meta(ctx.out_dir, "similarity", h, outputs)
    print(f"[similarity] wrote {len(outputs)} networks ({h})")
    return outputs


# --------------------------------------------------------------------------
# embed stage


def _embedding_jobs(cfg: PipelineConfig, ctx: StageContext) -> list[dict]:
    """Square networks to embed, in deterministic config order."""
    jobs = []
    for ref in cfg.homogeneous:
        jobs.append({"name": ref.name, "kind": ref.kind, "path": ref.path})
    for ref in cfg.similarity_files:
        jobs.append({"name": ref.name, "kind": ref.kind, "path": ref.path})
    for assoc in cfg.associations:
        for side in assoc.jaccard_sides:
            name = _derived_sim_name(assoc, side)
            kind = assoc.row_kind if side == "rows" else assoc.col_kind
            jobs.append(
                {"name": name, "kind": kind, "path": ctx.out_dir / "similarity" / f"{name}.tsv"}
            )
    return jobs


def _embed_worker(args: dict) -> tuple[str, str, np.ndarray]:
    name = args["name"]
    try:
        id_map = load_id_map(args["idmap_path"], args["kind"])
        net = load_edge_list(args["path"], id_map, id_map, symmetric=True)
        sdae_cfg = SdaeConfig(layer_sizes=args["layer_sizes"], seed=args["seed"], **args["sdae"])
        emb, _ = embed_network(
            net, SurfConfig(**args["surf"]), args["ppmi_shift"], sdae_cfg, name
        )
        return name, args["kind"], emb.values
    except NumericalError as e:
        raise NumericalError(f"network {name!r}: {e}") from e
    except Exception as e:
        raise ValueError(f"network {name!r}: {e}") from e


def run_embed(cfg: PipelineConfig, ctx: StageContext) -> dict[str, Path]:
    emb_dir = ctx.out_dir / "embeddings"
    feat_dir = ctx.out_dir / "features"
    feature_paths = {}

    if cfg.precomputed_features:
        # caller supplies ready feature matrices; embedding is skipped
        for kind, src in cfg.precomputed_features.items():
            feature_paths[kind] = Path(src)
        print("[embed] using precomputed feature matrices")
        return feature_paths

    jobs = _embedding_jobs(cfg, ctx)
    for job in jobs:
        if not Path(job["path"]).exists():
            raise FileNotFoundError(
                f"network file for {job['name']!r} missing: {job['path']} "
                "(run the similarity stage first)"
            )
    kinds = sorted({j["kind"] for j in jobs})
    outputs = [emb_dir / f"{j['name']}.tsv" for j in jobs]
    outputs += [feat_dir / f"{k}_features.tsv" for k in kinds]
    payload = {
        "stage": "embed",
        "code": hetdr.__version__,
        "seed": ctx.seed,
        "surf": {"alpha": cfg.surf.alpha, "steps": cfg.surf.steps},
        "ppmi_shift": cfg.ppmi_shift,
        "sdae": cfg.sdae,
        "networks": [j["name"] for j in jobs],
        "inputs": {j["name"]: _file_sha(j["path"]) for j in jobs},
        "id_maps": {k: _file_sha(v) for k, v in cfg.id_maps.items()},
    }
    h = _stage_hash(payload)
    feature_paths = {k: feat_dir / f"{k}_features.tsv" for k in kinds}
    if not ctx.force and _stage_cached(ctx.out_dir, "embed", h, outputs):
        print(f"[embed] up to date ({h})")
        return feature_paths
    emb_dir.mkdir(parents=True, exist_ok=True)
    feat_dir.mkdir(parents=True, exist_ok=True)

    maps = {k: load_id_map(v, k) for k, v in cfg.id_maps.items()}
    sdae_opts = dict(cfg.sdae)
    hidden = tuple(sdae_opts.pop("hidden_sizes", (128,)))
    work = []
    for job in jobs:
        n = len(maps[job["kind"]])
        work.append(
            {
                "name": job["name"],
                "kind": job["kind"],
                "path": str(job["path"]),
                "idmap_path": str(cfg.id_maps[job["kind"]]),
                "layer_sizes": (n, *hidden),
                "seed": derive_seed(ctx.seed, f"embed:{job['name']}"),
                "surf": {"alpha": cfg.surf.alpha, "steps": cfg.surf.steps},
                "ppmi_shift": cfg.ppmi_shift,
                "sdae": sdae_opts,
            }
        )
    if ctx.jobs > 1:
        with ProcessPoolExecutor(max_workers=ctx.jobs) as pool:
            results = list(pool.map(_embed_worker, work))
    else:
        results = [_embed_worker(w) for w in work]

    by_kind: dict[str, list[Embedding]] = {k: [] for k in kinds}
    for (name, kind, values), out_path in zip(results, outputs):
        write_matrix(
            out_path,
            values,
            {
                "kind": kind,
                "network": name,
                "rows": values.shape[0],
                "dim": values.shape[1],
                "config_hash": h,
            },
        )
        by_kind[kind].append(Embedding(kind=kind, name=name, values=values))
    for kind in kinds:
        fused = fuse_embeddings(by_kind[kind])
        prov = ",".join(f"{n}:{d}" for n, d in fused.provenance)
        write_matrix(
            feature_paths[kind],
            fused.values,
            {
                "kind": kind,
                "rows": fused.values.shape[0],
                "dim": fused.values.shape[1],
                "provenance": prov,
                "config_hash": h,
            },
        )
    _write_meta(ctx.out_dir, "embed", h, outputs)
    print(f"[embed] embedded {len(jobs)} networks -> {len(kinds)} feature matrices ({h})")
    return feature_paths


# --------------------------------------------------------------------------
# fit stage


def _interaction_positives(cfg: PipelineConfig) -> tuple[InteractionMatrix, EntityIdMap, EntityIdMap]:
    assoc = next(a for a in cfg.associations if a.name == cfg.interactions)
    rows = load_id_map(cfg.id_maps[assoc.row_kind], assoc.row_kind)
    cols = load_id_map(cfg.id_maps[assoc.col_kind], assoc.col_kind)
    net = load_edge_list(assoc.path, rows, cols)
    positives = frozenset(
        (int(i), int(j)) for i, j, w in zip(net.row_idx, net.col_idx, net.weights) if w > 0
    )
    inter = InteractionMatrix(shape=net.shape, positives=positives)
    return inter, rows, cols


def _load_features(cfg: PipelineConfig, ctx: StageContext) -> dict[str, tuple[np.ndarray, Path]]:
    out = {}
    if cfg.precomputed_features:
        sources = {k: Path(v) for k, v in cfg.precomputed_features.items()}
    else:
        sources = {
            k: ctx.out_dir / "features" / f"{k}_features.tsv" for k in ("drug", "protein")
        }
    for kind in ("drug", "protein"):
        path = sources[kind]
        if not path.exists():
            raise FileNotFoundError(
                f"{kind} feature file missing: {path} (run the embed stage first)"
            )
        values, header = read_matrix(path)
        if header.get("kind", kind) != kind:
            raise ValueError(f"{path}: expected kind={kind}, found {header.get('kind')!r}")
        out[kind] = (values, path)
    return out


def run_fit(cfg: PipelineConfig, ctx: StageContext) -> Path:
    model_path = ctx.out_dir / "model.json"
    feats = _load_features(cfg, ctx)
    inter_ref = next(a for a in cfg.associations if a.name == cfg.interactions)
    payload = {
        "stage": "fit",
        "code": hetdr.__version__,
        "seed": ctx.seed,
        "completion": cfg.completion,
        "inputs": {
            "interactions": _file_sha(inter_ref.path),
            "drug_features": _file_sha(feats["drug"][1]),
            "protein_features": _file_sha(feats["protein"][1]),
        },
    }
    h = _stage_hash(payload)
    if not ctx.force and _stage_cached(ctx.out_dir, "fit", h, [model_path]):
        print(f"[fit] up to date ({h})")
        return model_path
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    inter, _, _ = _interaction_positives(cfg)
    d_values = feats["drug"][0]
    p_values = feats["protein"][0]
    fit_cfg = cfg.completion_config(seed=derive_seed(ctx.seed, "fit:init"))
    negatives = sample_negatives(
        inter.positives,
        inter.shape,
        fit_cfg.negative_ratio,
        derive_seed(ctx.seed, "fit:negatives"),
    )
    model = pumc_fit(
        InteractionMatrix(inter.shape, inter.positives, negatives),
        d_values,
        p_values,
        fit_cfg,
    )
    save_model(
        model,
        model_path,
        config_hash=h,
        provenance={
            "drug_features": feats["drug"][1].name,
            "drug_features_sha": _file_sha(feats["drug"][1]),
            "protein_features": feats["protein"][1].name,
            "protein_features_sha": _file_sha(feats["protein"][1]),
            "n_positives": len(inter.positives),
            "n_negatives": len(negatives),
        },
    )
    _write_meta(ctx.out_dir, "fit", h, [model_path])
    print(
        f"[fit] objective {model.objective_history[0]:.4g} -> "
        f"{model.objective_history[-1]:.4g} in {len(model.objective_history) - 1} iters ({h})"
    )
    return model_path


# --------------------------------------------------------------------------
# evaluate stage


def _subset_indices(cfg: PipelineConfig, cols: EntityIdMap) -> np.ndarray:
    if cfg.protein_subset is None:
        return np.arange(len(cols))
    names = _read_id_lines(cfg.protein_subset)
    if not names:
        raise ValueError(f"protein subset file {cfg.protein_subset} is empty")
    return np.array([cols.index_of(n) for n in names], dtype=np.int64)


def _drug_ranking(
    model, d_values, p_values, subset_idx, drug_ids, aggregate: str
) -> list[tuple[str, float]]:
    d_std = model.standardize_drugs(d_values)
    p_std = model.standardize_proteins(p_values)
    block = score_matrix(d_std, model, p_std, col_subset=subset_idx)
    agg = block.max(axis=1) if aggregate == "max" else block.mean(axis=1)
    order = np.lexsort((np.array(drug_ids), -agg))
    return [(drug_ids[i], float(agg[i])) for i in order]


def _report_dict(rep: MetricReport) -> dict:
    out = {
        "auroc": rep.auroc,
        "aupr": rep.aupr,
        "per_fold": [[a, p] for a, p in rep.per_fold],
    }
    if rep.pooled_auroc is not None:
        out["pooled_auroc"] = rep.pooled_auroc
        out["pooled_aupr"] = rep.pooled_aupr
    return out


def _write_curve(path: Path, points: list[tuple[float, float, float]]) -> None:
    lines = ["threshold,x,y"]
    for thr, x, y in points:
        lines.append(f"{float(thr)!r},{float(x)!r},{float(y)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_evaluate(cfg: PipelineConfig, ctx: StageContext) -> Path:
    metrics_path = ctx.out_dir / "metrics.json"
    feats = _load_features(cfg, ctx)
    inter_ref = next(a for a in cfg.associations if a.name == cfg.interactions)
    inputs = {
        "interactions": _file_sha(inter_ref.path),
        "drug_features": _file_sha(feats["drug"][1]),
        "protein_features": _file_sha(feats["protein"][1]),
    }
    outputs = [metrics_path, ctx.out_dir / "cv_roc.csv", ctx.out_dir / "cv_pr.csv"]
    model_path = ctx.out_dir / "model.json"
    if cfg.external_set:
        if not model_path.exists():
            raise FileNotFoundError(
                f"model file missing: {model_path} (run the fit stage first)"
            )
        inputs["model"] = _file_sha(model_path)
        inputs["external_set"] = _file_sha(cfg.external_set)
        if cfg.protein_subset:
            inputs["protein_subset"] = _file_sha(cfg.protein_subset)
        outputs += [ctx.out_dir / "external_roc.csv", ctx.out_dir / "external_pr.csv"]
    payload = {
        "stage": "evaluate",
        "code": hetdr.__version__,
        "seed": ctx.seed,
        "completion": cfg.completion,
        "cv": {"folds": cfg.cv_folds, "repeats": cfg.cv_repeats},
        "external_aggregate": cfg.external_aggregate,
        "inputs": inputs,
    }
    h = _stage_hash(payload)
    if not ctx.force and _stage_cached(ctx.out_dir, "evaluate", h, outputs):
        print(f"[evaluate] up to date ({h})")
        return metrics_path
    ctx.out_dir.mkdir(parents=True, exist_ok=True)

    inter, rows, cols = _interaction_positives(cfg)
    d_values = feats["drug"][0]
    p_values = feats["protein"][0]
    cv_cfg = cfg.completion_config(seed=0)
    plan = make_folds(
        inter.positives, cfg.cv_folds, cfg.cv_repeats, derive_seed(ctx.seed, "cv")
    )
    cv_report = cross_validate(inter, d_values, p_values, cv_cfg, plan)
    _write_curve(ctx.out_dir / "cv_roc.csv", cv_report.roc_points)
    _write_curve(ctx.out_dir / "cv_pr.csv", cv_report.pr_points)

    result = {
        "config_hash": h,
        "seed": ctx.seed,
        "cv": _report_dict(cv_report),
        "external": None,
    }
    if cfg.external_set:
        model, _ = load_model(model_path)
        subset_idx = _subset_indices(cfg, cols)
        ranking = _drug_ranking(
            model, d_values, p_values, subset_idx, list(rows.names), cfg.external_aggregate
        )
        ext_ids = _read_id_lines(cfg.external_set)
        for name in ext_ids:
            rows.index_of(name)  # unknown external drug -> rejection
        ext = ExternalValidationSet(
            positive_drug_ids=tuple(ext_ids), description=str(cfg.external_set)
        )
        ext_report = external_validate(ranking, ext)
        _write_curve(ctx.out_dir / "external_roc.csv", ext_report.roc_points)
        _write_curve(ctx.out_dir / "external_pr.csv", ext_report.pr_points)
        result["external"] = _report_dict(ext_report)

    metrics_path.write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")
    _write_meta(ctx.out_dir, "evaluate", h, outputs)
    ext_note = (
        f", external AUROC {result['external']['auroc']:.3f}" if result["external"] else ""
    )
    print(f"[evaluate] CV AUROC {cv_report.auroc:.3f} AUPR {cv_report.aupr:.3f}{ext_note} ({h})")
    return metrics_path


# --------------------------------------------------------------------------
# rank stage


def run_rank(cfg: PipelineConfig, ctx: StageContext) -> list[Path]:
    top_path = ctx.out_dir / "top_associations.tsv"
    ranking_path = ctx.out_dir / "drug_ranking.tsv"
    model_path = ctx.out_dir / "model.json"
    if not model_path.exists():
        raise FileNotFoundError(f"model file missing: {model_path} (run the fit stage first)")
    feats = _load_features(cfg, ctx)
    inputs = {
        "model": _file_sha(model_path),
        "drug_features": _file_sha(feats["drug"][1]),
        "protein_features": _file_sha(feats["protein"][1]),
    }
    if cfg.protein_subset:
        inputs["protein_subset"] = _file_sha(cfg.protein_subset)
    payload = {
        "stage": "rank",
        "code": hetdr.__version__,
        "seed": ctx.seed,
        "top_k": cfg.rank_top_k,
        "aggregate": cfg.external_aggregate,
        "inputs": inputs,
    }
    h = _stage_hash(payload)
    outputs = [top_path, ranking_path]
    if not ctx.force and _stage_cached(ctx.out_dir, "rank", h, outputs):
        print(f"[rank] up to date ({h})")
        return outputs
    ctx.out_dir.mkdir(parents=True, exist_ok=True)

    model, _ = load_model(model_path)
    rows = load_id_map(cfg.id_maps["drug"], "drug")
    cols = load_id_map(cfg.id_maps["protein"], "protein")
    subset_idx = _subset_indices(cfg, cols)
    d_values = feats["drug"][0]
    p_values = feats["protein"][0]
    d_std = model.standardize_drugs(d_values)
    p_std = model.standardize_proteins(p_values)
    block = score_matrix(d_std, model, p_std, col_subset=subset_idx)
    table = ScoreTable(
        drug_ids=rows.names,
        protein_ids=tuple(cols.names[j] for j in subset_idx),
        values=block,
        provenance=h,
    )
    top = top_k_associations(table, cfg.rank_top_k)
    lines = [f"# config_hash={h}"]
    lines += [f"{d}\t{p}\t{s!r}" for d, p, s in top]
    top_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    ranking = _drug_ranking(
        model, d_values, p_values, subset_idx, list(rows.names), cfg.external_aggregate
    )
    lines = [f"# config_hash={h}"]
    lines += [f"{d}\t{s!r}" for d, s in ranking]
    ranking_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_meta(ctx.out_dir, "rank", h, outputs)
    print(f"[rank] wrote top-{cfg.rank_top_k} associations and drug ranking ({h})")
    return outputs


def run_pipeline(cfg: PipelineConfig, ctx: StageContext) -> dict[str, object]:
    """All stages in order; cached stages are skipped."""
    artifacts: dict[str, object] = {}
    artifacts["similarity"] = run_similarity(cfg, ctx)
    artifacts["features"] = run_embed(cfg, ctx)
    artifacts["model"] = run_fit(cfg, ctx)
    artifacts["metrics"] = run_evaluate(cfg, ctx)
    artifacts["rankings"] = run_rank(cfg, ctx)
    return artifacts

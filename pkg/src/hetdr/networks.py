"""Network I/O: ID maps, edge lists, Jaccard similarity networks.

File formats:
  - ID maps: one external ID per line, UTF-8.
  - Edge lists: TSV with columns rowID, colID, optional weight; lines
    starting with '#' are ignored; missing weight defaults to 1.0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

KINDS = ("drug", "protein", "disease")


@dataclass(frozen=True)
class EntityIdMap:
    """Ordered mapping between external string IDs and dense 0..n-1 indices."""

    kind: str
    names: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_names(cls, kind: str, names: Sequence[str]) -> "EntityIdMap":
        if kind not in KINDS:
            raise ValueError(f"unknown entity kind {kind!r}, expected one of {KINDS}")
        names = tuple(names)
        index = {name: i for i, name in enumerate(names)}
        if len(index) != len(names):
            raise ValueError(f"duplicate IDs in {kind} map")
        return cls(kind=kind, names=names, index=index)

    def __len__(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ValueError(f"unknown {self.kind} ID {name!r}") from None


def load_id_map(path: str | Path, kind: str) -> EntityIdMap:
    """Load an ID map, preserving file order. Duplicates are rejected by line."""
    path = Path(path)
    names: list[str] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        name = raw.strip()
        if not name:
            continue
        if name in seen:
            raise ValueError(
                f"{path}: duplicate ID {name!r} on line {lineno} "
                f"(first seen on line {seen[name]})"
            )
        seen[name] = lineno
        names.append(name)
    if not names:
        raise ValueError(f"{path}: ID-map file is empty")
    return EntityIdMap.from_names(kind, names)


@dataclass
class Network:
    """Sparse labeled adjacency, square (homogeneous) or rectangular (bipartite).

    Entries are stored as raw (row, col, weight) triplets so that invalid
    instances (duplicates, out-of-range indices) can be represented and
    reported by `validate_network`.
    """

    row_kind: str
    col_kind: str
    shape: tuple[int, int]
    row_idx: np.ndarray
    col_idx: np.ndarray
    weights: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.row_idx = np.asarray(self.row_idx, dtype=np.int64)
        self.col_idx = np.asarray(self.col_idx, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)

    @property
    def n_entries(self) -> int:
        return int(self.weights.size)

    def _linear_indices(self) -> np.ndarray:
        return self.row_idx * self.shape[1] + self.col_idx

    def to_csr(self) -> sparse.csr_matrix:
        """CSR view of the entries; rejects duplicate coordinates."""
        if self.n_entries and np.unique(self._linear_indices()).size != self.n_entries:
            raise ValueError("network has duplicate (row, col) entries")
        return sparse.csr_matrix(
            (self.weights, (self.row_idx, self.col_idx)), shape=self.shape
        )

    def binarized(self) -> sparse.csr_matrix:
        """CSR with every positive weight replaced by 1.0."""
        m = self.to_csr()
        m.data = np.ones_like(m.data)
        return m


@dataclass
class SimilarityNetwork(Network):
    """Square symmetric network with values in [0, 1]."""

    source: str = ""


def load_edge_list(
    path: str | Path,
    rows: EntityIdMap,
    cols: EntityIdMap,
    symmetric: bool = False,
) -> Network:
    """Load a TSV edge list, resolving IDs through the given maps.

    When `symmetric` is set the network must be square over one entity kind
    and the symmetric closure is applied; a file carrying both directions
    of an edge with unequal weights is rejected.
    """
    path = Path(path)
    if symmetric and rows.kind != cols.kind:
        raise ValueError(
            f"{path}: symmetric flag requires matching kinds, "
            f"got {rows.kind}/{cols.kind}"
        )
    entries: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
        i = rows.index_of(parts[0].strip())
        j = cols.index_of(parts[1].strip())
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
        else:
            w = 1.0
        if w < 0:
            raise ValueError(f"{path}:{lineno}: negative weight {w}")
        if (i, j) in entries:
            raise ValueError(f"{path}:{lineno}: duplicate edge {parts[0]!r} -> {parts[1]!r}")
        entries[(i, j)] = w
    if symmetric:
        for (i, j), w in list(entries.items()):
            mirror = entries.get((j, i))
            if mirror is None:
                entries[(j, i)] = w
            elif mirror != w:
                raise ValueError(
                    f"{path}: edge ({i},{j}) has asymmetric weights {w} vs {mirror}"
                )
    keys = sorted(entries)
    ri = np.array([k[0] for k in keys], dtype=np.int64)
    ci = np.array([k[1] for k in keys], dtype=np.int64)
    wt = np.array([entries[k] for k in keys], dtype=np.float64)
    return Network(
        row_kind=rows.kind,
        col_kind=cols.kind,
        shape=(len(rows), len(cols)),
        row_idx=ri,
        col_idx=ci,
        weights=wt,
        symmetric=symmetric,
    )


def write_edge_list(
    net: Network,
    path: str | Path,
    rows: EntityIdMap,
    cols: EntityIdMap,
    header: Iterable[str] = (),
) -> None:
    """Serialize entries as TSV in canonical (row, col) order.

    Weights are printed with `repr`, which round-trips float64 exactly.
    """
    order = np.lexsort((net.col_idx, net.row_idx))
    lines = [f"# {h}" for h in header]
    for t in order:
        i, j, w = net.row_idx[t], net.col_idx[t], net.weights[t]
        lines.append(f"{rows.names[i]}\t{cols.names[j]}\t{float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def jaccard_similarity(
    assoc: Network, axis: str = "rows", cutoff: float = 0.0
) -> SimilarityNetwork:
    """Pairwise Jaccard similarity of neighbor sets along one side of `assoc`.

    Neighbor sets are binarized (weight > 0 means membership). Entities with
    empty neighbor sets get similarity 0 to everything, themselves included;
    they are reported via a warning. Values <= `cutoff` are dropped (the
    default 0 keeps every positive similarity).
    """
    if axis not in ("rows", "cols"):
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    b = assoc.binarized()
    kind = assoc.row_kind
    if axis == "cols":
        b = b.T.tocsr()
        kind = assoc.col_kind
    n = b.shape[0]
    deg = np.asarray(b.sum(axis=1)).ravel()

    isolated = np.flatnonzero(deg == 0)
    if isolated.size:
        warnings.warn(
            f"{isolated.size} isolated {kind} entities have all-zero similarity: "
            f"indices {isolated.tolist()[:20]}"
            + ("..." if isolated.size > 20 else ""),
            stacklevel=2,
        )

    # Intersection counts once per unordered pair, then mirrored, so
    # Sim(a,b) == Sim(b,a) holds exactly.
    inter = sparse.triu(b @ b.T, k=0).tocoo()
    ii, jj, cnt = inter.row, inter.col, inter.data
    union = deg[ii] + deg[jj] - cnt
    sim = cnt / union
    keep = sim > cutoff
    ii, jj, sim = ii[keep], jj[keep], sim[keep]

    off = ii != jj
    ri = np.concatenate([ii, jj[off]])
    ci = np.concatenate([jj, ii[off]])
    wt = np.concatenate([sim, sim[off]])
    order = np.lexsort((ci, ri))
    return SimilarityNetwork(
        row_kind=kind,
        col_kind=kind,
        shape=(n, n),
        row_idx=ri[order],
        col_idx=ci[order],
        weights=wt[order],
        symmetric=True,
        source=f"jaccard({axis}) of {assoc.row_kind}-{assoc.col_kind} network"
        + (f", cutoff={cutoff}" if cutoff else ""),
    )


def validate_network(net: Network) -> list[str]:
    """Report violations of the Network invariants; empty list means valid."""
    problems: list[str] = []
    n, m = net.shape
    bad_rows = (net.row_idx < 0) | (net.row_idx >= n)
    bad_cols = (net.col_idx < 0) | (net.col_idx >= m)
    if bad_rows.any() or bad_cols.any():
        t = int(np.flatnonzero(bad_rows | bad_cols)[0])
        problems.append(
            f"index out of range: entry ({net.row_idx[t]}, {net.col_idx[t]}) "
            f"outside shape {net.shape}"
        )
    if (net.weights < 0).any():
        t = int(np.flatnonzero(net.weights < 0)[0])
        problems.append(
            f"negative weight {net.weights[t]} at ({net.row_idx[t]}, {net.col_idx[t]})"
        )
    if net.n_entries and not (bad_rows.any() or bad_cols.any()):
        lin = net._linear_indices()
        uniq, counts = np.unique(lin, return_counts=True)
        dup = uniq[counts > 1]
        for d in dup:
            problems.append(f"duplicate entry ({d // m}, {d % m})")
    if net.symmetric:
        if n != m:
            problems.append(f"symmetric flag on non-square shape {net.shape}")
        elif not (bad_rows.any() or bad_cols.any()):
            stored = {
                (int(i), int(j)): float(w)
                for i, j, w in zip(net.row_idx, net.col_idx, net.weights)
            }
            for (i, j), w in sorted(stored.items()):
                if i >= j:
                    continue
                back = stored.get((j, i))
                if back is None:
                    problems.append(f"symmetric network missing mirror of ({i}, {j})")
                elif back != w:
                    problems.append(
                        f"asymmetric weights at ({i}, {j}): {w} vs {back}"
                    )
    return problems

"""File formats: dense CSV graphs, TSV edge lists, membership files, specs.

The CSV graph format is a header row of 0-based node indices followed by the
dense weight rows; integer weights are written verbatim and everything else
with a shortest exact round-trip representation, so write/read is lossless.

Edge-list ingestion follows the email-network convention: directed integer
weights are accumulated per (src, dst) pair, then the undirected weight is
min(w(A->B) + w(B->A), cap) with self-loops dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import BlockModelSpec, Membership

__all__ = [
    "EdgeListDocument",
    "parse_edge_list",
    "ingest_edge_list",
    "write_graph_csv",
    "read_graph_csv",
    "write_edge_list_tsv",
    "write_membership_tsv",
    "read_membership_tsv",
    "load_spec_json",
    "save_spec_json",
]

DEFAULT_WEIGHT_CAP = 127


@dataclass(frozen=True)
class EdgeListDocument:
    """Cleaned directed records plus the node-id index.

    ``node_index`` maps each node id to 0..n-1 in first-appearance order and
    covers every id seen in the file, including ids that only appeared in
    dropped self-loops.
    """

    records: tuple[tuple[str, str, int], ...]
    node_index: dict[str, int]

    @property
    def n(self) -> int:
        return len(self.node_index)


def parse_edge_list(path, drop_self_loops: bool = True) -> EdgeListDocument:
    """Read TSV lines ``src<TAB>dst<TAB>weight`` with nonnegative integer weights."""
    records = []
    node_index: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'src<TAB>dst<TAB>weight', got {line!r}"
                )
            src, dst, wtext = parts
            try:
                w = int(wtext)
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: weight must be an integer, got {wtext!r}"
                ) from None
            if w < 0:
                raise ValidationError(f"{path}:{lineno}: negative weight {w}")
            for node in (src, dst):
                if node not in node_index:
                    node_index[node] = len(node_index)
            if drop_self_loops and src == dst:
                continue
            records.append((src, dst, w))
    return EdgeListDocument(tuple(records), node_index)


def ingest_edge_list(
    path, cap: int = DEFAULT_WEIGHT_CAP, drop_self_loops: bool = True
) -> tuple[np.ndarray, dict[str, int]]:
    """Accumulate directed weights and symmetrize: w(A,B) = min(sum, cap).

    Returns the dense symmetric zero-diagonal matrix and the node index.
    """
    if cap <= 0:
        raise ValidationError(f"cap must be positive, got {cap}")
    doc = parse_edge_list(path, drop_self_loops=drop_self_loops)
    n = doc.n
    W = np.zeros((n, n), dtype=np.float64)
    for src, dst, w in doc.records:
        i, j = doc.node_index[src], doc.node_index[dst]
        if i == j:
            continue
        W[i, j] += w
    W = np.minimum(W + W.T, float(cap))
    np.fill_diagonal(W, 0.0)
    return W, doc.node_index


def _fmt_weight(w: float) -> str:
    if np.isfinite(w) and float(w).is_integer():
        return str(int(w))
    return repr(float(w))


def write_graph_csv(W: np.ndarray, path) -> None:
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(str(i) for i in range(n)) + "\n")
        for row in W:
            fh.write(",".join(_fmt_weight(w) for w in row) + "\n")


def read_graph_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        try:
            n = len([int(tok) for tok in header.split(",")])
        except ValueError:
            raise ValidationError(f"{path}: malformed header row {header!r}") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            toks = line.rstrip("\n").split(",")
            if len(toks) != n:
                raise ValidationError(f"{path}:{lineno}: expected {n} columns, got {len(toks)}")
            try:
                rows.append([float(t) for t in toks])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric entry") from None
    if len(rows) != n:
        raise ValidationError(f"{path}: expected {n} rows, got {len(rows)}")
    return np.array(rows, dtype=np.float64)


def write_edge_list_tsv(W: np.ndarray, path) -> None:
    """Upper-triangle nonzero weights as ``i<TAB>j<TAB>w`` with i < j."""
    W = np.asarray(W, dtype=np.float64)
    iu, ju = np.nonzero(np.triu(W, 1))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(iu.tolist(), ju.tolist()):
            fh.write(f"{i}\t{j}\t{_fmt_weight(W[i, j])}\n")


def write_membership_tsv(m: Membership, path, node_ids=None) -> None:
    ids = node_ids if node_ids is not None else range(m.n)
    with open(path, "w", encoding="utf-8") as fh:
        for node, label in zip(ids, m.labels.tolist()):
            fh.write(f"{node}\t{label}\n")


def read_membership_tsv(path) -> Membership:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 'node<TAB>label'")
            try:
                labels.append(int(parts[1]))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: label must be an integer") from None
    return Membership(np.array(labels, dtype=np.int64))


def load_spec_json(path) -> BlockModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return BlockModelSpec.from_json(fh.read())


def save_spec_json(spec: BlockModelSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(spec.to_json(indent=2) + "\n")

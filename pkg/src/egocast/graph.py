"""Sensor graph construction and ego-graph feature assembly.

The road network enters as directed (from, to, distance) records. Edge
weights use a Gaussian kernel of the distance, scaled by the standard
deviation of all provided distances; kernel values below the sparsity
threshold are zeroed. Normalization adds self-loops and rescales
symmetrically by degree. Per-node feature matrices stack the node's own
history, its strongest forward/backward neighbors, and the unweighted mean
history of the full one-hop neighborhood in each direction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

# (neighbor id, weight); id == PAD_ID marks a zero-padded slot
PAD_ID = -1

NeighborList = list[tuple[int, float]]


@dataclass
class SensorGraph:
    num_nodes: int
    a: np.ndarray                      # weighted adjacency, no self-loops
    a_norm: np.ndarray                 # degree-normalized with self-loops
    dist_std: float
    threshold: float
    k: int | None = None
    fwd_neighbors: list[NeighborList] = field(default_factory=list)
    bwd_neighbors: list[NeighborList] = field(default_factory=list)


def build_adjacency(
    distances: Iterable[tuple[int, int, float]], num_nodes: int, r: float
) -> SensorGraph:
    """Weighted adjacency from directed distance records.

    A[i][j] = exp(-dist(i,j)^2 / s^2) with s the standard deviation of all
    provided distances; entries whose kernel value falls below ``r`` are
    exactly zero. Self-distances are ignored for A (self-loops enter only
    during normalization). r = 0 keeps every provided edge.
    """
    records = [(int(f), int(t), float(d)) for f, t, d in distances]
    for f, t, d in records:
        if not (0 <= f < num_nodes and 0 <= t < num_nodes):
            raise DataError(f"edge ({f}, {t}) out of range for {num_nodes} nodes")
        if not np.isfinite(d) or d < 0:
            raise DataError(f"edge ({f}, {t}) has invalid distance {d}")
    if not records:
        raise DataError("no distance records provided")
    s = float(np.std([d for _, _, d in records]))
    if s == 0.0:
        raise DataError("degenerate kernel: all distances are equal, std is zero")

    a = np.zeros((num_nodes, num_nodes))
    for f, t, d in records:
        if f == t:
            continue
        w = float(np.exp(-(d * d) / (s * s)))
        a[f, t] = w if w >= r else 0.0
    a_norm = normalize_adjacency(a)
    return SensorGraph(num_nodes=num_nodes, a=a, a_norm=a_norm, dist_std=s, threshold=r)


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization with self-loops added."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"adjacency must be square, got {a.shape}")
    with_loops = a + np.eye(a.shape[0])
    deg = with_loops.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)  # self-loops keep every degree positive
    return inv_sqrt[:, None] * with_loops * inv_sqrt[None, :]


def _ranked_neighbors(row: np.ndarray, self_id: int, k: int) -> NeighborList:
    ids = np.nonzero(row)[0]
    ids = ids[ids != self_id]
    # weight descending, ties by ascending id
    order = sorted(ids, key=lambda j: (-row[j], j))
    picked = [(int(j), float(row[j])) for j in order[:k]]
    picked.extend([(PAD_ID, 0.0)] * (k - len(picked)))
    return picked


def select_topk_neighbors(graph: SensorGraph, k: int) -> SensorGraph:
    """Attach per-node top-k neighbor lists in both edge directions.

    Forward neighbors rank by the normalized adjacency; backward neighbors
    by the normalization of the transposed adjacency. Nodes with fewer than
    k neighbors are padded with (PAD_ID, 0.0) slots.
    """
    if k < 0:
        raise DataError(f"k must be non-negative, got {k}")
    bwd_norm = normalize_adjacency(graph.a.T)
    graph.k = k
    graph.fwd_neighbors = [
        _ranked_neighbors(graph.a_norm[v], v, k) for v in range(graph.num_nodes)
    ]
    graph.bwd_neighbors = [
        _ranked_neighbors(bwd_norm[v], v, k) for v in range(graph.num_nodes)
    ]
    return graph


def _one_hop(row: np.ndarray, self_id: int) -> np.ndarray:
    ids = np.nonzero(row)[0]
    return ids[ids != self_id]


def build_ego_features(
    histories: np.ndarray, graph: SensorGraph, k: int, v: int
) -> np.ndarray:
    """Per-node feature matrix of shape (T_h, 2k+3).

    Columns: own history, k strongest forward neighbors, k strongest
    backward neighbors (both weight-descending, zero-padded), then the
    unweighted mean history over ALL one-hop neighbors in each direction
    (zero when the neighborhood is empty).
    """
    histories = np.asarray(histories, dtype=np.float64)
    if histories.ndim == 3:  # accept (|V|, T_h, 1)
        histories = histories[:, :, 0]
    if not 0 <= v < graph.num_nodes:
        raise IndexError(f"node {v} out of range for {graph.num_nodes} nodes")
    if graph.k != k or not graph.fwd_neighbors:
        select_topk_neighbors(graph, k)

    t_h = histories.shape[1]
    out = np.zeros((t_h, 2 * k + 3))
    out[:, 0] = histories[v]
    for slot, (j, _) in enumerate(graph.fwd_neighbors[v]):
        if j != PAD_ID:
            out[:, 1 + slot] = histories[j]
    for slot, (j, _) in enumerate(graph.bwd_neighbors[v]):
        if j != PAD_ID:
            out[:, 1 + k + slot] = histories[j]

    fwd_all = _one_hop(graph.a_norm[v], v)
    if fwd_all.size:
        out[:, 2 * k + 1] = histories[fwd_all].mean(axis=0)
    bwd_all = _one_hop(normalize_adjacency(graph.a.T)[v], v)
    if bwd_all.size:
        out[:, 2 * k + 2] = histories[bwd_all].mean(axis=0)
    return out


def build_ego_feature_series(
    readings: np.ndarray, graph: SensorGraph, k: int
) -> np.ndarray:
    """Vectorized ego columns over the full series: (|V|, T, 2k+3).

    Row-for-row identical to calling ``build_ego_features`` per window; this
    form is what preprocessing materializes once so training and inference
    never touch the graph again.
    """
    readings = np.asarray(readings, dtype=np.float64)
    n, t = readings.shape
    if graph.k != k or not graph.fwd_neighbors:
        select_topk_neighbors(graph, k)
    bwd_norm = normalize_adjacency(graph.a.T)

    out = np.zeros((n, t, 2 * k + 3))
    out[:, :, 0] = readings
    for v in range(n):
        for slot, (j, _) in enumerate(graph.fwd_neighbors[v]):
            if j != PAD_ID:
                out[v, :, 1 + slot] = readings[j]
        for slot, (j, _) in enumerate(graph.bwd_neighbors[v]):
            if j != PAD_ID:
                out[v, :, 1 + k + slot] = readings[j]
        fwd_all = _one_hop(graph.a_norm[v], v)
        if fwd_all.size:
            out[v, :, 2 * k + 1] = readings[fwd_all].mean(axis=0)
        bwd_all = _one_hop(bwd_norm[v], v)
        if bwd_all.size:
            out[v, :, 2 * k + 2] = readings[bwd_all].mean(axis=0)
    return out


def load_distances(path: str | Path) -> list[tuple[int, int, float]]:
    """Read a `from,to,dist` CSV into edge records."""
    path = Path(path)
    records: list[tuple[int, int, float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["from", "to", "dist"]:
            raise DataError(f"{path}: expected header 'from,to,dist', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append((int(row[0]), int(row[1]), float(row[2])))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: bad distance record {row}") from exc
    return records

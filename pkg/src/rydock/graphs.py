"""Weighted graphs, complements, and exact brute-force solvers.

These types are the lingua franca of the pipeline: docking produces a
binding graph, registers embed its complement, and every quantum result is
checked against the exact solvers below.

Bit conventions used everywhere downstream: vertex order is fixed at
construction, bit k of an integer mask is vertex k, and the leftmost
character of a bitstring is vertex 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InputError

SIZE_CAP = 24


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with positive vertex weights.

    `edges` are stored with endpoints ordered by vertex index. `edge_weights`
    (optional, aligned with `edges`) are conflict penalties used by
    `mwis_cost`; `positions` (optional, micrometres) mark geometric graphs
    whose coordinates should be reused by register layout.
    """

    vertex_ids: tuple
    weights: tuple
    edges: tuple
    edge_weights: tuple | None = None
    positions: tuple | None = None

    def __post_init__(self):
        ids = self.vertex_ids
        if len(set(ids)) != len(ids):
            raise InputError("duplicate vertex ids")
        if len(self.weights) != len(ids):
            raise InputError("weights length does not match vertex count")
        for w in self.weights:
            if not (np.isfinite(w) and w > 0):
                raise InputError(f"vertex weights must be positive, got {w}")
        index = {v: k for k, v in enumerate(ids)}
        seen = set()
        for (u, v) in self.edges:
            if u not in index or v not in index:
                raise InputError(f"edge ({u}, {v}) references unknown vertex")
            if u == v:
                raise InputError(f"self-loop on {u}")
            if index[u] > index[v]:
                raise InputError(f"edge ({u}, {v}) not in vertex order")
            if (u, v) in seen:
                raise InputError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        if self.edge_weights is not None and len(self.edge_weights) != len(self.edges):
            raise InputError("edge_weights length does not match edge count")
        if self.positions is not None and len(self.positions) != len(ids):
            raise InputError("positions length does not match vertex count")

    @classmethod
    def from_parts(cls, ids, edges, weights=None, edge_weights=None, positions=None):
        """Build a graph, normalising edge endpoint order."""
        ids = tuple(str(v) for v in ids)
        index = {v: k for k, v in enumerate(ids)}
        if weights is None:
            weights = (1.0,) * len(ids)
        norm = []
        wnorm = []
        for k, e in enumerate(edges):
            u, v = str(e[0]), str(e[1])
            if u not in index or v not in index:
                raise InputError(f"edge ({u}, {v}) references unknown vertex")
            if index[u] > index[v]:
                u, v = v, u
            norm.append((u, v))
            if edge_weights is not None:
                wnorm.append(float(edge_weights[k]))
        return cls(
            vertex_ids=ids,
            weights=tuple(float(w) for w in weights),
            edges=tuple(norm),
            edge_weights=tuple(wnorm) if edge_weights is not None else None,
            positions=tuple((float(x), float(y)) for x, y in positions) if positions is not None else None,
        )

    @property
    def n(self) -> int:
        return len(self.vertex_ids)

    def index(self, vid) -> int:
        try:
            return self.vertex_ids.index(vid)
        except ValueError:
            raise InputError(f"unknown vertex {vid!r}") from None

    def has_edge(self, u, v) -> bool:
        i, j = self.index(u), self.index(v)
        if i > j:
            u, v = v, u
        return (u, v) in set(self.edges)

    def adjacency_masks(self) -> list:
        """Per-vertex neighbour bitmasks (bit k = vertex k)."""
        index = {v: k for k, v in enumerate(self.vertex_ids)}
        masks = [0] * self.n
        for (u, v) in self.edges:
            i, j = index[u], index[v]
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def total_weight(self) -> float:
        return float(sum(self.weights))


@dataclass(frozen=True)
class VertexSubset:
    """A subset of vertices together with its bitstring rendering.

    The bitstring is ordered by the owning graph's vertex order: leftmost
    character = first vertex.
    """

    members: frozenset
    bitstring: str

    @classmethod
    def from_members(cls, g: WeightedGraph, members: Iterable) -> "VertexSubset":
        members = frozenset(str(m) for m in members)
        known = set(g.vertex_ids)
        for m in members:
            if m not in known:
                raise InputError(f"unknown vertex {m!r}")
        bits = "".join("1" if v in members else "0" for v in g.vertex_ids)
        return cls(members=members, bitstring=bits)

    @classmethod
    def from_bitstring(cls, g: WeightedGraph, bits: str) -> "VertexSubset":
        if len(bits) != g.n or set(bits) - {"0", "1"}:
            raise InputError(f"bad bitstring {bits!r} for {g.n} vertices")
        members = frozenset(v for v, b in zip(g.vertex_ids, bits) if b == "1")
        return cls(members=members, bitstring=bits)

    def weight(self, g: WeightedGraph) -> float:
        return float(sum(w for v, w in zip(g.vertex_ids, g.weights) if v in self.members))


def _members_of(s) -> frozenset:
    if isinstance(s, VertexSubset):
        return s.members
    return frozenset(str(m) for m in s)


def complement(g: WeightedGraph) -> WeightedGraph:
    """Complement graph: same vertices and weights, inverted edge set.

    Edge weights and positions do not carry over; they describe the original
    edge set and geometry.
    """
    present = set(g.edges)
    edges = []
    for i in range(g.n):
        for j in range(i + 1, g.n):
            e = (g.vertex_ids[i], g.vertex_ids[j])
            if e not in present:
                edges.append(e)
    return WeightedGraph(
        vertex_ids=g.vertex_ids,
        weights=g.weights,
        edges=tuple(edges),
    )


def is_independent(subset, g: WeightedGraph) -> bool:
    """True iff no edge of g has both endpoints in the subset."""
    members = _members_of(subset)
    known = set(g.vertex_ids)
    for m in members:
        if m not in known:
            raise InputError(f"unknown vertex {m!r}")
    for (u, v) in g.edges:
        if u in members and v in members:
            return False
    return True


def default_penalty(g: WeightedGraph) -> float:
    """Conflict penalty large enough that no violated edge can ever pay off."""
    return 1.0 + g.total_weight()


def mwis_cost(subset, g: WeightedGraph, penalty: float | None = None) -> float:
    """Soft-constrained objective -sum(w_i z_i) + sum(u_ij z_i z_j).

    Minimised exactly by the maximum-weight independent sets when every
    penalty u_ij exceeds the largest vertex weight; the default penalty
    1 + total weight guarantees that. Explicit `edge_weights` on the graph
    override the uniform penalty edge by edge.

    `subset` may be a VertexSubset, a bitstring, or an iterable of ids.
    """
    if isinstance(subset, str):
        subset = VertexSubset.from_bitstring(g, subset)
    members = _members_of(subset)
    value = 0.0
    for v, w in zip(g.vertex_ids, g.weights):
        if v in members:
            value -= w
    if penalty is None and g.edge_weights is None:
        penalty = default_penalty(g)
    for k, (u, v) in enumerate(g.edges):
        if u in members and v in members:
            value += g.edge_weights[k] if penalty is None else penalty
    return float(value)


def _check_cap(g: WeightedGraph, size_cap: int):
    if g.n > size_cap:
        raise InputError(
            f"graph has {g.n} vertices, exact enumeration capped at {size_cap}"
        )
    if g.n == 0:
        raise InputError("empty graph")


def _mask_weights(g: WeightedGraph) -> np.ndarray:
    dim = 1 << g.n
    idx = np.arange(dim, dtype=np.int64)
    total = np.zeros(dim)
    for k, w in enumerate(g.weights):
        total += w * ((idx >> k) & 1)
    return total


def _solutions(g: WeightedGraph, valid: np.ndarray) -> list:
    weights = _mask_weights(g)
    weights[~valid] = -np.inf
    best = weights.max()
    if not np.isfinite(best):
        raise InputError("no valid subset found")
    out = []
    for mask in np.flatnonzero(weights == best):
        bits = "".join("1" if (int(mask) >> k) & 1 else "0" for k in range(g.n))
        out.append(VertexSubset.from_bitstring(g, bits))
    out.sort(key=lambda s: s.bitstring)
    return out


def brute_force_mwis(g: WeightedGraph, size_cap: int = SIZE_CAP) -> list:
    """All maximum-weight independent sets, sorted by bitstring.

    Exhaustive over all 2^n subsets; refuses graphs larger than `size_cap`.
    """
    _check_cap(g, size_cap)
    dim = 1 << g.n
    idx = np.arange(dim, dtype=np.int64)
    valid = np.ones(dim, dtype=bool)
    index = {v: k for k, v in enumerate(g.vertex_ids)}
    for (u, v) in g.edges:
        bi = ((idx >> index[u]) & 1).astype(bool)
        bj = ((idx >> index[v]) & 1).astype(bool)
        valid &= ~(bi & bj)
    return _solutions(g, valid)


def max_weight_clique(g: WeightedGraph, size_cap: int = SIZE_CAP) -> list:
    """All maximum-weight cliques, sorted by bitstring.

    Enumerated directly from the adjacency structure (every pair inside the
    subset must be an edge of g), not via the complement; the complement
    route is kept as an independent cross-check in the tests.
    """
    _check_cap(g, size_cap)
    dim = 1 << g.n
    idx = np.arange(dim, dtype=np.int64)
    valid = np.ones(dim, dtype=bool)
    masks = g.adjacency_masks()
    for k in range(g.n):
        bk = ((idx >> k) & 1).astype(bool)
        outside = np.int64(~(masks[k] | (1 << k)) & (dim - 1))
        ok = (idx & outside) == 0
        valid &= ~bk | ok
    return _solutions(g, valid)


def load_graph(path) -> WeightedGraph:
    """Read a graph from its JSON file format.

    Format: {"nodes": [{"id", "weight", "pos"?}], "edges": [[a, b], ...],
    "edge_weights": [...]?}. Extra top-level keys (e.g. "meta") are ignored.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise InputError(f"{path}: expected an object with a 'nodes' list")
    ids, weights, positions = [], [], []
    has_pos = False
    for node in doc["nodes"]:
        if "id" not in node:
            raise InputError(f"{path}: node missing 'id'")
        ids.append(str(node["id"]))
        weights.append(node.get("weight", 1.0))
        if "pos" in node:
            has_pos = True
            positions.append(tuple(node["pos"]))
        else:
            positions.append(None)
    if has_pos and any(p is None for p in positions):
        raise InputError(f"{path}: either all nodes carry 'pos' or none")
    edges = doc.get("edges", [])
    for e in edges:
        if len(e) != 2:
            raise InputError(f"{path}: edge {e} must have two endpoints")
    return WeightedGraph.from_parts(
        ids,
        edges,
        weights=weights,
        edge_weights=doc.get("edge_weights"),
        positions=positions if has_pos else None,
    )


def save_graph(g: WeightedGraph, path, meta: dict | None = None):
    nodes = []
    for k, v in enumerate(g.vertex_ids):
        node = {"id": v, "weight": g.weights[k]}
        if g.positions is not None:
            node["pos"] = list(g.positions[k])
        nodes.append(node)
    doc = {"nodes": nodes, "edges": [list(e) for e in g.edges]}
    if g.edge_weights is not None:
        doc["edge_weights"] = list(g.edge_weights)
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

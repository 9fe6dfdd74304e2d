"""Attributed cloud graph model, synthetic topology generation, serialization.

A cloud is modelled as a connected undirected graph whose vertices are
systems (VMs, hypervisors, network elements) and whose edges are
relationships that can carry malware.  Named hyperedges group vertices that
share a context (a subnet, a common library).  Vertex metadata and per-edge
attribute vectors are carried through save/load but are not consumed by the
learning stack.

Vertices are dense integers 0..n-1.  Edges are stored canonically as a
sorted tuple of (u, v) pairs with u < v, which makes saved files
byte-reproducible and graph equality structural.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import generator

MODELS = ("uniform-random", "preferential", "subnet-blocks")

OS_LABELS = ("linux", "windows", "bsd")
ROLE_LABELS = ("web", "db", "cache", "worker", "gateway")


def canonical_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class CloudGraph:
    """Immutable attributed graph with named hyperedges.

    edges        sorted tuple of (u, v) pairs, u < v
    hyperedges   name -> sorted tuple of member vertex ids
    vertex_meta  per-vertex string attribute dicts (OS label, role, ...)
    edge_attr    optional per-edge real vectors (bandwidth, latency, ...);
                 carried but never consumed by the learning stack
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    hyperedges: dict[str, tuple[int, ...]] = field(default_factory=dict)
    vertex_meta: tuple[dict[str, str], ...] = ()
    edge_attr: dict[tuple[int, int], tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"graph needs at least 2 vertices, got n={self.n}")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            if u > v:
                raise ValueError(f"edge ({u},{v}) not in canonical (u<v) order")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u},{v})")
            seen.add((u, v))
        if tuple(sorted(self.edges)) != self.edges:
            raise ValueError("edges not sorted canonically")
        for name, members in self.hyperedges.items():
            if len(members) < 1:
                raise ValueError(f"hyperedge {name!r} is empty")
            for m in members:
                if not (0 <= m < self.n):
                    raise ValueError(f"hyperedge {name!r} references vertex {m} outside 0..{self.n - 1}")
        if self.vertex_meta and len(self.vertex_meta) != self.n:
            raise ValueError("vertex_meta length must equal n")
        for e in self.edge_attr:
            if e not in seen:
                raise ValueError(f"edge_attr for unknown edge {e}")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(nb)) for nb in adj))

    # -- structure queries -------------------------------------------------

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self._adj], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def incident_edges(self, v: int) -> list[tuple[int, int]]:
        return [canonical_edge(v, w) for w in self._adj[v]]

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in self._adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == self.n


@dataclass(frozen=True)
class HyperedgeSpec:
    """Extra random hyperedges (shared libraries etc.) on top of any
    model-implied ones."""

    count: int = 0
    size_min: int = 2
    size_max: int = 5

    def __post_init__(self):
        if self.count < 0 or self.size_min < 1 or self.size_max < self.size_min:
            raise ValueError("invalid hyperedge spec")


@dataclass(frozen=True)
class TopologySpec:
    """Generator parameters.

    model is one of:
      uniform-random  each pair independently with probability p
      preferential    degree-biased attachment, m extra stubs per vertex
      subnet-blocks   k equal blocks, intra prob p_in, inter prob p_out;
                      each block becomes a "subnet_<i>" hyperedge
    """

    n: int
    model: str = "uniform-random"
    p: float = 0.1
    m: int = 1
    k: int = 2
    p_in: float = 0.5
    p_out: float = 0.01
    hyperedges: HyperedgeSpec = field(default_factory=HyperedgeSpec)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.p_in <= 1.0 and 0.0 <= self.p_out <= 1.0):
            raise ValueError("edge probabilities must lie in [0, 1]")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.model == "subnet-blocks" and self.k > self.n:
            raise ValueError("more blocks than vertices")


def generate_topology(spec: TopologySpec, seed: int) -> CloudGraph:
    """Generate a connected attributed graph matching `spec`.

    A random spanning tree is laid down first so connectivity holds for any
    parameter choice; model edges are added on top and deduplicated.
    Deterministic for a given (spec, seed).
    """
    rng = generator("topology", seed)
    n = spec.n
    edges: set[tuple[int, int]] = set()

    # spanning tree: attach each vertex to a random earlier one
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add(canonical_edge(u, v))

    blocks: list[list[int]] = []
    if spec.model == "uniform-random":
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < spec.p:
                    edges.add((u, v))
    elif spec.model == "preferential":
        deg = np.zeros(n, dtype=np.float64)
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        for v in range(1, n):
            weights = deg[:v] + 1.0
            weights /= weights.sum()
            picks = rng.choice(v, size=min(spec.m, v), replace=False, p=weights)
            for u in picks:
                e = canonical_edge(int(u), v)
                if e not in edges:
                    edges.add(e)
                    deg[u] += 1
                    deg[v] += 1
    else:  # subnet-blocks
        sizes = [n // spec.k + (1 if i < n % spec.k else 0) for i in range(spec.k)]
        start = 0
        block_of = np.zeros(n, dtype=np.int64)
        for i, size in enumerate(sizes):
            blocks.append(list(range(start, start + size)))
            block_of[start:start + size] = i
            start += size
        for u in range(n):
            for v in range(u + 1, n):
                prob = spec.p_in if block_of[u] == block_of[v] else spec.p_out
                if rng.random() < prob:
                    edges.add((u, v))

    hyperedges: dict[str, tuple[int, ...]] = {}
    for i, members in enumerate(blocks):
        hyperedges[f"subnet_{i}"] = tuple(members)
    for j in range(spec.hyperedges.count):
        size = int(rng.integers(spec.hyperedges.size_min, spec.hyperedges.size_max + 1))
        members = sorted(int(x) for x in rng.choice(n, size=min(size, n), replace=False))
        hyperedges[f"library_{j}"] = tuple(members)

    vertex_meta = tuple(
        {"os": OS_LABELS[int(rng.integers(len(OS_LABELS)))],
         "role": ROLE_LABELS[int(rng.integers(len(ROLE_LABELS)))]}
        for _ in range(n)
    )
    sorted_edges = tuple(sorted(edges))
    edge_attr = {
        e: (round(float(rng.uniform(10.0, 1000.0)), 3),   # bandwidth
            round(float(rng.uniform(0.1, 50.0)), 3))      # latency
        for e in sorted_edges
    }
    return CloudGraph(n=n, edges=sorted_edges, hyperedges=hyperedges,
                      vertex_meta=vertex_meta, edge_attr=edge_attr)


def normalized_adjacency(g: CloudGraph) -> np.ndarray:
    """Symmetric propagation operator D^{-1/2} (A + I) D^{-1/2} with
    D_ii = sum_j (A + I)_ij.  The +I self-loop keeps every degree >= 1."""
    a_hat = g.adjacency() + np.eye(g.n)
    d = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


# -- serialization ---------------------------------------------------------
#
# Graph file: one JSON document {n, edges, hyperedges, vertex_meta,
# edge_attr}.  Edges sorted lexicographically, keys sorted, so a save is
# byte-reproducible.

def graph_to_dict(g: CloudGraph) -> dict:
    return {
        "n": g.n,
        "edges": [list(e) for e in g.edges],
        "hyperedges": {name: list(m) for name, m in sorted(g.hyperedges.items())},
        "vertex_meta": [dict(sorted(m.items())) for m in g.vertex_meta],
        "edge_attr": [[u, v, list(g.edge_attr[(u, v)])] for u, v in g.edges if (u, v) in g.edge_attr],
    }


def graph_from_dict(doc: dict) -> CloudGraph:
    try:
        n = int(doc["n"])
        raw_edges = [(int(u), int(v)) for u, v in doc["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed graph document: {exc}") from exc
    seen = set()
    for u, v in raw_edges:
        e = canonical_edge(u, v)
        if e in seen:
            raise ValueError(f"duplicate edge ({u},{v}) in file")
        seen.add(e)
    edges = tuple(sorted(canonical_edge(u, v) for u, v in raw_edges))
    hyperedges = {str(name): tuple(int(x) for x in members)
                  for name, members in doc.get("hyperedges", {}).items()}
    vertex_meta = tuple({str(k): str(v) for k, v in m.items()} for m in doc.get("vertex_meta", []))
    edge_attr = {}
    for item in doc.get("edge_attr", []):
        u, v, vec = int(item[0]), int(item[1]), item[2]
        edge_attr[canonical_edge(u, v)] = tuple(float(x) for x in vec)
    g = CloudGraph(n=n, edges=edges, hyperedges=hyperedges,
                   vertex_meta=vertex_meta, edge_attr=edge_attr)
    if not g.is_connected():
        warnings.warn("loaded graph is not connected", stacklevel=2)
    return g


def save_graph(g: CloudGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_graph(path) -> CloudGraph:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed graph file at line {exc.lineno}: {exc.msg}") from exc
    return graph_from_dict(doc)

"""Directed steam network: sites (vertices), pipes (links) and incidence-matrix algebra."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from steamnet.errors import NetworkError
from steamnet.thermo import DEFAULT_BOILER, BoilerParams

RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class PipeParams:
    L: float
    d: float
    lam: float


# Default pipe: 200 m of 0.2 m pipe, lambda = 0.016 (turbulent, constant).
DEFAULT_PIPE = PipeParams(L=200.0, d=0.2, lam=0.016)


@dataclass(frozen=True)
class Vertex:
    name: str
    boiler: BoilerParams = DEFAULT_BOILER


@dataclass(frozen=True)
class Link:
    name: str
    tail: str
    head: str
    pipe: PipeParams = DEFAULT_PIPE


@dataclass(frozen=True)
class Network:
    vertices: tuple[Vertex, ...]
    links: tuple[Link, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "_index", {v.name: i for i, v in enumerate(self.vertices)})

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.links)

    @property
    def vertex_names(self) -> list[str]:
        return [v.name for v in self.vertices]

    @property
    def link_names(self) -> list[str]:
        return [l.name for l in self.links]

    def vertex_index(self, name: str) -> int:
        return self._index[name]

    def tails(self) -> np.ndarray:
        return np.array([self._index[l.tail] for l in self.links], dtype=int)

    def heads(self) -> np.ndarray:
        return np.array([self._index[l.head] for l in self.links], dtype=int)

    def pipe_arrays(self) -> dict[str, np.ndarray]:
        return {
            "L": np.array([l.pipe.L for l in self.links], dtype=float),
            "d": np.array([l.pipe.d for l in self.links], dtype=float),
            "lam": np.array([l.pipe.lam for l in self.links], dtype=float),
        }

    def as_graph(self) -> nx.MultiGraph:
        graph = nx.MultiGraph()
        graph.add_nodes_from(v.name for v in self.vertices)
        for j, link in enumerate(self.links):
            if link.tail in self._index and link.head in self._index:
                graph.add_edge(link.tail, link.head, key=link.name, index=j)
        return graph


@dataclass(frozen=True)
class SubspaceReport:
    singular_values: np.ndarray
    rank: int
    tolerance: float
    loop_basis: np.ndarray
    cokernel_basis: np.ndarray
    ambiguous: bool

    @property
    def dim_ker_R(self) -> int:
        return self.loop_basis.shape[1]

    @property
    def dim_ker_Rt(self) -> int:
        return self.cokernel_basis.shape[1]

    @property
    def dim_im_R(self) -> int:
        return self.rank

    @property
    def dim_im_Rt(self) -> int:
        return self.rank


def two_site_network(boiler: BoilerParams = DEFAULT_BOILER, pipe: PipeParams = DEFAULT_PIPE) -> Network:
    return Network(
        vertices=(Vertex("1", boiler), Vertex("2", boiler)),
        links=(Link("1-2", "1", "2", pipe),),
    )


def random_connected_network(rng: random.Random, n: int, chords: int = 0) -> Network:
    """Random tree on n vertices plus `chords` extra links (parallel links allowed)."""
    vertices = [Vertex(f"v{i}") for i in range(n)]
    links = []
    for i in range(1, n):
        j = rng.randrange(i)
        tail, head = (i, j) if rng.random() < 0.5 else (j, i)
        links.append(Link(f"t{i}", f"v{tail}", f"v{head}"))
    for k in range(chords if n > 1 else 0):
        a, b = rng.sample(range(n), 2)
        links.append(Link(f"c{k}", f"v{a}", f"v{b}"))
    return Network(tuple(vertices), tuple(links))


def validate(net: Network) -> list[dict]:
    problems: list[dict] = []
    names = [v.name for v in net.vertices]
    for name in sorted({x for x in names if names.count(x) > 1}):
        problems.append({"kind": "duplicate_vertex", "detail": f"vertex label '{name}' is used more than once"})
    link_names = [l.name for l in net.links]
    for name in sorted({x for x in link_names if link_names.count(x) > 1}):
        problems.append({"kind": "duplicate_link", "detail": f"link label '{name}' is used more than once"})
    if not net.vertices:
        problems.append({"kind": "empty", "detail": "network has no vertices"})

    for link in net.links:
        for end in (link.tail, link.head):
            if end not in net._index:
                problems.append({"kind": "unknown_vertex", "detail": f"link '{link.name}' references unknown vertex '{end}'"})
        if link.tail == link.head:
            problems.append({"kind": "self_loop", "detail": f"link '{link.name}' starts and ends at '{link.tail}'"})
        for attr in ("L", "d", "lam"):
            value = getattr(link.pipe, attr)
            if not (np.isfinite(value) and value > 0):
                problems.append({"kind": "parameter", "detail": f"link '{link.name}' has nonpositive {attr}={value}"})

    graph = net.as_graph()
    if graph.number_of_nodes() > 1 and not nx.is_connected(graph):
        parts = [sorted(c) for c in nx.connected_components(graph)]
        problems.append({"kind": "disconnected", "detail": f"network splits into {len(parts)} components: {parts}"})
    return problems


def require_valid(net: Network) -> Network:
    problems = validate(net)
    if problems:
        raise NetworkError("invalid network: " + "; ".join(p["detail"] for p in problems))
    return net


def incidence_matrix(net: Network) -> np.ndarray:
    R = np.zeros((net.n, net.m))
    for j, link in enumerate(net.links):
        R[net.vertex_index(link.tail), j] = 1.0
        R[net.vertex_index(link.head), j] = -1.0
    return R


def subspace_analysis(R: np.ndarray, rel_tol: float = RANK_TOLERANCE) -> SubspaceReport:
    R = np.asarray(R, dtype=float)
    n, m = R.shape
    if R.size == 0:
        return SubspaceReport(np.zeros(0), 0, 0.0, np.eye(m), np.eye(n), False)
    U, S, Vt = np.linalg.svd(R, full_matrices=True)
    tol = rel_tol * S.max() if S.size and S.max() > 0 else rel_tol
    rank = int(np.sum(S > tol))
    ambiguous = bool(np.any((S > tol / 10.0) & (S < tol * 10.0)))
    return SubspaceReport(
        singular_values=S,
        rank=rank,
        tolerance=float(tol),
        loop_basis=Vt[rank:].T.copy(),
        cokernel_basis=U[:, rank:].copy(),
        ambiguous=ambiguous,
    )


def kirchhoff_matrix(R: np.ndarray, sigma) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 2:
        sigma = np.diag(sigma)
    if sigma.shape != (R.shape[1],):
        raise NetworkError(f"sigma needs {R.shape[1]} diagonal entries, got shape {sigma.shape}")
    if np.any(~(sigma > 0)):
        bad = int(np.flatnonzero(~(sigma > 0))[0])
        raise NetworkError(f"Kirchhoff weights must be positive; entry {bad} is {sigma[bad]}")
    return (R * sigma) @ R.T


def spanning_tree_links(net: Network) -> list[int]:
    graph = nx.Graph()
    graph.add_nodes_from(net.vertex_names)
    for j, link in enumerate(net.links):
        if not graph.has_edge(link.tail, link.head):
            graph.add_edge(link.tail, link.head, index=j)
    tree = nx.minimum_spanning_tree(graph)
    return sorted(data["index"] for _, _, data in tree.edges(data=True))

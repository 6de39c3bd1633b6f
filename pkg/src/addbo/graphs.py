"""Dependency graphs, clique enumeration, triangulation, junction trees.

A dependency graph on the D input variables encodes which variables interact:
each maximal clique corresponds to one low-dimensional component of the
additive model.  Exact maximization of a sum of per-clique tables runs on a
junction tree of the (triangulated) graph, so this module also provides
min-fill triangulation and a deterministic junction-tree construction with a
once-and-only-once assignment of original cliques to tree nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError


@dataclass(frozen=True, eq=False)
class DependencyGraph:
    """Undirected graph as a symmetric boolean adjacency matrix with zero diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise ValueError("adjacency must have a zero diagonal")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    # -- constructors -------------------------------------------------------

    @classmethod
    def empty(cls, dim: int) -> "DependencyGraph":
        return cls(np.zeros((dim, dim), dtype=bool))

    @classmethod
    def complete(cls, dim: int) -> "DependencyGraph":
        adj = np.ones((dim, dim), dtype=bool)
        np.fill_diagonal(adj, False)
        return cls(adj)

    @classmethod
    def from_edges(cls, dim: int, edges) -> "DependencyGraph":
        adj = np.zeros((dim, dim), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValueError("self loops are not allowed")
            adj[i, j] = adj[j, i] = True
        return cls(adj)

    @classmethod
    def star(cls, dim: int, center: int = 0) -> "DependencyGraph":
        """Every variable connected to one hub variable."""
        return cls.from_edges(dim, [(center, j) for j in range(dim) if j != center])

    @classmethod
    def lattice(cls, rows: int, cols: int) -> "DependencyGraph":
        """Rows-by-cols grid; variable r*cols + c sits at cell (r, c)."""
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
        return cls.from_edges(rows * cols, edges)

    # -- basic queries -------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.adjacency.shape[0]

    def edge_list(self) -> list:
        """Sorted list of (i, j) pairs with i < j."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j)) for i, j in zip(ii, jj)]

    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))

    def with_edge(self, i: int, j: int, present: bool) -> "DependencyGraph":
        adj = self.adjacency.copy()
        adj[i, j] = adj[j, i] = present
        return DependencyGraph(adj)

    def neighbor_sets(self) -> list:
        return [set(np.nonzero(self.adjacency[v])[0].tolist()) for v in range(self.dim)]

    def __eq__(self, other):
        return isinstance(other, DependencyGraph) and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash((self.dim, self.adjacency.tobytes()))


@dataclass(frozen=True)
class Decomposition:
    """Variable groups of an additive model: the maximal cliques of a graph.

    Every group is a sorted tuple of variable indices; the list is sorted
    lexicographically and no group is contained in another.
    """

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(v) for v in g) for g in self.groups)
        if not groups:
            raise ValueError("decomposition needs at least one group")
        for g in groups:
            if len(g) == 0:
                raise ValueError("groups must be nonempty")
            if list(g) != sorted(set(g)):
                raise ValueError(f"group {g} must be sorted and duplicate-free")
        for a in groups:
            for b in groups:
                if a is not b and set(a) <= set(b):
                    raise ValueError(f"group {a} is contained in group {b}")
        object.__setattr__(self, "groups", tuple(sorted(groups)))

    @classmethod
    def single_group(cls, dim: int) -> "Decomposition":
        return cls((tuple(range(dim)),))

    @classmethod
    def singletons(cls, dim: int) -> "Decomposition":
        return cls(tuple((v,) for v in range(dim)))

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def group_sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups])


def maximal_cliques(graph: DependencyGraph) -> Decomposition:
    """All maximal cliques, via Bron-Kerbosch with pivoting.

    Isolated vertices come back as singleton groups, so the groups always
    cover every variable.
    """
    neighbors = graph.neighbor_sets()
    cliques = []

    def expand(r: set, p: set, x: set):
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda u: len(p & neighbors[u]))
        for v in sorted(p - neighbors[pivot]):
            expand(r | {v}, p & neighbors[v], x & neighbors[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(range(graph.dim)), set())
    return Decomposition(tuple(sorted(cliques)))


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriangulatedGraph:
    """A chordal supergraph together with the fill edges that were added."""

    graph: DependencyGraph
    fill_edges: tuple

    @property
    def dim(self) -> int:
        return self.graph.dim


def is_chordal(graph: DependencyGraph) -> bool:
    """Maximum-cardinality search followed by a perfect-elimination check."""
    n = graph.dim
    neighbors = graph.neighbor_sets()
    weight = [0] * n
    order = []
    numbered = set()
    for _ in range(n):
        v = max((u for u in range(n) if u not in numbered), key=lambda u: (weight[u], -u))
        order.append(v)
        numbered.add(v)
        for u in neighbors[v]:
            if u not in numbered:
                weight[u] += 1
    pos = {v: i for i, v in enumerate(order)}
    # reverse MCS order is a perfect elimination order iff the graph is chordal:
    # each vertex's earlier-visited neighbors must form a clique, certified by
    # checking them against the most recently visited one
    for v in order:
        earlier = [u for u in neighbors[v] if pos[u] < pos[v]]
        if len(earlier) < 2:
            continue
        w = max(earlier, key=lambda u: pos[u])
        rest = set(earlier) - {w}
        if not rest <= neighbors[w]:
            return False
    return True


def triangulate(graph: DependencyGraph) -> TriangulatedGraph:
    """Min-fill triangulation with lowest-vertex tie-breaking.

    Chordal inputs come back unchanged (some vertex always has fill cost
    zero, so no fill edge is ever added).
    """
    n = graph.dim
    work = graph.neighbor_sets()
    filled = [set(s) for s in work]
    remaining = set(range(n))
    fills = []

    def fill_cost(v: int) -> int:
        nb = [u for u in work[v] if u in remaining]
        cost = 0
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                if nb[b] not in work[nb[a]]:
                    cost += 1
        return cost

    while remaining:
        v = min(sorted(remaining), key=fill_cost)
        nb = sorted(u for u in work[v] if u in remaining)
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                i, j = nb[a], nb[b]
                if j not in work[i]:
                    work[i].add(j)
                    work[j].add(i)
                    filled[i].add(j)
                    filled[j].add(i)
                    fills.append((i, j))
        remaining.remove(v)
        for u in remaining:
            work[u].discard(v)

    adj = np.zeros((n, n), dtype=bool)
    for v in range(n):
        for u in filled[v]:
            adj[v, u] = True
    return TriangulatedGraph(DependencyGraph(adj), tuple(fills))


# ---------------------------------------------------------------------------
# junction tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JunctionTree:
    """Rooted clique tree over a triangulated graph.

    ``nodes[i]`` is a sorted variable tuple; ``parent[i]`` is -1 for the root.
    ``separators[i] = nodes[i] & nodes[parent[i]]``.  ``node_terms[i]`` lists
    the original-graph maximal cliques this node is responsible for; together
    the lists partition the original clique set, so every additive term enters
    the maximization exactly once.
    """

    nodes: tuple
    parent: tuple
    children: tuple
    separators: tuple
    root: int
    node_terms: tuple
    term_node: dict = field(compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def postorder(self) -> list:
        order = []

        def visit(i):
            for c in self.children[i]:
                visit(c)
            order.append(i)

        visit(self.root)
        return order


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _verify_running_intersection(nodes, tree_edges, dim):
    adjacency = {i: set() for i in range(len(nodes))}
    for a, b in tree_edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    for v in range(dim):
        holders = [i for i, c in enumerate(nodes) if v in c]
        if not holders:
            return False
        seen = {holders[0]}
        stack = [holders[0]]
        holder_set = set(holders)
        while stack:
            cur = stack.pop()
            for nxt in adjacency[cur]:
                if nxt in holder_set and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != holder_set:
            return False
    return True


def build_junction_tree(tri: TriangulatedGraph, original: DependencyGraph,
                        max_treewidth: int = 8) -> JunctionTree:
    """Junction tree of a chordal graph plus the term assignment.

    The tree is a maximum-weight spanning tree of the clique graph (weights =
    separator sizes, deterministic lowest-index tie-breaking), rooted at the
    node containing the smallest variable index.  Each maximal clique of the
    ``original`` graph is assigned to the first node containing it in a
    post-order traversal, which guarantees a child claims a shared clique
    before any of its ancestors.
    """
    if tri.dim != original.dim:
        raise ValueError("triangulated and original graphs differ in size")
    if not is_chordal(tri.graph):
        raise ValueError("input graph is not chordal")

    cliques = maximal_cliques(tri.graph).groups
    width = max(len(c) for c in cliques) - 1
    if width > max_treewidth:
        raise CapacityError(
            f"treewidth {width} exceeds the cap {max_treewidth}; "
            "message tables would be too large"
        )

    m = len(cliques)
    sets = [set(c) for c in cliques]
    candidate_edges = sorted(
        ((a, b) for a in range(m) for b in range(a + 1, m)),
        key=lambda e: (-len(sets[e[0]] & sets[e[1]]), e[0], e[1]),
    )
    uf = _UnionFind(m)
    tree_edges = [e for e in candidate_edges if uf.union(*e)]

    if not _verify_running_intersection(cliques, tree_edges, tri.dim):
        raise ValueError("running intersection property failed (non-chordal input?)")

    low = min(min(c) for c in cliques)
    root = min((i for i in range(m) if low in sets[i]), key=lambda i: cliques[i])

    adjacency = {i: set() for i in range(m)}
    for a, b in tree_edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    parent = [-1] * m
    children = [[] for _ in range(m)]
    seen = {root}
    stack = [root]
    while stack:
        cur = stack.pop()
        for nxt in sorted(adjacency[cur], key=lambda i: cliques[i]):
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = cur
                children[cur].append(nxt)
                stack.append(nxt)
    separators = tuple(
        tuple(sorted(sets[i] & sets[parent[i]])) if parent[i] >= 0 else ()
        for i in range(m)
    )

    order = []

    def visit(i):
        for c in children[i]:
            visit(c)
        order.append(i)

    visit(root)

    original_cliques = maximal_cliques(original).groups
    term_node = {}
    node_terms = [[] for _ in range(m)]
    for oc in original_cliques:
        oset = set(oc)
        for i in order:
            if oset <= sets[i]:
                term_node[oc] = i
                node_terms[i].append(oc)
                break
        else:
            raise ValueError(f"original clique {oc} not contained in any tree node")

    return JunctionTree(
        nodes=cliques,
        parent=tuple(parent),
        children=tuple(tuple(c) for c in children),
        separators=separators,
        root=root,
        node_terms=tuple(tuple(t) for t in node_terms),
        term_node=term_node,
    )


# ---------------------------------------------------------------------------
# serialization: plain-text edge lists
# ---------------------------------------------------------------------------

def format_edge_list(graph: DependencyGraph, lengthscales=None) -> str:
    """Edge-list text: a "D=<int>" header, one "i j" pair per line (1-indexed),
    optionally followed by a lengthscale line "l = v1 ... vD"."""
    lines = [f"D={graph.dim}"]
    lines += [f"{i + 1} {j + 1}" for i, j in graph.edge_list()]
    if lengthscales is not None:
        lines.append("l = " + " ".join(repr(float(v)) for v in lengthscales))
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str):
    """Inverse of :func:`format_edge_list`.

    Returns ``(graph, lengthscales_or_None)``.
    """
    dim = None
    edges = []
    lengthscales = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("D="):
            dim = int(line[2:])
            continue
        if line.startswith("l ") or line.startswith("l="):
            payload = line.split("=", 1)[1]
            lengthscales = np.array([float(tok) for tok in payload.split()])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((i - 1, j - 1))
    if dim is None:
        raise ValueError("missing 'D=<int>' header line")
    for i, j in edges:
        if not (0 <= i < dim and 0 <= j < dim):
            raise ValueError(f"edge ({i + 1}, {j + 1}) out of range for D={dim}")
    return DependencyGraph.from_edges(dim, edges), lengthscales

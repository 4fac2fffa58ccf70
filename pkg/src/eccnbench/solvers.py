"""Edge clique covers: exact search, the Kellerman heuristic and verification.

Cliques are vertex bitsets. The exact solver restricts itself to maximal
cliques: any clique of a cover can be grown to a maximal clique without
uncovering an edge, so some minimum cover consists of maximal cliques only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graphs import Graph, bits_to_set, iter_bits


class BudgetExhausted(RuntimeError):
    """The exact search hit its node budget before proving optimality."""

    def __init__(self, budget: int, best_known: int | None = None):
        self.budget = budget
        self.best_known = best_known
        super().__init__(f"unsolved within budget of {budget} search nodes")


@dataclass(frozen=True)
class EdgeCliqueCover:
    cliques: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.cliques)

    def vertex_sets(self) -> list[list[int]]:
        return [sorted(bits_to_set(c)) for c in self.cliques]

    def format(self) -> str:
        """Render as ``{0,1,2};{2,3}`` (0-indexed vertices)."""
        return ";".join("{" + ",".join(map(str, vs)) + "}" for vs in self.vertex_sets())

    @classmethod
    def parse(cls, text: str) -> "EdgeCliqueCover":
        cliques = []
        for part in filter(None, text.strip().split(";")):
            inner = part.strip()
            if not (inner.startswith("{") and inner.endswith("}")):
                raise ValueError(f"malformed clique {part!r}")
            body = inner[1:-1].strip()
            mask = 0
            for tok in filter(None, body.split(",")):
                mask |= 1 << int(tok)
            cliques.append(mask)
        return cls(tuple(cliques))

    @classmethod
    def from_sets(cls, sets) -> "EdgeCliqueCover":
        cliques = []
        for s in sets:
            mask = 0
            for v in s:
                mask |= 1 << v
            cliques.append(mask)
        return cls(tuple(cliques))


@dataclass(frozen=True)
class CoverCheck:
    valid: bool
    violation: str | None = None
    pair: tuple[int, int] | None = field(default=None)

    def __bool__(self) -> bool:
        return self.valid


def _clique_key(mask: int) -> tuple[int, ...]:
    return tuple(iter_bits(mask))


def maximal_cliques(g: Graph) -> list[int]:
    """All inclusion-maximal cliques, sorted lexicographically by vertex list.

    Bron–Kerbosch with the Tomita pivot (the vertex of ``P | X`` with most
    neighbours in ``P``). Isolated vertices form singleton maximal cliques.
    """
    adj = g.adj
    found: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p:
            if not x:
                found.append(r)
            return
        pivot = max(iter_bits(p | x), key=lambda u: (adj[u] & p).bit_count())
        for v in iter_bits(p & ~adj[pivot]):
            bit = 1 << v
            expand(r | bit, p & adj[v], x & adj[v])
            p &= ~bit
            x |= bit

    expand(0, (1 << g.n) - 1, 0)
    return sorted(found, key=_clique_key)


def _edge_index(g: Graph) -> dict[tuple[int, int], int]:
    return {e: k for k, e in enumerate(g.edges)}


def clique_edge_mask(clique: int, index: dict[tuple[int, int], int]) -> int:
    verts = list(iter_bits(clique))
    mask = 0
    for a, u in enumerate(verts):
        for v in verts[a + 1:]:
            k = index.get((u, v))
            if k is not None:
                mask |= 1 << k
    return mask


def exact_eccn(g: Graph, budget: int | None = None) -> tuple[int, EdgeCliqueCover]:
    """Minimum edge clique cover by iterative deepening over maximal cliques.

    For ``k = 1, 2, ...`` a depth-limited search branches on the cliques that
    contain the lowest-indexed uncovered edge; a branch is cut when even the
    largest remaining clique repeated ``k - depth`` times cannot cover what is
    left. ``budget`` caps the total number of search nodes; exceeding it raises
    :class:`BudgetExhausted` instead of returning a possibly wrong number.
    """
    if not g.edges:
        return 0, EdgeCliqueCover(())
    index = _edge_index(g)
    full = (1 << len(index)) - 1
    cliques = [c for c in maximal_cliques(g) if c & (c - 1)]
    masks = [clique_edge_mask(c, index) for c in cliques]
    by_edge: list[list[int]] = [[] for _ in range(len(index))]
    for ci, m in enumerate(masks):
        for e in iter_bits(m):
            by_edge[e].append(ci)
    # larger cliques first inside each branch list
    for lst in by_edge:
        lst.sort(key=lambda ci: -masks[ci].bit_count())
    biggest = max(m.bit_count() for m in masks)
    nodes = 0
    chosen: list[int] = []

    def search(uncovered: int, left: int) -> bool:
        nonlocal nodes
        nodes += 1
        if budget is not None and nodes > budget:
            raise BudgetExhausted(budget)
        if not uncovered:
            return True
        if left == 0 or uncovered.bit_count() > left * biggest:
            return False
        low = (uncovered & -uncovered).bit_length() - 1
        for ci in by_edge[low]:
            chosen.append(ci)
            if search(uncovered & ~masks[ci], left - 1):
                return True
            chosen.pop()
        return False

    for k in range(1, len(masks) + 1):
        if search(full, k):
            cover = EdgeCliqueCover(tuple(cliques[ci] for ci in chosen))
            return k, cover
    raise AssertionError("maximal cliques always cover every edge")


def kellerman_cover(g: Graph) -> EdgeCliqueCover:
    """Greedy vertex-order edge clique cover (Kellerman), with redundancy removal.

    Vertices are processed in index order. For vertex ``i`` with earlier
    neighbours ``w``, ``i`` first joins every existing clique contained in
    ``w``. While some earlier neighbours stay uncovered, the existing clique
    with the largest overlap with them (lowest index on ties) is intersected
    with ``w`` and extended by ``i``; with no overlapping clique the new
    clique is ``{i, u}`` for the lowest uncovered ``u``. A final pass drops,
    in creation order, every clique whose edges are all covered by the
    remaining ones.
    """
    cliques: list[int] = []
    for i in range(g.n):
        w = g.adj[i] & ((1 << i) - 1)
        if not w:
            continue
        bit_i = 1 << i
        uncovered = w
        for k, c in enumerate(cliques):
            if c & w == c:
                cliques[k] = c | bit_i
                uncovered &= ~c
        while uncovered:
            best, best_overlap = -1, 0
            for k, c in enumerate(cliques):
                overlap = (c & uncovered).bit_count()
                if overlap > best_overlap:
                    best, best_overlap = k, overlap
            if best < 0:
                new = (uncovered & -uncovered) | bit_i
            else:
                new = (cliques[best] & w) | bit_i
            cliques.append(new)
            uncovered &= ~new
    return EdgeCliqueCover(tuple(_drop_redundant(g, cliques)))


def _drop_redundant(g: Graph, cliques: list[int]) -> list[int]:
    index = _edge_index(g)
    masks = [clique_edge_mask(c, index) for c in cliques]
    keep = [True] * len(cliques)
    for k in range(len(cliques)):
        others = 0
        for j, m in enumerate(masks):
            if j != k and keep[j]:
                others |= m
        if masks[k] & ~others == 0:
            keep[k] = False
    return [c for c, kept in zip(cliques, keep) if kept]


def verify_cover(g: Graph, cover: EdgeCliqueCover) -> CoverCheck:
    """Check that every set is a clique of ``g`` and that together they cover ``E``.

    Reports the first offending pair: a non-adjacent pair inside a listed set
    (scanning sets in order), otherwise the first uncovered edge in row-major
    order.
    """
    full = (1 << g.n) - 1
    covered = set()
    for k, c in enumerate(cover.cliques):
        if c & ~full:
            return CoverCheck(False, f"clique {k} references a vertex outside the graph")
        verts = list(iter_bits(c))
        for a, u in enumerate(verts):
            for v in verts[a + 1:]:
                if not g.has_edge(u, v):
                    return CoverCheck(False, f"clique {k} contains non-edge ({u}, {v})", (u, v))
                covered.add((u, v))
    for e in g.edges:
        if e not in covered:
            return CoverCheck(False, f"edge {e} is not covered", e)
    return CoverCheck(True)

"""
The path-auxiliary graph A(G) between a class X1 and the product X2 x X3.

(x1, (x2, x3)) is an edge when x1x2 and x1x3 are both edges of G, so the
edges of A are the cherries x2 - x1 - x3. Product vertices are encoded as
y = x2 * n3 + x3.
"""
import logging
from dataclasses import dataclass

from lib.graphs import BipartitePair, GraphError, IndexOutOfRange, iter_bits, popcount
from lib.regularity import EXACT_SIDE_LIMIT, WITNESS_BUDGET, screen_pair

logger = logging.getLogger(__name__)


class MissingPatternEdge(GraphError):
    pass


@dataclass(frozen=True)
class AuxGraph:
    """
    Attributes:
        n1, n2, n3 (int): sizes of X1, X2, X3.
        rows (tuple): x1 -> bit vector over Y.
        cols (tuple): y -> bit vector over X1.
        edge_count (int): number of cherries.
        classes (tuple): (anchor, left, right) classes of the source graph.
    """
    n1: int
    n2: int
    n3: int
    rows: tuple
    cols: tuple
    edge_count: int
    classes: tuple = (1, 2, 3)

    @property
    def ny(self):
        return self.n2 * self.n3

    def encode(self, x2, x3):
        if not (0 <= x2 < self.n2 and 0 <= x3 < self.n3):
            raise IndexOutOfRange(f"({x2}, {x3}) outside X2 x X3 of sizes ({self.n2}, {self.n3})")
        return x2 * self.n3 + x3

    def decode(self, y):
        if not 0 <= y < self.ny:
            raise IndexOutOfRange(f"Product index {y} outside 0..{self.ny - 1}")
        return divmod(y, self.n3)

    def degree(self, x1):
        return popcount(self.rows[x1])

    def neighbors(self, x1):
        """Γ_A(x1) decoded into (x2, x3) pairs."""
        return [self.decode(y) for y in iter_bits(self.rows[x1])]

    def as_pair(self):
        """(X1, Y) as a bipartite pair for the regularity checkers."""
        return BipartitePair(self.n1, self.ny, self.rows, self.cols)


def build_path_aux(G, anchor, left, right):
    """
    Builds A(G) between V_anchor and V_left x V_right.

    Raises:
        MissingPatternEdge: {anchor, left} or {anchor, right} is not a pattern edge.
    """
    for x in (anchor, left, right):
        G._check_class(x)
    if len({anchor, left, right}) != 3:
        raise GraphError(f"Aux graph classes must be distinct, got {(anchor, left, right)}")
    for other in (left, right):
        if not G.pattern.has_edge(anchor, other):
            raise MissingPatternEdge(f"{{{anchor},{other}}} is not an edge of the pattern")

    n1, n2, n3 = G.class_size(anchor), G.class_size(left), G.class_size(right)
    rows = []
    cols = [0] * (n2 * n3)
    edge_count = 0
    for x1 in range(n1):
        to_left = G.neighbors(anchor, x1, left)
        to_right = G.neighbors(anchor, x1, right)
        row = 0
        for x2 in iter_bits(to_left):
            row |= to_right << (x2 * n3)
        for y in iter_bits(row):
            cols[y] |= 1 << x1
        rows.append(row)
        edge_count += popcount(to_left) * popcount(to_right)

    logger.debug(f"DEBUG: aux graph {n1} x {n2 * n3} with {edge_count} edges")
    return AuxGraph(n1, n2, n3, tuple(rows), tuple(cols), edge_count, (anchor, left, right))


def aux_lower_regularity(A, epsilon_prime, d_target, mode='exact', budget=WITNESS_BUDGET, rng=None,
                         limit=EXACT_SIDE_LIMIT):
    """
    (ε', d_target)-lower-regularity of (X1, Y). ``d_target`` is normally
    D[anchor, left] * D[anchor, right]. Exact mode needs n1 and n2*n3 within ``limit``.
    """
    return screen_pair(A.as_pair(), None, epsilon_prime, d=d_target, mode=mode, budget=budget,
                       rng=rng, limit=limit)


@dataclass(frozen=True)
class TriangleCounts:
    per_vertex: tuple
    total: int


def triangles_through_aux(A, edge_set_23):
    """
    For every x1, |Γ_A(x1) ∩ edge_set_23|: the triangles through x1 once the
    X2-X3 edges are added. ``edge_set_23`` is a bit vector over Y or an
    iterable of Y indices.
    """
    if isinstance(edge_set_23, int):
        if edge_set_23 < 0 or edge_set_23 >> A.ny:
            raise IndexOutOfRange(f"Edge set refers to product indices beyond {A.ny - 1}")
        mask = edge_set_23
    else:
        mask = 0
        for y in edge_set_23:
            if not 0 <= y < A.ny:
                raise IndexOutOfRange(f"Product index {y} outside 0..{A.ny - 1}")
            mask |= 1 << y
    per_vertex = tuple(popcount(row & mask) for row in A.rows)
    return TriangleCounts(per_vertex, sum(per_vertex))


def edge_set_from_graph(A, G):
    """The X2-X3 edges of G as a bit vector over Y."""
    _, left, right = A.classes
    if not G.pattern.has_edge(left, right):
        raise MissingPatternEdge(f"{{{left},{right}}} is not an edge of the pattern")
    mask = 0
    for x2 in range(A.n2):
        for x3 in iter_bits(G.neighbors(left, x2, right)):
            mask |= 1 << A.encode(x2, x3)
    return mask

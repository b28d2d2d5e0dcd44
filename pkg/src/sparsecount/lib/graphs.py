"""
Pattern graphs, blow-up instances and the line-oriented graph file format.

A blow-up of a pattern H on classes 1..ell stores, for every pattern edge
{x, y}, one bit vector per vertex of V_x over V_y and one per vertex of V_y
over V_x. Bit vectors are plain Python ints; bit i stands for vertex i of
the other class.
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from lib.errors import SparseCountError

logger = logging.getLogger(__name__)


class GraphError(SparseCountError):
    """Base exception class for the graph model"""
    pass

class PatternError(GraphError):
    pass

class IndexOutOfRange(GraphError):
    pass

class DuplicateEdge(GraphError):
    pass

class EdgeOnNonPatternPair(GraphError):
    pass

class AnchorNotAdjacent(GraphError):
    pass

class DensityMatrixError(GraphError):
    pass

class GraphSyntaxError(GraphError):
    """
    Malformed graph file. Carries the 1-based line number of the offending line
    """
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def ordered_pair(x, y):
    return (x, y) if x < y else (y, x)


def popcount(bits):
    return bits.bit_count()


def iter_bits(bits):
    """Yields the indices of the set bits of ``bits`` in increasing order."""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def mask_from(indices):
    bits = 0
    for index in indices:
        bits |= 1 << index
    return bits


##########################################
############ Pattern graphs ##############
##########################################

@dataclass(frozen=True)
class PatternGraph:
    """
    A simple graph on the labeled vertices 1..ell.

    Attributes:
        ell (int): number of vertices.
        edges (frozenset): unordered pairs stored as (x, y) with x < y.
    """
    ell: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.ell < 1:
            raise PatternError(f"A pattern needs at least one vertex, got {self.ell}")
        normalized = set()
        for x, y in self.edges:
            if x == y:
                raise PatternError(f"Loop at vertex {x}")
            if not (1 <= x <= self.ell and 1 <= y <= self.ell):
                raise PatternError(f"Edge {{{x},{y}}} leaves the vertex set 1..{self.ell}")
            normalized.add(ordered_pair(x, y))
        object.__setattr__(self, 'edges', frozenset(normalized))

    @classmethod
    def from_edges(cls, ell, edges):
        """Builds a pattern from a list of pairs, rejecting duplicates."""
        seen = set()
        for x, y in edges:
            pair = ordered_pair(x, y)
            if pair in seen:
                raise PatternError(f"Duplicate pattern edge {{{x},{y}}}")
            seen.add(pair)
        return cls(ell, frozenset(seen))

    @classmethod
    def complete(cls, ell):
        return cls(ell, frozenset(itertools.combinations(range(1, ell + 1), 2)))

    @classmethod
    def named(cls, name):
        """
        K2..K6, K4e (K4 minus the edge {1,2}) and C4 (cycle 1-2-3-4).
        """
        key = name.strip()
        if key in ('K4e', 'K4-e'):
            return cls.complete(4).without_edge(1, 2)
        if key == 'C4':
            return cls(4, frozenset([(1, 2), (2, 3), (3, 4), (1, 4)]))
        if len(key) == 2 and key[0] == 'K' and key[1] in '23456':
            return cls.complete(int(key[1]))
        raise PatternError(f"Unknown pattern name {name!r}")

    @property
    def vertices(self):
        return range(1, self.ell + 1)

    def sorted_edges(self):
        return sorted(self.edges)

    def edge_rank(self, x, y):
        """Lexicographic rank of the edge {x, y}."""
        return self.sorted_edges().index(ordered_pair(x, y))

    def has_edge(self, x, y):
        return ordered_pair(x, y) in self.edges

    def neighbors(self, x):
        return sorted(y for y in self.vertices if y != x and self.has_edge(x, y))

    def degree(self, x):
        return len(self.neighbors(x))

    def without_edge(self, x, y):
        return PatternGraph(self.ell, self.edges - {ordered_pair(x, y)})

    def induced(self, vertices):
        """
        Induced subgraph on ``vertices``, relabeled 1..k in increasing order
        of the original labels.
        """
        kept = sorted(set(vertices))
        relabel = {old: new for new, old in enumerate(kept, start=1)}
        edges = [(relabel[x], relabel[y]) for x, y in self.edges if x in relabel and y in relabel]
        return PatternGraph(len(kept), frozenset(edges))

    def __str__(self):
        edges = ' '.join(f"{x}{y}" for x, y in self.sorted_edges())
        return f"PatternGraph(ell={self.ell}, edges=[{edges}])"


@dataclass(frozen=True)
class DensityMatrix:
    """
    Symmetric ell x ell matrix of exact densities in (0, 1]; the diagonal is unused.
    """
    ell: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        normalized = {}
        for (x, y), value in self.entries.items():
            value = Fraction(value)
            pair = ordered_pair(x, y)
            if x == y or not (1 <= x <= self.ell and 1 <= y <= self.ell):
                raise DensityMatrixError(f"Invalid density entry index ({x}, {y})")
            if pair in normalized and normalized[pair] != value:
                raise DensityMatrixError(f"Asymmetric density entry at {pair}")
            if not (0 < value <= 1):
                raise DensityMatrixError(f"Density {value} at {pair} is outside (0, 1]")
            normalized[pair] = value
        for pair in itertools.combinations(range(1, self.ell + 1), 2):
            if pair not in normalized:
                raise DensityMatrixError(f"Missing density entry for {pair}")
        object.__setattr__(self, 'entries', normalized)

    @classmethod
    def constant(cls, ell, d):
        d = Fraction(d)
        return cls(ell, {pair: d for pair in itertools.combinations(range(1, ell + 1), 2)})

    def get(self, x, y):
        return self.entries[ordered_pair(x, y)]


##########################################
########## Bipartite pair view ###########
##########################################

@dataclass(frozen=True)
class BipartitePair:
    """
    One bipartite graph between side 1 (n1 vertices) and side 2 (n2 vertices).
    ``rows[v]`` is the neighborhood of side-1 vertex v as a bit vector over
    side 2 and ``cols[w]`` the neighborhood of side-2 vertex w over side 1.
    """
    n1: int
    n2: int
    rows: tuple
    cols: tuple

    @classmethod
    def from_rows(cls, n1, n2, rows):
        rows = tuple(rows)
        cols = [0] * n2
        for v, row in enumerate(rows):
            for w in iter_bits(row):
                cols[w] |= 1 << v
        return cls(n1, n2, rows, tuple(cols))

    @property
    def edge_count(self):
        return sum(popcount(row) for row in self.rows)

    def transpose(self):
        return BipartitePair(self.n2, self.n1, self.cols, self.rows)

    def edges_between(self, sub1, sub2):
        return sum(popcount(self.rows[v] & sub2) for v in iter_bits(sub1))

    def matrix(self):
        """0/1 adjacency matrix of shape (n1, n2)."""
        matrix = np.zeros((self.n1, self.n2), dtype=np.int64)
        for v, row in enumerate(self.rows):
            for w in iter_bits(row):
                matrix[v, w] = 1
        return matrix


##########################################
############ Blow-up graphs ##############
##########################################

@dataclass(frozen=True)
class ClassedGraph:
    """
    A blow-up instance of ``pattern``. Classes are 1-based, vertices of class
    x are 0..sizes[x-1]-1. Immutable after construction; build it with
    ``build_classed_graph``.
    """
    pattern: PatternGraph
    sizes: tuple
    adjacency: dict
    edge_counts: dict

    @property
    def ell(self):
        return self.pattern.ell

    def class_size(self, x):
        self._check_class(x)
        return self.sizes[x - 1]

    def full_mask(self, x):
        return (1 << self.class_size(x)) - 1

    def _check_class(self, x):
        if not 1 <= x <= self.pattern.ell:
            raise IndexOutOfRange(f"Class {x} outside 1..{self.pattern.ell}")

    def _oriented(self, x, y):
        self._check_class(x)
        self._check_class(y)
        if not self.pattern.has_edge(x, y):
            raise EdgeOnNonPatternPair(f"{{{x},{y}}} is not an edge of the pattern")
        rows, cols = self.adjacency[ordered_pair(x, y)]
        return (rows, cols) if x < y else (cols, rows)

    def rows(self, x, y):
        """Bit vectors Γ_y(v) for every v in V_x."""
        return self._oriented(x, y)[0]

    def neighbors(self, x, v, y):
        """Γ_y(v) for the vertex v of class x, as a bit vector over V_y."""
        rows = self.rows(x, y)
        if not 0 <= v < len(rows):
            raise IndexOutOfRange(f"Vertex {v} outside class {x} of size {len(rows)}")
        return rows[v]

    def has_edge(self, x, a, y, b):
        return bool(self.neighbors(x, a, y) >> b & 1)

    def edge_count(self, x, y):
        self._oriented(x, y)
        return self.edge_counts[ordered_pair(x, y)]

    def density(self, x, y):
        total = self.class_size(x) * self.class_size(y)
        return Fraction(self.edge_count(x, y), total) if total else Fraction(0)

    def edges(self, x, y):
        """Sorted list of pairs (a, b), a in V_x, b in V_y."""
        return [(a, b) for a, row in enumerate(self.rows(x, y)) for b in iter_bits(row)]

    def edge_lists(self):
        return {pair: self.edges(*pair) for pair in self.pattern.sorted_edges()}

    def bipartite(self, x, y):
        rows, cols = self._oriented(x, y)
        return BipartitePair(self.class_size(x), self.class_size(y), rows, cols)

    def with_pair_edges(self, x, y, edges):
        """A copy of this graph with E_xy replaced by ``edges`` (pairs a in V_x, b in V_y)."""
        self._oriented(x, y)
        lists = self.edge_lists()
        lists[ordered_pair(x, y)] = [(a, b) if x < y else (b, a) for a, b in edges]
        return build_classed_graph(self.pattern, self.sizes, lists)

    @classmethod
    def complete(cls, pattern, sizes):
        lists = {}
        for x, y in pattern.sorted_edges():
            lists[(x, y)] = list(itertools.product(range(sizes[x - 1]), range(sizes[y - 1])))
        return build_classed_graph(pattern, sizes, lists)

    def validate(self):
        """
        Re-checks the stored invariants: symmetric adjacency, popcount sums equal
        to m_xy, no adjacency on non-edges. Returns True or raises GraphError.
        """
        if set(self.adjacency) != set(self.pattern.edges):
            raise GraphError("Adjacency stored for a pair that is not a pattern edge")
        for (x, y), (rows, cols) in self.adjacency.items():
            if BipartitePair.from_rows(self.sizes[x - 1], self.sizes[y - 1], rows).cols != cols:
                raise GraphError(f"Asymmetric adjacency on pair {(x, y)}")
            m = self.edge_counts[(x, y)]
            if sum(map(popcount, rows)) != m or sum(map(popcount, cols)) != m:
                raise GraphError(f"Edge count mismatch on pair {(x, y)}")
        return True


def build_classed_graph(pattern, sizes, edge_lists):
    """
    Builds and validates a blow-up of ``pattern``.

    Args:
        pattern (PatternGraph): the template H.
        sizes (list): class sizes n_1..n_ell (non-negative; empty classes are legal).
        edge_lists (dict): pattern edge (x, y) -> list of pairs (a, b) with a in
                           V_x and b in V_y. Missing pattern edges get no edges.

    Returns:
        ClassedGraph

    Raises:
        IndexOutOfRange, DuplicateEdge, EdgeOnNonPatternPair, GraphError
    """
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) != pattern.ell:
        raise GraphError(f"Expected {pattern.ell} class sizes, got {len(sizes)}")
    if any(n < 0 for n in sizes):
        raise GraphError(f"Class sizes must be non-negative, got {sizes}")

    oriented = {}
    for key, pairs in edge_lists.items():
        x, y = key
        if not (1 <= x <= pattern.ell and 1 <= y <= pattern.ell) or not pattern.has_edge(x, y):
            raise EdgeOnNonPatternPair(f"Edges given for {{{x},{y}}}, which is not a pattern edge")
        pair = ordered_pair(x, y)
        if pair in oriented:
            raise DuplicateEdge(f"Two edge lists given for pair {pair}")
        oriented[pair] = [(a, b) if x < y else (b, a) for a, b in pairs]

    adjacency = {}
    edge_counts = {}
    for x, y in pattern.sorted_edges():
        nx_, ny_ = sizes[x - 1], sizes[y - 1]
        rows = [0] * nx_
        cols = [0] * ny_
        count = 0
        for a, b in oriented.get((x, y), []):
            if not (0 <= a < nx_ and 0 <= b < ny_):
                raise IndexOutOfRange(
                    f"Edge ({a}, {b}) on pair {(x, y)} outside class sizes ({nx_}, {ny_})")
            if rows[a] >> b & 1:
                raise DuplicateEdge(f"Edge ({a}, {b}) listed twice on pair {(x, y)}")
            rows[a] |= 1 << b
            cols[b] |= 1 << a
            count += 1
        adjacency[(x, y)] = (tuple(rows), tuple(cols))
        edge_counts[(x, y)] = count

    return ClassedGraph(pattern, sizes, adjacency, edge_counts)


##########################################
########### Neighborhood view ############
##########################################

@dataclass(frozen=True)
class Restriction:
    """
    The blow-up induced on kept classes, with restricted classes intersected
    with the anchor's neighborhood.

    Attributes:
        graph (ClassedGraph): classes relabeled 1..k in increasing original order.
        class_map (tuple): new class i (1-based) -> original class class_map[i-1].
        index_maps (tuple): new class i -> tuple of original vertex indices.
    """
    graph: ClassedGraph
    class_map: tuple
    index_maps: tuple
    anchor_class: int
    anchor_vertex: int


def neighborhood_restriction(G, anchor_class, anchor_vertex, kept_full, kept_restricted):
    """
    Restricts G to the classes in ``kept_full`` (entire classes) and
    ``kept_restricted`` (intersected with Γ(anchor_vertex)). Vertex indices
    are re-densified; the maps back to G are kept on the result.

    Raises:
        AnchorNotAdjacent: a restricted class has no pattern edge to the anchor class.
        IndexOutOfRange, GraphError
    """
    G._check_class(anchor_class)
    if not 0 <= anchor_vertex < G.class_size(anchor_class):
        raise IndexOutOfRange(
            f"Anchor vertex {anchor_vertex} outside class {anchor_class} of size {G.class_size(anchor_class)}")
    kept_full = set(kept_full)
    kept_restricted = set(kept_restricted)
    if kept_full & kept_restricted:
        raise GraphError(f"Classes {sorted(kept_full & kept_restricted)} are both full and restricted")
    if anchor_class in kept_full | kept_restricted:
        raise GraphError(f"The anchor class {anchor_class} cannot be kept")
    for x in kept_full | kept_restricted:
        G._check_class(x)
    for x in kept_restricted:
        if not G.pattern.has_edge(anchor_class, x):
            raise AnchorNotAdjacent(f"Class {x} has no pattern edge to anchor class {anchor_class}")

    class_map = tuple(sorted(kept_full | kept_restricted))
    index_maps = []
    for x in class_map:
        if x in kept_restricted:
            index_maps.append(tuple(iter_bits(G.neighbors(anchor_class, anchor_vertex, x))))
        else:
            index_maps.append(tuple(range(G.class_size(x))))

    pattern = G.pattern.induced(class_map)
    lists = {}
    for i, j in pattern.sorted_edges():
        x, y = class_map[i - 1], class_map[j - 1]
        position = {old: new for new, old in enumerate(index_maps[j - 1])}
        survivors = mask_from(index_maps[j - 1])
        pairs = []
        for a, old_a in enumerate(index_maps[i - 1]):
            for old_b in iter_bits(G.neighbors(x, old_a, y) & survivors):
                pairs.append((a, position[old_b]))
        lists[(i, j)] = pairs

    sizes = [len(indices) for indices in index_maps]
    logger.debug(f"DEBUG: restriction at class {anchor_class} vertex {anchor_vertex} has sizes {sizes}")
    return Restriction(build_classed_graph(pattern, sizes, lists), class_map, tuple(index_maps),
                       anchor_class, anchor_vertex)


##########################################
############### File format ##############
##########################################

def _ints(tokens, lineno, count=None):
    if count is not None and len(tokens) != count:
        raise GraphSyntaxError(lineno, f"expected {count} integers, got {len(tokens)}")
    try:
        return [int(token) for token in tokens]
    except ValueError:
        raise GraphSyntaxError(lineno, f"expected integers, got {' '.join(tokens)!r}")


def _parse_header(lines):
    """
    Reads ``classes``/``sizes``/``pattern`` directives. Returns
    (ell, sizes, pattern_edges, index of the first non-header line).
    """
    ell = None
    sizes = None
    pattern_edges = []
    seen = set()
    for position, (lineno, tokens) in enumerate(lines):
        head = tokens[0]
        if head == 'classes':
            if ell is not None:
                raise GraphSyntaxError(lineno, "duplicate 'classes' line")
            (ell,) = _ints(tokens[1:], lineno, 1)
            if ell < 1:
                raise GraphSyntaxError(lineno, "need at least one class")
        elif head == 'sizes':
            if ell is None:
                raise GraphSyntaxError(lineno, "'sizes' before 'classes'")
            if sizes is not None:
                raise GraphSyntaxError(lineno, "duplicate 'sizes' line")
            sizes = _ints(tokens[1:], lineno, ell)
        elif head == 'pattern':
            if ell is None:
                raise GraphSyntaxError(lineno, "'pattern' before 'classes'")
            x, y = _ints(tokens[1:], lineno, 2)
            if x == y or not (1 <= x <= ell and 1 <= y <= ell):
                raise GraphSyntaxError(lineno, f"invalid pattern edge {x} {y}")
            if ordered_pair(x, y) in seen:
                raise GraphSyntaxError(lineno, f"duplicate pattern edge {x} {y}")
            seen.add(ordered_pair(x, y))
            pattern_edges.append((x, y))
        else:
            return ell, sizes, pattern_edges, position
    return ell, sizes, pattern_edges, len(lines)


def _tokenize(text):
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if line:
            lines.append((lineno, line.split()))
    return lines


def parse_pattern_file(text):
    """Reads only the ``classes`` and ``pattern`` header lines of a graph file."""
    lines = _tokenize(text)
    ell, _, pattern_edges, _ = _parse_header(lines)
    if ell is None:
        raise GraphSyntaxError(lines[0][0] if lines else 1, "missing 'classes' line")
    return PatternGraph.from_edges(ell, pattern_edges)


def parse_graph_file(text):
    """
    Parses the graph text format:

        classes <ell>
        sizes <n1> ... <n_ell>
        pattern <x> <y>        (one per pattern edge, 1-based)
        edges <x> <y>          (one section per pattern edge, any order)
        <a> <b>                (0-based; a in class x, b in class y)
        end

    Raises:
        GraphSyntaxError: with the offending line number.
        IndexOutOfRange, DuplicateEdge, EdgeOnNonPatternPair: semantic errors.
    """
    lines = _tokenize(text)
    ell, sizes, pattern_edges, start = _parse_header(lines)
    last = lines[-1][0] if lines else 1
    if ell is None:
        raise GraphSyntaxError(lines[0][0] if lines else 1, "missing 'classes' line")
    if sizes is None:
        raise GraphSyntaxError(last, "missing 'sizes' line")
    pattern = PatternGraph.from_edges(ell, pattern_edges)

    sections = {}
    current = None
    ended = False
    for lineno, tokens in lines[start:]:
        head = tokens[0]
        if ended:
            raise GraphSyntaxError(lineno, "content after 'end'")
        if head == 'edges':
            x, y = _ints(tokens[1:], lineno, 2)
            if not (1 <= x <= ell and 1 <= y <= ell) or not pattern.has_edge(x, y):
                raise EdgeOnNonPatternPair(f"line {lineno}: edges section for non-pattern pair {x} {y}")
            if ordered_pair(x, y) in {ordered_pair(*key) for key in sections}:
                raise GraphSyntaxError(lineno, f"second edges section for pair {x} {y}")
            current = (x, y)
            sections[current] = []
        elif head == 'end':
            ended = True
        elif head in ('classes', 'sizes', 'pattern'):
            raise GraphSyntaxError(lineno, f"'{head}' after the first edges section")
        elif current is None:
            raise GraphSyntaxError(lineno, f"unknown directive {head!r}")
        else:
            sections[current].append(tuple(_ints(tokens, lineno, 2)))
    if not ended:
        raise GraphSyntaxError(last, "missing 'end'")
    covered = {ordered_pair(*key) for key in sections}
    for pair in pattern.sorted_edges():
        if pair not in covered:
            raise GraphSyntaxError(last, f"no edges section for pattern edge {pair[0]} {pair[1]}")

    return build_classed_graph(pattern, sizes, sections)


def serialize_graph_file(G):
    """Writes G in the graph text format; ``parse_graph_file`` inverts it."""
    out = [f"classes {G.ell}", "sizes " + ' '.join(str(n) for n in G.sizes)]
    for x, y in G.pattern.sorted_edges():
        out.append(f"pattern {x} {y}")
    for x, y in G.pattern.sorted_edges():
        out.append(f"edges {x} {y}")
        out.extend(f"{a} {b}" for a, b in G.edges(x, y))
    out.append("end")
    return '\n'.join(out) + '\n'


def read_graph_text(path):
    """
    Reads a graph or pattern file as UTF-8.

    Raises:
        GraphSyntaxError: the file is not valid UTF-8.
        OSError: the file cannot be read.
    """
    data = Path(path).read_bytes()
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise GraphSyntaxError(data.count(b'\n', 0, e.start) + 1, f"{path} is not valid UTF-8") from e

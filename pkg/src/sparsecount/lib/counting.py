"""
Canonical copies of a pattern H in a blow-up G, and the pattern arithmetic
around them (2-density, thresholds, valid edge orderings, binomial bounds).

A canonical copy picks one vertex from every class V_x such that every edge
{x, y} of H is realized inside E_xy.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from scipy.special import gammaln

from lib.errors import SparseCountError
from lib.graphs import IndexOutOfRange, iter_bits, ordered_pair, popcount

logger = logging.getLogger(__name__)

STRICTLY_BALANCED = 'strictly-balanced'
BALANCED = 'balanced'
NEITHER = 'neither'


class PatternMismatch(SparseCountError):
    pass

class EdgeAbsent(SparseCountError):
    pass

class TooFewVertices(SparseCountError):
    pass

class DomainError(SparseCountError):
    pass


@dataclass(frozen=True)
class CopyCount:
    """
    Attributes:
        total (int): number of canonical copies.
        per_vertex (dict): class x -> tuple of copies through each vertex of V_x, when requested.
        per_edge (dict): pattern edge (x, y) -> {(a, b): copies through ab}, when requested.
    """
    total: int
    per_vertex: dict = None
    per_edge: dict = None


def _check_pattern(G, H):
    if H.ell != G.ell:
        raise PatternMismatch(f"Pattern has {H.ell} vertices but the graph has {G.ell} classes")
    for x, y in H.edges:
        if not G.pattern.has_edge(x, y):
            raise PatternMismatch(f"Pattern edge {{{x},{y}}} is not a pair of the blow-up")


def _elimination_order(H):
    return sorted(H.vertices, key=lambda x: (-H.degree(x), x))


def _search(G, H, masks, skip=frozenset(), on_copy=None):
    """
    Backtracks over H's vertices by descending degree, intersecting candidate
    bit vectors. Without ``on_copy`` the last level is a popcount.
    """
    order = _elimination_order(H)
    earlier = []
    for k, x in enumerate(order):
        placed = set(order[:k])
        earlier.append([u for u in H.neighbors(x) if u in placed and ordered_pair(u, x) not in skip])
    last = len(order) - 1
    assignment = {}

    def extend(k):
        x = order[k]
        candidates = masks[x]
        for u in earlier[k]:
            candidates &= G.neighbors(u, assignment[u], x)
            if not candidates:
                return 0
        if k == last and on_copy is None:
            return popcount(candidates)
        found = 0
        for v in iter_bits(candidates):
            assignment[x] = v
            if k == last:
                on_copy(assignment)
                found += 1
            else:
                found += extend(k + 1)
        assignment.pop(x, None)
        return found

    return extend(0)


def _full_masks(G):
    return {x: G.full_mask(x) for x in G.pattern.vertices}


def count_canonical(G, H, per_vertex=False, per_edge=False):
    """
    Counts canonical copies of H in G.

    Args:
        G (ClassedGraph): the blow-up.
        H (PatternGraph): same vertex count as G's pattern, edges among G's pattern edges.
        per_vertex (bool): also return copies through every vertex.
        per_edge (bool): also return copies through every edge of every pattern edge of H.

    Returns:
        CopyCount

    Raises:
        PatternMismatch
    """
    _check_pattern(G, H)
    masks = _full_masks(G)
    if not (per_vertex or per_edge):
        return CopyCount(_search(G, H, masks))

    vertex_counts = {x: [0] * G.class_size(x) for x in H.vertices}
    edge_counts = {pair: {} for pair in H.sorted_edges()}

    def record(assignment):
        for x, v in assignment.items():
            vertex_counts[x][v] += 1
        if per_edge:
            for x, y in edge_counts:
                key = (assignment[x], assignment[y])
                edge_counts[(x, y)][key] = edge_counts[(x, y)].get(key, 0) + 1

    total = _search(G, H, masks, on_copy=record)
    return CopyCount(
        total,
        {x: tuple(counts) for x, counts in vertex_counts.items()} if per_vertex else None,
        edge_counts if per_edge else None,
    )


def deg_vertex(G, H, x, v):
    """deg_H(v, G): canonical copies through vertex v of class x."""
    _check_pattern(G, H)
    if not 0 <= v < G.class_size(x):
        raise IndexOutOfRange(f"Vertex {v} outside class {x} of size {G.class_size(x)}")
    masks = _full_masks(G)
    masks[x] = 1 << v
    return _search(G, H, masks)


def deg_edge(G, H, pair, e):
    """
    deg_H(e, G) for a present edge e = (a, b), a in V_x, b in V_y.

    Raises:
        EdgeAbsent: ab is not an edge of G.
    """
    _check_pattern(G, H)
    x, y = pair
    a, b = e
    if not H.has_edge(x, y):
        raise PatternMismatch(f"{{{x},{y}}} is not an edge of the counted pattern")
    if not G.has_edge(x, a, y, b):
        raise EdgeAbsent(f"({a}, {b}) is not an edge of E_{x}{y}")
    masks = _full_masks(G)
    masks[x] = 1 << a
    masks[y] = 1 << b
    return _search(G, H, masks)


def deg_edge_potential(G, H, pair, e):
    """
    Copies of H that would contain e = (a, b) if it were present: every
    edge of H is required except {x, y} itself. {x, y} need not be an edge of
    G or of H.
    """
    _check_pattern(G, H)
    x, y = pair
    a, b = e
    for cls, vertex in ((x, a), (y, b)):
        if not 0 <= vertex < G.class_size(cls):
            raise IndexOutOfRange(f"Vertex {vertex} outside class {cls} of size {G.class_size(cls)}")
    masks = _full_masks(G)
    masks[x] = 1 << a
    masks[y] = 1 << b
    return _search(G, H, masks, skip=frozenset([ordered_pair(x, y)]))


##########################################
############# Expectations ###############
##########################################

def expected_count(H, sizes, D):
    """∏ n_x · ∏_{xy ∈ E(H)} D[x, y], exactly."""
    result = Fraction(math.prod(sizes))
    for x, y in H.edges:
        result *= D.get(x, y)
    return result


def expected_count_uniform(H, n, m):
    """n^|V(H)| (m / n^2)^|E(H)|."""
    return Fraction(n) ** H.ell * Fraction(m, n * n) ** len(H.edges)


def empirical_expected_count(G, H):
    """expected_count with G's own pair densities m_xy / (n_x n_y)."""
    _check_pattern(G, H)
    result = Fraction(math.prod(G.sizes))
    for x, y in H.edges:
        result *= G.density(x, y)
    return result


def is_bad_instance(G, H, delta):
    """True iff G has fewer than (1 - δ) times its expected number of canonical copies."""
    delta = Fraction(delta)
    count = count_canonical(G, H).total
    return count < (1 - delta) * empirical_expected_count(G, H)


def triangle_degrees(G, anchor=1):
    """Canonical triangles through every vertex of V_anchor, for a K3 blow-up."""
    if G.ell != 3 or len(G.pattern.edges) != 3:
        raise PatternMismatch("Triangle degrees need a blow-up of K3")
    left, right = [x for x in (1, 2, 3) if x != anchor]
    degrees = []
    for v in range(G.class_size(anchor)):
        to_right = G.neighbors(anchor, v, right)
        degrees.append(sum(popcount(G.neighbors(left, w, right) & to_right)
                           for w in iter_bits(G.neighbors(anchor, v, left))))
    return degrees


def bad_family_B3(G, delta, D):
    """
    Membership in B_δ(3, n1, n2, n3, D): at least δ n1 vertices of X1 lie in
    at most (1 - δ) n2 n3 D12 D13 D23 canonical triangles.
    """
    delta = Fraction(delta)
    degrees = triangle_degrees(G)
    n1, n2, n3 = G.sizes
    threshold = (1 - delta) * n2 * n3 * D.get(1, 2) * D.get(1, 3) * D.get(2, 3)
    low = sum(1 for degree in degrees if degree <= threshold)
    return low >= delta * n1


##########################################
########### Pattern arithmetic ###########
##########################################

def _induced_ratios(H, proper):
    for size in range(3, H.ell + (0 if proper else 1)):
        for subset in itertools.combinations(H.vertices, size):
            sub = H.induced(subset)
            yield Fraction(len(sub.edges) - 1, size - 2)


def two_density(H):
    """
    m_2(H) = max (e(H') - 1) / (v(H') - 2) over subgraphs on at least three
    vertices. For a fixed vertex set the induced subgraph has the most edges,
    so induced subgraphs suffice.
    """
    if H.ell < 3:
        raise TooFewVertices(f"2-density needs at least 3 vertices, got {H.ell}")
    return max(_induced_ratios(H, proper=False))


def balance_class(H):
    if H.ell < 3:
        raise TooFewVertices(f"2-density needs at least 3 vertices, got {H.ell}")
    own = Fraction(len(H.edges) - 1, H.ell - 2)
    others = list(_induced_ratios(H, proper=True))
    if all(ratio < own for ratio in others):
        return STRICTLY_BALANCED
    if all(ratio <= own for ratio in others):
        return BALANCED
    return NEITHER


def _integer_root(value, k):
    """Largest r with r**k <= value."""
    if value < 2:
        return value
    r = 1 << -(-value.bit_length() // k)
    while True:
        s = ((k - 1) * r + value // r ** (k - 1)) // k
        if s >= r:
            return r
        r = s


def edge_threshold(H, n, C=1):
    """
    ⌈C · n^(2 - 1/m_2(H))⌉. Exact when n^(2 - 1/m_2) is an integer, floating
    point otherwise.
    """
    C = Fraction(C)
    m2 = two_density(H)
    if m2 <= 0:
        raise DomainError(f"Edge threshold undefined for 2-density {m2}")
    exponent = 2 - 1 / m2
    if exponent > 0:
        power = n ** exponent.numerator
        root = _integer_root(power, exponent.denominator)
        if root ** exponent.denominator == power:
            return math.ceil(C * root)
    return math.ceil(float(C) * float(n) ** float(exponent))


@dataclass(frozen=True)
class ValidSequence:
    """
    An ordering of E(K_ell) in which the edges from v_(k+1) to v_1..v_k fill
    positions binom(k,2)+1 .. binom(k+1,2). ``permutations[k-1]`` is σ_k, the
    order in which v_(k+1) meets v_1..v_k.
    """
    ell: int
    edges: tuple
    permutations: tuple


def valid_sequences(ell):
    """Yields every valid sequence; there are ∏_{k<ell} k! of them."""
    if ell < 2:
        raise DomainError(f"Valid sequences need ell >= 2, got {ell}")
    blocks = [itertools.permutations(range(1, k + 1)) for k in range(1, ell)]
    for sigmas in itertools.product(*blocks):
        edges = tuple((i, k + 1) for k, sigma in enumerate(sigmas, start=1) for i in sigma)
        yield ValidSequence(ell, edges, tuple(sigmas))


def one_valid_sequence(ell):
    return next(valid_sequences(ell))


def is_valid_sequence(ell, edges):
    edges = [ordered_pair(x, y) for x, y in edges]
    if sorted(edges) != sorted(itertools.combinations(range(1, ell + 1), 2)):
        return False
    position = 0
    for k in range(1, ell):
        block = edges[position:position + k]
        if sorted(block) != [(i, k + 1) for i in range(1, k + 1)]:
            return False
        position += k
    return True


##########################################
############ Binomial bounds #############
##########################################

def _require_naturals(*values):
    for value in values:
        if not isinstance(value, int) or value < 0:
            raise DomainError(f"Expected a non-negative integer, got {value!r}")


def log_choose(a, b):
    """ln binom(a, b) through log-gamma."""
    _require_naturals(a, b)
    if b > a:
        raise DomainError(f"log_choose needs 0 <= b <= a, got a={a}, b={b}")
    if b == 0 or b == a:
        return 0.0
    return float(gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1))


def check_binomial_scaling(a, b, x):
    """binom(xa, b) <= binom(a, b) x^b for 0 <= x <= 1 with xa integral."""
    _require_naturals(a, b)
    x = Fraction(x)
    if not 0 <= x <= 1 or (x * a).denominator != 1:
        raise DomainError(f"Need 0 <= x <= 1 with x*a integral, got x={x}, a={a}")
    xa = int(x * a)
    return math.comb(xa, b) * x.denominator ** b <= math.comb(a, b) * x.numerator ** b


def check_binomial_split(a, b, c):
    """binom(a, b - c) binom(a, c) <= 4^b binom(a, b) for c <= b <= a."""
    _require_naturals(a, b, c)
    if not c <= b <= a:
        raise DomainError(f"Need c <= b <= a, got a={a}, b={b}, c={c}")
    return math.comb(a, b - c) * math.comb(a, c) <= 4 ** b * math.comb(a, b)


def check_binomial_merge(a, b, c, d):
    """binom(a, b) binom(c, d) <= binom(a + c, b + d)."""
    _require_naturals(a, b, c, d)
    return math.comb(a, b) * math.comb(c, d) <= math.comb(a + c, b + d)

"""
(ε)-regularity and (ε, d)-lower-regularity of bipartite pairs.

Exact checkers enumerate every subset of the smaller side (a subset-sum
table gives each subset's degree vector into the other side) and, for each
size of the other side, read the extremal edge counts off the sorted degree
vector. That covers every qualifying subset pair without a double loop.
All comparisons are integer cross-multiplications.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from lib.errors import SparseCountError
from lib.graphs import BipartitePair, IndexOutOfRange, iter_bits, mask_from, popcount
from lib.rational import format_rational, min_qualifying_size
from lib.streams import RngSpec, as_generator

logger = logging.getLogger(__name__)

EXACT_SIDE_LIMIT = 14
WITNESS_BUDGET = 16

CERTIFIED = 'certified-regular'
VIOLATION = 'witness-violation'
NO_WITNESS = 'no-witness-found'

EPS_MODE = 'eps-regular'
LOWER_MODE = 'lower-regular'

SCREEN_MODES = ('auto', 'exact', 'witness')


class RegularityError(SparseCountError):
    """Base exception class for regularity checks"""
    pass

class EmptySubset(RegularityError):
    pass

class EmptySide(RegularityError):
    pass

class SideTooLargeForExact(RegularityError):
    pass

class SubsetTooSmall(RegularityError):
    pass

class ParameterOrderViolation(RegularityError):
    pass


@dataclass(frozen=True)
class Witness:
    """
    A subset pair that breaks the regularity inequality.

    Attributes:
        sub1 (int): bit vector over side 1.
        sub2 (int): bit vector over side 2.
        density (Fraction): d(sub1, sub2).
        reference (Fraction): the pair density (ε mode) or the target d (lower mode).
    """
    sub1: int
    sub2: int
    density: Fraction
    reference: Fraction

    def to_dict(self):
        return {
            'side1': list(iter_bits(self.sub1)),
            'side2': list(iter_bits(self.sub2)),
            'density': format_rational(self.density),
            'reference': format_rational(self.reference),
        }


@dataclass(frozen=True)
class RegularityVerdict:
    kind: str
    witness: Witness = None
    subsets_examined: int = 0

    def __post_init__(self):
        if self.kind not in (CERTIFIED, VIOLATION, NO_WITNESS):
            raise RegularityError(f"Unknown verdict kind {self.kind!r}")
        if (self.kind == VIOLATION) != (self.witness is not None):
            raise RegularityError("A verdict carries a witness exactly when it reports a violation")

    @property
    def is_violation(self):
        return self.kind == VIOLATION

    @property
    def acceptance_mode(self):
        """'certified', 'heuristic' or 'rejected'."""
        return {CERTIFIED: 'certified', NO_WITNESS: 'heuristic', VIOLATION: 'rejected'}[self.kind]

    def to_dict(self):
        return {
            'verdict': self.kind,
            'witness': self.witness.to_dict() if self.witness else None,
            'subsets_examined': self.subsets_examined,
        }


def as_pair(G, pair=None):
    """Accepts a BipartitePair, or a ClassedGraph with a pattern edge (x, y)."""
    if isinstance(G, BipartitePair):
        return G
    if pair is None:
        raise RegularityError("A pattern edge is required to select a pair of a classed graph")
    x, y = pair
    return G.bipartite(x, y)


def _require_sides(P):
    if P.n1 == 0 or P.n2 == 0:
        raise EmptySide(f"Pair with sides ({P.n1}, {P.n2}) has an empty side")


def _require_positive(epsilon):
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise RegularityError(f"epsilon must be positive, got {epsilon}")
    return epsilon


def _check_mask(mask, n, side):
    if mask < 0 or mask >> n:
        raise IndexOutOfRange(f"Subset of side {side} refers to vertices beyond {n - 1}")


def density(G, pair, sub1, sub2):
    """|E(sub1, sub2)| / (|sub1| |sub2|) as an exact rational."""
    P = as_pair(G, pair)
    _check_mask(sub1, P.n1, 1)
    _check_mask(sub2, P.n2, 2)
    k1, k2 = popcount(sub1), popcount(sub2)
    if k1 == 0 or k2 == 0:
        raise EmptySubset("Density of an empty subset is undefined")
    return Fraction(P.edges_between(sub1, sub2), k1 * k2)


def violates(G, pair, epsilon, sub1, sub2, d=None):
    """
    True iff (sub1, sub2) is a qualifying subset pair whose density breaks the
    (ε)-regular inequality, or the (ε, d)-lower-regular one when ``d`` is given.
    """
    P = as_pair(G, pair)
    epsilon = Fraction(epsilon)
    if popcount(sub1) < min_qualifying_size(epsilon, P.n1) or popcount(sub2) < min_qualifying_size(epsilon, P.n2):
        return False
    sub_density = density(P, None, sub1, sub2)
    if d is not None:
        return sub_density < (1 - epsilon) * Fraction(d)
    pair_density = Fraction(P.edge_count, P.n1 * P.n2)
    return abs(sub_density - pair_density) > epsilon * pair_density


##########################################
############ Exact checkers ##############
##########################################

def _degree_table(matrix):
    """
    Row r holds the degree vector of the subset r (bit i of r = vertex i) of
    the matrix's row side; ``sizes[r]`` is popcount(r).
    """
    a, b = matrix.shape
    degrees = np.zeros((1, b), dtype=np.int64)
    sizes = np.zeros(1, dtype=np.int64)
    for i in range(a):
        degrees = np.concatenate([degrees, degrees + matrix[i]])
        sizes = np.concatenate([sizes, sizes + 1])
    return degrees, sizes


def _exact_scan(P, epsilon, d, limit):
    _require_sides(P)
    epsilon = _require_positive(epsilon)
    if max(P.n1, P.n2) > limit:
        raise SideTooLargeForExact(
            f"Exact checking is limited to sides of at most {limit} vertices, got ({P.n1}, {P.n2})")

    transposed = P.n1 > P.n2
    Q = P.transpose() if transposed else P
    a, b = Q.n1, Q.n2
    e = Q.edge_count
    N = a * b
    p, q = epsilon.numerator, epsilon.denominator
    logger.debug(f"DEBUG: exact scan of a {a}x{b} pair with {e} edges, epsilon {epsilon}")

    degrees, sizes = _degree_table(Q.matrix())
    rows = np.flatnonzero(sizes >= min_qualifying_size(epsilon, a))
    s_min = min_qualifying_size(epsilon, b)
    examined = int(len(rows)) * sum(comb(b, s) for s in range(s_min, b + 1))
    if len(rows) == 0 or s_min > b:
        return RegularityVerdict(CERTIFIED, None, examined)

    ascending = np.sort(degrees[rows], axis=1)
    e_min = np.cumsum(ascending, axis=1)[:, s_min - 1:]
    e_max = np.cumsum(ascending[:, ::-1], axis=1)[:, s_min - 1:]
    s_a = sizes[rows][:, None]
    s_b = np.arange(s_min, b + 1, dtype=np.int64)[None, :]

    dn, dd = (Fraction(d).numerator, Fraction(d).denominator) if d is not None else (1, 1)
    if max(p, q, dn, dd) ** 2 * 4 * N ** 3 >= 2 ** 62:
        e_min, e_max, s_a, s_b = (arr.astype(object) for arr in (e_min, e_max, s_a, s_b))

    if d is None:
        expected = e * s_a * s_b
        above = q * (e_max * N - expected) > p * expected
        below = q * (expected - e_min * N) > p * expected
    else:
        above = np.zeros(e_min.shape, dtype=bool)
        below = q * dd * e_min < (q - p) * dn * s_a * s_b

    bad = above | below
    if not bad.any():
        return RegularityVerdict(CERTIFIED, None, examined)

    flat = int(np.flatnonzero(bad.ravel())[0])
    i, j = divmod(flat, bad.shape[1])
    subset = int(rows[i])
    s = s_min + j
    row = degrees[subset]
    if above[i, j]:
        chosen = np.argsort(-row, kind='stable')[:s]
    else:
        chosen = np.argsort(row, kind='stable')[:s]
    sub_a, sub_b = subset, mask_from(int(v) for v in chosen)
    edges = int(row[chosen].sum())
    sub1, sub2 = (sub_b, sub_a) if transposed else (sub_a, sub_b)
    reference = Fraction(e, N) if d is None else Fraction(d)
    witness = Witness(sub1, sub2, Fraction(edges, popcount(sub_a) * s), reference)
    return RegularityVerdict(VIOLATION, witness, examined)


def check_eps_regular_exact(G, pair, epsilon, limit=EXACT_SIDE_LIMIT):
    """
    Decides (ε)-regularity of a pair exhaustively.

    Args:
        G: a ClassedGraph (with ``pair`` a pattern edge) or a BipartitePair (``pair`` None).
        epsilon (Fraction): ε > 0.
        limit (int): largest side size accepted.

    Returns:
        RegularityVerdict: certified-regular or witness-violation.

    Raises:
        EmptySide, SideTooLargeForExact
    """
    return _exact_scan(as_pair(G, pair), epsilon, None, limit)


def check_lower_regular_exact(G, pair, epsilon, d, limit=EXACT_SIDE_LIMIT):
    """Decides (ε, d)-lower-regularity exhaustively. Same contract as the ε checker."""
    return _exact_scan(as_pair(G, pair), epsilon, Fraction(d), limit)


##########################################
############ Witness search ##############
##########################################

def witness_search(G, pair, epsilon, mode=EPS_MODE, d=None, budget=WITNESS_BUDGET, rng=None):
    """
    Randomized falsifier. Each restart draws qualifying subsets and then swaps
    single vertices, alternating sides, to push the subpair density away from
    the pair density (up on even restarts, down on odd ones) or, in lower
    mode, down. Returns witness-violation or no-witness-found; never certifies.
    """
    P = as_pair(G, pair)
    _require_sides(P)
    epsilon = _require_positive(epsilon)
    if mode not in (EPS_MODE, LOWER_MODE):
        raise RegularityError(f"Unknown witness search mode {mode!r}")
    if mode == LOWER_MODE and d is None:
        raise RegularityError("Lower-regular witness search needs a target density")
    if budget < 1:
        raise RegularityError(f"Witness search budget must be at least 1, got {budget}")
    gen = as_generator(rng if rng is not None else RngSpec(0))
    target = Fraction(d) if mode == LOWER_MODE else None

    n1, n2 = P.n1, P.n2
    matrix = P.matrix()
    s1_min = min_qualifying_size(epsilon, n1)
    s2_min = min_qualifying_size(epsilon, n2)
    if s1_min > n1 or s2_min > n2:
        return RegularityVerdict(NO_WITNESS, None, 0)
    reference = target if target is not None else Fraction(P.edge_count, n1 * n2)
    examined = 0

    def found(in1, in2):
        sub1 = mask_from(int(v) for v in np.flatnonzero(in1))
        sub2 = mask_from(int(v) for v in np.flatnonzero(in2))
        if violates(P, None, epsilon, sub1, sub2, target):
            return Witness(sub1, sub2, density(P, None, sub1, sub2), reference)
        return None

    def swap(in_side, degrees, direction):
        inside = np.flatnonzero(in_side)
        outside = np.flatnonzero(~in_side)
        if len(outside) == 0:
            return False
        best_out = outside[np.argmax(direction * degrees[outside])]
        worst_in = inside[np.argmin(direction * degrees[inside])]
        if direction * degrees[best_out] <= direction * degrees[worst_in]:
            return False
        in_side[best_out] = True
        in_side[worst_in] = False
        return True

    for restart in range(budget):
        direction = -1 if mode == LOWER_MODE else (1 if restart % 2 == 0 else -1)
        if restart < 2:
            k1, k2 = s1_min, s2_min
        else:
            k1 = int(gen.integers(s1_min, n1 + 1))
            k2 = int(gen.integers(s2_min, n2 + 1))
        in1 = np.zeros(n1, dtype=bool)
        in2 = np.zeros(n2, dtype=bool)
        in1[gen.choice(n1, size=k1, replace=False)] = True
        in2[gen.choice(n2, size=k2, replace=False)] = True

        for _ in range(4 * (n1 + n2)):
            examined += 1
            witness = found(in1, in2)
            if witness:
                logger.debug(f"DEBUG: witness found on restart {restart} after {examined} states")
                return RegularityVerdict(VIOLATION, witness, examined)
            moved = swap(in1, matrix[:, in2].sum(axis=1), direction)
            moved = swap(in2, matrix[in1, :].sum(axis=0), direction) or moved
            if not moved:
                break
        else:
            examined += 1
            witness = found(in1, in2)
            if witness:
                return RegularityVerdict(VIOLATION, witness, examined)

    logger.debug(f"DEBUG: no witness after {budget} restarts")
    return RegularityVerdict(NO_WITNESS, None, examined)


def screen_pair(G, pair, epsilon, d=None, mode='auto', budget=WITNESS_BUDGET, rng=None,
                limit=EXACT_SIDE_LIMIT):
    """
    Screens one pair for (ε)-regularity, or (ε, d)-lower-regularity when ``d``
    is given. ``auto`` uses the exact checker when both sides fit under
    ``limit`` and the witness search otherwise.
    """
    P = as_pair(G, pair)
    if mode not in SCREEN_MODES:
        raise RegularityError(f"Unknown screen mode {mode!r}")
    if mode == 'exact' or (mode == 'auto' and max(P.n1, P.n2) <= limit):
        return _exact_scan(P, epsilon, None if d is None else Fraction(d), limit)
    return witness_search(P, None, epsilon, LOWER_MODE if d is not None else EPS_MODE,
                          d=d, budget=budget, rng=rng)


##########################################
########## Degree / inheritance ##########
##########################################

def degree_deviation_report(G, pair, epsilon, d, sub2):
    """
    Counts side-1 vertices whose degree into ``sub2`` is below (1-ε)d|sub2|
    and above (1+ε)d|sub2|.

    Returns:
        tuple: (count_below, count_above)

    Raises:
        SubsetTooSmall: |sub2| < ε n2.
    """
    P = as_pair(G, pair)
    _check_mask(sub2, P.n2, 2)
    epsilon, d = Fraction(epsilon), Fraction(d)
    k = popcount(sub2)
    if k == 0 or k < epsilon * P.n2:
        raise SubsetTooSmall(f"|sub2| = {k} is below epsilon * n2 = {epsilon * P.n2}")
    low = (1 - epsilon) * d * k
    high = (1 + epsilon) * d * k
    below = above = 0
    for row in P.rows:
        degree = popcount(row & sub2)
        if degree < low:
            below += 1
        elif degree > high:
            above += 1
    return below, above


def inherited_regularity_params(epsilon, alpha):
    """ε' = max(ε/α, 2ε/(1-ε)) for sub-sides of relative size at least α."""
    epsilon, alpha = Fraction(epsilon), Fraction(alpha)
    if not (0 < epsilon < alpha <= 1):
        raise ParameterOrderViolation(f"Need 0 < epsilon < alpha <= 1, got epsilon={epsilon}, alpha={alpha}")
    return max(epsilon / alpha, 2 * epsilon / (1 - epsilon))

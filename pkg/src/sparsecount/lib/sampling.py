"""
Seeded samplers: uniform m-edge bipartite graphs, blow-ups with prescribed
edge counts, rejection into regular blow-ups and m-edge subgraph extraction.

Pair xy of a blow-up draws from stream ``rng.child(rank)`` where rank is the
lexicographic rank of xy among the pattern edges.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from lib.errors import SparseCountError
from lib.graphs import BipartitePair, build_classed_graph, ordered_pair
from lib.regularity import (
    CERTIFIED,
    EXACT_SIDE_LIMIT,
    NO_WITNESS,
    WITNESS_BUDGET,
    check_eps_regular_exact,
    screen_pair,
)
from lib.streams import RngSpec, as_generator

logger = logging.getLogger(__name__)

MAX_REJECTS = 200
MAX_RETRIES = 50
EXTRACTION_C = 1


class MTooLarge(SparseCountError):
    pass

class MOutOfRange(SparseCountError):
    pass

class RejectionExhausted(SparseCountError):
    def __init__(self, rejects):
        self.rejects = rejects
        super().__init__(f"No draw accepted after {rejects} rejections")

class RetriesExhausted(SparseCountError):
    def __init__(self, attempts):
        self.attempts = attempts
        super().__init__(f"No extracted subgraph passed after {attempts} attempts")


def _as_spec(rng):
    if isinstance(rng, RngSpec):
        return rng
    if isinstance(rng, int) and not isinstance(rng, bool):
        return RngSpec(rng)
    raise TypeError(f"Expected an RngSpec or an int seed, got {rng!r}")


def _sample_indices(total, m, gen):
    """Uniform m-subset of range(total) by a partial Fisher-Yates shuffle, sorted."""
    cells = np.arange(total, dtype=np.int64)
    if m:
        swaps = gen.integers(np.arange(m), total)
        for i, j in enumerate(swaps):
            cells[i], cells[j] = cells[j], cells[i]
    return np.sort(cells[:m])


def sample_bipartite_exact_m(n1, n2, m, rng):
    """
    A uniform m-edge bipartite graph on n1 x n2, as a sorted list of (a, b).

    Raises:
        MTooLarge: m outside 0..n1*n2.
    """
    if m < 0 or m > n1 * n2:
        raise MTooLarge(f"Cannot place {m} edges in a {n1}x{n2} grid")
    cells = _sample_indices(n1 * n2, m, as_generator(rng))
    return [divmod(int(cell), n2) for cell in cells]


def _pair_counts(pattern, m_per_pair):
    if isinstance(m_per_pair, int):
        return {pair: m_per_pair for pair in pattern.sorted_edges()}
    counts = {ordered_pair(*pair): m for pair, m in m_per_pair.items()}
    return {pair: counts.get(pair, 0) for pair in pattern.sorted_edges()}


def sample_blowup(H, sizes, m_per_pair, rng):
    """
    A uniform member of G(H, n_1..n_ell, D) with D_xy = m_xy / (n_x n_y).

    Args:
        H (PatternGraph): the pattern.
        sizes (list): class sizes.
        m_per_pair (int | dict): one edge count for every pair, or pattern edge -> m.
        rng (RngSpec | int): the stream; pair xy uses ``rng.child(rank(xy))``.
    """
    spec = _as_spec(rng)
    counts = _pair_counts(H, m_per_pair)
    lists = {}
    for rank, (x, y) in enumerate(H.sorted_edges()):
        lists[(x, y)] = sample_bipartite_exact_m(sizes[x - 1], sizes[y - 1], counts[(x, y)], spec.child(rank))
    return build_classed_graph(H, sizes, lists)


@dataclass(frozen=True)
class Screening:
    """
    Attributes:
        accepted (bool): no pair produced a witness.
        acceptance_mode (str): 'certified', 'heuristic' or 'rejected'.
        verdict_kind (str): the rejecting verdict, else the weakest accepting one.
        verdicts (dict): pattern edge -> RegularityVerdict, in screening order.
    """
    accepted: bool
    acceptance_mode: str
    verdict_kind: str
    verdicts: dict


def screen_blowup(G, epsilon, mode='auto', budget=WITNESS_BUDGET, rng=0, limit=EXACT_SIDE_LIMIT,
                  d=None, order=None):
    """
    Screens every pair of G (in ``order``, default lexicographic) and stops at
    the first violation. Pair xy searches with ``rng.child(rank(xy))``.
    """
    spec = _as_spec(rng)
    pairs = [ordered_pair(*pair) for pair in order] if order else G.pattern.sorted_edges()
    ranks = {pair: rank for rank, pair in enumerate(G.pattern.sorted_edges())}
    verdicts = {}
    for pair in pairs:
        verdict = screen_pair(G, pair, epsilon, d=d, mode=mode, budget=budget,
                              rng=spec.child(ranks[pair]), limit=limit)
        verdicts[pair] = verdict
        if verdict.is_violation:
            return Screening(False, 'rejected', verdict.kind, verdicts)
    if all(verdict.kind == CERTIFIED for verdict in verdicts.values()):
        return Screening(True, 'certified', CERTIFIED, verdicts)
    return Screening(True, 'heuristic', NO_WITNESS, verdicts)


@dataclass(frozen=True)
class SampledBlowup:
    graph: object
    acceptance_mode: str
    rejects: int
    verdict_kind: str


def sample_regular_blowup(H, sizes, m_per_pair, epsilon, verify_mode='auto', max_rejects=MAX_REJECTS, rng=0,
                          budget=WITNESS_BUDGET, limit=EXACT_SIDE_LIMIT):
    """
    Rejection sampling into G(H, n, m, ε). Draw i comes from ``rng.child(2i)``
    and is screened with ``rng.child(2i + 1)``.

    Raises:
        RejectionExhausted: ``max_rejects`` draws in a row were rejected.
    """
    if max_rejects < 1:
        raise SparseCountError(f"max_rejects must be at least 1, got {max_rejects}")
    spec = _as_spec(rng)
    for attempt in range(max_rejects):
        graph = sample_blowup(H, sizes, m_per_pair, spec.child(2 * attempt))
        screening = screen_blowup(graph, epsilon, verify_mode, budget, spec.child(2 * attempt + 1), limit)
        if screening.accepted:
            logger.debug(f"DEBUG: accepted draw after {attempt} rejections ({screening.acceptance_mode})")
            return SampledBlowup(graph, screening.acceptance_mode, attempt, screening.verdict_kind)
    raise RejectionExhausted(max_rejects)


@dataclass(frozen=True)
class Extraction:
    """
    Attributes:
        edges (list): the extracted (a, b) pairs.
        attempts (int): draws used, including the accepted one.
        verdict (RegularityVerdict): the (2ε) check of the accepted draw, None when unchecked.
    """
    edges: list
    attempts: int
    verdict: object


def extract_m_subgraph(G, pair, m, epsilon, max_retries=MAX_RETRIES, rng=0, c=EXTRACTION_C, verify=True,
                       limit=EXACT_SIDE_LIMIT):
    """
    Draws uniform m-subsets of E_xy until one is (2ε)-regular. Attempt i uses
    ``rng.child(i)``. Unverified when ``verify`` is off or a side exceeds ``limit``.

    Raises:
        MOutOfRange: m outside c (n_x + n_y) .. m_xy.
        RetriesExhausted
    """
    x, y = pair
    spec = _as_spec(rng)
    nx_, ny_ = G.class_size(x), G.class_size(y)
    edges = G.edges(x, y)
    if not (c * (nx_ + ny_) <= m <= len(edges)):
        raise MOutOfRange(f"m = {m} outside [{c} * ({nx_} + {ny_}), {len(edges)}]")
    checked = verify and max(nx_, ny_) <= limit

    for attempt in range(1, max_retries + 1):
        chosen = [edges[int(i)] for i in _sample_indices(len(edges), m, spec.child(attempt).generator())]
        if not checked:
            return Extraction(chosen, attempt, None)
        rows = [0] * nx_
        for a, b in chosen:
            rows[a] |= 1 << b
        verdict = check_eps_regular_exact(BipartitePair.from_rows(nx_, ny_, rows), None, 2 * Fraction(epsilon), limit)
        if not verdict.is_violation:
            return Extraction(chosen, attempt, verdict)
    raise RetriesExhausted(max_retries)

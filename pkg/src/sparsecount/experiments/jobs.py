"""
Experiment runners.

``ExperimentRunner`` expands a config into cells, runs every trial of a cell
through a worker pool and folds the records into per-cell summaries. Trial
functions live at module level so that the pool can pickle them; results
come back in trial order whatever the worker count.
"""
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from multiprocessing import Pool
from pathlib import Path

from django.conf import settings
from scipy.stats import binomtest

from lib.auxgraph import aux_lower_regularity, build_path_aux, edge_set_from_graph, triangles_through_aux
from lib.counting import (
    bad_family_B3,
    count_canonical,
    deg_edge_potential,
    expected_count_uniform,
    one_valid_sequence,
)
from lib.errors import SparseCountError
from lib.graphs import (
    BipartitePair,
    ClassedGraph,
    DensityMatrix,
    PatternGraph,
    build_classed_graph,
    neighborhood_restriction,
    parse_graph_file,
    read_graph_text,
)
from lib.rational import format_rational
from lib.regularity import VIOLATION, screen_pair
from lib.sampling import (
    RejectionExhausted,
    RetriesExhausted,
    extract_m_subgraph,
    sample_bipartite_exact_m,
    sample_blowup,
    sample_regular_blowup,
    screen_blowup,
)
from lib.streams import RngSpec, derive_seed
from .config import ConfigError

logger = logging.getLogger(__name__)

K2 = PatternGraph.named('K2')
K3 = PatternGraph.named('K3')
# G1 on X1-X2 and G2 on X1-X3; X2-X3 carries no edges
PATH = PatternGraph.from_edges(3, [(1, 2), (1, 3)])


class ExperimentError(SparseCountError):
    """
    Raised when a trial fails for a reason other than invalid input
    """
    pass


@dataclass
class TrialRecord:
    """
    One row of trials.csv. ``bad_flag`` is the cell's headline failure
    event: a bad instance (counting), a non-lower-regular auxiliary graph,
    membership in B_δ(3) (aux extension), a failing subset (heredity), too few
    good vertices (neighborhood) or a failing extraction draw. ``extras``
    stays out of the CSV.
    """
    experiment_kind: str
    cell_id: str
    n: int
    m: int
    epsilon: Fraction
    epsilon_prime: Fraction
    delta: Fraction
    trial_index: int
    derived_seed: int
    accepted_regular: bool = None
    acceptance_mode: str = None
    copy_count: int = None
    expected_count: Fraction = None
    bad_flag: bool = None
    good_vertex_count: int = None
    verdict_kind: str = None
    retries: int = None
    wall_ms: float = 0.0
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrialTask:
    config: object
    cell: object
    trial_index: int
    budget: int
    limit: int
    max_rejects: int
    record_wall_time: bool
    fixture: object = None


@dataclass
class ExperimentResult:
    config: object
    records: list
    summaries: list
    total_wall_ms: float


##########################################
################ Trials ##################
##########################################

def _counting_trial(task, spec, record):
    config, cell = task.config, task.cell
    H = config.pattern_graph
    G = sample_blowup(H, cell.sizes, cell.m, spec.child(0))
    screening = screen_blowup(G, cell.epsilon, config.screen_mode, task.budget, spec.child(1), task.limit)
    count = count_canonical(G, H).total
    expected = expected_count_uniform(H, cell.n, cell.m)

    record.accepted_regular = screening.accepted
    record.acceptance_mode = screening.acceptance_mode
    record.verdict_kind = screening.verdict_kind
    record.copy_count = count
    record.expected_count = expected
    record.bad_flag = count < (1 - cell.delta) * expected


def _aux_trial(task, spec, record):
    config, cell = task.config, task.cell
    n1, n2, n3 = cell.sizes
    g2 = sample_bipartite_exact_m(n1, n3, cell.m, spec.child(0))
    G = build_classed_graph(PATH, cell.sizes, {(1, 2): task.fixture, (1, 3): g2})
    d1, d2 = G.density(1, 2), G.density(1, 3)

    g2_verdict = screen_pair(G, (1, 3), cell.epsilon, d=d2, mode=config.screen_mode, budget=task.budget,
                             rng=spec.child(1), limit=task.limit)
    aux_verdict = aux_lower_regularity(build_path_aux(G, 1, 2, 3), config.epsilon_prime, d1 * d2,
                                       mode=config.screen_mode, budget=task.budget, rng=spec.child(2),
                                       limit=task.limit)

    record.accepted_regular = not g2_verdict.is_violation
    record.acceptance_mode = g2_verdict.acceptance_mode
    record.verdict_kind = aux_verdict.kind
    record.bad_flag = aux_verdict.is_violation
    record.extras['aux_verdict'] = aux_verdict.to_dict()


def _extension_trial(task, spec, record):
    config, cell = task.config, task.cell
    n1, n2, n3 = cell.sizes
    fixed_12, fixed_13 = task.fixture
    g23 = sample_bipartite_exact_m(n2, n3, cell.m, spec.child(0))
    G = build_classed_graph(K3, cell.sizes, {(1, 2): fixed_12, (1, 3): fixed_13, (2, 3): g23})
    D = DensityMatrix(3, {pair: G.density(*pair) for pair in K3.sorted_edges()})

    g23_verdict = screen_pair(G, (2, 3), cell.epsilon, d=D.get(2, 3), mode=config.screen_mode,
                              budget=task.budget, rng=spec.child(1), limit=task.limit)
    A = build_path_aux(G, 1, 2, 3)
    triangles = triangles_through_aux(A, edge_set_from_graph(A, G))
    threshold = (1 - cell.delta) * n2 * n3 * D.get(1, 2) * D.get(1, 3) * D.get(2, 3)
    low = sum(1 for count in triangles.per_vertex if count <= threshold)

    record.accepted_regular = not g23_verdict.is_violation
    record.acceptance_mode = g23_verdict.acceptance_mode
    record.verdict_kind = g23_verdict.kind
    record.copy_count = triangles.total
    record.bad_flag = low >= cell.delta * n1
    record.extras['low_vertices'] = low
    record.extras['triangles_per_vertex'] = list(triangles.per_vertex)


def _heredity_trial(task, spec, record):
    config, cell = task.config, task.cell
    P = task.fixture
    chosen = sorted(int(v) for v in spec.generator().choice(P.n1, size=cell.q, replace=False))
    Q = BipartitePair.from_rows(cell.q, P.n2, [P.rows[v] for v in chosen])
    d = config.density if config.heredity_variant == 'lower' else None
    verdict = screen_pair(Q, None, config.epsilon_prime, d=d, mode=config.screen_mode, budget=task.budget,
                          rng=spec.child(1), limit=task.limit)

    record.m = P.edge_count
    record.accepted_regular = not verdict.is_violation
    record.acceptance_mode = verdict.acceptance_mode
    record.verdict_kind = verdict.kind
    record.bad_flag = verdict.is_violation
    record.extras['subset'] = chosen
    record.extras['relaxed'] = config.relaxed


def _vertex_status(G, v1, cell, config, task, spec, order, min_size, d_prime):
    """Why v1 is not good, or 'good'."""
    if cell.m == 0:
        return 'empty', []
    restricted = neighborhood_restriction(G, 1, v1, {2}, {3, 4}).graph
    if any(size == 0 for size in restricted.sizes):
        return 'empty', []
    if any(size < min_size for size in restricted.sizes[1:]):
        return 'small', []

    verdicts = []
    for rank, pair in enumerate(order):
        verdict = screen_pair(restricted, pair, config.epsilon_prime, d=d_prime, mode=config.screen_mode,
                              budget=task.budget, rng=spec.child(rank), limit=task.limit)
        verdicts.append(verdict.kind)
        if verdict.is_violation:
            return 'irregular', verdicts

    D = DensityMatrix.constant(3, Fraction(cell.m, cell.n * cell.n))
    if bad_family_B3(restricted, cell.delta, D):
        return 'bad-family', verdicts
    return 'good', verdicts


def _neighborhood_trial(task, spec, record):
    config, cell = task.config, task.cell
    H = config.pattern_graph
    n, m = cell.n, cell.m
    G = sample_blowup(H, cell.sizes, m, spec.child(0))
    screening = screen_blowup(G, cell.epsilon, config.screen_mode, task.budget, spec.child(1), task.limit)

    d = Fraction(m, n * n)
    d_prime = config.density_prime if config.density_prime is not None else (1 - config.epsilon_prime) * d
    min_size = (1 - config.epsilon_prime) * Fraction(m, n)
    order = one_valid_sequence(3).edges

    statuses = Counter()
    verdicts = []
    for v1 in range(G.class_size(1)):
        status, kinds = _vertex_status(G, v1, cell, config, task, spec.child(2).child(v1), order, min_size, d_prime)
        statuses[status] += 1
        verdicts.append(kinds)

    edge_threshold = (1 - 6 * cell.delta) * n * n * d ** 5
    good_edges = sum(1 for v1 in range(G.class_size(1)) for v2 in range(G.class_size(2))
                     if deg_edge_potential(G, H, (1, 2), (v1, v2)) >= edge_threshold)

    good = statuses['good']
    record.accepted_regular = screening.accepted
    record.acceptance_mode = screening.acceptance_mode
    record.verdict_kind = screening.verdict_kind
    record.good_vertex_count = good
    record.bad_flag = good < (1 - config.epsilon_prime) * n
    record.extras['vertex_statuses'] = dict(statuses)
    record.extras['restricted_verdicts'] = verdicts
    record.extras['good_edge_fraction'] = good_edges / (G.class_size(1) * G.class_size(2))


def _extraction_trial(task, spec, record):
    config, cell = task.config, task.cell
    try:
        # sources are certified exactly whatever the screen mode
        source = sample_regular_blowup(K2, cell.sizes, config.source_edges(), cell.epsilon, 'exact',
                                       task.max_rejects, spec.child(0), task.budget, task.limit)
    except RejectionExhausted as e:
        record.accepted_regular = False
        record.acceptance_mode = 'rejected'
        record.retries = e.rejects
        return

    record.accepted_regular = True
    record.acceptance_mode = source.acceptance_mode
    record.retries = source.rejects
    try:
        extraction = extract_m_subgraph(source.graph, (1, 2), cell.m, cell.epsilon, max_retries=1,
                                        rng=spec.child(1), c=config.extraction_c, limit=task.limit)
    except RetriesExhausted:
        record.verdict_kind = VIOLATION
        record.bad_flag = True
    else:
        record.verdict_kind = extraction.verdict.kind
        record.bad_flag = False


_TRIALS = {
    'counting': _counting_trial,
    'aux-regularity': _aux_trial,
    'aux-extension': _extension_trial,
    'heredity': _heredity_trial,
    'neighborhood': _neighborhood_trial,
    'extraction': _extraction_trial,
}


def run_trial(task):
    """Runs one trial; the pool maps this over a cell's tasks."""
    config, cell = task.config, task.cell
    seed = derive_seed(config.base_seed, cell.index, task.trial_index)
    record = TrialRecord(
        experiment_kind=config.kind,
        cell_id=cell.cell_id,
        n=cell.n,
        m=cell.m,
        epsilon=cell.epsilon,
        epsilon_prime=config.epsilon_prime,
        delta=cell.delta,
        trial_index=task.trial_index,
        derived_seed=seed,
    )
    start = time.perf_counter()
    _TRIALS[config.trial_kind](task, RngSpec(seed), record)
    if task.record_wall_time:
        record.wall_ms = round((time.perf_counter() - start) * 1000, 3)
    return record


##########################################
############### Summaries ################
##########################################

def wilson_interval(successes, trials):
    """95% Wilson score interval, (None, None) for zero trials."""
    if trials == 0:
        return None, None
    interval = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method='wilson')
    return float(interval.low), float(interval.high)


def _accepted(r):
    return bool(r.accepted_regular)

def _bad(r):
    return bool(r.bad_flag)

def _good(r):
    return not r.bad_flag

def _copy_free(r):
    return r.copy_count == 0

def _rejected(r):
    return not r.accepted_regular

# name -> (event, condition); the first entry is the headline failure fraction
_FRACTIONS = {
    'counting': [
        ('bad', _bad, None),
        ('bad_given_accepted', _bad, _accepted),
        ('copy_free', _copy_free, None),
        ('copy_free_given_accepted', _copy_free, _accepted),
        ('accepted', _accepted, None),
    ],
    'aux-regularity': [
        ('failure', _bad, None),
        ('failure_given_g2_regular', _bad, _accepted),
        ('failure_given_g2_irregular', _bad, _rejected),
        ('g2_regular', _accepted, None),
    ],
    'aux-extension': [
        ('in_bad_family', _bad, None),
        ('in_bad_family_given_g23_regular', _bad, _accepted),
        ('g23_regular', _accepted, None),
    ],
    'heredity': [
        ('fail', _bad, None),
        ('pass', _good, None),
    ],
    'neighborhood': [
        ('not_enough_good', _bad, None),
        ('enough_good', _good, None),
        ('enough_good_given_accepted', _good, _accepted),
        ('accepted', _accepted, None),
    ],
    'extraction': [
        ('fail', _bad, _accepted),
        ('pass', _good, _accepted),
        ('source_accepted', _accepted, None),
    ],
}


def summarize_cell(kind, cell, records, beta):
    """Aggregates one cell's records into the summary.json entry."""
    summary = {
        'cell_id': cell.cell_id,
        'cell_index': cell.index,
        'n': cell.n,
        'm': cell.m,
        'q': cell.q,
        'epsilon': format_rational(cell.epsilon),
        'delta': None if cell.delta is None else format_rational(cell.delta),
        'skipped': cell.skip_reason,
        'trials': len(records),
        'fractions': {},
        'wilson_low': {},
        'wilson_high': {},
    }
    for name, event, condition in _FRACTIONS[kind]:
        pool = [r for r in records if condition is None or condition(r)]
        hits = sum(1 for r in pool if event(r))
        low, high = wilson_interval(hits, len(pool))
        summary['fractions'][name] = hits / len(pool) if pool else None
        summary['wilson_low'][name] = low
        summary['wilson_high'][name] = high

    headline = _FRACTIONS[kind][0][0]
    value = summary['fractions'][headline]
    summary['headline'] = headline
    summary['beta_pass'] = None if value is None else value <= beta

    if kind == 'counting' and records:
        summary['expected_count'] = format_rational(records[0].expected_count)
        summary['mean_copy_count'] = sum(r.copy_count for r in records) / len(records)
    if kind == 'neighborhood' and records:
        summary['mean_good_vertex_fraction'] = sum(r.good_vertex_count for r in records) / (len(records) * cell.n)
        summary['mean_good_edge_fraction'] = sum(r.extras['good_edge_fraction'] for r in records) / len(records)
        summary['good_vertex_histogram'] = {
            str(count): hits for count, hits in sorted(Counter(r.good_vertex_count for r in records).items())}
        statuses = Counter()
        for r in records:
            statuses.update(r.extras['vertex_statuses'])
        summary['vertex_statuses'] = dict(sorted(statuses.items()))
    if kind == 'aux-extension' and records:
        summary['mean_low_vertex_fraction'] = sum(r.extras['low_vertices'] for r in records) / (len(records) * cell.n)
        summary['mean_triangles'] = sum(r.copy_count for r in records) / len(records)
    if kind == 'heredity':
        summary['relaxed'] = records[0].extras['relaxed'] if records else None
    return summary


##########################################
################ Runner ##################
##########################################

class ExperimentRunner(object):
    def __init__(self, config, workers=None):
        self.config = config
        self.workers = workers or config.workers or settings.SPARSECOUNT_WORKERS
        self.budget = config.witness_budget or settings.SPARSECOUNT_WITNESS_BUDGET
        self.max_rejects = config.max_rejects or settings.SPARSECOUNT_MAX_REJECTS
        self.limit = settings.SPARSECOUNT_EXACT_SIDE_LIMIT
        self.record_wall_time = settings.SPARSECOUNT_RECORD_WALL_TIME

    def run(self):
        """Runs whichever experiment the config describes."""
        return {
            'counting': self.run_counting_experiment,
            'aux-regularity': self.run_aux_regularity_experiment,
            'heredity': self.run_heredity_experiment,
            'neighborhood': self.run_neighborhood_experiment,
            'extraction': self.run_extraction_experiment,
        }[self.config.kind]()

    def run_counting_experiment(self):
        """
        Samples G(H, n, m) per cell and records regularity acceptance, the
        canonical copy count against n^v (m/n^2)^e and the bad-instance flag.
        """
        self._require_kind('counting')
        return self._run()

    def run_aux_regularity_experiment(self):
        """
        Fixes G1 per cell, samples G2 with m2 edges per trial and checks the
        path auxiliary graph for (ε', d1 d2)-lower-regularity. The extension
        variant fixes G12 and G13 instead, samples G23 and counts the
        triangles through the auxiliary graph against B_δ(3).
        """
        self._require_kind('aux-regularity')
        if self.config.aux_variant == 'extension':
            return self._run(self._extension_fixture)
        return self._run(self._g1_fixture)

    def run_heredity_experiment(self):
        """
        Fixes a regular pair per cell and tests uniform q-subsets of its
        first side against the whole second side.
        """
        self._require_kind('heredity')
        return self._run(self._heredity_fixture)

    def run_neighborhood_experiment(self):
        """Counts good V1 vertices of sampled K4e blow-ups."""
        self._require_kind('neighborhood')
        return self._run()

    def run_extraction_experiment(self):
        """Single-draw (2ε) pass rates of m-edge subsets of certified pairs."""
        self._require_kind('extraction')
        if max(self.config.class_sizes) > self.limit:
            raise ConfigError(f"Extraction needs exactly checkable sides of at most {self.limit} vertices")
        return self._run()

    def _require_kind(self, kind):
        if self.config.kind != kind:
            raise ConfigError(f"Expected a {kind} config, got {self.config.kind}")

    ##########################################
    ############### Fixtures #################
    ##########################################

    def fixture(self, cell):
        """The fixed object a cell's trials share, or None for the kinds that sample everything per trial."""
        return {
            'aux-regularity': self._g1_fixture,
            'aux-extension': self._extension_fixture,
            'heredity': self._heredity_fixture,
        }.get(self.config.trial_kind, lambda cell: None)(cell)

    def _screened_pair(self, n1, n2, m, epsilon, d, cell, stream=0):
        """A K2 blow-up with m edges passing the (ε) or (ε, d) screen, drawn from the cell's fixture stream."""
        spec = RngSpec(self.config.base_seed, stream).child(cell.index)
        for attempt in range(self.max_rejects):
            edges = sample_bipartite_exact_m(n1, n2, m, spec.child(2 * attempt))
            graph = build_classed_graph(K2, [n1, n2], {(1, 2): edges})
            verdict = screen_pair(graph, (1, 2), epsilon, d=d, mode=self.config.screen_mode, budget=self.budget,
                                  rng=spec.child(2 * attempt + 1), limit=self.limit)
            if not verdict.is_violation:
                logger.info(f"INFO: fixed pair for {cell.cell_id} accepted after {attempt} rejections")
                return graph
        raise RejectionExhausted(self.max_rejects)

    def _g1_fixture(self, cell):
        n1, n2, _ = cell.sizes
        if self.config.g1_mode == 'complete':
            return ClassedGraph.complete(K2, [n1, n2]).edges(1, 2)
        if self.config.g1_mode == 'file':
            path = Path(self.config.g1_file)
            if not path.is_absolute() and self.config.base_dir is not None:
                path = Path(self.config.base_dir) / path
            G = parse_graph_file(read_graph_text(path))
            if G.pattern != K2 or G.sizes != (n1, n2):
                raise ConfigError(f"{path} must hold one pair with sizes ({n1}, {n2})")
            return G.edges(1, 2)
        m1 = round(self.config.d1 * n1 * n2)
        return self._screened_pair(n1, n2, m1, cell.epsilon, self.config.d1, cell).edges(1, 2)

    def _extension_fixture(self, cell):
        """(G12, G13) edge lists; G13 comes from its own fixture stream."""
        n1, _, n3 = cell.sizes
        m13 = round(self.config.density * n1 * n3)
        fixed_13 = self._screened_pair(n1, n3, m13, cell.epsilon, self.config.density, cell, stream=1)
        return self._g1_fixture(cell), fixed_13.edges(1, 2)

    def _heredity_fixture(self, cell):
        n1, n2 = cell.sizes
        d = self.config.density if self.config.heredity_variant == 'lower' else None
        return self._screened_pair(n1, n2, self.config.source_edges(), cell.epsilon, d, cell).bipartite(1, 2)

    ##########################################
    ################ Running #################
    ##########################################

    def _map(self, tasks):
        if self.workers > 1 and len(tasks) > 1:
            with Pool(processes=min(self.workers, len(tasks))) as pool:
                return pool.map(run_trial, tasks)
        return [run_trial(task) for task in tasks]

    def _run(self, fixture=None):
        config = self.config
        start = time.perf_counter()
        records, summaries = [], []

        for cell in config.cells():
            cell_records, fixed = [], None
            if cell.skip_reason is None and fixture is not None:
                try:
                    fixed = fixture(cell)
                except RejectionExhausted as e:
                    cell = replace(cell, skip_reason=f"no fixed pair accepted: {e}")
            if cell.skip_reason is not None:
                logger.warning(f"WARNING: skipping {cell.cell_id}: {cell.skip_reason}")
            else:
                logger.info(f"INFO: running {config.trials} {config.kind} trials for {cell.cell_id}")
                tasks = [
                    TrialTask(config, cell, t, self.budget, self.limit, self.max_rejects, self.record_wall_time, fixed)
                    for t in range(config.trials)
                ]
                try:
                    cell_records = self._map(tasks)
                except SparseCountError:
                    raise
                except Exception as e:
                    raise ExperimentError(f"Trials for {cell.cell_id} failed: {e}") from e
                accepted = sum(1 for r in cell_records if r.accepted_regular)
                logger.info(f"INFO: finished {cell.cell_id}: {accepted}/{len(cell_records)} accepted")

            records.extend(cell_records)
            summaries.append(summarize_cell(config.trial_kind, cell, cell_records, config.beta))

        total = (time.perf_counter() - start) * 1000 if self.record_wall_time else 0.0
        return ExperimentResult(config, records, summaries, round(total, 3))

"""
Experiment configuration.

An experiment is a JSON document; ``load_config`` validates it into an
``ExperimentConfig`` and ``ExperimentConfig.cells()`` expands its grid into
cells, in the axis order n, m, q, epsilon, delta.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

from lib.counting import edge_threshold
from lib.errors import SparseCountError
from lib.graphs import PatternError, PatternGraph, parse_pattern_file, read_graph_text
from lib.rational import RationalParseError, format_rational, parse_rational
from lib.regularity import SCREEN_MODES

logger = logging.getLogger(__name__)

KINDS = ('counting', 'aux-regularity', 'heredity', 'neighborhood', 'extraction')
G1_MODES = ('lower-regular', 'complete', 'file')
HEREDITY_VARIANTS = ('lower', 'regular')
# path: G1 fixed, G2 sampled, no X2-X3 edges. extension: G12 and G13 fixed, G23 sampled.
AUX_VARIANTS = ('path', 'extension')

CONFIG_KEYS = (
    'kind', 'pattern', 'sizes', 'class_sizes',
    'm_values', 'm_threshold_multiples', 'm_densities',
    'epsilon', 'delta', 'epsilon_prime', 'density', 'density_prime', 'd1',
    'beta', 'threshold_c', 'extraction_c', 'q_values',
    'trials', 'base_seed', 'workers', 'output',
    'screen_mode', 'witness_budget', 'max_rejects',
    'g1_mode', 'g1_file', 'aux_variant', 'heredity_variant', 'relaxed', 'plots',
)

# class_sizes length per kind; the uniform kinds use 'sizes' instead
_CLASS_COUNTS = {'aux-regularity': 3, 'heredity': 2, 'extraction': 2}


class ConfigError(SparseCountError):
    """
    Raised for any invalid experiment configuration
    """
    pass

class QTooLarge(ConfigError):
    pass


##########################################
############ Value validation ############
##########################################

def _integer(key, value, minimum=0):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"'{key}' must be at least {minimum}, got {value}")
    return value


def _integers(key, value, minimum=0):
    if value is None:
        return ()
    if not isinstance(value, list):
        value = [value]
    if not value:
        raise ConfigError(f"'{key}' must not be empty")
    return tuple(_integer(key, v, minimum) for v in value)


def _rational(key, value, low=0, high=1, high_closed=False, low_closed=False):
    """Parses an exact rational in the interval (low, high), closing either end on request."""
    if isinstance(value, float):
        raise ConfigError(f"'{key}' must be an integer or a 'p/q' string, got the float {value!r}")
    try:
        r = parse_rational(value)
    except RationalParseError as e:
        raise ConfigError(f"'{key}': {e}") from e
    above_low = r >= low if low_closed else r > low
    below_high = high is None or (r <= high if high_closed else r < high)
    if not (above_low and below_high):
        left = '[' if low_closed else '('
        right = ']' if high_closed else ')'
        raise ConfigError(f"'{key}' = {format_rational(r)} outside {left}{low}, {high if high is not None else 'inf'}{right}")
    return r


def _rationals(key, value, **bounds):
    if value is None:
        return ()
    if not isinstance(value, list):
        value = [value]
    if not value:
        raise ConfigError(f"'{key}' must not be empty")
    return tuple(_rational(key, v, **bounds) for v in value)


def _choice(key, value, choices):
    if value not in choices:
        raise ConfigError(f"'{key}' must be one of {', '.join(choices)}, got {value!r}")
    return value


def _flag(key, value):
    if not isinstance(value, bool):
        raise ConfigError(f"'{key}' must be true or false, got {value!r}")
    return value


def resolve_pattern(selector, base_dir=None):
    """A named pattern (K3, K4, K4e, ...) or a pattern file relative to ``base_dir``."""
    try:
        return PatternGraph.named(selector)
    except PatternError:
        pass
    path = Path(selector)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    if not path.is_file():
        raise ConfigError(f"Unknown pattern {selector!r}: not a pattern name and no such file")
    return parse_pattern_file(read_graph_text(path))


##########################################
################# Cells ##################
##########################################

@dataclass(frozen=True)
class Cell:
    """
    One point of the experiment grid.

    Attributes:
        index (int): position in grid order, the cell part of every derived seed.
        n (int): uniform class size (first class size for the class_sizes kinds).
        sizes (tuple): class sizes of the sampled graphs.
        m (int): edges per pair, or None when the kind has no m axis.
        q (int): heredity subset size, or None.
        epsilon (Fraction)
        delta (Fraction): None when the kind has no delta axis.
        skip_reason (str): set when the cell cannot run; skipped cells are reported, not run.
    """
    index: int
    n: int
    sizes: tuple
    m: int
    q: int
    epsilon: Fraction
    delta: Fraction
    skip_reason: str = None

    @property
    def cell_id(self):
        parts = [f"n={self.n}"]
        if self.m is not None:
            parts.append(f"m={self.m}")
        if self.q is not None:
            parts.append(f"q={self.q}")
        parts.append(f"eps={format_rational(self.epsilon)}")
        if self.delta is not None:
            parts.append(f"delta={format_rational(self.delta)}")
        return '|'.join(parts)


##########################################
############ Configuration ###############
##########################################

@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    pattern: str = 'K3'
    sizes: tuple = ()
    class_sizes: tuple = ()
    m_values: tuple = ()
    m_threshold_multiples: tuple = ()
    m_densities: tuple = ()
    epsilon: tuple = (Fraction(1, 2),)
    delta: tuple = (Fraction(1, 2),)
    epsilon_prime: Fraction = Fraction(1, 2)
    density: Fraction = None
    density_prime: Fraction = None
    d1: Fraction = None
    beta: Fraction = Fraction(1, 10)
    threshold_c: Fraction = Fraction(1)
    extraction_c: Fraction = Fraction(1)
    q_values: tuple = ()
    trials: int = 100
    base_seed: int = 0
    workers: int = None
    output: str = None
    screen_mode: str = 'auto'
    witness_budget: int = None
    max_rejects: int = None
    g1_mode: str = 'lower-regular'
    g1_file: str = None
    aux_variant: str = 'path'
    heredity_variant: str = 'lower'
    relaxed: bool = True
    plots: bool = False
    pattern_graph: PatternGraph = field(default=None, compare=False, repr=False)
    base_dir: str = field(default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data, base_dir=None):
        """
        Validates a parsed JSON document.

        Raises:
            ConfigError: unknown keys, floats where rationals are expected,
                         out-of-range values or a grid the kind cannot use.
            QTooLarge: a heredity subset size outside 1..n1.
        """
        if not isinstance(data, dict):
            raise ConfigError("An experiment config must be a JSON object")
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        if 'kind' not in data:
            raise ConfigError("'kind' is required")
        kind = _choice('kind', data['kind'], KINDS)

        values = {'kind': kind, 'base_dir': None if base_dir is None else str(base_dir)}
        values['pattern'] = data.get('pattern', 'K4e' if kind == 'neighborhood' else 'K3')
        if not isinstance(values['pattern'], str):
            raise ConfigError(f"'pattern' must be a name or a file path, got {values['pattern']!r}")
        try:
            values['pattern_graph'] = resolve_pattern(values['pattern'], base_dir)
        except PatternError as e:
            raise ConfigError(f"'pattern': {e}") from e

        values['sizes'] = _integers('sizes', data.get('sizes'), minimum=1)
        values['class_sizes'] = _integers('class_sizes', data.get('class_sizes'), minimum=1)
        values['m_values'] = _integers('m_values', data.get('m_values'))
        values['m_threshold_multiples'] = _rationals('m_threshold_multiples', data.get('m_threshold_multiples'),
                                                     high=None)
        values['m_densities'] = _rationals('m_densities', data.get('m_densities'), low_closed=True, high_closed=True)
        values['q_values'] = _integers('q_values', data.get('q_values'))

        for key in ('epsilon', 'delta'):
            if key in data:
                values[key] = _rationals(key, data[key])
        if 'epsilon_prime' in data:
            values['epsilon_prime'] = _rational('epsilon_prime', data['epsilon_prime'])
        if 'beta' in data:
            values['beta'] = _rational('beta', data['beta'], high_closed=True)
        for key in ('density', 'density_prime', 'd1'):
            if data.get(key) is not None:
                values[key] = _rational(key, data[key], high_closed=True)
        if 'threshold_c' in data:
            values['threshold_c'] = _rational('threshold_c', data['threshold_c'], high=None)
        if 'extraction_c' in data:
            values['extraction_c'] = _rational('extraction_c', data['extraction_c'], high=None, low_closed=True)

        if 'trials' in data:
            values['trials'] = _integer('trials', data['trials'], minimum=1)
        if 'base_seed' in data:
            values['base_seed'] = _integer('base_seed', data['base_seed'])
        for key in ('workers', 'witness_budget', 'max_rejects'):
            if data.get(key) is not None:
                values[key] = _integer(key, data[key], minimum=1)
        if data.get('output') is not None:
            if not isinstance(data['output'], str):
                raise ConfigError(f"'output' must be a directory path, got {data['output']!r}")
            values['output'] = data['output']

        if 'screen_mode' in data:
            values['screen_mode'] = _choice('screen_mode', data['screen_mode'], SCREEN_MODES)
        if 'g1_mode' in data:
            values['g1_mode'] = _choice('g1_mode', data['g1_mode'], G1_MODES)
        if data.get('g1_file') is not None:
            values['g1_file'] = str(data['g1_file'])
        if 'aux_variant' in data:
            values['aux_variant'] = _choice('aux_variant', data['aux_variant'], AUX_VARIANTS)
        if 'heredity_variant' in data:
            values['heredity_variant'] = _choice('heredity_variant', data['heredity_variant'], HEREDITY_VARIANTS)
        for key in ('relaxed', 'plots'):
            if key in data:
                values[key] = _flag(key, data[key])

        config = cls(**values)
        config._check_kind()
        return config

    def _check_kind(self):
        grids = [key for key in ('m_values', 'm_threshold_multiples', 'm_densities') if getattr(self, key)]
        if len(grids) > 1:
            raise ConfigError(f"Give exactly one m grid, got {', '.join(grids)}")

        if self.kind in _CLASS_COUNTS:
            count = _CLASS_COUNTS[self.kind]
            if len(self.class_sizes) != count:
                raise ConfigError(f"'{self.kind}' needs 'class_sizes' with {count} entries")
            if self.sizes:
                raise ConfigError(f"'{self.kind}' takes 'class_sizes', not 'sizes'")
        else:
            if not self.sizes:
                raise ConfigError(f"'{self.kind}' needs a nonempty 'sizes' grid")
            if self.class_sizes:
                raise ConfigError(f"'{self.kind}' takes 'sizes', not 'class_sizes'")

        if self.kind == 'heredity':
            if grids:
                raise ConfigError("'heredity' has no m grid; the pair is set by 'density'")
            if self.density is None:
                raise ConfigError("'heredity' needs 'density'")
            if not self.q_values:
                raise ConfigError("'heredity' needs 'q_values'")
            for q in self.q_values:
                if not 1 <= q <= self.class_sizes[0]:
                    raise QTooLarge(f"Subset size q = {q} outside 1..{self.class_sizes[0]}")
            if self.heredity_variant == 'regular' and not self.relaxed:
                raise ConfigError("The 'regular' heredity variant is only available with 'relaxed': true")
        else:
            if not grids:
                raise ConfigError(f"'{self.kind}' needs one of m_values, m_threshold_multiples, m_densities")
            if self.q_values:
                raise ConfigError("'q_values' only applies to heredity experiments")

        if self.kind in ('aux-regularity', 'extraction') and self.m_threshold_multiples:
            raise ConfigError(f"'{self.kind}' takes m_values or m_densities")
        if self.kind == 'extraction' and self.screen_mode == 'witness':
            raise ConfigError("Extraction sources are certified exactly; screen_mode 'witness' does not apply")

        if self.kind == 'neighborhood' and self.pattern_graph != PatternGraph.named('K4e'):
            raise ConfigError("Neighborhood experiments run on K4e (K4 without the edge 12)")

        if self.kind == 'aux-regularity':
            if self.g1_mode == 'file' and not self.g1_file:
                raise ConfigError("'g1_mode' file needs 'g1_file'")
            if self.g1_mode == 'lower-regular' and self.d1 is None:
                raise ConfigError("'g1_mode' lower-regular needs 'd1'")
            if self.aux_variant == 'extension':
                if self.density is None:
                    raise ConfigError("The 'extension' aux variant needs 'density' for the fixed X1-X3 pair")
                if self.pattern_graph != PatternGraph.named('K3'):
                    raise ConfigError("The 'extension' aux variant runs on K3")
            a, b = self.pair_sizes(self.class_sizes[0])
            if any(m == 0 for m in self.m_grid(self.class_sizes[0])):
                raise ConfigError("An aux-regularity m grid value rounds to m = 0")
            if any(m > a * b for m in self.m_grid(self.class_sizes[0])):
                raise ConfigError(f"m cannot exceed the {a * b} possible edges of the sampled pair")
        elif self.aux_variant != 'path':
            raise ConfigError("'aux_variant' only applies to aux-regularity experiments")

    @property
    def trial_kind(self):
        """The kind a trial runs as; the aux extension variant has its own trials and summaries."""
        if self.kind == 'aux-regularity' and self.aux_variant == 'extension':
            return 'aux-extension'
        return self.kind

    ##########################################
    ################# Grid ###################
    ##########################################

    def class_sizes_for(self, n):
        if self.class_sizes:
            return self.class_sizes
        return (n,) * self.pattern_graph.ell

    def pair_sizes(self, n):
        """Sides of the pair that the m axis counts edges on."""
        sizes = self.class_sizes_for(n)
        if self.kind == 'aux-regularity':
            return (sizes[1], sizes[2]) if self.aux_variant == 'extension' else (sizes[0], sizes[2])
        return sizes[0], sizes[1]

    def m_grid(self, n):
        if self.m_values:
            return list(self.m_values)
        if self.m_threshold_multiples:
            threshold = edge_threshold(self.pattern_graph, n, self.threshold_c)
            return [math.ceil(k * threshold) for k in self.m_threshold_multiples]
        if self.m_densities:
            a, b = self.pair_sizes(n)
            return [round(d * a * b) for d in self.m_densities]
        return [None]

    def source_edges(self):
        """Edge count of the fixed pair of heredity and extraction experiments."""
        n1, n2 = self.class_sizes[:2]
        return round((1 if self.density is None else self.density) * n1 * n2)

    def n_grid(self):
        return [self.class_sizes[0]] if self.class_sizes else list(self.sizes)

    def cells(self):
        """Every grid cell in order n, m, q, epsilon, delta."""
        q_axis = list(self.q_values) if self.kind == 'heredity' else [None]
        delta_axis = list(self.delta) if self.trial_kind in ('counting', 'neighborhood', 'aux-extension') else [None]
        cells = []
        for n in self.n_grid():
            sizes = self.class_sizes_for(n)
            a, b = self.pair_sizes(n)
            for m, q, epsilon, delta in product(self.m_grid(n), q_axis, self.epsilon, delta_axis):
                reason = None
                if m is not None and m > a * b:
                    reason = f"m = {m} exceeds the {a * b} possible pair edges"
                elif self.kind == 'extraction' and m < self.extraction_c * (a + b):
                    reason = f"m = {m} below extraction_c * (n1 + n2) = {format_rational(self.extraction_c * (a + b))}"
                elif self.kind == 'extraction' and m > self.source_edges():
                    reason = f"m = {m} exceeds the {self.source_edges()} edges of the source pair"
                cells.append(Cell(len(cells), n, sizes, m, q, epsilon, delta, reason))
        return cells

    def to_dict(self):
        """The config echo written to summary.json."""
        def rationals(values):
            return [format_rational(v) for v in values]

        def optional(value):
            return None if value is None else format_rational(value)

        return {
            'kind': self.kind,
            'pattern': self.pattern,
            'sizes': list(self.sizes),
            'class_sizes': list(self.class_sizes),
            'm_values': list(self.m_values),
            'm_threshold_multiples': rationals(self.m_threshold_multiples),
            'm_densities': rationals(self.m_densities),
            'epsilon': rationals(self.epsilon),
            'delta': rationals(self.delta),
            'epsilon_prime': format_rational(self.epsilon_prime),
            'density': optional(self.density),
            'density_prime': optional(self.density_prime),
            'd1': optional(self.d1),
            'beta': format_rational(self.beta),
            'threshold_c': format_rational(self.threshold_c),
            'extraction_c': format_rational(self.extraction_c),
            'q_values': list(self.q_values),
            'trials': self.trials,
            'base_seed': self.base_seed,
            'screen_mode': self.screen_mode,
            'witness_budget': self.witness_budget,
            'max_rejects': self.max_rejects,
            'g1_mode': self.g1_mode,
            'g1_file': self.g1_file,
            'aux_variant': self.aux_variant,
            'heredity_variant': self.heredity_variant,
            'relaxed': self.relaxed,
            'plots': self.plots,
        }


def load_config(path):
    """
    Reads and validates a JSON experiment config. Relative pattern and G1
    paths resolve against the config file's directory.

    Raises:
        ConfigError: malformed JSON, bytes that are not UTF-8 or an invalid config.
        OSError: the file cannot be read.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_bytes().decode('utf-8'))
    except UnicodeDecodeError as e:
        raise ConfigError(f"{path}: not valid UTF-8 at byte {e.start}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    config = ExperimentConfig.from_dict(data, base_dir=path.parent)
    logger.debug(f"DEBUG: loaded {config.kind} config from {path}")
    return config

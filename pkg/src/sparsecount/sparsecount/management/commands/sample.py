import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from lib.graphs import serialize_graph_file
from lib.regularity import SCREEN_MODES
from lib.sampling import sample_blowup, sample_regular_blowup
from lib.streams import RngSpec
from ._common import EXIT_INVALID, SparseCountCommand

logger = logging.getLogger(__name__)


class Command(SparseCountCommand):
    help = ("Samples a blow-up with a prescribed number of edges per pair and writes it as a graph file. "
            "With --epsilon, rejection-samples until every pair passes the regularity screen.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--pattern",
            action="store",
            required=True,
            help="K2, K3, K4, K4e, K5, C4 or a pattern file"
        )
        parser.add_argument(
            "--sizes",
            action="store",
            required=True,
            help="One class size for every class, or n1,...,n_ell"
        )
        parser.add_argument(
            "--m",
            action="store",
            required=True,
            help="Edges per pair, or one count per pattern edge in lexicographic order"
        )
        parser.add_argument(
            "--seed",
            action="store",
            type=int,
            default=0,
            help="Base seed"
        )
        parser.add_argument(
            "--out",
            action="store",
            default="-",
            help="Output graph file, '-' for stdout"
        )
        parser.add_argument(
            "--epsilon",
            action="store",
            help="Reject draws with an ε-irregular pair"
        )
        parser.add_argument(
            "--mode",
            action="store",
            choices=SCREEN_MODES,
            default="auto",
            help="Screening mode with --epsilon"
        )
        parser.add_argument(
            "--max-rejects",
            action="store",
            type=int,
            help="Rejected draws before giving up"
        )
        parser.add_argument(
            "--budget",
            action="store",
            type=int,
            help="Witness search restarts"
        )

    def handle(self, *args, **options):
        H = self.pattern(options['pattern'])
        sizes = self.class_list(options['sizes'], '--sizes')
        if len(sizes) == 1:
            sizes = sizes * H.ell
        if len(sizes) != H.ell:
            raise CommandError(f"--sizes needs 1 or {H.ell} values, got {len(sizes)}", returncode=EXIT_INVALID)

        counts = self.class_list(options['m'], '--m')
        pairs = H.sorted_edges()
        if len(counts) == 1:
            m_per_pair = counts[0]
        elif len(counts) == len(pairs):
            m_per_pair = dict(zip(pairs, counts))
        else:
            raise CommandError(f"--m needs 1 or {len(pairs)} values, got {len(counts)}", returncode=EXIT_INVALID)

        spec = RngSpec(options['seed'])
        epsilon = self.rational(options, 'epsilon')
        acceptance_mode, rejects = None, None
        if epsilon is None:
            G = sample_blowup(H, sizes, m_per_pair, spec)
        else:
            budget, limit = self.limits(options)
            max_rejects = options['max_rejects'] or settings.SPARSECOUNT_MAX_REJECTS
            sampled = sample_regular_blowup(H, sizes, m_per_pair, epsilon, verify_mode=options['mode'],
                                            max_rejects=max_rejects, rng=spec, budget=budget, limit=limit)
            logger.info(f"INFO: accepted after {sampled.rejects} rejections ({sampled.acceptance_mode})")
            G = sampled.graph
            acceptance_mode, rejects = sampled.acceptance_mode, sampled.rejects

        text = serialize_graph_file(G)
        to_stdout = options['out'] == '-'
        if not to_stdout:
            Path(options['out']).write_text(text)
            logger.info(f"INFO: wrote {options['out']}")
        if options['json']:
            self.emit(options, {
                'pattern': [list(pair) for pair in pairs],
                'sizes': list(G.sizes),
                'edge_counts': {f"{x},{y}": G.edge_count(x, y) for x, y in pairs},
                'seed': options['seed'],
                'epsilon': options['epsilon'],
                'acceptance_mode': acceptance_mode,
                'rejects': rejects,
                'out': None if to_stdout else options['out'],
                'graph': text if to_stdout else None,
            }, [])
        elif to_stdout:
            self.stdout.write(text, ending='')

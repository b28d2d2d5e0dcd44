from django.core.management.base import CommandError

from lib.rational import format_rational
from lib.regularity import EPS_MODE, LOWER_MODE, SCREEN_MODES, screen_pair
from lib.streams import RngSpec
from ._common import EXIT_INVALID, SparseCountCommand


class Command(SparseCountCommand):
    help = ("Checks one pair of a graph file for (ε)-regularity or, with --lower, (ε, d)-lower-regularity. "
            "Exits 10 when a witness is found. Published by the sparsecount CLI as 'check'.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--graph",
            action="store",
            required=True,
            help="Graph file"
        )
        parser.add_argument(
            "--pair",
            action="store",
            default="1,2",
            help="Pattern edge as x,y (default 1,2)"
        )
        parser.add_argument(
            "--epsilon",
            action="store",
            required=True,
            help="ε as p/q"
        )
        parser.add_argument(
            "--lower",
            action="store_true",
            help="Check (ε, d)-lower-regularity instead"
        )
        parser.add_argument(
            "--density",
            action="store",
            help="d as p/q, required with --lower"
        )
        parser.add_argument(
            "--mode",
            action="store",
            choices=SCREEN_MODES,
            default="auto",
            help="exact, witness, or auto (exact when both sides fit the exact limit)"
        )
        parser.add_argument(
            "--budget",
            action="store",
            type=int,
            help="Witness search restarts"
        )
        parser.add_argument(
            "--seed",
            action="store",
            type=int,
            default=0,
            help="Seed of the witness search"
        )

    def handle(self, *args, **options):
        epsilon = self.rational(options, 'epsilon', required=True)
        d = self.rational(options, 'density')
        if options['lower'] and d is None:
            raise CommandError("--lower needs --density", returncode=EXIT_INVALID)
        if not options['lower']:
            d = None
        pair = self.class_list(options['pair'], '--pair')
        if len(pair) != 2:
            raise CommandError(f"--pair takes two classes, got {options['pair']!r}", returncode=EXIT_INVALID)
        x, y = pair

        G = self.read_graph(options['graph'])
        budget, limit = self.limits(options)
        verdict = screen_pair(G, (x, y), epsilon, d=d, mode=options['mode'], budget=budget,
                              rng=RngSpec(options['seed']), limit=limit)

        payload = {
            'pair': [x, y],
            'epsilon': format_rational(epsilon),
            'density': None if d is None else format_rational(d),
            'regularity': LOWER_MODE if d is not None else EPS_MODE,
            **verdict.to_dict(),
        }
        lines = [verdict.kind]
        if verdict.witness:
            witness = verdict.witness.to_dict()
            lines.append(f"witness side {x}: {' '.join(map(str, witness['side1']))}")
            lines.append(f"witness side {y}: {' '.join(map(str, witness['side2']))}")
            lines.append(f"density {witness['density']} against {witness['reference']}")
        self.emit(options, payload, lines)

        if verdict.is_violation:
            self.violation(f"Pair {x},{y} is not {payload['regularity']} at epsilon {payload['epsilon']}")

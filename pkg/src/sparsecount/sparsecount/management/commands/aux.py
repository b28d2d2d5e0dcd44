from django.core.management.base import CommandError

from lib.auxgraph import aux_lower_regularity, build_path_aux, edge_set_from_graph, triangles_through_aux
from lib.rational import format_rational
from lib.regularity import SCREEN_MODES
from lib.streams import RngSpec
from ._common import EXIT_INVALID, SparseCountCommand


class Command(SparseCountCommand):
    help = ("Builds the path-auxiliary graph between one class and the product of two others. "
            "With --check, tests its lower-regularity and exits 10 on a witness.")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--graph",
            action="store",
            required=True,
            help="Graph file"
        )
        parser.add_argument(
            "--anchor",
            action="store",
            type=int,
            default=1,
            help="Class whose vertices are the centres of the cherries (default 1)"
        )
        parser.add_argument(
            "--left",
            action="store",
            type=int,
            default=2,
            help="First product class (default 2)"
        )
        parser.add_argument(
            "--right",
            action="store",
            type=int,
            default=3,
            help="Second product class (default 3)"
        )
        parser.add_argument(
            "--check",
            action="store_true",
            help="Check (ε', d)-lower-regularity of the aux graph"
        )
        parser.add_argument(
            "--epsilon-prime",
            action="store",
            help="ε' as p/q, required with --check"
        )
        parser.add_argument(
            "--density",
            action="store",
            help="Target density d as p/q (default: product of the two anchor pair densities)"
        )
        parser.add_argument(
            "--mode",
            action="store",
            choices=SCREEN_MODES,
            default="auto",
            help="exact, witness, or auto"
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
        anchor, left, right = options['anchor'], options['left'], options['right']
        G = self.read_graph(options['graph'])
        A = build_path_aux(G, anchor, left, right)

        payload = {
            'classes': [anchor, left, right],
            'n1': A.n1,
            'ny': A.ny,
            'edge_count': A.edge_count,
            'degrees': [A.degree(x1) for x1 in range(A.n1)],
        }
        lines = [
            f"aux {anchor} x ({left},{right}): {A.n1} x {A.ny}",
            f"edges {A.edge_count}",
            f"degrees {' '.join(map(str, payload['degrees']))}",
        ]

        if G.pattern.has_edge(left, right):
            triangles = triangles_through_aux(A, edge_set_from_graph(A, G))
            payload['triangles'] = list(triangles.per_vertex)
            payload['triangle_count'] = triangles.total
            lines.append(f"triangles {triangles.total}: {' '.join(map(str, triangles.per_vertex))}")

        verdict = None
        if options['check']:
            epsilon_prime = self.rational(options, 'epsilon_prime')
            if epsilon_prime is None:
                raise CommandError("--check needs --epsilon-prime", returncode=EXIT_INVALID)
            d = self.rational(options, 'density')
            if d is None:
                d = G.density(anchor, left) * G.density(anchor, right)
            budget, limit = self.limits(options)
            verdict = aux_lower_regularity(A, epsilon_prime, d, mode=options['mode'], budget=budget,
                                           rng=RngSpec(options['seed']), limit=limit)
            payload['check'] = {
                'epsilon_prime': format_rational(epsilon_prime),
                'density': format_rational(d),
                **verdict.to_dict(),
            }
            lines.append(f"{verdict.kind} at epsilon' {format_rational(epsilon_prime)}, d {format_rational(d)}")

        self.emit(options, payload, lines)
        if verdict is not None and verdict.is_violation:
            self.violation(f"Aux graph is not lower-regular at epsilon' {payload['check']['epsilon_prime']}")

from lib.counting import count_canonical
from ._common import SparseCountCommand


class Command(SparseCountCommand):
    help = "Counts canonical copies of a pattern in a graph file"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--graph",
            action="store",
            required=True,
            help="Graph file"
        )
        parser.add_argument(
            "--pattern",
            action="store",
            help="K3, K4, K4e, K5, C4 or a pattern file (default: the graph's own pattern)"
        )
        parser.add_argument(
            "--per-vertex",
            action="store_true",
            help="Also print copies through every vertex"
        )
        parser.add_argument(
            "--per-edge",
            action="store_true",
            help="Also print copies through every edge"
        )

    def handle(self, *args, **options):
        G = self.read_graph(options['graph'])
        H = self.pattern(options['pattern']) if options['pattern'] else G.pattern
        counts = count_canonical(G, H, per_vertex=options['per_vertex'], per_edge=options['per_edge'])

        payload = {'pattern_edges': [list(edge) for edge in H.sorted_edges()], 'total': counts.total}
        lines = [str(counts.total)]
        if counts.per_vertex is not None:
            payload['per_vertex'] = {str(x): list(values) for x, values in sorted(counts.per_vertex.items())}
            for x, values in sorted(counts.per_vertex.items()):
                lines.append(f"class {x}: {' '.join(map(str, values))}")
        if counts.per_edge is not None:
            payload['per_edge'] = {
                f"{x},{y}": [[a, b, copies] for (a, b), copies in sorted(edges.items())]
                for (x, y), edges in sorted(counts.per_edge.items())
            }
            for (x, y), edges in sorted(counts.per_edge.items()):
                for (a, b), copies in sorted(edges.items()):
                    lines.append(f"edge {x}:{a} {y}:{b}: {copies}")
        self.emit(options, payload, lines)

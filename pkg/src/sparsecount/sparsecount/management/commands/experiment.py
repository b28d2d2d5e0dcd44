import logging

from django.conf import settings

from experiments.config import load_config
from experiments.jobs import ExperimentRunner
from experiments.reports import write_report
from ._common import SparseCountCommand

logger = logging.getLogger(__name__)


class Command(SparseCountCommand):
    help = "Runs one experiment config and writes trials.csv, summary.json and, if requested, scatter.svg"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--config",
            action="store",
            required=True,
            help="Experiment config (JSON)"
        )
        parser.add_argument(
            "--out",
            action="store",
            help="Output directory (default: the config's output, then SPARSECOUNT_OUTPUT_DIR)"
        )
        parser.add_argument(
            "--workers",
            action="store",
            type=int,
            help="Worker processes (default: the config's workers, then SPARSECOUNT_WORKERS)"
        )

    def handle(self, *args, **options):
        config = load_config(options['config'])
        out = options['out'] or config.output or settings.SPARSECOUNT_OUTPUT_DIR

        result = ExperimentRunner(config, workers=options['workers']).run()
        written = write_report(result, out, settings.SPARSECOUNT_VERSION)

        payload = {
            'kind': config.kind,
            'cells': len(result.summaries),
            'records': len(result.records),
            'files': [str(path) for path in written],
        }
        lines = [f"{config.kind}: {len(result.records)} trials in {len(result.summaries)} cells"]
        lines.extend(str(path) for path in written)
        self.emit(options, payload, lines)

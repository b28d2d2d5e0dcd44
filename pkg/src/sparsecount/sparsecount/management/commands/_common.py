import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.config import resolve_pattern
from experiments.reports import ReportWriteError
from lib.errors import SparseCountError
from lib.graphs import parse_graph_file, read_graph_text
from lib.rational import parse_rational

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_VIOLATION = 10


class SparseCountCommand(BaseCommand):
    """
    Base for the sparsecount commands. Library errors become exit code 2,
    file errors exit code 3; results go to stdout as text or, with --json,
    as one JSON object.
    """
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument(
            "--json",
            action="store_true",
            help="Print the result as one JSON object"
        )

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except (OSError, ReportWriteError) as e:
            raise CommandError(str(e), returncode=EXIT_IO) from e
        except SparseCountError as e:
            raise CommandError(str(e), returncode=EXIT_INVALID) from e

    def emit(self, options, payload, lines):
        if options['json']:
            self.stdout.write(json.dumps(payload, sort_keys=True))
        else:
            for line in lines:
                self.stdout.write(line)

    def violation(self, message):
        raise CommandError(message, returncode=EXIT_VIOLATION)

    ##########################################
    ########### Argument parsing #############
    ##########################################

    def rational(self, options, key, required=False):
        value = options.get(key)
        if value is None:
            if required:
                raise CommandError(f"--{key.replace('_', '-')} is required", returncode=EXIT_INVALID)
            return None
        return parse_rational(value)

    def class_list(self, value, name):
        """Parses 'x,y,...' into integers."""
        try:
            return [int(part) for part in str(value).split(',')]
        except ValueError:
            raise CommandError(f"{name} must be comma-separated integers, got {value!r}", returncode=EXIT_INVALID)

    def read_graph(self, path):
        return parse_graph_file(read_graph_text(path))

    def pattern(self, selector):
        return resolve_pattern(selector, Path.cwd())

    def limits(self, options):
        """Budget and exact-size limit, from the flags or the settings."""
        budget = options.get('budget') or settings.SPARSECOUNT_WITNESS_BUDGET
        return budget, settings.SPARSECOUNT_EXACT_SIDE_LIMIT

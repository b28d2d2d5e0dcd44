"""
The ``sparsecount`` console entry point. Each subcommand is a management
command of this project; ``check`` is published under its own name because
Django reserves ``manage.py check``.
"""
import os
import sys

import django
from django.core.management import load_command_class

COMMANDS = {
    'check': 'checkpair',
    'count': 'count',
    'aux': 'aux',
    'sample': 'sample',
    'experiment': 'experiment',
}

USAGE = "usage: sparsecount {" + ','.join(COMMANDS) + "} [options]"


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in COMMANDS:
        if argv and argv[0] in ('-h', '--help'):
            print(USAGE)
            return 0
        print(USAGE, file=sys.stderr)
        return 2

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sparsecount.settings')
    django.setup()

    name, rest = argv[0], argv[1:]
    command = load_command_class('sparsecount', COMMANDS[name])
    try:
        command.run_from_argv(['sparsecount', name, *rest])
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return 0

"""
Report files of an experiment run: trials.csv, summary.json and, when the
config asks for plots, scatter.svg. Everything but the wall-time fields is
a pure function of the config and its seed.
"""
import json
import logging
from fractions import Fraction
from pathlib import Path

import matplotlib as mpl
mpl.use('Agg')
mpl.rcParams.update({
    'svg.hashsalt': 'sparsecount',
    'svg.fonttype': 'none',
    'font.size': 9,
    'axes.labelsize': 9,
    'legend.fontsize': 8,
})
import matplotlib.pyplot as plt
import pandas as pd

from lib.errors import SparseCountError
from lib.rational import format_rational
from lib.streams import STREAM_ALGORITHM

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = [
    'experiment_kind', 'cell_id', 'n', 'm', 'epsilon', 'epsilon_prime', 'delta',
    'trial_index', 'derived_seed', 'accepted_regular', 'acceptance_mode', 'copy_count',
    'expected_count', 'bad_flag', 'good_vertex_count', 'verdict_kind', 'retries', 'wall_ms',
]


class ReportWriteError(SparseCountError):
    pass


def _cell_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, Fraction):
        return format_rational(value)
    return value


def trials_frame(records):
    rows = [[_cell_value(getattr(record, column)) for column in TRIAL_COLUMNS] for record in records]
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def summary_document(result, version):
    return {
        'config': result.config.to_dict(),
        'version': version,
        'stream_algorithm': STREAM_ALGORITHM,
        'record_count': len(result.records),
        'cells': result.summaries,
        'total_wall_ms': result.total_wall_ms,
    }


def _plot_axis(config):
    return 'q' if config.kind == 'heredity' else 'm'


def write_scatter(result, path):
    """Headline fraction of every run cell against its m (or q) value, with Wilson intervals."""
    axis = _plot_axis(result.config)
    cells = [s for s in result.summaries if s['skipped'] is None and s['fractions'][s['headline']] is not None]
    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    for label in sorted({(s['n'], s['epsilon'], s['delta']) for s in cells}, key=str):
        group = [s for s in cells if (s['n'], s['epsilon'], s['delta']) == label]
        xs = [s[axis] for s in group]
        ys = [s['fractions'][s['headline']] for s in group]
        errors = [[max(0.0, y - s['wilson_low'][s['headline']]) for y, s in zip(ys, group)],
                  [max(0.0, s['wilson_high'][s['headline']] - y) for y, s in zip(ys, group)]]
        name = f"n={label[0]}, eps={label[1]}" + (f", delta={label[2]}" if label[2] is not None else '')
        ax.errorbar(xs, ys, yerr=errors, fmt='o', capsize=2, label=name)
    headline = cells[0]['headline'] if cells else 'fraction'
    ax.set_xlabel(axis)
    ax.set_ylabel(headline.replace('_', ' '))
    ax.set_ylim(-0.05, 1.05)
    if cells:
        ax.legend(loc='best')
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)


def write_report(result, output_dir, version):
    """
    Writes the report files of ``result`` into ``output_dir``.

    Returns:
        list: the written paths.

    Raises:
        ReportWriteError: the directory or a file could not be written.
    """
    output_dir = Path(output_dir)
    written = []
    try:
        output_dir.mkdir(parents=True, exist_ok=True)

        trials_path = output_dir / 'trials.csv'
        trials_frame(result.records).to_csv(trials_path, index=False, lineterminator='\n')
        written.append(trials_path)

        summary_path = output_dir / 'summary.json'
        summary_path.write_text(json.dumps(summary_document(result, version), sort_keys=True, indent=2) + '\n')
        written.append(summary_path)

        if result.config.plots:
            scatter_path = output_dir / 'scatter.svg'
            write_scatter(result, scatter_path)
            written.append(scatter_path)
    except OSError as e:
        raise ReportWriteError(f"Failed to write reports to {output_dir}: {e}") from e

    logger.info(f"INFO: wrote {len(written)} report files to {output_dir}")
    return written

"""
Driver Package: Szenario-Dateien, Ergebnisausgabe und Benchmark-Tabelle.
"""

from .scenario import Scenario, parse_scenario, emit_scenario, load_scenario, save_scenario
from .results import (
    write_json, write_csv, trajectory_frame, controls_frame, tube_polylines,
    certificate_document, margin_document, run_document, plot_tube, emit_results
)
from .benchmark import BENCH_COLUMNS, bench_row, bench_table

__all__ = [
    'Scenario', 'parse_scenario', 'emit_scenario', 'load_scenario', 'save_scenario',
    'write_json', 'write_csv', 'trajectory_frame', 'controls_frame', 'tube_polylines',
    'certificate_document', 'margin_document', 'run_document', 'plot_tube', 'emit_results',
    'BENCH_COLUMNS', 'bench_row', 'bench_table'
]

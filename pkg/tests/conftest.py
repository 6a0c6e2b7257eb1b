import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from measure_bench import cli
from measure_bench.regression import fit_records, relative_importance, scan_trends
from measure_bench.sweep import GridConfig, read_csv

ACCEPTANCE_LINES = []


def small_grid(**overrides) -> GridConfig:
    values = dict(n_values=(3240, 4320), k_values=(2, 3), h_values=(0.0, 0.5), q_values=(0.3, 0.6))
    values.update(overrides)
    return GridConfig(**values)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """One full default pipeline run: scores, analysis, typology and charts."""
    out = tmp_path_factory.mktemp("default_run")
    assert cli.main(["pipeline", "--default", "--workers", "1", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="session")
def default_records(default_run):
    return read_csv(default_run / "scores.csv")


@pytest.fixture(scope="session")
def default_model(default_records):
    return fit_records(default_records)


@pytest.fixture(scope="session")
def default_table(default_model, default_records):
    table = relative_importance(default_model)
    scan_trends(default_records, table)
    return table


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

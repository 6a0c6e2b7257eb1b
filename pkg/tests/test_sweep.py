import numpy as np
import pytest

from measure_bench.sweep import (CSV_HEADER, CsvFormatError, GridConfig, ScoreRecord, SweepError, default_grid,
                                 format_real, load_grid_config, quantize, read_csv, run_sweep, write_csv)

import oracles
from conftest import small_grid


def test_default_grid_counts():
    grid = default_grid()
    assert grid.n_values[0] == 3240 and grid.n_values[-1] == 12960 and len(grid.n_values) == 10
    assert grid.k_values == tuple(range(2, 12))
    assert grid.h_values == tuple(i / 10 for i in range(10))
    assert grid.q_values == tuple(i / 10 for i in range(1, 11))
    assert grid.pair_count == 50_000
    assert grid.pair_count * len(grid.measures) == 300_000


@pytest.mark.parametrize("field", ["n_values", "k_values", "h_values", "q_values", "transforms", "measures"])
def test_empty_lists_rejected(field):
    values = small_grid().as_dict()
    values[field] = []
    with pytest.raises(SweepError, match=field):
        GridConfig(**values)


@pytest.mark.parametrize("field, value", [("h_values", [1.5]), ("transforms", ["rm"]), ("measures", ["VI"]),
                                          ("n_values", [1])])
def test_out_of_domain_rejected(field, value):
    values = small_grid().as_dict()
    values[field] = value
    with pytest.raises(SweepError):
        GridConfig(**values)


def _brute_force_ncs(n, k, q):
    """Balanced reference, affected tail of each block moved to the next block, scored by enumeration."""
    size = n // k
    ref = np.repeat(np.arange(k), size)
    moved = ref.copy()
    c = round(q / 2 * size)
    for i in range(k):
        moved[(i + 1) * size - c:(i + 1) * size] = (i + 1) % k
    return 1 - oracles.rand(ref.tolist(), moved.tolist())


def test_single_point_matches_direct_computation():
    grid = GridConfig((240,), (2,), (0.0,), (0.1,), ("ncs",), ("RI",))
    result = run_sweep(grid, workers=1)
    assert len(result.records) == 1 and not result.errors
    rec = result.records[0]
    assert 0 <= rec.y <= 1
    assert rec.y == pytest.approx(_brute_force_ncs(240, 2, 0.1), abs=1e-11)


def _rand_from_blocks(kept, moved):
    """1 - RI for two swapped blocks, counting pairs block by block.

    Blocks A, C are the kept parts of clusters 0 and 1, B and D their moved
    parts. The reference groups {A, B}, {C, D}; the result {A, D}, {B, C}.
    """
    sizes = {"A": kept, "B": moved, "C": kept, "D": moved}
    ref = {"A": 0, "B": 0, "C": 1, "D": 1}
    out = {"A": 0, "D": 0, "B": 1, "C": 1}
    blocks = list(sizes)
    agree = total = 0
    for i, x in enumerate(blocks):
        for y in blocks[i:]:
            pairs = sizes[x] * (sizes[x] - 1) // 2 if x == y else sizes[x] * sizes[y]
            total += pairs
            if (ref[x] == ref[y]) == (out[x] == out[y]):
                agree += pairs
    return 1 - agree / total


def test_single_point_default_size():
    grid = GridConfig((3240,), (2,), (0.0,), (0.1,), ("ncs",), ("RI",))
    rec = run_sweep(grid, workers=1).records[0]
    # p = 0.05 of each 1620-element cluster moves: 81 elements
    assert rec.y == pytest.approx(_rand_from_blocks(1539, 81), abs=1e-11)


def test_small_grid_completeness_and_order():
    grid = small_grid()
    result = run_sweep(grid, workers=1)
    assert len(result.records) == grid.pair_count * len(grid.measures)
    keys = [(r.n, r.k, r.h, r.q, grid.transforms.index(r.transform), grid.measures.index(r.measure))
            for r in result.records]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_worker_count_does_not_change_output(tmp_path):
    grid = small_grid()
    write_csv(run_sweep(grid, workers=1).records, tmp_path / "a.csv")
    write_csv(run_sweep(grid, workers=3).records, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_identity_rows_score_zero():
    grid = small_grid(q_values=(0.0,), k_values=(3,))
    for rec in run_sweep(grid, workers=1).records:
        assert rec.y == 0.0


def test_onc_full_intensity_admitted():
    result = run_sweep(small_grid(q_values=(1.0,), transforms=("onc",)), workers=1)
    assert result.full_onc_admitted and not result.errors
    assert all(r.y >= 0 for r in result.records)


def test_infeasible_point_reported():
    result = run_sweep(GridConfig((4,), (2, 5), (0.0,), (0.5,), ("sc",), ("RI",)), workers=1)
    assert len(result.records) == 1
    assert len(result.errors) == 1 and result.errors[0].k == 5


def test_csv_round_trip(tmp_path):
    records = [
        ScoreRecord(3240, 2, 0.0, 0.1, "ncs", "RI", quantize(0.0500308737265), False),
        ScoreRecord(4320, 11, 0.9, 1.0, "onc", "ARI", quantize(1.02345678901234), True),
        ScoreRecord(12960, 5, 0.3, 0.7, "sc", "NMI", 0.0, False),
    ]
    write_csv(records, tmp_path / "s.csv")
    assert read_csv(tmp_path / "s.csv") == records
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "3240,2,0.0,0.1,ncs,RI,0.0500308737265,false"
    assert lines[3].endswith(",0.0,false")


def test_sweep_records_round_trip_exactly(tmp_path):
    records = run_sweep(small_grid(), workers=1).records
    write_csv(records, tmp_path / "s.csv")
    assert read_csv(tmp_path / "s.csv") == records


def test_parse_example_row(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text(",".join(CSV_HEADER) + "\n3240,2,0.0,0.1,ncs,RI,0.05,false\n")
    assert read_csv(path) == [ScoreRecord(3240, 2, 0.0, 0.1, "ncs", "RI", 0.05, False)]


def test_missing_column_named(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("n,k,h,q,transform,measure,y\n3240,2,0.0,0.1,ncs,RI,0.05\n")
    with pytest.raises(CsvFormatError, match="out_of_range"):
        read_csv(path)


@pytest.mark.parametrize("row", ["3240,2,0.0,0.1,ncs,RI,abc,false", "3240,2,0.0,0.1,ncs,RI,0.1,maybe",
                                 "3240,2,0.0,0.1,ncs,RI,0.1", "3240,2,0.0,0.1,xyz,RI,0.1,false"])
def test_malformed_row_reports_line(tmp_path, row):
    path = tmp_path / "s.csv"
    path.write_text(",".join(CSV_HEADER) + "\n3240,2,0.0,0.1,ncs,RI,0.05,false\n" + row + "\n")
    with pytest.raises(CsvFormatError, match=":3:"):
        read_csv(path)


def test_format_real():
    assert format_real(0.0) == "0.0"
    assert format_real(1.0) == "1.0"
    assert format_real(0.1) == "0.1"
    assert format_real(1 / 3) == "0.333333333333"
    assert float(format_real(quantize(2 / 3))) == quantize(2 / 3)


def test_grid_config_file(tmp_path):
    path = tmp_path / "grid.cfg"
    path.write_text("n_values = 3240, 4320\nk_values = 2\nq_values = 0.5\ntransforms = sc, oc\n")
    grid = load_grid_config(path)
    assert grid.n_values == (3240, 4320)
    assert grid.k_values == (2,)
    assert grid.q_values == (0.5,)
    assert grid.transforms == ("sc", "oc")
    assert grid.h_values == default_grid().h_values


def test_grid_config_unknown_key(tmp_path):
    path = tmp_path / "grid.cfg"
    path.write_text("colour = red\n")
    with pytest.raises(SweepError, match="colour"):
        load_grid_config(path)


def test_workers_from_environment(monkeypatch):
    from measure_bench.sweep import resolve_workers
    monkeypatch.setenv("MEASURE_BENCH_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    with pytest.raises(SweepError):
        resolve_workers(0)

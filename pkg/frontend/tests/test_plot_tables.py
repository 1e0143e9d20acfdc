import pytest

from plots.tables import (CONVERGENCE_COLUMNS, KNOWN_TABLES, PlotDataError,
                          check_against_schema, load_schema, numeric_pairs,
                          read_table, require_columns)

SCHEMA_TEXT = """\
# columns of the delimited outputs; floats use 9 significant digits
# missing values are written as -
observables.csv: t, mass, c_min, c_max, u_max
convergence.csv: cycle, cells, h, err_c_l2, err_c_h1, err_u_l2, err_u_h1, \
eoc_c_l2, eoc_c_h1, eoc_u_l2, eoc_u_h1
sweep_<parameter>.csv: param_value, t, M
"""


def test_read_convergence(conv_csv):
    table = read_table(conv_csv)
    assert table.columns == CONVERGENCE_COLUMNS
    assert len(table) == 7
    assert table.column("cycle")[0] == 0.0
    # first-row EOCs are written as '-' and parse to None
    assert table.column("eoc_c_l2")[0] is None
    assert table.column("eoc_c_l2")[1] == pytest.approx(2.0)


def test_missing_file(tmp_path):
    with pytest.raises(PlotDataError, match="no such file"):
        read_table(tmp_path / "absent.csv")


def test_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(PlotDataError, match="no header"):
        read_table(path)


def test_ragged_row_reports_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(PlotDataError, match=r"ragged\.csv:3"):
        read_table(path)


def test_require_columns_names_all_missing(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("h,err_c_l2\n0.5,0.1\n")
    table = read_table(path)
    with pytest.raises(PlotDataError) as err:
        require_columns(table, ("h", "err_u_l2", "err_u_h1"))
    assert "err_u_l2" in str(err.value)
    assert "err_u_h1" in str(err.value)


def test_column_access_error_names_column(conv_csv):
    table = read_table(conv_csv)
    with pytest.raises(PlotDataError, match="nonsense"):
        table.column("nonsense")


def test_load_schema(tmp_path):
    path = tmp_path / "schema.txt"
    path.write_text(SCHEMA_TEXT)
    schema = load_schema(path)
    assert schema == KNOWN_TABLES


def test_schema_mismatch_reported(tmp_path, sweep_csv):
    table = read_table(sweep_csv)
    with pytest.raises(PlotDataError, match="does not match"):
        check_against_schema(table, "convergence", KNOWN_TABLES)
    check_against_schema(table, "sweep", KNOWN_TABLES)


def test_schema_unknown_kind(sweep_csv):
    table = read_table(sweep_csv)
    with pytest.raises(PlotDataError, match="no entry for 'mystery'"):
        check_against_schema(table, "mystery", KNOWN_TABLES)


def test_numeric_pairs_skips_missing():
    xs = [1.0, 2.0, None, 4.0]
    ys = [1.0, None, 3.0, 16.0]
    assert numeric_pairs(xs, ys) == [(1.0, 1.0), (4.0, 16.0)]

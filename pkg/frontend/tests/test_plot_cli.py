import pytest

from plots.cli import EXIT_DATA, EXIT_OK, main

from synth import format_convergence, synthetic_convergence

SCHEMA_TEXT = """\
observables.csv: t, mass, c_min, c_max, u_max
convergence.csv: cycle, cells, h, err_c_l2, err_c_h1, err_u_l2, err_u_h1, \
eoc_c_l2, eoc_c_h1, eoc_u_l2, eoc_u_h1
sweep_<parameter>.csv: param_value, t, M
"""


def test_convergence_kind(conv_csv, tmp_path, capsys):
    out = tmp_path / "conv.png"
    code = main(["convergence-loglog", str(conv_csv), "-o", str(out)])
    assert code == EXIT_OK
    assert out.stat().st_size > 0
    assert "final slopes" in capsys.readouterr().out


def test_mass_kind(sweep_csv, tmp_path, capsys):
    out = tmp_path / "mass.png"
    code = main(["mass-vs-time", str(sweep_csv), "-o", str(out)])
    assert code == EXIT_OK
    assert "50%" in capsys.readouterr().out


def test_eoc_table_kind(conv_csv, tmp_path):
    out = tmp_path / "table.png"
    assert main(["eoc-table", str(conv_csv), "-o", str(out)]) == EXIT_OK
    assert out.stat().st_size > 0


def test_wrong_table_rejected(sweep_csv, tmp_path, capsys):
    code = main(["convergence-loglog", str(sweep_csv),
                 "-o", str(tmp_path / "x.png")])
    assert code == EXIT_DATA
    assert "does not match" in capsys.readouterr().err


def test_schema_file_validation(conv_csv, tmp_path):
    schema = tmp_path / "schema.txt"
    schema.write_text(SCHEMA_TEXT)
    out = tmp_path / "conv.png"
    code = main(["convergence-loglog", str(conv_csv),
                 "--schema", str(schema), "-o", str(out)])
    assert code == EXIT_OK


def test_schema_drift_detected(conv_csv, tmp_path, capsys):
    # producer renamed a column: the schema check must fail the run
    schema = tmp_path / "schema.txt"
    schema.write_text(SCHEMA_TEXT.replace("err_c_l2", "err_conc_l2"))
    code = main(["convergence-loglog", str(conv_csv),
                 "--schema", str(schema), "-o", str(tmp_path / "x.png")])
    assert code == EXIT_DATA
    assert "err_conc_l2" in capsys.readouterr().err


def test_missing_input_is_data_error(tmp_path, capsys):
    code = main(["mass-vs-time", str(tmp_path / "absent.csv"),
                 "-o", str(tmp_path / "x.png")])
    assert code == EXIT_DATA
    assert "no such file" in capsys.readouterr().err


def test_single_cycle_input(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text(format_convergence(synthetic_convergence(cycles=1)))
    out = tmp_path / "x.png"
    code = main(["convergence-loglog", str(path), "-o", str(out)])
    assert code == EXIT_DATA
    assert "at least two" in capsys.readouterr().err
    assert not out.exists()


def test_multiple_csvs_only_for_mass(conv_csv, tmp_path, capsys):
    code = main(["eoc-table", str(conv_csv), str(conv_csv),
                 "-o", str(tmp_path / "x.png")])
    assert code == EXIT_DATA
    assert "exactly one" in capsys.readouterr().err


def test_unknown_kind_rejected_by_parser(conv_csv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["spiral", str(conv_csv), "-o", str(tmp_path / "x.png")])
    assert exc.value.code == 2

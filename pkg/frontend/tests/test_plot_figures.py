import pytest

from plots.figures import (extension_label, plot_convergence, plot_eoc_table,
                           plot_mass)
from plots.tables import PlotDataError, read_table

from synth import format_convergence, format_sweep, synthetic_convergence


def test_synthetic_slopes_match_guides(conv_csv, tmp_path):
    # error exactly proportional to h^2 and h: annotated slopes are the
    # guide slopes to rounding
    slopes = plot_convergence(read_table(conv_csv), tmp_path / "c.png")
    assert slopes["err_u_l2"] == pytest.approx(2.0, abs=1e-9)
    assert slopes["err_c_l2"] == pytest.approx(2.0, abs=1e-9)
    assert slopes["err_u_h1"] == pytest.approx(1.0, abs=1e-9)
    assert slopes["err_c_h1"] == pytest.approx(1.0, abs=1e-9)
    assert (tmp_path / "c.png").stat().st_size > 0


def test_annotated_slope_tracks_csv_eoc(drifting_conv_csv, tmp_path):
    # the annotation is recomputed from the error columns; it must agree
    # with the producer's final EOC column within the advertised 0.1
    table = read_table(drifting_conv_csv)
    slopes = plot_convergence(table, tmp_path / "c.png")
    for err_key, eoc_key in (("err_u_l2", "eoc_u_l2"),
                             ("err_u_h1", "eoc_u_h1"),
                             ("err_c_l2", "eoc_c_l2"),
                             ("err_c_h1", "eoc_c_h1")):
        final_eoc = table.column(eoc_key)[-1]
        assert abs(slopes[err_key] - final_eoc) < 0.1


def test_single_cycle_is_explicit_error(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text(format_convergence(synthetic_convergence(cycles=1)))
    out = tmp_path / "c.png"
    with pytest.raises(PlotDataError, match="at least two"):
        plot_convergence(read_table(path), out)
    assert not out.exists()


def test_missing_error_column_named(tmp_path):
    path = tmp_path / "broken.csv"
    text = format_convergence(synthetic_convergence())
    path.write_text(text.replace("err_u_h1", "err_u_hh"))
    with pytest.raises(PlotDataError, match="err_u_h1"):
        plot_convergence(read_table(path), tmp_path / "c.png")


def test_inputs_never_modified(conv_csv, tmp_path):
    before = conv_csv.read_bytes()
    plot_convergence(read_table(conv_csv), tmp_path / "c.png")
    assert conv_csv.read_bytes() == before


def test_convergence_rerun_identical_bytes(conv_csv, tmp_path):
    plot_convergence(read_table(conv_csv), tmp_path / "a.png")
    plot_convergence(read_table(conv_csv), tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_extension_labels():
    assert extension_label(0.25) == "50%"
    assert extension_label(0.0) == "0%"
    assert extension_label(-0.125) == "-25%"
    assert extension_label(0.125) == "25%"


def test_mass_legend_and_order(sweep_csv, tmp_path):
    labels = plot_mass([read_table(sweep_csv)], tmp_path / "m.png")
    assert labels == ["-25%", "0%", "25%", "50%"]
    assert (tmp_path / "m.png").stat().st_size > 0


def test_mass_merges_multiple_files(tmp_path):
    a = tmp_path / "sweep_a.csv"
    b = tmp_path / "sweep_b.csv"
    a.write_text(format_sweep({0.25: [(0.0, 0.0), (1.0, 0.5)]}))
    b.write_text(format_sweep({0.0: [(0.0, 0.0), (1.0, 0.3)]}))
    labels = plot_mass([read_table(a), read_table(b)], tmp_path / "m.png")
    assert labels == ["0%", "50%"]


def test_mass_empty_file_reported(tmp_path):
    path = tmp_path / "sweep_empty.csv"
    path.write_text("param_value,t,M\n")
    with pytest.raises(PlotDataError, match="no data rows"):
        plot_mass([read_table(path)], tmp_path / "m.png")


def test_mass_all_missing_reported(tmp_path):
    path = tmp_path / "sweep_gaps.csv"
    path.write_text("param_value,t,M\n0.25,-,-\n")
    with pytest.raises(PlotDataError, match="empty series"):
        plot_mass([read_table(path)], tmp_path / "m.png")


def test_mass_rerun_identical_bytes(sweep_csv, tmp_path):
    plot_mass([read_table(sweep_csv)], tmp_path / "a.png")
    plot_mass([read_table(sweep_csv)], tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_eoc_table_renders_missing_as_dash(conv_csv, tmp_path):
    cells = plot_eoc_table(read_table(conv_csv), tmp_path / "t.png")
    assert len(cells) == 7
    assert cells[0][7:] == ["-", "-", "-", "-"]
    assert cells[1][0] == "1"
    assert (tmp_path / "t.png").stat().st_size > 0


def test_eoc_table_empty_reported(tmp_path):
    path = tmp_path / "conv_empty.csv"
    path.write_text(format_convergence([]))
    with pytest.raises(PlotDataError, match="no data rows"):
        plot_eoc_table(read_table(path), tmp_path / "t.png")

"""Tests for the fractal-search command line."""
import pytest

from fractal_search.cli import (
    EXIT_NO_PEAK,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    build_parser,
    main,
)


def test_lattice_info(capsys):
    assert main(["lattice-info", "--stage", "6"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "N: 1095" in out
    assert "d_s: 1.3652124" in out


def test_lattice_info_3d(capsys):
    assert main(["lattice-info", "--dim", "3", "--stage", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "N: 130" in out
    assert "k: 6" in out


def test_lattice_info_rejects_stage_zero(capsys):
    assert main(["lattice-info", "--stage", "0"]) == EXIT_USAGE
    assert "stage must be >= 1" in capsys.readouterr().out


def test_missing_command():
    assert main([]) == EXIT_USAGE


def test_unknown_dimension_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["lattice-info", "--dim", "4", "--stage", "2"])
    assert exc.value.code == 2


def test_validate(capsys):
    assert main(["validate", "--stage", "3"]) == EXIT_OK
    assert "All checks passed!" in capsys.readouterr().out


def test_validate_dump_round_trip(tmp_path):
    path = tmp_path / "gasket.txt"
    assert main(["lattice-info", "--stage", "2", "--dump", str(path)]) == EXIT_OK
    assert main(["validate", "--lattice-dump", str(path)]) == EXIT_OK


def test_validate_corrupted_dump(tmp_path, capsys):
    path = tmp_path / "gasket.txt"
    assert main(["lattice-info", "--stage", "2", "--dump", str(path)]) == EXIT_OK
    lines = path.read_text().splitlines()
    # vertex x y slot dir partner_vertex partner_slot wrap
    fields = lines[1].split()
    fields[6] = str((int(fields[6]) + 1) % 4)
    lines[1] = " ".join(fields)
    path.write_text("\n".join(lines) + "\n")

    assert main(["validate", "--lattice-dump", str(path)]) == EXIT_VALIDATION
    assert "Validation failed" in capsys.readouterr().out


def test_spectrum_hypercubic(tmp_path):
    out = tmp_path / "spectrum.csv"
    assert main(["spectrum", "--hypercubic", "2", "4", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("# fractal-search spectrum v1")


def test_spectrum_over_cap(tmp_path):
    settings = tmp_path / "settings.json"
    settings.write_text('{"dense_cap": 10}')
    assert main(["--settings", str(settings), "spectrum", "--stage", "2"]) == EXIT_USAGE


def test_search_writes_outputs(tmp_path):
    rc = main(["search", "--stage", "3", "--ancilla", "--snapshot", "--out", str(tmp_path)])
    assert rc in (EXIT_OK, EXIT_NO_PEAK)
    assert (tmp_path / "search_d2_S3_t2_plain_series.csv").exists()
    assert (tmp_path / "search_d2_S3_t2_tulsi_series.csv").exists()
    assert (tmp_path / "search_d2_S3_t2_summary.csv").exists()
    assert (tmp_path / "search_d2_S3_t2_plain_state.txt").exists()


def test_search_t1_scan(tmp_path):
    rc = main(["search", "--stage", "3", "--t1-scan", "1,2", "--out", str(tmp_path)])
    assert rc in (EXIT_OK, EXIT_NO_PEAK)
    assert (tmp_path / "search_d2_S3_t1_summary.csv").exists()
    assert (tmp_path / "search_d2_S3_t2_summary.csv").exists()


def test_search_unknown_vertex():
    assert main(["search", "--stage", "3", "--marked", "10000"]) == EXIT_USAGE


def test_sweep_needs_three_fit_stages():
    assert main(["sweep", "--stages", "4"]) == EXIT_USAGE


def test_sweep(tmp_path, capsys):
    assert main(["sweep", "--stages", "3-5", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "sweep_d2_t2_summary.csv").exists()
    assert (tmp_path / "sweep_d2_t2_fits.json").exists()
    assert (tmp_path / "sweep_d2_t2_config.json").exists()
    assert "q_plain: slope=" in capsys.readouterr().out


def test_config_file_feeds_sweep(tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text('{"stage_range": "3-5", "t1": 3}')
    assert main(["--config", str(config), "sweep", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "sweep_d2_t3_fits.json").exists()

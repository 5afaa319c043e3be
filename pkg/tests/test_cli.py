import json
from pathlib import Path

import pytest

from yukstripe import cli
from yukstripe.geometry import (RectUnionSet, make_stripes, set_to_json)


def _run(args):
    return cli.main(args)


def test_kernel_command(tmp_path):
    rc = _run(["--out", str(tmp_path), "kernel", "--num", "8", "--n-max", "2"])
    assert rc == 0
    text = (tmp_path / "kernel_sliced.csv").read_text()
    assert text.startswith("t,khat\n")
    assert text.endswith("\n")
    mono = (tmp_path / "kernel_monotonicity.csv").read_text()
    assert "passes" in mono.splitlines()[0]
    man = json.loads((tmp_path / "kernel_manifest.json").read_text())
    assert man["schema_version"] == 1
    assert man["all_pass"] is True
    assert "wall_time_s" in man and "package_version" in man


def test_csv_reruns_are_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        rc = _run(["--out", str(out), "optimal-width", "--M", "6,8"])
        assert rc == 0
    assert (a / "optimal_width.csv").read_bytes() \
        == (b / "optimal_width.csv").read_bytes()


def test_optimal_width_columns(tmp_path):
    rc = _run(["--out", str(tmp_path), "optimal-width", "--M", "6"])
    assert rc == 0
    header = (tmp_path / "optimal_width.csv").read_text().splitlines()[0]
    assert header == "M,h_star,h_star_over_M,e_star,log_e_over_M"


def test_energy_command_roundtrip(tmp_path, params12):
    p = params12
    L = 4 * p.h_tilde
    sfile = tmp_path / "stripes.json"
    sfile.write_text(set_to_json(make_stripes(0, p.h_tilde, L, d=2)))
    rc = _run(["--out", str(tmp_path), "energy", "--set", str(sfile),
               "--M", "12"])
    assert rc == 0
    doc = json.loads((tmp_path / "energy.json").read_text())
    assert doc["total"] == pytest.approx(-1.0, abs=1e-6)


def test_energy_empty_set(tmp_path):
    sfile = tmp_path / "empty.json"
    sfile.write_text(set_to_json(RectUnionSet(2, 4.0, ())))
    rc = _run(["--out", str(tmp_path), "energy", "--set", str(sfile),
               "--M", "8"])
    assert rc == 0
    doc = json.loads((tmp_path / "energy.json").read_text())
    assert doc["total"] == 0.0


def test_missing_set_file_is_config_error(tmp_path):
    rc = _run(["--out", str(tmp_path), "energy", "--set",
               str(tmp_path / "nope.json"), "--M", "8"])
    assert rc == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep config\nM = 6,8\nd = 3\n")
    rc = _run(["--config", str(cfg), "--out", str(tmp_path), "optimal-width"])
    assert rc == 0
    rows = (tmp_path / "optimal_width.csv").read_text().splitlines()
    assert len(rows) == 3  # header + two M values
    # flag overrides the file
    out2 = tmp_path / "o2"
    rc = _run(["--config", str(cfg), "--out", str(out2), "optimal-width",
               "--M", "6"])
    assert rc == 0
    assert len((out2 / "optimal_width.csv").read_text().splitlines()) == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not a key value line\n")
    rc = _run(["--config", str(cfg), "--out", str(tmp_path), "optimal-width"])
    assert rc == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import yukstripe.stripes1d as s1d
    from yukstripe.kernels import NumericsError

    def boom(M, d=3):
        raise NumericsError("quadrature fell over", achieved=1.0)

    monkeypatch.setattr(s1d, "optimal_width", boom)
    rc = _run(["--out", str(tmp_path), "optimal-width", "--M", "6"])
    assert rc == 3


def test_scan_period_command(tmp_path):
    rc = _run(["--out", str(tmp_path), "scan-period", "--M", "8",
               "--L-factors", "2,4"])
    assert rc == 0
    rows = (tmp_path / "scan_period.csv").read_text().splitlines()
    assert rows[0] == "L,k,h_opt,gap,fitted_C"
    assert len(rows) == 3


def test_gamma_command(tmp_path):
    rc = _run(["--out", str(tmp_path), "gamma", "--d", "3",
               "--beta", "8,16", "--L", "2"])
    assert rc == 0
    rows = (tmp_path / "gamma_constant.csv").read_text().splitlines()
    assert rows[0] == "beta,L,C_beta_L,C_over_beta3"
    per = (tmp_path / "gamma_perimeter.csv").read_text().splitlines()
    assert per[0] == "beta,L,C_beta_L,P_beta,per1,abs_error"


def test_compare_command(tmp_path):
    rc = _run(["--out", str(tmp_path), "compare", "--M", "10", "--k", "1",
               "--n", "24"])
    assert rc == 0
    rows = (tmp_path / "compare.csv").read_text().splitlines()
    assert rows[1].split(",")[1] == "stripes_optimal"


def test_anneal_command_smoke(tmp_path):
    rc = _run(["--out", str(tmp_path), "anneal", "--M", "10", "--k", "1",
               "--n", "16", "--sweeps", "3", "--t0", "200", "--seeds", "5",
               "--check-every", "0"])
    assert rc == 0
    assert (tmp_path / "anneal_summary.csv").exists()
    assert (tmp_path / "anneal_trace_seed5.csv").exists()
    assert (tmp_path / "anneal_final_seed5.json").exists()


def test_average_check_command(tmp_path, params12):
    p = params12
    L = 4 * p.h_tilde
    sfile = tmp_path / "s.json"
    sfile.write_text(set_to_json(make_stripes(0, p.h_tilde, L, d=2)))
    rc = _run(["--out", str(tmp_path), "average-check", "--set", str(sfile),
               "--M", "12", "--l", "0.8"])
    assert rc == 0
    row = (tmp_path / "average_check.csv").read_text().splitlines()[1]
    assert float(row.split(",")[2]) < 1e-6


def test_stripes_sweep_command(tmp_path):
    rc = _run(["--out", str(tmp_path), "stripes", "--M", "8", "--num", "5"])
    assert rc == 0
    rows = (tmp_path / "stripes_energy.csv").read_text().splitlines()
    assert len(rows) == 6

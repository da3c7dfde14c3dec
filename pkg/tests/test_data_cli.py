import csv
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from tpsdirect import cli
from tpsdirect.cli import RunConfig, run_binomial, run_gaussian, summary_from_table
from tpsdirect.data import ingest_panel, ingest_points, make_synthetic
from tpsdirect.errors import (
    DuplicateSites,
    MissingColumn,
    NonPositiveDelta0,
    NonPositiveForLog,
    ParseError,
)

MEUSE = Path(__file__).parent / "data" / "meuse.csv"


def write_csv(path, text):
    path.write_text(text)
    return path


def read_records(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ingest_four_rows(tmp_path):
    f = write_csv(tmp_path / "a.csv", "x,y,value\n0,0,1\n1,0,2\n0,1,3\n1,1.5,4\n")
    design, y = ingest_points(f)
    assert design.n == 4
    np.testing.assert_array_equal(y, [1, 2, 3, 4])
    np.testing.assert_allclose(design.raw_sites, [[0, 0], [1, 0], [0, 1], [1, 1.5]], atol=1e-15)


def test_ingest_log_of_zero_names_row(tmp_path):
    f = write_csv(tmp_path / "a.csv", "x,y,value\n0,0,1\n1,0,0\n0,1,3\n1,1,4\n")
    with pytest.raises(NonPositiveForLog, match="row 3"):
        ingest_points(f, transform="log")


def test_ingest_meuse_zinc():
    design, y = ingest_points(MEUSE, "zinc", "log")
    assert design.n == 155
    with open(MEUSE, newline="") as fh:
        zinc = np.array([float(r["zinc"]) for r in csv.DictReader(fh)])
    np.testing.assert_allclose(y, np.log(zinc), rtol=1e-15)


def test_ingest_drops_missing(tmp_path, caplog):
    f = write_csv(tmp_path / "a.csv", "x,y,value,other\n0,0,1,NA\n1,0,NA,2\n0,1,3,\n1,1,4,1\n2,1,,1\n3,0,5,1\n")
    with caplog.at_level(logging.WARNING):
        design, y = ingest_points(f)
    assert design.n == 4
    np.testing.assert_array_equal(y, [1, 3, 4, 5])
    assert "dropped 2 row(s)" in caplog.text


def test_ingest_errors(tmp_path):
    f = write_csv(tmp_path / "a.csv", "x,y,value\n0,0,1\n1,0,abc\n")
    with pytest.raises(ParseError, match="row 3"):
        ingest_points(f)
    with pytest.raises(MissingColumn):
        ingest_points(f, "zinc")


def test_duplicates_and_jitter(tmp_path):
    f = write_csv(tmp_path / "a.csv", "x,y,value\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n1,0,5\n")
    with pytest.raises(DuplicateSites):
        ingest_points(f)
    d1, _ = ingest_points(f, jitter=1e-3, seed=4)
    d2, _ = ingest_points(f, jitter=1e-3, seed=4)
    assert np.array_equal(d1.sites, d2.sites)
    raw = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [1, 0]])
    shift = d1.raw_sites - raw
    assert np.all(np.abs(shift) <= 1e-3) and np.any(shift != 0)


def test_ingest_panel_rejects_bad_counts(tmp_path):
    f = write_csv(tmp_path / "p.csv", "x,y,y1,n1,y2,n2\n0,0,1,2,1,2\n1,0,3,2,1,2\n0,1,1,2,1,2\n1,1,0,0,0,0\n")
    with pytest.raises(ParseError, match="row 3"):
        ingest_panel(f)


@pytest.mark.parametrize("kind,rows,header", [
    ("gaussian", 150, "x,y,value,truth"),
    ("turkey", 114, "x,y,y1,n1,y2,n2,Z_true"),
])
def test_synth_contract(tmp_path, kind, rows, header):
    a = make_synthetic(kind, 3, tmp_path / "a.csv")
    b = make_synthetic(kind, 3, tmp_path / "b.csv")
    lines = a.read_text().splitlines()
    assert lines[0] == header and len(lines) == rows + 1
    assert a.read_bytes() == b.read_bytes()
    assert make_synthetic(kind, 4, tmp_path / "c.csv").read_bytes() != a.read_bytes()


def test_synth_turkey_panel_is_valid(tmp_path):
    f = make_synthetic("turkey", 0, tmp_path / "t.csv")
    design, panel = ingest_panel(f)
    assert design.n == 114
    assert np.all(panel.trials >= 1) and np.all(panel.y <= panel.trials)


@pytest.fixture(scope="module")
def gaussian_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("gauss")
    data = make_synthetic("gaussian", 1, root / "data.csv")
    cfg = RunConfig(model="gaussian", data=str(data), out=str(root / "run"), draws=10_000, seed=9, grid=(20, 20))
    return root, cfg, run_gaussian(cfg)


def test_gaussian_contract(gaussian_run):
    _, _, files = gaussian_run
    table = np.loadtxt(files["draws"], delimiter=",", skiprows=1)
    assert table.shape == (10_000, 152)
    assert files["draws"].read_text().splitlines()[0].startswith("eta,delta0,nu_1,nu_2")
    assert np.all(table[:, :2] > 0)

    diag = read_records(files["diagnostics"])
    assert diag[0][1] == "acf_1" and diag[0][-2:] == ["ess", "mcse"]
    assert len(diag) == 153

    surface = np.loadtxt(files["surface"], delimiter=",", skiprows=1)
    assert surface.shape == (400, 5)
    assert np.all(surface[:, 3] <= surface[:, 2]) and np.all(surface[:, 2] <= surface[:, 4])

    manifest = json.loads(files["manifest"].read_text())
    assert manifest["seed"] == 9 and manifest["surface_draws"] == 1000
    assert set(manifest["files"]) == {"draws.csv", "summary.csv", "diagnostics.csv", "surface.csv", "manifest.json"}


def test_gaussian_byte_identical(gaussian_run, tmp_path):
    _, cfg, files = gaussian_run
    again = run_gaussian(RunConfig(**{**vars(cfg), "out": str(tmp_path)}))
    for key in ("draws", "summary", "diagnostics", "surface"):
        assert again[key].read_bytes() == files[key].read_bytes()


def test_summary_round_trip(gaussian_run):
    _, _, files = gaussian_run
    with open(files["draws"]) as fh:
        header = fh.readline().strip().split(",")
    table = np.loadtxt(files["draws"], delimiter=",", skiprows=1)
    expected = read_records(files["summary"])[1:]
    got = [[name] + ["%.17g" % v for v in vals] for name, *vals in summary_from_table(header, table)]
    assert got == expected


def test_manifest_reproduces_run(gaussian_run, tmp_path):
    _, _, files = gaussian_run
    cfg = RunConfig.from_manifest(files["manifest"], out=tmp_path)
    again = run_gaussian(cfg)
    assert again["draws"].read_bytes() == files["draws"].read_bytes()
    assert again["surface"].read_bytes() == files["surface"].read_bytes()


def test_surface_interpolates_at_sites(tmp_path):
    data = make_synthetic("gaussian", 2, tmp_path / "data.csv")
    design, _ = ingest_points(data)
    a, b = design.raw_sites[0], design.raw_sites[1]
    # the corners of a 2x2 grid on this box are exactly sites 0 and 1
    bbox = (a[0], b[0], a[1], b[1])
    cfg = RunConfig(model="gaussian", data=str(data), out=str(tmp_path / "run"), draws=800, seed=1, grid=(2, 2), bbox=bbox)
    files = run_gaussian(cfg)
    draws = np.loadtxt(files["draws"], delimiter=",", skiprows=1)
    surface = np.loadtxt(files["surface"], delimiter=",", skiprows=1)
    for site, row in ((0, 0), (1, 3)):
        np.testing.assert_array_equal(surface[row, :2], design.raw_sites[site])
        expected = draws[:, 2 + site].mean()
        assert abs(surface[row, 2] - expected) < 1e-6 * abs(expected)


def test_binomial_contract(tmp_path):
    data = make_synthetic("turkey", 0, tmp_path / "t.csv")
    cfg = RunConfig(model="binomial", data=str(data), out=str(tmp_path / "run"), iterations=300, seed=2)
    files = run_binomial(cfg)
    rows = read_records(files["ess_comparison"])
    assert rows[0] == ["scheme", "ess_theta2", "ess_eta", "ess_delta0"]
    assert [r[0] for r in rows[1:]] == ["direct", "baseline"]
    assert all(len(r) == 4 and all(float(v) > 0 for v in r[1:]) for r in rows[1:])
    draws = np.loadtxt(files["direct_draws"], delimiter=",", skiprows=1)
    assert draws.shape == (270, 3)
    z = np.loadtxt(files["z_posterior"], delimiter=",", skiprows=1)
    assert z.shape == (114, 4)

    again = run_binomial(RunConfig(**{**vars(cfg), "out": str(tmp_path / "again")}))
    for key in ("direct_draws", "baseline_draws", "ess_comparison", "z_posterior"):
        assert again[key].read_bytes() == files[key].read_bytes()


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(model="gaussian", data="d", out="o", draws=0)
    with pytest.raises(ValueError):
        RunConfig(model="gaussian", data="d", out="o", grid=(1, 5))
    with pytest.raises(ValueError):
        RunConfig(model="gaussian", data="d", out="o", a0=-1)
    assert RunConfig(model="binomial", data="d", out="o", iterations=500).burn_in == 50


def test_improper_delta0_posterior_is_a_sampler_error(tmp_path):
    from tpsdirect.penalty import build_design, build_penalty
    from tpsdirect.sampler import build_cache

    xy = np.random.default_rng(0).uniform(size=(12, 2))
    p = build_penalty(build_design(xy))
    planar = 1.0 + 2.0 * xy[:, 0] - xy[:, 1]
    with pytest.raises(NonPositiveDelta0):
        build_cache(p, planar, 0.0, 0.0)
    build_cache(p, planar)


def test_cli_exit_codes(tmp_path, capsys):
    good = make_synthetic("gaussian", 0, tmp_path / "g.csv")
    assert cli.main(["fit-gaussian", "--data", str(good), "--draws", "50", "--grid", "3", "3", "--out", str(tmp_path / "ok")]) == 0
    assert (tmp_path / "ok" / "manifest.json").exists()

    assert cli.main(["fit-gaussian", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == 2
    zero = write_csv(tmp_path / "z.csv", "x,y,value\n0,0,1\n1,0,0\n0,1,3\n1,1,4\n")
    assert cli.main(["fit-gaussian", "--data", str(zero), "--log", "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("tpsdirect: NonPositiveForLog") and "row 3" in err[-1]

    xy = np.random.default_rng(0).uniform(size=(12, 2))
    xy[1] = xy[0] + 1e-9
    close = tmp_path / "c.csv"
    np.savetxt(close, np.column_stack([xy, np.arange(12.0)]), delimiter=",", header="x,y,value", comments="", fmt="%.17g")
    assert cli.main(["fit-gaussian", "--data", str(close), "--out", str(tmp_path / "x")]) == 3

    planar = tmp_path / "p.csv"
    xy = np.random.default_rng(1).uniform(size=(12, 2))
    np.savetxt(planar, np.column_stack([xy, 1 + xy[:, 0]]), delimiter=",", header="x,y,value", comments="", fmt="%.17g")
    args = ["fit-gaussian", "--data", str(planar), "--a0", "0", "--b0", "0", "--out", str(tmp_path / "x")]
    assert cli.main(args) == 4


def test_cli_synth(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["synth", "--kind", "turkey", "--seed", "5", "--out", str(out)]) == 0
    assert out.read_bytes() == make_synthetic("turkey", 5, tmp_path / "ref.csv").read_bytes()

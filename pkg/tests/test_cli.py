import json
from pathlib import Path

import numpy as np
import pytest

from sparseblock import cli

DATA = Path(__file__).parent / "data"
SMALL = ["--n", "60", "--z", "4", "--d", "2"]


def run(tmp_path, *args):
    code = cli.main([*args, "--out", str(tmp_path / "r")])
    return code, tmp_path


def test_seed_stream_reproducible():
    a = cli.seed_stream(42, 0).random(100)
    b = cli.seed_stream(42, 0).random(100)
    c = cli.seed_stream(42, 1).random(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seed_stream_distinct_fingerprints():
    prints = {cli.seed_stream(42, k).integers(0, 2**63, size=2).tobytes() for k in range(1000)}
    assert len(prints) == 1000


def test_seed_stream_negative_index():
    with pytest.raises(ValueError):
        cli.seed_stream(1, -1)


def test_words_golden(tmp_path):
    code, _ = run(tmp_path, "words", "--p-max", "4", "--format", "json")
    assert code == 0
    got = json.loads((tmp_path / "r.words.json").read_text())
    assert got == json.loads((DATA / "mu8_golden.json").read_text())
    manifest = json.loads((tmp_path / "r.manifest.json").read_text())
    assert manifest["finite_rank_limit"] == [0, 1, 12, 28, 14]


def test_theory_laplacian_header(tmp_path):
    code, _ = run(tmp_path, "theory", "--kind", "Laplacian", "--t", "2", "--format", "json", "--check")
    assert code == 0
    header = json.loads((tmp_path / "r.theory.json").read_text())["header"]
    assert header["a"] == pytest.approx(0.0, abs=1e-12)
    assert header["b"] == pytest.approx(8.0)
    assert header["total_mass"] == pytest.approx(1.0, abs=1e-6)


def test_sample_spectrum_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        code = cli.main(["sample-spectrum", *SMALL, "--realizations", "2", "--seed", "9", "--out", str(tmp_path / name)])
        assert code == 0
        outs.append((tmp_path / f"{name}.sample-spectrum.csv").read_bytes())
    assert outs[0] == outs[1]
    assert len(outs[0].splitlines()) == 2 * 60 * 2


def test_jobs_do_not_change_results(tmp_path):
    for name, jobs in (("one", "1"), ("many", "3")):
        cli.main(["moments", *SMALL, "--realizations", "4", "--jobs", jobs, "--out", str(tmp_path / name)])
    a = (tmp_path / "one.moments.csv").read_text()
    b = (tmp_path / "many.moments.csv").read_text()
    assert a == b


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# small run\nn_vertices = 40\nmean_degree = 4\nblock_dim = 2\nrealizations = 3\nseed = 5\n")
    code, _ = run(tmp_path, "moments", "--config", str(cfg), "--seed", "6")
    assert code == 0
    manifest = json.loads((tmp_path / "r.manifest.json").read_text())
    assert manifest["seed"] == 6
    assert manifest["config"]["n_vertices"] == 40
    assert len(manifest["config_sha256"]) == 64
    # the echoed config regenerates the same report
    echo = dict(manifest["config"], output=str(tmp_path / "again"))
    report, csv_text, _, _ = cli.run(cli.make_config(echo))
    assert csv_text == (tmp_path / "r.moments.csv").read_text()


@pytest.mark.parametrize(
    "text,field",
    [
        ("n_vertices = x", "n_vertices"),
        ("realizations = 0", "realizations"),
        ("measure = Sphere", "measure"),
        ("mean_degree = 3.5\ngraph_family = Regular", "graph"),
        ("block_dim = 2\nrank = 3\nmeasure = RankRIndependent", "measure"),
        ("colour = red", "colour"),
    ],
)
def test_config_errors(tmp_path, text, field, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text + "\n")
    code, _ = run(tmp_path, "moments", "--config", str(cfg))
    assert code == cli.EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_convergence_needs_t(tmp_path):
    code, _ = run(tmp_path, "convergence", *SMALL)
    assert code == cli.EXIT_CONFIG


def test_resource_error(tmp_path):
    code, _ = run(tmp_path, "sample-spectrum", "--n", "1000", "--d", "8")
    assert code == cli.EXIT_RESOURCE


def test_check_failure(tmp_path):
    code, _ = run(tmp_path, "sample-spectrum", *SMALL, "--ks-threshold", "0", "--check")
    assert code == cli.EXIT_CHECK


def test_full_measure_has_no_ks(tmp_path):
    code, _ = run(tmp_path, "sample-spectrum", *SMALL, "--measure", "FullGauss", "--format", "json")
    assert code == 0
    report = json.loads((tmp_path / "r.sample-spectrum.json").read_text())
    assert report["theory"] is None
    assert "ks" not in report["realizations"][0]


def test_universality_table(tmp_path):
    code, _ = run(tmp_path, "universality", "--d-list", "2,4", "--samples", "20000", "--format", "json")
    assert code == 0
    rows = json.loads((tmp_path / "r.universality.json").read_text())["table"]
    assert len(rows) == 4 * 2 * 2
    assert {r["case"] for r in rows} == {"VectorSphere", "VectorBall", "MatrixFixed", "MatrixBounded"}


def test_convergence_sweep(tmp_path):
    code, _ = run(tmp_path, "convergence", "--t", "2", "--d-list", "2,4", "--n", "60", "--realizations", "2")
    assert code == 0
    lines = (tmp_path / "r.convergence.csv").read_text().splitlines()
    assert lines[0].startswith("d,Z,ks_mean")
    assert len(lines) == 3


def test_theory_adjacency_csv(tmp_path):
    code, _ = run(tmp_path, "theory", "--t", "0.5", "--bins", "20")
    assert code == 0
    lines = (tmp_path / "r.theory.csv").read_text().splitlines()
    assert lines[0] == "x,density" and len(lines) == 22

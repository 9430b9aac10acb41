import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from simcrit.cli import main
from simcrit.fileio import DataError, dumps_json, read_groups, read_matrix


def write_matrix(path, values, sep="\t"):
    with open(path, "w") as fh:
        fh.write(sep.join(["id"] + [f"s{j}" for j in range(values.shape[1])]) + "\n")
        for i, row in enumerate(values):
            fh.write(sep.join([f"g{i}"] + [repr(float(v)) for v in row]) + "\n")


@pytest.fixture
def two_group(tmp_path):
    r = np.random.default_rng(11)
    m, n1, n2 = 1500, 12, 15
    alt = r.random(m) < 0.45
    x = r.normal(size=(m, n1 + n2))
    x[alt, n1:] += r.choice([-1.5, 1.5], alt.sum())[:, None]
    mat = tmp_path / "expr.tsv"
    write_matrix(mat, x)
    groups = tmp_path / "groups.txt"
    groups.write_text("\n".join(["ALL"] * n1 + ["AML"] * n2) + "\n")
    return mat, groups


def run(args):
    try:
        return main([str(a) for a in args])
    except SystemExit as exc:
        return exc.code


def read_features(path):
    with open(path) as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def test_test_command_outputs(two_group, tmp_path):
    mat, groups = two_group
    out = tmp_path / "run"
    assert run(["test", "--input", mat, "--groups", groups, "--method", "fdr", "--gamma", "0.01",
                "--compare", "--out", out]) == 0
    summary = json.loads((tmp_path / "run.summary.json").read_text())
    assert summary["schema_version"] == 1
    for key in ("pi1_hat", "t_hat", "num_rejected", "method", "gamma"):
        assert key in summary
    assert "timing_seconds" not in summary
    cmp = summary["compare"]
    assert cmp["ck_rejected"] >= cmp["st_rejected"] >= cmp["bh_rejected"]
    rows = read_features(tmp_path / "run.features.tsv")
    assert list(rows[0]) == ["feature_id", "t_stat", "abs_t", "rejected", "p_value", "q_value"]
    assert sum(r["rejected"] == "1" for r in rows) == summary["num_rejected"]
    # round trip: re-thresholding the table at t_hat reproduces the count
    t_hat = summary["t_hat"]
    assert sum(float(r["abs_t"]) >= t_hat for r in rows) == summary["num_rejected"]


def test_outputs_byte_identical(two_group, tmp_path):
    mat, groups = two_group
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    for d in ("a", "b"):
        assert run(["test", "--input", mat, "--groups", groups, "--method", "fdtp", "--alpha", "0.1",
                    "--out", tmp_path / d / "x"]) == 0
    for suffix in (".summary.json", ".features.tsv"):
        assert (tmp_path / "a" / f"x{suffix}").read_bytes() == (tmp_path / "b" / f"x{suffix}").read_bytes()


def test_timing_only_on_request(two_group, tmp_path):
    mat, groups = two_group
    assert run(["test", "--input", mat, "--groups", groups, "--timing", "--out", tmp_path / "t"]) == 0
    assert json.loads((tmp_path / "t.summary.json").read_text())["timing_seconds"] >= 0


def test_kfwer_and_pi1_override(two_group, tmp_path):
    mat, groups = two_group
    assert run(["test", "--input", mat, "--groups", groups, "--method", "kfwer", "--k", "3",
                "--pi1", "0.4", "--out", tmp_path / "k"]) == 0
    s = json.loads((tmp_path / "k.summary.json").read_text())
    assert s["pi1_source"] == "override" and s["pi1_used"] == 0.4 and s["k"] == 3


def test_one_sample_csv(tmp_path):
    x = np.random.default_rng(2).normal(0.3, 1, size=(200, 10))
    mat = tmp_path / "one.csv"
    write_matrix(mat, x, sep=",")
    assert run(["test", "--input", mat, "--out", tmp_path / "o", "--pvalues", "normal"]) == 0
    s = json.loads((tmp_path / "o.summary.json").read_text())
    assert s["design"] == {"type": "one_sample", "n": 10}


@pytest.mark.parametrize(
    "extra",
    [["--gamma", "1.5"], ["--gamma", "0"], ["--method", "fdtp"], ["--method", "kfwer"], ["--bogus"],
     ["--method", "holm"], ["--pi1", "abc"]],
)
def test_usage_errors(two_group, tmp_path, extra):
    mat, groups = two_group
    assert run(["test", "--input", mat, "--groups", groups, "--out", tmp_path / "u"] + extra) == 64


def test_group_mismatch_is_data_error(two_group, tmp_path):
    mat, _ = two_group
    bad = tmp_path / "bad.txt"
    bad.write_text("a\nb\n")
    assert run(["test", "--input", mat, "--groups", bad, "--out", tmp_path / "e"]) == 2


def test_too_few_samples_per_group(tmp_path):
    mat = tmp_path / "m.tsv"
    write_matrix(mat, np.random.default_rng(0).normal(size=(5, 4)))
    groups = tmp_path / "g.txt"
    groups.write_text("a\nb\nb\nb\n")
    assert run(["test", "--input", mat, "--groups", groups, "--out", tmp_path / "e"]) == 2


def test_malformed_matrix_line_numbered(tmp_path, capsys):
    mat = tmp_path / "m.tsv"
    mat.write_text("id\ta\tb\ng1\t1\t2\ng2\t1\tx\n")
    assert run(["test", "--input", mat, "--out", tmp_path / "e"]) == 2
    assert "m.tsv:3" in capsys.readouterr().err
    with pytest.raises(DataError, match=":2: expected 3 fields"):
        mat.write_text("id\ta\tb\ng1\t1\n")
        read_matrix(mat)


def test_all_zero_rows(tmp_path):
    mat = tmp_path / "z.tsv"
    write_matrix(mat, np.zeros((4, 6)))
    assert run(["estimate-pi1", "--input", mat]) == 2
    assert run(["test", "--input", mat, "--out", tmp_path / "z"]) == 2


def test_estimate_pi1(two_group, tmp_path, capsys):
    mat, groups = two_group
    dump = tmp_path / "grid.tsv"
    assert run(["estimate-pi1", "--input", mat, "--groups", groups, "--dump-grid", dump]) == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.strip().splitlines())
    assert abs(float(out["pi1_hat"]) - 0.45) < 0.08
    assert float(out["c_star"]) > 0
    assert dump.read_text().splitlines()[0] == "c\tg_hat\texpected_g\tratio"
    assert run(["estimate-pi1", "--input", mat, "--groups", groups, "--grid", "0.1:20:50"]) == 0


@pytest.mark.parametrize("grid", ["1:1:1", "2:1:10", "0:1:10", "a:b:c", "1:2"])
def test_degenerate_grid(two_group, grid):
    mat, groups = two_group
    assert run(["estimate-pi1", "--input", mat, "--groups", groups, "--grid", grid]) == 64


def sim_config(**over):
    doc = {"m": 300, "design": {"type": "one_sample", "n": 40}, "truth": {"type": "hmm", "p0": 0.8, "p1": 0.2},
           "effect": {"type": "mirrored_uniform", "lo": 0.5, "hi": 1.0}, "error": {"type": "normal"},
           "reps": 3, "seed": 5, "levels": [0.1]}
    doc.update(over)
    return doc


def test_simulate_outputs(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(sim_config(procedures=[{"kind": "fdr"}, {"kind": "bh"}])))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "s"]) == 0
    rows = read_features(tmp_path / "s.reps.tsv")
    assert len(rows) == 2 * 3
    summary = json.loads((tmp_path / "s.summary.json").read_text())
    assert summary["schema_version"] == 1
    assert [r["procedure"] for r in summary["results"]] == ["ck-fdr", "bh"]
    curves = read_features(tmp_path / "s.curves.tsv")
    assert {"nominal", "realized_fdr"} <= set(curves[0])
    first = (tmp_path / "s.reps.tsv").read_bytes()
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "s"]) == 0
    assert (tmp_path / "s.reps.tsv").read_bytes() == first


def test_simulate_single_rep(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(sim_config(reps=1, procedures=[{"kind": "fdr"}])))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "one"]) == 0
    assert len(read_features(tmp_path / "one.reps.tsv")) == 1


@pytest.mark.parametrize(
    "change,field",
    [({"error": {"type": "gumbel"}}, "error/type"), ({"reps": 0}, "reps"), ({"colour": 1}, "colour"),
     ({"levels": [1.5]}, "levels/0")],
)
def test_simulate_schema_errors(tmp_path, capsys, change, field):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(sim_config(**change)))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "x"]) == 2
    assert f"'{field}'" in capsys.readouterr().err


def test_simulate_missing_field_and_bad_json(tmp_path, capsys):
    doc = sim_config()
    del doc["m"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "x"]) == 2
    assert "'m'" in capsys.readouterr().err
    cfg.write_text("{not json")
    assert run(["simulate", "--config", cfg, "--out", tmp_path / "x"]) == 2


def test_read_groups_requires_two_labels(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("a\na\na\n")
    with pytest.raises(DataError):
        read_groups(g, 3)


def test_json_floats_and_order():
    text = dumps_json({"b": 0.1, "a": [1, float("nan"), True, None]})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    assert json.loads(text) == {"b": 0.1, "a": [1, None, True, None]}


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "simcrit", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "estimate-pi1" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "simcrit", "nonsense"], capture_output=True, text=True)
    assert proc.returncode == 64

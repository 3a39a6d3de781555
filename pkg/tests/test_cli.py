import json
import subprocess
import sys

import numpy as np
import pytest

from qperp import cli, qcalc
from qperp.samplers import SampleBatch


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["eval", "mellin", "--q", "0.5", "--mu", "2", "--s", "1"], 4.0),
        (["eval", "psi", "--q", "0.5", "--mu", "1", "--s", "0"], 0.0),
        (["eval", "qgamma_fn", "--q", "0.5", "--x", "3"], 1.5),
        (["eval", "qpoch", "--a", "0.5", "--q", "0.5", "--n", "2"], 0.375),
        (["eval", "pmf", "--a", "0", "--q", "0.3", "--n", "0"], 1.0),
    ],
)
def test_eval_examples(capsys, argv, expected):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert float(out) == pytest.approx(expected, rel=1e-14, abs=1e-15)
    assert out.endswith("\n") and out.count("\n") == 1


def test_eval_complex_argument(capsys):
    code, out, _ = run(capsys, "eval", "mellin", "--q", "0.5", "--mu", "2", "--s", "0.5+1j")
    assert code == 0
    assert isinstance(complex(out), complex)


def test_eval_structured_output(capsys):
    code, out, _ = run(capsys, "eval", "density", "--q", "0.5", "--mu", "1.5", "--x", "1", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["function"] == "density"
    assert doc["inputs"] == {"q": 0.5, "mu": 1.5, "x": 1.0}
    assert doc["err_bound"] >= 0
    code, out, _ = run(capsys, "eval", "cdf", "--q", "0.5", "--mu", "1.5", "--x", "1", "--format", "csv")
    header, row = out.splitlines()
    assert header == "function,value,err_bound" and row.startswith("cdf,")


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "mellin", "--q", "0.5", "--mu", "2", "--s", "3"],
        ["eval", "mellin", "--q", "1.5", "--mu", "2", "--s", "0"],
        ["eval", "mellin", "--q", "0.5", "--mu", "2"],
        ["eval", "density", "--q", "0.5", "--mu", "2", "--x", "-1"],
        ["eval", "nosuch"],
        ["sample", "path", "--q", "0.5", "--mu", "1", "--n", "0"],
        ["sample", "qgamma", "--q", "0.5", "--n", "3"],
        ["limit", "--mu", "2", "--grid", ""],
        ["limit", "--mu", "2", "--n", "0"],
        ["limit", "--mu", "2", "--grid", "0.99,0.9"],
        [],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_domain_error_names_precondition(capsys):
    _, _, err = run(capsys, "eval", "mellin", "--q", "0.5", "--mu", "2", "--s", "3")
    assert err.startswith("error:") and "mu" in err


def test_help_documents_flags(capsys):
    for sub in ("eval", "sample", "verify", "limit"):
        code, out, _ = run(capsys, sub, "--help")
        assert code == 0
    _, out, _ = run(capsys, "eval", "--help")
    for flag in ("--q", "--mu", "--s", "--x", "--n", "--tol", "--format"):
        assert flag in out


def test_sample_is_byte_identical(tmp_path, capsys):
    for fmt in ("csv", "json"):
        paths = [tmp_path / f"{k}.{fmt}" for k in range(2)]
        for p in paths:
            argv = ["sample", "series", "--q", "0.5", "--mu", "1.5", "--n", "3", "--seed", "9"]
            assert cli.main(argv + ["--out", str(p), "--format", fmt]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()


def test_sample_degenerate_qgamma(capsys):
    code, out, _ = run(capsys, "sample", "qgamma", "--a", "0", "--q", "0.5", "--n", "10")
    assert code == 0
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    assert lines[0] == "value" and lines[1:] == ["2.0"] * 10


def test_sample_factorization_mean(tmp_path):
    out = tmp_path / "f.csv"
    assert cli.main(["sample", "factorization", "--q", "0.5", "--mu", "2", "--n", "1000000", "--seed", "42", "--out", str(out)]) == 0
    x = SampleBatch.read_values(str(out))
    assert x.size == 1_000_000
    assert abs(x.mean() - 4.0) <= 3 * x.std(ddof=1) / 1e3


def test_verify_analytic(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["verify", "analytic", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["suite_name"] == "analytic" and doc["overall_pass"]
    assert doc["timestamp"] == cli.FIXED_TIMESTAMP
    assert all(c["pass"] for c in doc["cases"])
    assert set(doc["cases"][0]) == {"name", "inputs", "expected", "observed", "tolerance", "pass"}


def test_verify_negative_control(monkeypatch, capsys):
    # tampered build: (a; q)_n with n + 1 factors instead of n
    honest = qcalc.qpochhammer_finite
    monkeypatch.setattr(qcalc, "qpochhammer_finite", lambda a, q, n: honest(a, q, n + 1))
    code, out, _ = run(capsys, "verify", "analytic")
    assert code == 1
    assert not json.loads(out)["overall_pass"]


def test_limit_csv(capsys):
    code, out, _ = run(capsys, "limit", "--mu", "2", "--grid", "0.9,0.99", "--n", "20000", "--seed", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "q,n,ks_distance,ks_critical_1pct"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0.9", "0.99"]


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "qperp", "eval", "qexp", "--q", "0.5", "--t", "0"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and float(res.stdout) == 1.0

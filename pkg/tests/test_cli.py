import json
import subprocess
import sys

import numpy as np
import pytest

from tailratio.cli import main, sanitize
from tailratio.config import load_preset, parse_config, preset_names, read_data_column
from tailratio.errors import ConfigError, NotFound
from tailratio.families import builtin_family
from tailratio.sampling import SeededStream, sample_full


@pytest.fixture
def exp_csv(tmp_path):
    x = sample_full(builtin_family("weibull"), 1.0, 1000, SeededStream(2024))
    rng = np.random.default_rng(0)
    path = tmp_path / "exp.csv"
    path.write_text("value\n" + "\n".join(repr(float(v)) for v in rng.permutation(x)) + "\n")
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestTestCommand:
    def test_report(self, capsys, exp_csv):
        code, out, _ = run(capsys, "test", str(exp_csv), "--family", "weibull", "--gamma0", "1", "--k", "30",
                           "--u", "1", "--alpha", "0.05")
        assert code == 0
        rep = json.loads(out)
        assert np.isfinite(rep["log_lr"]) and 0 < rep["p_value"] < 1
        assert rep["decision"] in ("reject", "retain")
        assert rep["n"] == 1000 and rep["k"] == 30

    def test_u_zero_exit_3(self, capsys, exp_csv):
        code, out, err = run(capsys, "test", str(exp_csv), "--family", "weibull", "--gamma0", "1", "--k", "30", "--u", "0")
        assert code == 3 and out == "" and "DegenerateStep" in err

    def test_k_boundaries(self, capsys, exp_csv):
        code, _, _ = run(capsys, "test", str(exp_csv), "--family", "weibull", "--gamma0", "1", "--k", "999", "--u", "-1")
        assert code == 0
        code, _, err = run(capsys, "test", str(exp_csv), "--family", "weibull", "--gamma0", "1", "--k", "1000")
        assert code == 2 and "k=1000" in err

    def test_malformed_csv(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x\n1.0\n2.0\noops\n3.0\n")
        code, _, err = run(capsys, "test", str(bad), "--family", "weibull", "--gamma0", "1", "--k", "1")
        assert code == 2 and ":4:" in err

    def test_out_file(self, capsys, exp_csv, tmp_path):
        dest = tmp_path / "r.json"
        code, out, _ = run(capsys, "test", str(exp_csv), "--family", "weibull", "--gamma0", "1", "--k", "30",
                           "--out", str(dest))
        assert code == 0 and out == ""
        assert json.loads(dest.read_text())["family"] == "weibull"

    def test_usage_errors(self, capsys, exp_csv):
        assert run(capsys, "test", str(exp_csv), "--family", "nope", "--gamma0", "1", "--k", "3")[0] == 2
        assert run(capsys, "test", str(exp_csv), "--family", "weibull", "--k", "3")[0] == 2
        assert run(capsys)[0] == 2


class TestExperimentCommand:
    def test_deterministic(self, capsys):
        args = ("experiment", "--preset", "theorem1-weibull", "--replications", "10", "--seed", "7", "--workers", "1")
        c1, o1, e1 = run(capsys, *args)
        c2, o2, _ = run(capsys, *args)
        assert c1 == c2 == 0 and o1 == o2
        assert "running" in e1
        d = json.loads(o1)
        assert d["replications"] == 10 and d["seed"] == 7 and d["k"] == 25

    def test_invalid_epsilon(self, capsys):
        code, out, err = run(capsys, "experiment", "--preset", "theorem1-weibull", "--epsilon", "2.5")
        assert code == 2 and out == "" and "0 < epsilon < 2" in err

    def test_config_file_and_raw_csv(self, capsys, tmp_path):
        cfg = tmp_path / "d.cfg"
        cfg.write_text("theorem = L3\nfamily = weibull\ngamma0 = 2\nn = 10000\nk = 50  # rate\nreplications = 30\n")
        raw = tmp_path / "raw.csv"
        code, out, _ = run(capsys, "experiment", "--config", str(cfg), "--raw-csv", str(raw), "--workers", "1")
        assert code == 0 and json.loads(out)["theorem"] == "L3"
        lines = raw.read_text().splitlines()
        assert lines[0] == "replication,statistic,threshold" and len(lines) == 31

    def test_size_power(self, capsys):
        code, out, _ = run(capsys, "experiment", "--family", "weibull", "--gamma0", "2", "--k", "25",
                           "--replications", "20", "--workers", "1", "--u-grid", "0.5,2")
        assert code == 0
        rows = json.loads(out)["size_power"]
        assert [r["u"] for r in rows] == [0.5, 2.0]

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "d.cfg"
        cfg.write_text("family = weibull\ngamma0 = 2\nk = 25\nbogus = 1\n")
        code, _, err = run(capsys, "experiment", "--config", str(cfg))
        assert code == 2 and "bogus" in err and ":4:" in err

    def test_unknown_preset(self, capsys):
        assert run(capsys, "experiment", "--preset", "nope")[0] == 2


class TestInspect:
    def test_weibull_design_point(self, capsys):
        code, out, _ = run(capsys, "inspect", "--family", "weibull", "--gamma", "2", "--n", "100000", "--k", "25")
        d = json.loads(out)
        assert code == 0
        assert d["a"] == pytest.approx(2.58, abs=0.01) and d["t"] == pytest.approx(0.138, abs=1e-3)
        assert set(d) >= {"H", "laplace", "von_mises", "regularity"}

    def test_exponential_laplace_terms(self, capsys):
        _, out, _ = run(capsys, "inspect", "--family", "weibull", "--gamma0", "1", "--n", "5000", "--k", "40")
        assert json.loads(out)["laplace"]["terms"] == [1.0, 0.0, 0.0]

    def test_log_weibull_type_a(self, capsys):
        _, out, _ = run(capsys, "inspect", "--family", "log_weibull", "--gamma0", "2", "--n", "100000", "--k", "100",
                        "--class", "TypeA")
        checks = {c["condition"]: c["verdict"] for c in json.loads(out)["regularity"]["checks"]}
        assert checks["A1"] == "violated"

    def test_domain_error_exit_3(self, capsys):
        assert run(capsys, "inspect", "--family", "weibull", "--gamma0", "0.5", "--n", "100", "--k", "5")[0] == 3


def test_sanitize_marks_nulls():
    reasons = {}
    out = sanitize({"a": float("nan"), "b": [1.0, float("inf")], "c": np.float64(2.0)}, reasons=reasons)
    assert out == {"a": None, "b": [1.0, None], "c": 2.0}
    assert set(reasons) == {"a", "b[1]"}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tailratio", "inspect", "--family", "normal_variance", "--gamma0", "1",
                          "--n", "1000", "--k", "10"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["family"] == "normal_variance"


class TestConfig:
    def test_parse(self):
        cfg = parse_config("# design\nfamily = weibull\ngamma0 = 2.5\nn = 1e5\nalphas = 0.01, 0.05\n\ntolerance.ks = 0.1\n")
        assert cfg == {"family": "weibull", "gamma0": 2.5, "n": 100000, "alphas": (0.01, 0.05), "tolerance.ks": 0.1}

    @pytest.mark.parametrize("text", ["family weibull", "n = 2.5", "x = 1", "tolerance.foo = 1", "n = 1\nn = 2"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_presets(self):
        assert preset_names() == ["lemma3-weibull", "theorem1-weibull", "theorem2-logweibull"]
        assert load_preset("theorem2-logweibull.cfg")["epsilon"] == 0.4
        with pytest.raises(NotFound):
            load_preset("missing")

    def test_data_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("1.5\n\n2.5\n")
        assert list(read_data_column(p)) == [1.5, 2.5]
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError, match=":2:"):
            read_data_column(p)
        p.write_text("x\nnan\n")
        with pytest.raises(ConfigError, match=":2:"):
            read_data_column(p)

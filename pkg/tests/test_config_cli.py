"""Config parsing, report round trips, and the command-line driver."""

import csv
import hashlib
import shutil
import subprocess

import numpy as np
import pytest

from emergekit.cli import main
from emergekit.config import ConfigError, load_config
from emergekit.report import (
    extract_body,
    parse_report,
    render_report,
    serialize,
    write_map_csv,
)

DEMO = """\
[grid]
dim = 1
sizes = 32
spacing = 0.2

[operator.A]
kind = stencil
terms = 1 @ 0; -1 @ 2

[theory.target]
kind = scaling
psi0 = A

[theory.ambient]
kind = monomial
coeff = 2*delta
psi = A
power = 1

[emergence]
target = target
ambient = ambient
strategy = both

[run]
samples = 30
seed = 3
"""

NON_EMERGENT = """\
[grid]
dim = 1
sizes = 32
spacing = 0.2

[operator.D]
kind = stencil
terms = 1 @ 1

[operator.Lap]
kind = stencil
terms = 1 @ 2

[theory.target]
kind = scaling
psi0 = D

[theory.span]
kind = polynomial
variables = Lap
terms = delta @ 0 -> 0; delta @ 1 -> 1

[emergence]
target = target
ambient = span
strategy = oracle

[run]
samples = 12
seed = 5
"""


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _body_of(out):
    doc = out[out.index('{"body"') : out.rindex("}") + 1]
    return parse_report(doc)["body"]


# ---------------------------------------------------------------------------
# config parsing


class TestConfigParsing:
    def test_defaults_and_digest(self, tmp_path):
        text = DEMO.replace("[run]\nsamples = 30\nseed = 3\n", "")
        cfg = load_config(_write(tmp_path, text))
        assert cfg.run.samples == 100
        assert cfg.run.seed == 0
        assert cfg.run.tol is None
        assert cfg.task.strategy == "both"
        assert cfg.digest == hashlib.sha256(text.encode()).hexdigest()

    def test_theories_are_certified_on_load(self, tmp_path):
        cfg = load_config(_write(tmp_path, DEMO))
        target = cfg.theories["target"]
        # homomorphy checks run at load time so synthesis can consume them
        assert target.additive is not None and target.additive.passed
        assert target.multiplicative is not None

    def test_missing_grid_section(self, tmp_path):
        text = DEMO[DEMO.index("[operator.A]") :]
        with pytest.raises(ConfigError, match=r"missing required section \[grid\]"):
            load_config(_write(tmp_path, text))

    def test_duplicate_section_reports_both_lines(self, tmp_path):
        text = DEMO + "\n[operator.A]\nkind = identity\n"
        first = DEMO.splitlines().index("[operator.A]") + 1
        again = len(DEMO.splitlines()) + 2
        with pytest.raises(ConfigError) as err:
            load_config(_write(tmp_path, text))
        assert f"first defined at line {first}" in str(err.value)
        assert f"defined again at line {again}" in str(err.value)

    def test_dangling_operator_reference(self, tmp_path):
        text = DEMO.replace("psi0 = A", "psi0 = B")
        with pytest.raises(ConfigError) as err:
            load_config(_write(tmp_path, text))
        assert "undefined operator 'B'" in str(err.value)
        assert "[theory.target]" in str(err.value)

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match=r"unknown section \[plotting\]"):
            load_config(_write(tmp_path, DEMO + "\n[plotting]\nstyle = dark\n"))

    def test_unknown_key_rejected(self, tmp_path):
        text = DEMO.replace("spacing = 0.2", "spacing = 0.2\ncolour = blue")
        with pytest.raises(ConfigError) as err:
            load_config(_write(tmp_path, text))
        assert "unknown keys" in str(err.value) and "colour" in str(err.value)

    def test_theory_cycle_detected(self, tmp_path):
        text = DEMO.replace(
            "[theory.ambient]\nkind = monomial\ncoeff = 2*delta\npsi = A\npower = 1",
            "[theory.ambient]\nkind = sum\nleft = ambient\nright = target",
        )
        with pytest.raises(ConfigError, match="defined in terms of itself"):
            load_config(_write(tmp_path, text))

    def test_bad_strategy_rejected(self, tmp_path):
        text = DEMO.replace("strategy = both", "strategy = magic")
        with pytest.raises(ConfigError, match="strategy 'magic'"):
            load_config(_write(tmp_path, text))

    def test_emergence_must_reference_defined_theories(self, tmp_path):
        text = DEMO.replace("ambient = ambient", "ambient = nope")
        with pytest.raises(ConfigError) as err:
            load_config(_write(tmp_path, text))
        assert "ambient references undefined theory 'nope'" in str(err.value)

    def test_samples_must_be_positive(self, tmp_path):
        text = DEMO.replace("samples = 30", "samples = 0")
        with pytest.raises(ConfigError, match="samples must be >= 1"):
            load_config(_write(tmp_path, text))


# ---------------------------------------------------------------------------
# report serialization


class TestReport:
    def test_serialize_scalars(self):
        assert serialize(None) == "null"
        assert serialize(True) == "true"
        assert serialize(7) == "7"
        assert serialize(0.1) == "%.17g" % 0.1
        assert serialize(1 + 2j) == "[1,2]"
        assert serialize([1.5, "x"]) == '[1.5,"x"]'

    def test_serialize_preserves_dict_order(self):
        assert serialize({"b": 1, "a": 2}) == '{"b":1,"a":2}'

    def test_serialize_rejects_foreign_types(self):
        with pytest.raises(TypeError):
            serialize(object())

    def test_render_extract_parse_roundtrip(self):
        body = {"x": np.pi, "z": 3 - 4j, "rows": [{"v": 1e-17}], "note": None}
        text = render_report(body, {"wall_seconds": 0.25})
        assert extract_body(text) == serialize(body)
        doc = parse_report(text)
        assert doc["body"]["x"] == pytest.approx(np.pi, rel=0, abs=0)
        assert doc["body"]["z"] == [3.0, -4.0]
        assert doc["timing"]["wall_seconds"] == 0.25

    def test_extract_body_rejects_foreign_text(self):
        with pytest.raises(ValueError):
            extract_body('{"nope": 1}')

    def test_write_map_csv(self, tmp_path):
        table = [
            {
                "eps": [[2.0, 0.5]],
                "image": [[1.0, 0.25], [3.0, 0.0]],
                "action_residual": 1e-12,
                "operator_residual": None,
            }
        ]
        path = tmp_path / "map.csv"
        write_map_csv(str(path), table)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "eps_0_re", "eps_0_im",
            "image_0_re", "image_0_im", "image_1_re", "image_1_im",
            "action_residual", "operator_residual",
        ]
        assert rows[1][0] == "2"
        assert rows[1][3] == "0.25"
        assert rows[1][-1] == ""

    def test_write_map_csv_rejects_empty_table(self, tmp_path):
        with pytest.raises(ValueError, match="empty map table"):
            write_map_csv(str(tmp_path / "map.csv"), [])


# ---------------------------------------------------------------------------
# command-line driver (in-process)


class TestSynthesizeCommand:
    def test_demo_verifies_and_prints_verdict(self, tmp_path, capsys):
        rc = main(["synthesize", "-c", _write(tmp_path, DEMO)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "verdict: verified" in out
        body = _body_of(out)
        assert body["verdict"] == "verified"
        # ambient coefficient is 2*delta, so the map halves every parameter
        for row in body["map_table"]:
            eps = complex(*row["eps"][0])
            img = complex(*row["image"][0])
            assert abs(img - eps / 2) <= 1e-12 * abs(eps)
        assert body["agreement"] is not None and body["agreement"] < 1e-9

    def test_strategy_override_flag(self, tmp_path, capsys):
        rc = main(
            ["synthesize", "-c", _write(tmp_path, DEMO), "--strategy", "oracle"]
        )
        out = capsys.readouterr().out
        assert rc == 0
        body = _body_of(out)
        assert body["combinator"] is None
        assert body["oracle"]["verdict"] == "verified"

    def test_report_csv_and_figures_written(self, tmp_path):
        out = tmp_path / "run.json"
        rc = main(["synthesize", "-c", _write(tmp_path, DEMO), "--out", str(out)])
        assert rc == 0
        assert out.exists()
        assert (tmp_path / "run.json.map.csv").exists()
        for fig in ("run.json.residuals.png", "run.json.map.png"):
            data = (tmp_path / fig).read_bytes()
            assert data.startswith(b"\x89PNG")

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "run.json"
        rc = main(
            ["synthesize", "-c", _write(tmp_path, DEMO), "--out", str(out),
             "--no-figures"]
        )
        assert rc == 0
        assert (tmp_path / "run.json.map.csv").exists()
        assert not (tmp_path / "run.json.residuals.png").exists()
        assert not (tmp_path / "run.json.map.png").exists()

    def test_non_emergent_pair_exits_two(self, tmp_path, capsys):
        rc = main(["synthesize", "-c", _write(tmp_path, NON_EMERGENT)])
        out = capsys.readouterr().out
        assert rc == 2
        assert "verdict: refuted" in out

    def test_same_seed_runs_are_byte_identical(self, tmp_path):
        cfg = _write(tmp_path, DEMO)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["synthesize", "-c", cfg, "--out", str(a), "--no-figures"]) == 0
        assert main(["synthesize", "-c", cfg, "--out", str(b), "--no-figures"]) == 0
        assert extract_body(a.read_text()) == extract_body(b.read_text())


class TestVerifyCommand:
    def _synthesized(self, tmp_path):
        cfg = _write(tmp_path, DEMO)
        out = tmp_path / "run.json"
        assert main(["synthesize", "-c", cfg, "--out", str(out), "--no-figures"]) == 0
        return cfg, out

    def test_fresh_seed_revalidates(self, tmp_path, capsys):
        cfg, out = self._synthesized(tmp_path)
        capsys.readouterr()
        rc = main(["verify", "-c", cfg, "--report", str(out)])
        text = capsys.readouterr().out
        assert rc == 0
        assert "verdict: verified" in text
        body = _body_of(text)
        assert body["command"] == "verify"
        # default verification seed differs from the synthesis seed
        assert body["run"]["seed"] == 4
        assert body["prior"]["verdict"] == "verified"

    def test_tampered_map_is_refuted(self, tmp_path, capsys):
        cfg, out = self._synthesized(tmp_path)
        doc = parse_report(out.read_text())
        for row in doc["body"]["map_table"]:
            row["image"] = [[1.01 * re, 1.01 * im] for re, im in row["image"]]
        out.write_text(render_report(doc["body"], doc["timing"]))
        capsys.readouterr()
        rc = main(["verify", "-c", cfg, "--report", str(out)])
        text = capsys.readouterr().out
        assert rc == 2
        assert "verdict: refuted" in text
        body = _body_of(text)
        worst = body["combinator"]["max_action_residual"]
        # a 1% perturbation of the image shows up as roughly a 1% residual
        assert 5e-3 < worst < 5e-2

    def test_config_digest_mismatch(self, tmp_path, capsys):
        _, out = self._synthesized(tmp_path)
        other = _write(tmp_path, DEMO.replace("seed = 3", "seed = 4"), "other.ini")
        rc = main(["verify", "-c", other, "--report", str(out)])
        err = capsys.readouterr().err
        assert rc == 1
        assert "different config" in err

    def test_empty_map_table(self, tmp_path, capsys):
        cfg, out = self._synthesized(tmp_path)
        doc = parse_report(out.read_text())
        doc["body"]["map_table"] = []
        out.write_text(render_report(doc["body"], doc["timing"]))
        rc = main(["verify", "-c", cfg, "--report", str(out)])
        assert rc == 1
        assert "empty map table" in capsys.readouterr().err

    def test_missing_report_file(self, tmp_path, capsys):
        cfg = _write(tmp_path, DEMO)
        rc = main(["verify", "-c", cfg, "--report", str(tmp_path / "absent.json")])
        assert rc == 1
        assert "cannot read report" in capsys.readouterr().err


class TestDriverErrors:
    def test_malformed_config(self, tmp_path, capsys):
        rc = main(["synthesize", "-c", _write(tmp_path, "npoints = 4\n")])
        assert rc == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["synthesize", "-c", str(tmp_path / "nope.ini")])
        assert rc == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_usage_error_on_bad_arguments(self, capsys):
        assert main(["synthesize"]) == 1
        assert "usage error" in capsys.readouterr().err
        assert main([]) == 1
        assert "a command is required" in capsys.readouterr().err

    def test_console_script_on_path(self):
        exe = shutil.which("emergekit")
        assert exe is not None
        proc = subprocess.run(
            [exe, "--help"], capture_output=True, text=True, timeout=60
        )
        assert proc.returncode == 0
        assert "synthesize" in proc.stdout and "verify" in proc.stdout


# ---------------------------------------------------------------------------
# bundled experiment configs


class TestBundledConfigs:
    def test_all_bundled_configs_load(self):
        import pathlib

        root = pathlib.Path(__file__).resolve().parents[1] / "configs"
        names = sorted(p.name for p in root.glob("*.ini"))
        assert names == [
            "composition_roots.ini",
            "monomial_demo.ini",
            "multivariate_pair.ini",
            "non_emergence.ini",
            "oracle_pair.ini",
            "sum_collapse.ini",
        ]
        for name in names:
            cfg = load_config(str(root / name))
            assert cfg.task.target in cfg.theories
            assert cfg.task.ambient in cfg.theories

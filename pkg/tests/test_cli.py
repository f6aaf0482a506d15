import csv
import json

import numpy as np
import pytest

from glossva.cli import load_config, main
from glossva.family import load_params

BASE_CONFIG = """
out = "{out}"
seed = 3

[model]
kind = "linear_gaussian"

[model.simulate]
n = 2
n_i = 3
seed = 11

[fit]
variants = ["G-VA", "G-VA^G-"]
iterations = 30
learning_rate = 0.05
monitor_stride = 15
monitor_samples = 3

[mcmc]
iterations = 1500
burn_in = 500
thinning = 2

[compare]
draws = 200
"""


def write_config(tmp_path, text=None, name="exp.toml", out="run"):
    path = tmp_path / name
    path.write_text((text or BASE_CONFIG).format(out=tmp_path / out))
    return path


class TestConfigErrors:
    def run_error(self, tmp_path, text, capsys, match):
        path = write_config(tmp_path, text)
        assert main(["fit", "--config", str(path)]) == 2
        assert match in capsys.readouterr().err

    def test_unknown_top_level_key(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG + "\nbogus = 1\n",
            capsys,
            "bogus",
        )

    def test_unknown_model_key(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace('kind = "linear_gaussian"',
                                'kind = "linear_gaussian"\nextra = 2'),
            capsys,
            "extra",
        )

    def test_unknown_simulate_key(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace("n_i = 3", "n_i = 3\neta = 0.5"),
            capsys,
            "eta",
        )

    def test_simulate_key_error_names_allowed_keys(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE_CONFIG.replace("n_i = 3", "n_i = 3\neta = 0.5"))
        main(["fit", "--config", str(path)])
        err = capsys.readouterr().err
        assert "sigma_b" in err and "tau" in err

    def test_bad_kind(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace('"linear_gaussian"', '"probit"'),
            capsys,
            "kind",
        )

    def test_data_and_simulate_both_given(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace('kind = "linear_gaussian"',
                                'kind = "linear_gaussian"\ndata = "x.csv"'),
            capsys,
            "exactly one",
        )

    def test_prior_restricted_to_logistic(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace('kind = "linear_gaussian"',
                                'kind = "linear_gaussian"\nprior = "huang_wand"'),
            capsys,
            "logistic",
        )

    def test_unknown_fit_key(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace("learning_rate = 0.05",
                                "learning_rate = 0.05\nmomentum = 0.9"),
            capsys,
            "momentum",
        )

    def test_unknown_variant_name(self, tmp_path, capsys):
        self.run_error(
            tmp_path,
            BASE_CONFIG.replace('"G-VA^G-"', '"G-VA^X"'),
            capsys,
            "G-VA^X",
        )

    def test_invalid_toml(self, tmp_path, capsys):
        self.run_error(tmp_path, "out = [unclosed", capsys, "error")

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["fit", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_invalid_thread_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GLOSS_THREADS", "many")
        self.run_error(tmp_path, BASE_CONFIG, capsys, "GLOSS_THREADS")


class TestLoadConfig:
    def test_defaults_and_overrides(self, tmp_path):
        path = write_config(tmp_path)
        config = load_config(path)
        assert config.seed == 3
        assert config.fit["variants"] == ["G-VA", "G-VA^G-"]
        assert config.compare["draws"] == 200


class TestFitCommand:
    def test_writes_artifacts_and_shares_posthoc(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["fit", "--config", str(path)]) == 0
        out = tmp_path / "run"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["seed"] == 3
        assert set(manifest["variants"]) == {"G-VA", "G-VA^G-"}
        assert "package" in manifest["versions"]
        base, _ = load_params(out / "G-VA" / "lambda.json")
        wrapped, meta = load_params(out / "G-VA_G-" / "lambda.json")
        assert wrapped.pack() == base.pack()
        assert meta["variant"] == "G-VA^G-"
        trace = (out / "G-VA" / "trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,elbo"

    def test_rerun_is_deterministic(self, tmp_path):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["fit", "--config", str(path), "--out", str(tmp_path / "b")])
        pa, _ = load_params(tmp_path / "a" / "G-VA" / "lambda.json")
        pb, _ = load_params(tmp_path / "b" / "G-VA" / "lambda.json")
        assert pa.pack() == pb.pack()

    def test_seed_flag_changes_fit(self, tmp_path):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["fit", "--config", str(path), "--out", str(tmp_path / "b"),
              "--seed", "99"])
        pa, _ = load_params(tmp_path / "a" / "G-VA" / "lambda.json")
        pb, _ = load_params(tmp_path / "b" / "G-VA" / "lambda.json")
        assert pa.pack() != pb.pack()

    def test_variant_flag_overrides_config(self, tmp_path):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path), "--variants", "CSG-VA"])
        out = tmp_path / "run"
        assert (out / "CSG-VA" / "lambda.json").exists()
        assert not (out / "G-VA").exists()


class TestMcmcCommand:
    def test_writes_draws_and_summary(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["mcmc", "--config", str(path)]) == 0
        out = tmp_path / "run"
        draws = np.loadtxt(out / "mcmc_draws.csv", delimiter=",", skiprows=1)
        assert draws.shape == (500, 3)  # (1500 - 500) / thinning 2, d + sum d_i
        summary = json.loads((out / "mcmc_summary.json").read_text())
        assert summary["retained_draws"] == 500
        assert summary["min_ess"] > 1.0


class TestSampleCommand:
    def test_labeled_draws(self, tmp_path):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path)])
        out_file = tmp_path / "draws.csv"
        code = main([
            "sample", "--config", str(path),
            "--params", str(tmp_path / "run" / "G-VA" / "lambda.json"),
            "--count", "25", "--out", str(out_file),
        ])
        assert code == 0
        with out_file.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["theta", "b[0]", "b[1]"]
        assert len(rows) == 26

    def test_signature_mismatch_rejected(self, tmp_path, capsys):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path)])
        other = write_config(
            tmp_path, BASE_CONFIG.replace("n = 2", "n = 3"), name="other.toml",
            out="other",
        )
        code = main([
            "sample", "--config", str(other),
            "--params", str(tmp_path / "run" / "G-VA" / "lambda.json"),
            "--count", "5", "--out", str(tmp_path / "x.csv"),
        ])
        assert code == 2
        assert "signature" in capsys.readouterr().err

    def test_requires_out_file(self, tmp_path, capsys):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path)])
        code = main([
            "sample", "--config", str(path),
            "--params", str(tmp_path / "run" / "G-VA" / "lambda.json"),
            "--count", "5",
        ])
        assert code == 2


class TestCompareCommand:
    def test_end_to_end_report(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["compare", "--config", str(path)]) == 0
        report = tmp_path / "run" / "report"
        with (report / "marginals.csv").open(newline="") as fh:
            rows = list(csv.reader(fh))
        variants = {r[0] for r in rows[1:]}
        assert variants == {"G-VA", "G-VA^G-"}
        sources = {r[2] for r in rows[1:]}
        assert sources == {"vi", "oracle"}
        with (report / "ks.csv").open(newline="") as fh:
            ks_rows = list(csv.reader(fh))[1:]
        # one row per variant and coordinate, with p-values in [0, 1]
        assert len(ks_rows) == 2 * 3
        assert all(0.0 <= float(r[3]) <= 1.0 for r in ks_rows)
        manifest = json.loads((report / "manifest.json").read_text())
        assert manifest["command"] == "compare"

    def test_reuses_existing_artifacts(self, tmp_path):
        path = write_config(tmp_path)
        main(["fit", "--config", str(path)])
        main(["mcmc", "--config", str(path)])
        lam = tmp_path / "run" / "G-VA" / "lambda.json"
        before = lam.read_bytes()
        main(["compare", "--config", str(path)])
        assert lam.read_bytes() == before

"""Config round-trips, validation, densities, artifacts, sweep, and CLI."""

import json
import math

import numpy as np
import pytest

from eigenpower import fdm
from eigenpower.errors import ConfigError
from eigenpower.harness import (compare_densities, config_from_dict,
                                config_to_dict, density_histogram, registry,
                                validate_config)
from eigenpower.harness import cli, runner
from eigenpower.harness.config import (ArchitectureConfig, ExactConfig,
                                       ExperimentConfig, OutputsConfig,
                                       ProblemConfig, TrainingSection,
                                       load_config, save_config, with_profile)


def micro_config(name="micro", **training_overrides):
    training = dict(method="ipmnn", n_samples=128, n_epochs=120,
                    learning_rate=1e-3, seed=5, record_every=40)
    training.update(training_overrides)
    return ExperimentConfig(
        name=name,
        problem=ProblemConfig(operator="neg_laplacian", dimension=1,
                              boundary="dirichlet"),
        architecture=ArchitectureConfig(layer_sizes=(1, 8, 8, 1)),
        training=TrainingSection(**training),
        exact=ExactConfig(name="product_of_sines"),
        outputs=OutputsConfig(histogram_bins=20, density_points=2000),
    )


class TestConfig:
    def test_registry_entries_validate_and_roundtrip(self):
        entries = registry()
        assert len(entries) == 16
        for name, entry in entries.items():
            validate_config(entry)
            again = config_from_dict(json.loads(json.dumps(config_to_dict(entry))))
            assert again == entry, name

    def test_file_roundtrip(self, tmp_path):
        cfg = micro_config()
        path = tmp_path / "exp.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_registry_full_scale_settings(self):
        entries = registry()
        assert entries["pmnn-d1"].training.n_samples == 10000
        assert entries["pmnn-d1"].training.n_epochs == 50000
        assert entries["pmnn-d1"].architecture.layer_sizes == (1, 20, 20, 20, 20, 1)
        assert entries["pmnn-d10"].architecture.layer_sizes == (10, 80, 80, 80, 80, 1)
        assert entries["pmnn-d10"].training.n_epochs == 100000
        assert entries["ipmnn-fp-d1"].architecture.layer_sizes == (6, 20, 20, 20, 20, 1)
        assert entries["ipmnn-fp-d2"].architecture.layer_sizes == (12, 40, 40, 40, 40, 1)
        assert entries["ipmnn-fp-d5"].architecture.layer_sizes == (30, 60, 60, 60, 60, 1)
        assert entries["ipmnn-fp-d1"].problem.shift == 1.0
        assert entries["ipmnn-interior-a36"].problem.shift == 36.0
        assert entries["ipmnn-interior-a225"].exact.modes == (5,)

    def test_desk_profile_rescales(self):
        cfg = with_profile(registry()["ipmnn-d1"], "desk")
        assert cfg.training.n_samples == 2000
        assert cfg.training.n_epochs == 20000
        assert cfg.architecture.layer_sizes == (1, 20, 20, 20, 20, 1)

    def test_periodic_width_violation_names_expected_width(self):
        cfg = ExperimentConfig(
            name="bad",
            problem=ProblemConfig(operator="fokker_planck", dimension=1,
                                  boundary="periodic", shift=1.0),
            architecture=ArchitectureConfig(layer_sizes=(5, 8, 1), modes=3),
            training=TrainingSection(method="ipmnn", n_samples=10, n_epochs=10),
            exact=None,
        )
        with pytest.raises(ConfigError, match="6"):
            validate_config(cfg)

    def test_validation_collects_every_violation(self):
        cfg = ExperimentConfig(
            name="worse",
            problem=ProblemConfig(operator="unknown_op", dimension=0,
                                  boundary="nowhere"),
            architecture=ArchitectureConfig(layer_sizes=(2, 3)),
            training=TrainingSection(method="sgd", n_samples=0, n_epochs=0,
                                     learning_rate=-1.0),
        )
        with pytest.raises(ConfigError) as err:
            validate_config(cfg)
        assert len(err.value.violations) >= 6


class TestDensity:
    def test_constant_single_bin(self):
        edges, heights = density_histogram(np.full(500, 2.5), bins=10)
        width = edges[1] - edges[0]
        occupied = heights[heights > 0]
        assert occupied.size == 1
        assert occupied[0] == pytest.approx(1.0 / width)

    def test_heights_integrate_to_one(self):
        rng = np.random.default_rng(0)
        edges, heights = density_histogram(rng.normal(size=5000), bins=37)
        widths = np.diff(edges)
        assert float(heights @ widths) == pytest.approx(1.0, abs=1e-12)

    def test_sine_density_matches_monte_carlo_oracle(self):
        # density of sqrt(2) sin(pi X), X uniform on (0,1): compare a histogram
        # of 2e6 evaluations against an independent 1e7-draw Monte Carlo oracle
        rng_a = np.random.default_rng(100)
        rng_b = np.random.default_rng(200)
        vals = math.sqrt(2) * np.sin(math.pi * rng_a.random(2_000_000))
        oracle = math.sqrt(2) * np.sin(math.pi * rng_b.random(10_000_000))
        edges = np.linspace(0.0, math.sqrt(2), 51)
        h_vals, _ = np.histogram(vals, bins=edges, density=True)
        h_orc, _ = np.histogram(oracle, bins=edges, density=True)
        rel = np.abs(h_vals - h_orc) / h_orc
        assert rel.max() < 0.02

    def test_compare_identical_is_zero(self):
        v = np.random.default_rng(1).normal(size=4000)
        assert compare_densities(v, v.copy(), bins=50) == 0.0

    def test_sign_flip_removed_by_alignment(self):
        from eigenpower.training import sign_align
        v = np.sin(np.linspace(0.1, 3.0, 2000))
        flipped = -v
        aligned = sign_align(flipped, v)
        assert compare_densities(aligned, v, bins=50) == 0.0


class TestRunner:
    def test_run_emits_artifacts(self, tmp_path):
        report = runner.run(micro_config(), tmp_path)
        d = report.artifacts["directory"]
        for key in ("records_csv", "eigenfunction_csv", "density_csv", "checkpoint"):
            with open(report.artifacts[key]) as fh:
                assert fh.read(1)
        payload = runner.load_report(d)
        assert payload["final_lambda"] == report.final_lambda
        assert report.relative_error is not None
        header = open(report.artifacts["records_csv"]).readline().strip()
        assert header == "epoch,loss,lambda,lambda_err_max,u_err_max"
        dheader = open(report.artifacts["density_csv"]).readline().strip()
        assert dheader == "bin_left,bin_right,density,exact_density"

    def test_rerun_never_overwrites(self, tmp_path):
        r1 = runner.run(micro_config(n_epochs=30), tmp_path)
        r2 = runner.run(micro_config(n_epochs=30), tmp_path)
        assert r1.artifacts["directory"] != r2.artifacts["directory"]
        assert (tmp_path / "micro").exists() and (tmp_path / "micro-2").exists()

    def test_same_seed_identical_records_csv(self, tmp_path):
        r1 = runner.run(micro_config(n_epochs=60), tmp_path / "a")
        r2 = runner.run(micro_config(n_epochs=60), tmp_path / "b")
        b1 = open(r1.artifacts["records_csv"], "rb").read()
        b2 = open(r2.artifacts["records_csv"], "rb").read()
        assert b1 == b2

    def test_seventeen_digit_formatting(self, tmp_path):
        report = runner.run(micro_config(n_epochs=30), tmp_path)
        line = open(report.artifacts["records_csv"]).readlines()[1]
        loss_field = line.strip().split(",")[1]
        assert float(loss_field) == float(loss_field)   # parses
        assert len(loss_field.replace(".", "").replace("-", "").lstrip("0")) >= 10

    def test_run_without_exact_solution(self, tmp_path):
        from dataclasses import replace
        cfg = replace(micro_config(n_epochs=30), exact=None)
        report = runner.run(cfg, tmp_path)
        assert report.relative_error is None
        dheader = open(report.artifacts["density_csv"]).readline().strip()
        assert dheader == "bin_left,bin_right,density"
        lines = open(report.artifacts["records_csv"]).readlines()
        assert lines[1].strip().split(",")[3] == "nan"   # no exact lambda

    def test_interior_config_runs_through_shift_path(self, tmp_path):
        cfg = ExperimentConfig(
            name="interior-micro",
            problem=ProblemConfig(operator="neg_laplacian", dimension=1,
                                  boundary="dirichlet", shift=36.0),
            architecture=ArchitectureConfig(layer_sizes=(1, 8, 8, 1)),
            training=TrainingSection(method="ipmnn", n_samples=128, n_epochs=60,
                                     seed=2, record_every=30),
            exact=ExactConfig(name="product_of_sines", modes=(2,)),
            outputs=OutputsConfig(histogram_bins=10, density_points=1000),
        )
        report = runner.run(cfg, tmp_path)
        assert math.isfinite(report.final_lambda)


class TestSweep:
    def test_fdm_column_matches_analytic_and_rows_deterministic(self, tmp_path):
        cfg = micro_config(name="sweep-base")
        from dataclasses import replace
        cfg = replace(cfg,
                      problem=ProblemConfig(operator="neg_laplacian", dimension=2,
                                            boundary="dirichlet"),
                      architecture=ArchitectureConfig(layer_sizes=(2, 8, 8, 1)),
                      training=replace(cfg.training, n_epochs=40))
        rows1 = runner.fdm_vs_nn_sweep((4, 6), cfg, tmp_path / "s1.csv")
        rows2 = runner.fdm_vs_nn_sweep((4, 6), cfg, tmp_path / "s2.csv")
        assert rows1 == rows2
        assert open(tmp_path / "s1.csv").read() == open(tmp_path / "s2.csv").read()
        lam_true = 2 * math.pi ** 2
        for n_h, fdm_lam_err, fdm_u_err, _, _ in rows1:
            expected = abs(fdm.smallest_discrete_eigenvalue(2, n_h) - lam_true)
            assert fdm_lam_err == pytest.approx(expected, abs=1e-8)
            assert fdm_u_err <= 1e-8
        header = open(tmp_path / "s1.csv").readline().strip()
        assert header == "n_h,fdm_lambda_err,fdm_u_err,nn_lambda_err,nn_u_err"

    def test_dimension_guard(self, tmp_path):
        with pytest.raises(ConfigError):
            runner.fdm_vs_nn_sweep((4,), micro_config(), tmp_path / "x.csv")


class TestCli:
    def test_list_exits_zero(self, capsys):
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out
        assert "pmnn-d1" in out and "ipmnn-fp-d10" in out

    def test_run_micro_config_file(self, tmp_path, capsys):
        path = tmp_path / "micro.json"
        save_config(micro_config(n_epochs=30), path)
        code = cli.main(["run", str(path), "--out", str(tmp_path / "runs")])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip())
        assert "final_lambda" in payload

    def test_invalid_config_machine_readable_error(self, tmp_path, capsys):
        bad = config_to_dict(micro_config())
        bad["problem"]["operator"] = "nonsense"
        path = tmp_path / "bad.json"
        with open(path, "w") as fh:
            json.dump(bad, fh)
        code = cli.main(["run", str(path)])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config"
        assert any("operator" in v for v in err["violations"])

    def test_malformed_json_config(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        code = cli.main(["run", str(path)])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "parse"

    def test_report_verb(self, tmp_path, capsys):
        report = runner.run(micro_config(n_epochs=30), tmp_path)
        code = cli.main(["report", report.artifacts["directory"]])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["final_lambda"] == report.final_lambda

    def test_seed_flag_changes_run(self, tmp_path, capsys):
        path = tmp_path / "m.json"
        save_config(micro_config(n_epochs=30), path)
        assert cli.main(["run", str(path), "--out", str(tmp_path / "r1"),
                         "--seed", "1"]) == 0
        out1 = json.loads(capsys.readouterr().out.strip())
        assert cli.main(["run", str(path), "--out", str(tmp_path / "r2"),
                         "--seed", "2"]) == 0
        out2 = json.loads(capsys.readouterr().out.strip())
        assert out1["final_lambda"] != out2["final_lambda"]

import json
import os

import pytest

from cellsec import cli

BASE = {
    "n_antennas": 8,
    "users_per_cell": 8,
    "path_loss_exp": 4.0,
    "bs_density": 0.1,
}


def write_spec(tmp_path, name="exp", **overrides):
    spec = {
        "name": name,
        "kind": "rate_vs_snr",
        "base": dict(BASE),
        "sweep": {"key": "snr_db", "values": [0.0, 10.0]},
        "mc": {"n_geometries": 40, "n_fadings": 3, "seed": 5},
        "paths": ["montecarlo_ball", "analytic"],
    }
    spec.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(spec))
    return str(path)


class TestValidate:
    def test_well_formed_spec_is_clean(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(tmp_path))
        assert cli.validate_spec(spec) == []

    def test_path_loss_violation_named(self, tmp_path):
        path = write_spec(tmp_path, base=dict(BASE, path_loss_exp=2.0))
        problems = cli.validate_spec(cli.load_experiment_spec(path))
        assert any("moment" in p for p in problems)

    def test_snr_exclusivity(self, tmp_path):
        path = write_spec(tmp_path, base=dict(BASE, snr_db=3.0, snr_linear=2.0),
                          kind="cdf_validation",
                          sweep={"key": "bs_density", "values": [0.1]})
        problems = cli.validate_spec(cli.load_experiment_spec(path))
        assert any("mutually exclusive" in p for p in problems)

    def test_empty_sweep(self, tmp_path):
        path = write_spec(tmp_path, sweep={"key": "snr_db", "values": []})
        problems = cli.validate_spec(cli.load_experiment_spec(path))
        assert any("nonempty" in p for p in problems)

    def test_missing_seed_for_mc(self, tmp_path):
        path = write_spec(tmp_path, mc={"n_geometries": 10, "n_fadings": 2})
        problems = cli.validate_spec(cli.load_experiment_spec(path))
        assert any("seed" in p for p in problems)

    def test_validate_command_exit_codes(self, tmp_path, capsys):
        good = write_spec(tmp_path, name="good")
        assert cli.main(["validate", good]) == 0
        assert "ok" in capsys.readouterr().out
        bad = write_spec(tmp_path, name="bad", sweep={"key": "snr_db", "values": []})
        assert cli.main(["validate", bad]) == cli.EXIT_CONFIG

    def test_unreadable_spec(self, tmp_path):
        assert cli.main(["validate", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


class TestRun:
    def test_run_writes_csv_and_figure(self, tmp_path):
        spec = write_spec(tmp_path)
        out = tmp_path / "out"
        assert cli.main(["run", spec, "--out", str(out)]) == 0
        csv_path = out / "exp.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("# cellsec")
        assert lines[1].startswith("# spec:")
        assert "x,y,y_err,series" in lines[2:4]
        data = [l for l in lines if not l.startswith("#") and "," in l][1:]
        # one row per sweep value and path
        assert len(data) == 4
        assert (out / "exp.png").exists()

    def test_no_plot_flag(self, tmp_path):
        spec = write_spec(tmp_path, name="noplot")
        out = tmp_path / "out2"
        assert cli.main(["run", spec, "--out", str(out), "--no-plot"]) == 0
        assert not (out / "noplot.png").exists()

    def test_deterministic_output(self, tmp_path):
        spec = write_spec(tmp_path, name="det")
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", spec, "--out", str(out_a), "--no-plot"]) == 0
        assert cli.main(["run", spec, "--out", str(out_b), "--no-plot"]) == 0
        assert (out_a / "det.csv").read_bytes() == (out_b / "det.csv").read_bytes()

    def test_worker_count_invariance(self, tmp_path):
        spec = write_spec(tmp_path, name="pool")
        out_a, out_b = tmp_path / "w1", tmp_path / "w2"
        assert cli.main(["run", spec, "--out", str(out_a), "--no-plot", "--workers", "1"]) == 0
        assert cli.main(["run", spec, "--out", str(out_b), "--no-plot", "--workers", "2"]) == 0
        assert (out_a / "pool.csv").read_bytes() == (out_b / "pool.csv").read_bytes()

    def test_invalid_spec_exits_2(self, tmp_path):
        spec = write_spec(tmp_path, name="badrun", sweep={"key": "snr_db", "values": []})
        assert cli.main(["run", spec, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG

    def test_seed_override(self, tmp_path):
        spec = write_spec(tmp_path, name="seeded")
        out_a, out_b = tmp_path / "s1", tmp_path / "s2"
        assert cli.main(["run", spec, "--out", str(out_a), "--no-plot", "--seed", "99"]) == 0
        assert cli.main(["run", spec, "--out", str(out_b), "--no-plot", "--seed", "100"]) == 0
        assert (out_a / "seeded.csv").read_text() != (out_b / "seeded.csv").read_text()


class TestKinds:
    def test_outage_kind(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(
            tmp_path, name="outage", kind="outage_vs_snr",
            paths=["montecarlo_ball", "analytic"],
        ))
        rows, meta, failure = cli.run_experiment(spec)
        assert failure is None
        assert {r["series"] for r in rows} == {"montecarlo_ball", "analytic"}
        assert all(0.0 <= r["y"] <= 1.0 for r in rows)

    def test_lower_bound_path_on_rates(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(
            tmp_path, name="lb", paths=["analytic", "lower_bound"],
            sweep={"key": "snr_db", "values": [5.0]},
        ))
        rows, _, failure = cli.run_experiment(spec)
        assert failure is None
        by_series = {r["series"]: r["y"] for r in rows}
        assert by_series["lower_bound"] <= by_series["analytic"] + 1e-6

    def test_cdf_validation_kind(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(
            tmp_path, name="cdf", kind="cdf_validation",
            base=dict(BASE, snr_db=10.0),
            sweep={"key": "bs_density", "values": [0.1]},
            mc={"n_geometries": 40, "n_fadings": 20, "seed": 3},
            paths=["montecarlo_ball"],
        ))
        out = tmp_path / "cdfout"
        out.mkdir()
        rows, _, failure = cli.run_experiment(spec, out_dir=str(out))
        assert failure is None
        series = {r["series"] for r in rows}
        assert series == {"interference_ks", "leakage_ks"}
        assert all(0.0 <= r["y"] <= 1.0 for r in rows)
        dumps = list(out.glob("samples_*.txt"))
        assert len(dumps) == 2

    def test_laplace_validation_kind(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(
            tmp_path, name="lap", kind="laplace_validation",
            base=dict(BASE, snr_db=10.0),
            sweep={"key": "s", "values": [0.1, 1.0]},
            mc={"n_geometries": 100, "n_fadings": 20, "seed": 4},
            paths=["montecarlo_ball"],
        ))
        rows, _, failure = cli.run_experiment(spec)
        assert failure is None
        closed = {r["x"]: r["y"] for r in rows if r["series"] == "interference_transform"}
        emp = {r["x"]: r["y"] for r in rows if r["series"] == "interference_empirical"}
        for s in (0.1, 1.0):
            assert closed[s] == pytest.approx(emp[s], rel=0.05)

    def test_percolation_kind(self, tmp_path):
        spec = cli.load_experiment_spec(write_spec(
            tmp_path, name="perc", kind="percolation",
            base={"n_antennas": 1, "users_per_cell": 1, "snr_db": 0.0,
                  "path_loss_exp": 4.0, "bs_density": 28.0},
            sweep={"key": "coop_radius", "values": [1.0]},
            mc={"n_geometries": 5, "n_fadings": 1, "seed": 6},
            paths=["montecarlo_ball"],
            percolation={"window_extent_in_coop_radii": 12.0},
        ))
        rows, _, failure = cli.run_experiment(spec)
        assert failure is None
        frac = next(r for r in rows if r["series"] == "cluster_fraction")
        flag = next(r for r in rows if r["series"] == "supercritical")
        assert frac["y"] > 0.9
        assert flag["y"] == 1.0


class TestPresets:
    @pytest.mark.parametrize("name", ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"])
    def test_presets_load_and_validate(self, name):
        spec = cli.load_experiment_spec(cli.preset_path(name))
        assert cli.validate_spec(spec) == []

    def test_preset_name_resolution(self):
        assert cli._resolve_spec_arg("fig5").endswith("fig5.json")
        assert cli._resolve_spec_arg("nonexistent") == "nonexistent"


class TestEnvironment:
    def test_env_worker_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_WORKERS, "2")
        spec = write_spec(tmp_path, name="env")
        out = tmp_path / "envout"
        assert cli.main(["run", spec, "--out", str(out), "--no-plot"]) == 0
        assert (out / "env.csv").exists()

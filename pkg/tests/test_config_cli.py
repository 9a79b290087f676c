"""Tests for run configuration, output writers and the CLI commands."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from unittest.mock import patch

import pytest
from scipy.linalg import LinAlgError

from src import rng
from src.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from src.config import (
    THREADS_ENV,
    RunConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    config_to_dict,
    field_source,
    load_config,
    make_domain,
    make_dual,
    make_engine,
    make_flow,
    make_ipm_params,
)
from src.errors import ConfigError, DegeneracyError
from src.outputs import finish_run, write_csv

ZERO_FLOW = {"base": "zero", "dim": 2}
TINY_IPM = {"n_particles": 64, "n_generations": 3, "n_mutations": 2}
TWO_PI = 2.0 * math.pi


def _write_config(tmp_path: Path, doc: dict, name: str = "config.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _only_dir(root: Path, command: str) -> Path:
    (found,) = list(root.glob(f"{command}-*"))
    return found


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


# -----------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------


class TestConfig:
    """Tests for parsing, validation and hashing of RunConfig."""

    def test_defaults_round_trip(self) -> None:
        cfg = RunConfig()
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_nested_round_trip(self) -> None:
        doc = {
            "seed": 7,
            "flow": {"base": "cellular2d", "delta": 4.0, "epsilon": 0.5},
            "ipm": {"n_particles": 100, "dynamic_shift": True, "init": "gaussian"},
            "domain": {"kind": "unbounded"},
            "front_speed": {"lambda_grid": [0.5, 1, 2], "e_search": "local_cone", "fit_min_delta": 2},
        }
        cfg = config_from_dict(doc)
        assert cfg.front_speed.lambda_grid == (0.5, 1.0, 2.0)
        assert cfg.front_speed.fit_min_delta == 2.0
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_lambda_key(self) -> None:
        cfg = config_from_dict({"dual": {"lambda": 0.75, "e": [0, 1]}})
        assert cfg.dual.lam == 0.75
        assert config_from_dict({"dual": {"lam": 0.75, "e": [0, 1]}}) == cfg
        doc = config_to_dict(cfg)
        assert doc["dual"] == {"lambda": 0.75, "e": [0.0, 1.0]}

    def test_lambda_given_twice(self) -> None:
        with pytest.raises(ConfigError, match="not both"):
            config_from_dict({"dual": {"lambda": 1.0, "lam": 1.0}})

    def test_flow_perturbation_section(self) -> None:
        cfg = config_from_dict({"flow": {"perturbation": {"spectrum": "gauss", "n_f": 30, "seed": 8}}})
        assert cfg.flow.perturbation.spectrum == "gauss"
        assert cfg.flow.perturbation.n_f == 30
        assert cfg.flow.perturbation.seed == 8
        assert config_from_dict(config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize(
        "doc",
        [
            {"flow": {"perturbation": {"seed": -1}}},
            {"flow": {"perturbation": {"spectrum": "kolmogorov"}}},
            {"flow": {"perturbation": {"n_f": -2}}},
            {"flow": {"perturbation": {"wavenumber": 3}}},
            {"ipm": {"seed": -4}},
            {"eulerian": {"n_steps": 12, "burn_in": 0.5}},
        ],
    )
    def test_new_section_errors(self, doc: dict) -> None:
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_full_document(self, tmp_path: Path) -> None:
        doc = {
            "flow": {
                "base": "shear2d_zero_base", "dim": 2, "delta": 2.0, "epsilon": 1.0,
                "perturbation": {"spectrum": "k05exp", "delta_k": 0.015915494309189534, "n_f": 20, "seed": 3},
            },
            "kpp": {"kappa": 1.0, "f_prime0": 1.0},
            "dual": {"lambda": 1.25, "e": [1, 0]},
            "ipm": {"n_particles": 64, "n_generations": 2, "n_mutations": 2, "seed": 5, "dynamic_shift": False},
            "domain": {"kind": "torus"},
        }
        cfg = load_config(_write_config(tmp_path, doc))
        flow = make_flow(cfg)
        assert flow.perturbation.seed == 3
        assert flow.perturbation.n_f == 20
        assert make_dual(cfg).lam == 1.25
        assert make_ipm_params(cfg).seed == 5
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_unknown_nested_key(self) -> None:
        with pytest.raises(ConfigError, match="unknown key 'ipm.bogus'"):
            config_from_dict({"ipm": {"bogus": 1}})

    def test_unknown_top_level_key(self) -> None:
        with pytest.raises(ConfigError, match="unknown key 'verbose'"):
            config_from_dict({"verbose": True})

    @pytest.mark.parametrize(
        "doc",
        [
            {"seed": "3"},
            {"seed": 1.5},
            {"ipm": {"dynamic_shift": 1}},
            {"dual": {"lam": "one"}},
            {"dual": {"e": 1.0}},
            {"stats": {"hist_range": [0.0]}},
            {"ipm": []},
        ],
    )
    def test_type_errors(self, doc: dict) -> None:
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    @pytest.mark.parametrize(
        "doc, where",
        [
            ({"ipm": {"n_particles": 1}}, "ipm"),
            ({"ipm": {"tail": 0}}, "ipm"),
            ({"kpp": {"kappa": 0.0}}, "kpp"),
            ({"field": {"spectrum": "kolmogorov"}}, "Available"),
            ({"front_speed": {"estimator": "mc"}}, "estimator"),
            ({"front_speed": {"z": [1.0, 1.0]}}, "front_speed"),
            ({"eulerian": {"methods": ["fdm"]}}, "methods"),
            ({"seed": -1}, "seed"),
        ],
    )
    def test_range_errors(self, doc: dict, where: str) -> None:
        with pytest.raises(ConfigError, match=where):
            config_from_dict(doc)

    def test_hash_is_stable_and_seed_sensitive(self) -> None:
        assert config_hash(RunConfig()) == config_hash(RunConfig())
        assert len(config_hash(RunConfig())) == 64
        assert config_hash(RunConfig(seed=1)) != config_hash(RunConfig())

    def test_hash_ignores_threads(self) -> None:
        assert config_hash(RunConfig(threads=8)) == config_hash(RunConfig())

    def test_load_config(self, tmp_path: Path) -> None:
        assert load_config(None) == RunConfig()
        path = _write_config(tmp_path, {"seed": 5})
        assert load_config(path).seed == 5
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")


class TestOverrides:
    """Tests for flag / environment precedence."""

    def test_env_threads(self, monkeypatch, capsys) -> None:
        monkeypatch.setenv(THREADS_ENV, "3")
        assert apply_overrides(RunConfig()).threads == 3
        assert f"[config] threads=3 from {THREADS_ENV}" in capsys.readouterr().out

    def test_flag_beats_env(self, monkeypatch) -> None:
        monkeypatch.setenv(THREADS_ENV, "3")
        assert apply_overrides(RunConfig(), threads=2).threads == 2

    def test_bad_env(self, monkeypatch) -> None:
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig())

    def test_seed_override(self, monkeypatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        cfg = apply_overrides(RunConfig(), seed=9)
        assert cfg.seed == 9
        assert cfg.threads == 1

    def test_wrap_override(self, monkeypatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert apply_overrides(RunConfig(), wrap_snapshot=True).ipm.wrap_snapshot
        assert apply_overrides(RunConfig()) == RunConfig()

    def test_bad_threads_flag(self, monkeypatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig(), threads=0)


class TestDomainObjects:
    """Tests for building flows, domains and engines from a config."""

    def test_perturbation_uses_field_seed(self) -> None:
        cfg = config_from_dict({"seed": 4, "flow": {"epsilon": 1.0}, "field": {"n_f": 20}})
        flow = make_flow(cfg)
        assert flow.perturbation.seed == rng.derive_seed(4, "field")
        assert flow.perturbation.n_f == 20

    def test_perturbation_section_beats_field(self) -> None:
        cfg = config_from_dict({
            "seed": 4,
            "flow": {"epsilon": 1.0, "perturbation": {"n_f": 12}},
            "field": {"n_f": 20},
        })
        flow = make_flow(cfg)
        assert flow.perturbation.n_f == 12
        assert flow.perturbation.seed == rng.derive_seed(4, "field")
        assert field_source(cfg) == ("k05exp", cfg.flow.perturbation.delta_k, 12, rng.derive_seed(4, "field"))

    def test_explicit_seeds_win(self) -> None:
        cfg = config_from_dict({
            "seed": 4,
            "flow": {"epsilon": 1.0, "perturbation": {"n_f": 12, "seed": 77}},
            "ipm": {"seed": 13},
        })
        assert make_flow(cfg).perturbation.seed == 77
        assert make_engine(cfg).ipm.seed == 13

    def test_e_search_follows_flow(self) -> None:
        cellular = config_from_dict({"flow": {"base": "cellular2d"}})
        assert cellular.front_speed.query(make_flow(cellular)).e_search.kind == "local_cone"
        shear = config_from_dict({"flow": {"base": "shear2d_zero_base", "epsilon": 1.0}, "field": {"n_f": 10}})
        assert shear.front_speed.query(make_flow(shear)).e_search.kind == "fixed_to_z"
        pinned = config_from_dict({"flow": {"base": "cellular2d"}, "front_speed": {"e_search": "fixed_to_z"}})
        assert pinned.front_speed.query(make_flow(pinned)).e_search.kind == "fixed_to_z"

    def test_no_perturbation_without_epsilon(self) -> None:
        assert make_flow(RunConfig()).perturbation is None

    def test_unknown_base_flow(self) -> None:
        with pytest.raises(ConfigError, match="Available"):
            make_flow(config_from_dict({"flow": {"base": "taylor_green"}}))

    def test_domain_defaults_to_flow_period(self) -> None:
        cfg = RunConfig()
        domain = make_domain(cfg, make_flow(cfg))
        assert domain.is_torus
        assert domain.period == make_flow(cfg).period

    def test_engine_and_params(self) -> None:
        cfg = config_from_dict({"seed": 2, "threads": 3, "ipm": {"tail": 4}, "domain": {"kind": "unbounded"}})
        engine = make_engine(cfg)
        assert engine.threads == 3
        assert engine.ipm_tail == 4
        assert engine.ipm_domain == "unbounded"
        assert engine.ipm.seed == make_ipm_params(cfg).seed == rng.derive_seed(2, "ipm")


# -----------------------------------------------------------------------
# Output writers
# -----------------------------------------------------------------------


class TestOutputs:
    """Tests for CSV cells and the run manifest."""

    def test_csv_cells(self, tmp_path: Path) -> None:
        path = write_csv(tmp_path / "t.csv", ["a", "b", "c"], [(0.1, 3, True)])
        assert path.read_text(encoding="utf-8") == "a,b,c\n0.1,3,true\n"

    def test_manifest(self, tmp_path: Path) -> None:
        cfg = RunConfig(threads=4)
        table = write_csv(tmp_path / "t.csv", ["x"], [(1.0,)])
        manifest = finish_run(tmp_path, "stats", cfg, [table], 0.5, {"ipm": 1})
        doc = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        assert doc["config_hash"] == config_hash(cfg)
        assert set(doc["outputs"]) == {"t.csv", "config.json"}
        assert manifest.seeds == {"ipm": 1}
        assert "threads" not in json.loads((tmp_path / "config.json").read_text(encoding="utf-8"))


# -----------------------------------------------------------------------
# CLI
# -----------------------------------------------------------------------


class TestCli:
    """End-to-end tests for every subcommand and the exit codes."""

    @pytest.fixture(autouse=True)
    def _no_env_threads(self, monkeypatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)

    def test_parser_lists_commands(self) -> None:
        args = build_parser().parse_args(["stats", "--seed", "3"])
        assert args.command == "stats" and args.seed == 3 and args.out == "runs"
        with pytest.raises(SystemExit):
            build_parser().parse_args(["plot"])

    def test_run_ipm_zero_flow(self, tmp_path: Path, capsys) -> None:
        config = _write_config(tmp_path, {"flow": ZERO_FLOW, "ipm": TINY_IPM})
        assert main(["run-ipm", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "run-ipm")
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert summary["mu"] == pytest.approx(2.0, abs=1e-9)
        rows = _read_csv(out / "mu_trace.csv")
        assert len(rows) == 3
        assert all(float(r["mu"]) == pytest.approx(2.0, abs=1e-9) for r in rows)
        assert len(_read_csv(out / "pfgr.csv")) == 6
        assert len(_read_csv(out / "snapshot.csv")) == 64
        assert "[cli] run-ipm done" in capsys.readouterr().out

    def test_wrap_flag_only_on_run_ipm(self) -> None:
        assert build_parser().parse_args(["run-ipm", "--wrap"]).wrap is True
        assert build_parser().parse_args(["run-ipm"]).wrap is False
        with pytest.raises(SystemExit):
            build_parser().parse_args(["stats", "--wrap"])

    def test_run_ipm_wrap_snapshot(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": {"base": "cellular2d", "delta": 4.0},
            "dual": {"lambda": 2.0, "e": [1, 0]},
            "domain": {"kind": "unbounded"},
            "ipm": {"n_particles": 256, "n_generations": 8, "n_mutations": 8, "dynamic_shift": True},
        })
        argv = ["run-ipm", "--config", config]
        assert main(argv + ["--out", str(tmp_path / "raw")]) == EXIT_OK
        assert main(argv + ["--out", str(tmp_path / "wrapped"), "--wrap"]) == EXIT_OK
        raw = _read_csv(_only_dir(tmp_path / "raw", "run-ipm") / "snapshot.csv")
        wrapped = _read_csv(_only_dir(tmp_path / "wrapped", "run-ipm") / "snapshot.csv")
        # The shift carries the cloud out of the first cell along x.
        assert max(float(r["x1"]) for r in raw) >= TWO_PI
        values = [float(r[k]) for r in wrapped for k in ("x1", "x2")]
        assert all(0.0 <= v < TWO_PI for v in values)
        for a, b in zip(raw, wrapped):
            assert float(b["x1"]) == pytest.approx(float(a["x1"]) % TWO_PI, abs=1e-9)

    def test_front_speed_full_document(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": {
                "base": "shear2d_zero_base", "delta": 1.0, "epsilon": 1.0,
                "perturbation": {"spectrum": "k05exp", "n_f": 8, "seed": 3},
            },
            "dual": {"lambda": 1.0, "e": [1, 0]},
            "ipm": {"n_particles": 16, "n_generations": 2, "n_mutations": 2, "seed": 5},
            "front_speed": {"lambda_grid": [0.5, 1.0, 2.0], "deltas": [1.0, 2.0]},
        })
        assert main(["front-speed", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "front-speed")
        fit = json.loads((out / "fit.json").read_text(encoding="utf-8"))
        assert fit["e_search"]["kind"] == "fixed_to_z"
        assert fit["e_search"]["from_flow"] is True
        # e along the shear: c ≡ κλ² + 1, so c* = 2 at λ = 1 for every δ.
        assert all(float(r["c_star_mean"]) == pytest.approx(2.0, abs=1e-6) for r in _read_csv(out / "summary.csv"))

    def test_gen_field_uses_flow_perturbation(self, tmp_path: Path) -> None:
        doc = {
            "flow": {"epsilon": 1.0, "perturbation": {"spectrum": "zero", "n_f": 6, "seed": 21}},
            "field": {
                "n_f": 40, "correlation_seeds": 2, "correlation_points": 4,
                "r_count": 3, "refine_levels": 1, "refine_seeds": 2, "refine_grid": 64,
            },
        }
        config = _write_config(tmp_path, doc)
        assert main(["gen-field", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "gen-field")
        field_doc = json.loads((out / "field.json").read_text(encoding="utf-8"))
        assert field_doc["n_f"] == 6
        assert field_doc["seed"] == 21
        assert len(_read_csv(out / "coefficients.csv")) == 7

    def test_run_ipm_checksums_ignore_threads(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": {"base": "cellular2d", "delta": 4.0},
            "ipm": {"n_particles": 5000, "n_generations": 2, "n_mutations": 2},
        })
        assert main(["run-ipm", "--config", config, "--out", str(tmp_path / "a"), "--threads", "1"]) == EXIT_OK
        assert main(["run-ipm", "--config", config, "--out", str(tmp_path / "b"), "--threads", "4"]) == EXIT_OK
        a = json.loads((_only_dir(tmp_path / "a", "run-ipm") / "manifest.json").read_text(encoding="utf-8"))
        b = json.loads((_only_dir(tmp_path / "b", "run-ipm") / "manifest.json").read_text(encoding="utf-8"))
        assert a["outputs"] == b["outputs"]
        assert a["config_hash"] == b["config_hash"]

    def test_gen_field_zero_spectrum(self, tmp_path: Path) -> None:
        doc = {"field": {
            "spectrum": "zero", "n_f": 8, "correlation_seeds": 2, "correlation_points": 4,
            "r_count": 3, "refine_levels": 1, "refine_seeds": 2, "refine_grid": 64,
        }}
        config = _write_config(tmp_path, doc)
        for root in ("a", "b"):
            assert main(["gen-field", "--config", config, "--out", str(tmp_path / root)]) == EXIT_OK
        out_a = _only_dir(tmp_path / "a", "gen-field")
        out_b = _only_dir(tmp_path / "b", "gen-field")
        for row in _read_csv(out_a / "correlation.csv"):
            assert float(row["exact"]) == float(row["truncated"]) == float(row["empirical"]) == 0.0
        assert all(float(r["amplitude"]) == 0.0 for r in _read_csv(out_a / "coefficients.csv"))
        for name in ("field.json", "coefficients.csv", "correlation.csv", "truncation.json", "refinement.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_front_speed_zero_flow(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": ZERO_FLOW,
            "ipm": {"n_particles": 16, "n_generations": 2, "n_mutations": 2},
            "front_speed": {"lambda_grid": [0.5, 1.0, 2.0], "deltas": [1.0, 2.0]},
        })
        assert main(["front-speed", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "front-speed")
        summary = _read_csv(out / "summary.csv")
        assert [float(r["delta"]) for r in summary] == [1.0, 2.0]
        assert all(float(r["c_star_mean"]) == pytest.approx(2.0, abs=1e-6) for r in summary)
        fit = json.loads((out / "fit.json").read_text(encoding="utf-8"))
        assert fit["fit"]["slope"] == pytest.approx(0.0, abs=1e-6)
        assert fit["lambda_grid"] == [0.5, 1.0, 2.0]
        header = (out / "samples.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "delta,seed,lambda,e1,e2,mu,ratio"

    def test_reference2d_zero_flow(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": ZERO_FLOW,
            "eulerian": {"n_per_dim": 16, "dt": 0.01, "n_steps": 20, "spectral_n_per_dim": 8},
        })
        assert main(["reference-2d", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "reference-2d")
        rows = {r["method"]: float(r["mu"]) for r in _read_csv(out / "reference.csv")}
        assert rows["sl_cn"] == pytest.approx(2.0, abs=1e-9)
        assert rows["spectral"] == pytest.approx(2.0, abs=1e-9)
        assert len(_read_csv(out / "sl_increments.csv")) == 20

    def test_reference2d_rejects_3d(self, tmp_path: Path, capsys) -> None:
        config = _write_config(tmp_path, {"flow": {"base": "abc3d"}})
        assert main(["reference-2d", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_CONFIG
        assert "[cli] error" in capsys.readouterr().err

    def test_stats(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {
            "flow": ZERO_FLOW,
            "domain": {"kind": "unbounded"},
            "ipm": {"n_particles": 256, "n_generations": 8, "n_mutations": 4, "init": "gaussian"},
            "stats": {"n_bins": 10},
        })
        assert main(["stats", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_OK
        out = _only_dir(tmp_path / "runs", "stats")
        assert len(_read_csv(out / "moments.csv")) == 8
        assert len(_read_csv(out / "histogram.csv")) == 20
        doc = json.loads((out / "exponents.json").read_text(encoding="utf-8"))
        assert [d["dim"] for d in doc["dims"]] == [1, 2]
        for d in doc["dims"]:
            total = sum(int(r["count"]) for r in _read_csv(out / "histogram.csv") if int(r["dim"]) == d["dim"])
            assert total + d["underflow"] + d["overflow"] == 256

    def test_bad_json(self, tmp_path: Path, capsys) -> None:
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["run-ipm", "--config", str(path), "--out", str(tmp_path / "runs")]) == EXIT_CONFIG
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_key_exit_code(self, tmp_path: Path) -> None:
        config = _write_config(tmp_path, {"ipm": {"bogus": 1}})
        assert main(["run-ipm", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_CONFIG

    def test_runtime_error_exit_code(self, tmp_path: Path, capsys) -> None:
        config = _write_config(tmp_path, {"flow": ZERO_FLOW, "ipm": TINY_IPM})
        with patch("src.cli.ipm.run", side_effect=DegeneracyError("all weights underflow")):
            code = main(["run-ipm", "--config", config, "--out", str(tmp_path / "runs")])
        assert code == EXIT_RUNTIME
        assert "all weights underflow" in capsys.readouterr().err

    def test_solver_failure_exit_code(self, tmp_path: Path, capsys) -> None:
        config = _write_config(tmp_path, {
            "flow": ZERO_FLOW,
            "eulerian": {"methods": ["spectral"], "spectral_n_per_dim": 8},
        })
        with patch("src.eulerian.eigvals", side_effect=LinAlgError("eigenvalues did not converge")):
            code = main(["reference-2d", "--config", config, "--out", str(tmp_path / "runs")])
        assert code == EXIT_RUNTIME
        assert "dense eigensolver failed" in capsys.readouterr().err

import dataclasses
import json

import numpy as np
import pytest

from invy.cli import main
from invy.dynamics import evolve_state, uniform_grid
from invy.model import ModelParams
from invy.quartic import quartic_residuals
from invy.runner import audit_invariants, audit_trajectory, oracle_compare, run_scenario
from invy.scenarios import PRESETS, ConfigError, Scenario, get_preset, load_config

SMALL_INI = """\
[DEFAULT]
nbar = 3
tau_max = 2
tau_step = 0.1

[base]
k = 1
chi = 0.1
mu = 0.2
delta1 = 0.5
mode = all
theta_grid = 64

[second]
k = 2
time_independent = yes
mode = inversion
"""


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_INI)
    return path


class TestConfig:
    def test_parse_sections_and_defaults(self, small_ini):
        base, second = load_config(small_ini)
        assert base.name == "base" and second.name == "second"
        assert base.params.n_bar == 3 and second.params.n_bar == 3
        assert base.params.delta_cap_1 == 0.5 and base.params.mu == 0.2
        assert second.params.k == 2 and second.params.time_independent
        assert base.tau_max == 2 and base.theta_grid == 64

    @pytest.mark.parametrize("body", [
        "[x]\nbogus = 1\n",
        "[x]\nnbar = abc\n",
        "[x]\nmode = wrong\n",
        "[x]\nlambda_1 = 1\nlambda_2 = 0.5\n",
        "[x]\ntau_step = -1\n",
        "no sections here\n",
    ])
    def test_rejects(self, tmp_path, body):
        path = tmp_path / "bad.ini"
        path.write_text(body)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_overrides_recompute_auto_cutoff(self):
        s = get_preset("fig5a")
        bigger = s.with_overrides(n_bar=20.0)
        assert bigger.params.cutoff > s.params.cutoff
        assert bigger.with_overrides(n_bar=5.0).params.cutoff == s.params.cutoff

    def test_overrides_ignore_none(self):
        s = get_preset("fig2b")
        assert s.with_overrides(mu=None, chi=None) == s

    def test_dump_roundtrip(self, tmp_path):
        chosen = [PRESETS[n] for n in ("fig2a", "fig3f", "fig6d", "fig11b")]
        from invy.scenarios import dump_config
        dump_config(chosen, tmp_path / "p.ini")
        assert load_config(tmp_path / "p.ini") == chosen


class TestPresets:
    def test_catalogue(self):
        assert len(PRESETS) == 18 + 32
        assert PRESETS["fig2a"].params.time_independent
        assert PRESETS["fig2d"].params.k == 2 and PRESETS["fig2d"].params.mu == 0.1
        assert PRESETS["fig3e"].params.delta_cap_4 == 30.0
        assert PRESETS["fig4e"].params.chi == 1.0 and PRESETS["fig4e"].params.k == 1
        assert PRESETS["fig9a"].params.k == 2 and PRESETS["fig9a"].params.n_bar == 5
        assert PRESETS["fig12d"].mode == "phase_variance"

    def test_unknown(self):
        with pytest.raises(ConfigError):
            get_preset("fig99z")


class TestRun:
    def test_fig2a_outputs(self, tmp_path):
        s = get_preset("fig2a").with_overrides(tau_max=5.0)
        summary = run_scenario(s, tmp_path)
        assert summary.ok
        data = np.loadtxt(tmp_path / "fig2a_inversion.csv", delimiter=",", skiprows=1)
        assert (tmp_path / "fig2a_inversion.csv").read_text().startswith("tau,W\n")
        assert data[0, 1] == pytest.approx(1.0, abs=1e-12)
        meta = json.loads((tmp_path / "fig2a_summary.json").read_text())
        for key in ("norm_deficit", "max_norm_drift", "min_root_gap", "wall_time"):
            assert key in meta

    def test_fig5a_initial_phase_peak(self, tmp_path):
        s = get_preset("fig5a").with_overrides(tau_max=1.0)
        run_scenario(s, tmp_path)
        data = np.loadtxt(tmp_path / "fig5a_phase.csv", delimiter=",", skiprows=1)
        first = data[data[:, 0] == 0.0]
        assert first.shape[0] == s.theta_grid
        assert first[np.argmax(first[:, 2]), 1] == 0.0

    def test_csv_deterministic_and_lossless(self, tmp_path):
        s = Scenario("det", ModelParams(n_bar=3, k=1, chi=0.1, mu=0.2), mode="all",
                     tau_max=2.0, tau_step=0.1, theta_grid=64)
        run_scenario(s, tmp_path / "a")
        run_scenario(s, tmp_path / "b")
        for name in ("det_inversion.csv", "det_phase.csv", "det_variance.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        # 17 significant digits reproduce the doubles exactly
        traj = evolve_state(s.params, uniform_grid(2.0, 0.1))
        from invy.observables import population_inversion
        _, w = population_inversion(traj)
        data = np.loadtxt(tmp_path / "a" / "det_inversion.csv", delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 1], w)

    def test_oracle_compare_fig2a(self):
        rep = oracle_compare(get_preset("fig2a").with_overrides(tau_max=10.0))
        assert rep.passed and rep.max_deviation <= 1e-6


class TestAudit:
    def test_fig2a_passes(self):
        rep = audit_invariants(get_preset("fig2a"))
        assert rep.passed, rep.lines()
        names = {c.name for c in rep.checks}
        assert {"total_norm", "quartic_residual", "phase_normalization", "field_hermiticity"} <= names

    def test_corrupted_root_detected(self):
        p = ModelParams(n_bar=3, k=1, chi=0.1)
        traj = evolve_state(p, uniform_grid(2.0, 0.1))
        roots = list(traj.roots)
        r = roots[1]
        zeta = r.zeta.copy()
        zeta[0] += 1e-3
        roots[1] = dataclasses.replace(r, zeta=zeta, residuals=quartic_residuals(r.coefficients, zeta))
        bad = dataclasses.replace(traj, roots=tuple(roots))
        rep = audit_trajectory(bad, "corrupt")
        failed = {c.name for c in rep.checks if not c.passed}
        assert "quartic_residual" in failed
        assert audit_trajectory(traj, "clean").passed

    def test_uncoupled_scenario_passes(self):
        s = Scenario("nolambda", ModelParams(n_bar=5, chi=0.3, lambda_1=0, lambda_2=0, lambda_3=0,
                                             lambda_4=0), tau_max=5.0, tau_step=0.1)
        rep = audit_invariants(s)
        assert rep.passed, rep.lines()
        traj = evolve_state(s.params, uniform_grid(5.0, 0.1))
        from invy.observables import population_inversion
        assert np.allclose(population_inversion(traj)[1], 1.0, atol=1e-14)


class TestCli:
    def test_presets_list(self, capsys):
        assert main(["presets", "list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == len(PRESETS) and out[0].startswith("fig2a")

    def test_presets_dump(self, tmp_path):
        path = tmp_path / "all.ini"
        assert main(["presets", "dump", str(path), "--preset", "fig4e"]) == 0
        assert load_config(path) == [PRESETS["fig4e"]]

    def test_run_with_config_and_overrides(self, small_ini, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", str(small_ini), "--section", "base", "--tau-max", "1", "--chi", "0.2",
                     "--out-dir", str(out)])
        assert code == 0
        line = json.loads(capsys.readouterr().out.strip())
        assert line["scenario"] == "base" and line["ok"]
        assert sorted(p.name for p in out.iterdir()) == [
            "base_inversion.csv", "base_phase.csv", "base_summary.json", "base_variance.csv"]
        tau = np.loadtxt(out / "base_inversion.csv", delimiter=",", skiprows=1)[:, 0]
        assert tau[-1] == pytest.approx(1.0)

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "missing.ini")]) == 2
        assert main(["audit", "--preset", "nope"]) == 2
        assert main(["run"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_breach_exit_code(self, monkeypatch, capsys):
        import invy.cli as cli
        from invy.runner import AuditReport

        def failing(s):
            rep = AuditReport(s.name)
            rep.add("total_norm", 1.0, 1e-8)
            return rep

        monkeypatch.setattr(cli, "audit_invariants", failing)
        assert main(["audit", "--preset", "fig2a"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_audit_ok(self, capsys):
        assert main(["audit", "--preset", "fig7a", "--tau-max", "5"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_oracle_compare_subcommand(self, capsys):
        assert main(["oracle-compare", "--preset", "fig2d", "--tau-max", "5"]) == 0
        assert capsys.readouterr().out.startswith("PASS")

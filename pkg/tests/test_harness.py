import csv
import json
import math

import numpy as np
import pytest

from cssr.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    TrialResult,
    derived_seed,
    read_csv,
    run_experiment,
    runtime_report,
    scaling_report,
    summarize,
    write_csv,
    write_summary,
)
from cssr.sources import shipped_spec_path


def small(**kw):
    base = dict(source="even", methods=("CSSR",), N=(2_000,), lmax=(3,), trials=3, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig("even")
        assert c.l_eval == 10 and c.trials == 30 and c.methods == ("CSSR",)

    @pytest.mark.parametrize("kw", [dict(trials=0), dict(N=(0,)), dict(N=()), dict(methods=("EM",)),
                                    dict(alpha=2.0), dict(lmax=(-1,)), dict(test="t"), dict(l_eval=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            small(**kw)

    def test_from_file(self, tmp_path):
        p = tmp_path / "e.cfg"
        p.write_text("[experiment]\nsource = even\nmethods = CSSR, VLMM\nN = 1e3, 1e4\nlmax = 3..5\n"
                     "alpha = 0.01  # looser\ntrials = 4\nseed = 7\n")
        c = ExperimentConfig.from_file(p)
        assert c.methods == ("CSSR", "VLMM") and c.N == (1000, 10000) and c.lmax == (3, 4, 5)
        assert c.alpha == 0.01 and c.trials == 4 and c.seed == 7

    def test_from_file_relative_spec(self, tmp_path):
        (tmp_path / "my.spec").write_text(shipped_spec_path("even.spec").read_text())
        p = tmp_path / "e.cfg"
        p.write_text("[experiment]\nsource = my.spec\n")
        assert ExperimentConfig.from_file(p).source == str(tmp_path / "my.spec")

    @pytest.mark.parametrize("text", ["[other]\nsource = even\n", "[experiment]\nN = 10\n",
                                      "[experiment]\nsource = even\nbogus = 1\n"])
    def test_from_file_errors(self, tmp_path, text):
        p = tmp_path / "e.cfg"
        p.write_text(text)
        with pytest.raises(ValueError):
            ExperimentConfig.from_file(p)

    def test_shipped_even_vs_em_config(self):
        c = ExperimentConfig.from_file(shipped_spec_path("even_vs_em.cfg"))
        assert c.methods == ("CSSR", "CV-EM") and c.N == (100, 1000, 10000) and c.lmax == tuple(range(3, 11))


class TestSeeds:
    def test_independent_of_trial_count(self):
        a = run_experiment(small(trials=2))
        b = run_experiment(small(trials=4))
        assert [r.key() for r in a] == [r.key() for r in b[:2]]

    def test_distinct_streams(self):
        seeds = {derived_seed(1, N, t, s) for N in (10, 100) for t in range(5) for s in range(3)}
        assert len(seeds) == 30


class TestRun:
    def test_rerun_identical(self):
        a = run_experiment(small(trials=1))
        b = run_experiment(small(trials=1))
        assert [r.key() for r in a] == [r.key() for r in b]

    def test_rows_are_valid(self):
        rows = run_experiment(small(methods=("CSSR", "VLMM"), N=(500, 5_000), lmax=(2, 4)))
        assert len(rows) == 2 * 2 * 2 * 3
        for r in rows:
            assert r.valid and r.states >= 1 and 0 <= r.tv_dist <= 2 and r.seconds > 0

    def test_tv_is_against_source(self):
        # a single trial's TV equals a direct computation from the learned machine
        from cssr import CssrConfig, even_process, run_cssr

        (r,) = run_experiment(small(trials=1))
        m = even_process()
        x = m.simulate(r.N, seed=r.seed)
        learned = run_cssr(x, CssrConfig(3), m.alphabet).machine
        assert r.tv_dist == pytest.approx(np.abs(learned.word_probabilities(10) - m.word_probabilities(10)).sum())

    def test_cv_em_cap_and_lmax(self):
        rows = run_experiment(small(methods=("CV-EM",), N=(300, 20_000), trials=1, m_max=2, restarts=1))
        assert [(r.N, r.L_max) for r in rows] == [(300, 0)]

    def test_failures_recorded(self):
        # one symbol of data cannot be reconstructed: every trial fails, none raise
        rows = run_experiment(small(N=(1,)))
        assert all(not r.valid and r.states is None for r in rows)
        (cell,) = summarize(rows)
        assert cell["failed"] == 3 and cell["flagged"]


class TestAggregation:
    def test_matches_recomputation(self):
        rows = run_experiment(small(N=(300, 3_000), trials=5))
        for cell in summarize(rows):
            mine = [r for r in rows if r.N == cell["N"] and r.valid]
            tv = np.array([r.tv_dist for r in mine])
            st = np.array([r.states for r in mine], float)
            assert cell["tv_mean"] == pytest.approx(tv.mean(), abs=1e-12)
            assert cell["tv_std"] == pytest.approx(tv.std(ddof=1), abs=1e-12)
            assert cell["states_mean"] == pytest.approx(st.mean(), abs=1e-12)

    def test_single_trial_std_is_zero(self):
        (cell,) = summarize(run_experiment(small(trials=1)))
        assert cell["tv_std"] == 0.0

    def test_mode_tie_goes_to_smaller(self):
        rows = [TrialResult("CSSR", "even", 10, 3, 1e-3, t, s, 0.5, 0.1, t) for t, s in enumerate([3, 1, 3, 1])]
        assert summarize(rows)[0]["states_mode"] == 1


def fake(N, L, tv, states=2, seconds=1.0, error=""):
    return TrialResult("CSSR", "even", N, L, 1e-3, 0, None if error else states,
                       None if error else tv, seconds, 0, error=error)


class TestReports:
    def test_scaling(self):
        rows = [fake(100, 4, 0.2), fake(10_000, 4, 0.02), fake(1_000_000, 4, 0.002)]
        rep = scaling_report(rows, expected_states=2)
        assert rep["ratio"][4] == pytest.approx(1.0)
        assert all(e["on_curve"] for e in rep["cells"])

    def test_scaling_exclusions(self):
        rows = [fake(100, 4, 0.9, states=1), fake(10_000, 4, 0.02), fake(1_000_000, 4, 0.002),
                fake(10, 4, 0, error="boom")]
        rep = scaling_report(rows, expected_states=2)
        reasons = {e["N"]: e["reason"] for e in rep["cells"]}
        assert reasons[10] == "no successful trials"
        assert "modal state count 1" in reasons[100]
        assert rep["ratio"][4] == pytest.approx(1.0)

    def test_runtime(self):
        rows = [fake(N, 5, 0.0, seconds=N * 1e-7 + 1e-3) for N in (10**5, 10**6, 10**7)]
        rep = runtime_report(rows)[5]
        assert rep["ratio"] == pytest.approx((1e-2 + 1e-3) / 1e-2 / ((1 + 1e-3) / 1))
        assert 0.5 < rep["slope"] < 1.01

    def test_runtime_needs_three_sizes(self):
        with pytest.raises(ValueError):
            runtime_report([fake(10, 5, 0.0), fake(100, 5, 0.0)])


class TestOutput:
    def test_csv_roundtrip(self, tmp_path):
        rows = run_experiment(small(methods=("CSSR", "VLMM"), trials=2))
        path = tmp_path / "r.csv"
        write_csv(rows, path)
        with open(path) as fh:
            assert tuple(next(csv.reader(fh))) == CSV_COLUMNS
        back = read_csv(path)
        assert [r.key() for r in back] == [r.key() for r in rows]

    def test_summary_json(self, tmp_path):
        cfg = small(N=(1, 500))
        rows = run_experiment(cfg)
        path = tmp_path / "s.json"
        write_summary(cfg, rows, path)
        data = json.loads(path.read_text())
        assert data["config"]["source"] == "even"
        failed = [c for c in data["cells"] if c["N"] == 1][0]
        assert failed["tv_mean"] is None and failed["flagged"] is True
        ok = [c for c in data["cells"] if c["N"] == 500][0]
        assert not math.isnan(ok["tv_mean"])

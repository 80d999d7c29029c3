"""Repeated-trial experiments: simulate, reconstruct, score against the source.

Seeds
-----
A single master seed drives everything.  The training sample of trial ``t``
at length ``N`` is simulated from ``SeedSequence(master, spawn_key=(N, t, 0))``;
held-out data for cross-validation uses ``(N, t, 1)`` and EM initialisation
``(N, t, 2)``.  All methods and all ``L_max`` values at the same ``(N, t)``
therefore see the same sample, and adding trials or cells never changes the
data of existing ones.  The integer actually passed to the simulator is
stored in the ``seed`` column, so any row can be rerun on its own.

Output
------
``write_csv`` writes one row per trial with the columns in ``CSV_COLUMNS``;
``write_summary`` writes a JSON object with the configuration and one entry
per (method, N, L_max) cell holding means and sample standard deviations
(``ddof=1``; 0 for a single trial) over the successful trials.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import time
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines.hmm import cross_validate, hmm_word_probabilities
from .baselines.vlmm import vlmm_learn, vlmm_to_machine
from .machine import CausalStateMachine
from .reconstruct import CssrConfig, run_cssr
from .sequence import build_parse_tree
from .sources import named_source
from .stats import KS, TEST_KINDS

CSSR, CV_EM, VLMM = "CSSR", "CV-EM", "VLMM"
METHODS = (CSSR, CV_EM, VLMM)

CSV_COLUMNS = (
    "method", "source", "N", "L_max", "alpha", "trial", "states", "tv_dist", "seconds", "seed",
    "sync_failures", "t_parse_tree", "t_sufficiency", "t_recursion", "error",
)


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(float(lo)), int(float(hi)) + 1))
        else:
            out.append(int(float(part)))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a source, some methods and an (N, L_max) grid.

    ``em_max_n`` caps the data sizes at which cross-validated EM is run;
    larger cells are skipped for that method.  ``m_max`` and ``restarts``
    configure the HMM size search.
    """

    source: str
    methods: tuple = (CSSR,)
    N: tuple = (10_000,)
    lmax: tuple = (4,)
    alpha: float = 1e-3
    trials: int = 30
    seed: int = 0
    l_eval: int = 10
    test: str = KS
    min_count: int = 1
    m_max: int = 10
    restarts: int = 5
    em_max_n: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))
        object.__setattr__(self, "lmax", tuple(int(L) for L in self.lmax))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be drawn from {METHODS}, got {self.methods}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.N or min(self.N) < 1:
            raise ValueError("every N must be at least 1")
        if not self.lmax or min(self.lmax) < 0:
            raise ValueError("L_max values must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.test not in TEST_KINDS:
            raise ValueError(f"test must be one of {TEST_KINDS}")
        if self.l_eval < 1:
            raise ValueError("l_eval must be at least 1")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Read the ``[experiment]`` section of an INI file.

        Lists are comma separated; ``a..b`` expands to an inclusive integer
        range and numbers may be written as ``1e4``.  A relative ``source``
        path is resolved against the file's directory.
        """
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str  # keys such as N are case sensitive
        with open(path) as fh:
            parser.read_file(fh)
        if not parser.has_section("experiment"):
            raise ValueError(f"{path}: missing [experiment] section")
        sec = parser["experiment"]
        known = {f.name for f in fields(cls)}
        unknown = set(sec) - known
        if unknown:
            raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
        kw = {}
        for key, value in sec.items():
            if key in ("N", "lmax"):
                kw[key] = tuple(_int_list(value))
            elif key == "methods":
                kw[key] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key == "alpha":
                kw[key] = float(value)
            elif key in ("source", "test"):
                kw[key] = value.strip()
            else:
                kw[key] = int(float(value))
        if "source" not in kw:
            raise ValueError(f"{path}: source is required")
        src = Path(kw["source"])
        if src.suffix == ".spec" and not src.is_absolute() and (Path(path).parent / src).exists():
            kw["source"] = str(Path(path).parent / src)
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialResult:
    method: str
    source: str
    N: int
    L_max: int
    alpha: float
    trial: int
    states: int | None
    tv_dist: float | None
    seconds: float
    seed: int
    sync_failures: int = 0
    phase_seconds: dict = field(default_factory=dict)
    error: str = ""

    @property
    def valid(self) -> bool:
        return not self.error

    def row(self) -> dict:
        ph = self.phase_seconds
        return {
            "method": self.method, "source": self.source, "N": self.N, "L_max": self.L_max,
            "alpha": self.alpha, "trial": self.trial,
            "states": "" if self.states is None else self.states,
            "tv_dist": "" if self.tv_dist is None else repr(self.tv_dist),
            "seconds": repr(self.seconds), "seed": self.seed, "sync_failures": self.sync_failures,
            "t_parse_tree": repr(ph.get("parse_tree", 0.0)),
            "t_sufficiency": repr(ph.get("sufficiency", 0.0)),
            "t_recursion": repr(ph.get("recursion", 0.0)),
            "error": self.error,
        }

    def key(self) -> tuple:
        """Everything except wall-clock timings: identical across reruns."""
        return (self.method, self.source, self.N, self.L_max, self.alpha, self.trial,
                self.states, self.tv_dist, self.seed, self.sync_failures, self.error)


def derived_seed(master: int, *key: int) -> int:
    """64-bit seed for one (N, trial, stream) triple."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return float(min(2.0, np.abs(p - q).sum()))


def sync_failures(machine: CausalStateMachine, seq: np.ndarray, length: int) -> int:
    """Distinct observed histories of ``length`` symbols that the machine
    cannot map to a state."""
    if length == 0 or len(seq) < length:
        return 0
    k = machine.k
    codes = np.zeros(len(seq) - length + 1, dtype=np.int64)
    for i in range(length):
        codes = codes * k + seq[i:len(seq) - length + 1 + i]
    failures = 0
    for code in np.unique(codes).tolist():
        word = np.unravel_index(code, (k,) * length)
        if machine.epsilon_map(tuple(int(d) for d in word)) is None:
            failures += 1
    return failures


def run_trial(config: ExperimentConfig, source: CausalStateMachine, truth: np.ndarray,
              method: str, N: int, L_max: int, trial: int) -> TrialResult:
    """One trial of one method; exceptions are recorded, not raised."""
    seed = derived_seed(config.seed, N, trial, 0)
    result = TrialResult(method, config.source, N, L_max, config.alpha, trial, None, None, 0.0, seed)
    x = source.simulate(N, seed=seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t0 = time.perf_counter()
            if method == CSSR:
                res = run_cssr(x, CssrConfig(L_max, config.alpha, config.test, config.min_count),
                               alphabet=source.alphabet)
                result.seconds = time.perf_counter() - t0
                model = res.machine
                result.states = model.n_states
                result.phase_seconds = dict(res.diagnostics.phase_seconds)
                result.tv_dist = _tv(truth, model.word_probabilities(config.l_eval))
                result.sync_failures = sync_failures(model, x, L_max)
            elif method == VLMM:
                ct = vlmm_learn(build_parse_tree(x, L_max, k=source.k), L_max, config.alpha,
                                config.test, config.min_count)
                result.seconds = time.perf_counter() - t0
                result.states = len(ct)
                model = vlmm_to_machine(ct, source.alphabet)
                result.tv_dist = _tv(truth, model.word_probabilities(config.l_eval))
            else:
                test = source.simulate(N, seed=derived_seed(config.seed, N, trial, 1))
                cv = cross_validate(x, test, range(1, config.m_max + 1), config.restarts,
                                    seed=derived_seed(config.seed, N, trial, 2), k=source.k)
                result.seconds = time.perf_counter() - t0
                result.states = cv.n_states
                result.tv_dist = _tv(truth, hmm_word_probabilities(cv.model, config.l_eval))
    except Exception as exc:  # recorded per trial; the experiment goes on
        result.error = f"{type(exc).__name__}: {exc}"
        result.states = None
        result.tv_dist = None
    return result


def run_experiment(config: ExperimentConfig, progress=None) -> list[TrialResult]:
    """Run every (method, N, L_max, trial) combination of the configuration.

    Cross-validated EM ignores ``L_max`` and is run once per (N, trial),
    recorded with ``L_max`` equal to 0; it skips N above ``em_max_n``.
    ``progress``, if given, is called with each finished result.
    """
    source = named_source(config.source)
    truth = source.word_probabilities(config.l_eval)
    rows = []
    for method in config.methods:
        lmaxes = (0,) if method == CV_EM else config.lmax
        for N in config.N:
            if method == CV_EM and N > config.em_max_n:
                continue
            for L_max in lmaxes:
                for trial in range(config.trials):
                    r = run_trial(config, source, truth, method, N, L_max, trial)
                    rows.append(r)
                    if progress:
                        progress(r)
    rows.sort(key=lambda r: (METHODS.index(r.method), r.N, r.L_max, r.trial))
    return rows


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def summarize(results: list[TrialResult]) -> list[dict]:
    """Per-cell aggregates over successful trials.

    A cell is flagged when more than 10% of its trials failed.
    """
    cells: dict[tuple, list[TrialResult]] = {}
    for r in results:
        cells.setdefault((r.method, r.source, r.N, r.L_max), []).append(r)
    out = []
    for (method, source, N, L_max), rs in sorted(cells.items(), key=lambda kv: (METHODS.index(kv[0][0]),) + kv[0][1:]):
        ok = [r for r in rs if r.valid]
        states_mean, states_std = _mean_std([r.states for r in ok])
        tv_mean, tv_std = _mean_std([r.tv_dist for r in ok])
        sec_mean, sec_std = _mean_std([r.seconds for r in ok])
        modal = Counter(r.states for r in ok).most_common()
        out.append({
            "method": method, "source": source, "N": N, "L_max": L_max, "alpha": rs[0].alpha,
            "trials": len(rs), "failed": len(rs) - len(ok),
            "flagged": (len(rs) - len(ok)) > 0.1 * len(rs),
            "states_mean": states_mean, "states_std": states_std,
            "states_min": min((r.states for r in ok), default=None),
            "states_max": max((r.states for r in ok), default=None),
            # ties between equally common counts go to the smaller count
            "states_mode": min((s for s, c in modal if c == modal[0][1]), default=None),
            "tv_mean": tv_mean, "tv_std": tv_std,
            "seconds_mean": sec_mean, "seconds_std": sec_std,
            "sync_failures": int(sum(r.sync_failures for r in ok)),
        })
    return out


def scaling_report(results, method: str = CSSR, expected_states: int | None = None) -> dict:
    """Mean TV distance times sqrt(N) per cell, with a max/min ratio per L_max.

    Cells without successful trials are excluded; cells whose modal state
    count differs from ``expected_states`` are kept in the table but marked
    off-curve and left out of the ratio.
    """
    cells = summarize(results) if results and isinstance(results[0], TrialResult) else results
    cells = [c for c in cells if c["method"] == method]
    table, ratios = [], {}
    for c in cells:
        entry = {"N": c["N"], "L_max": c["L_max"], "tv_mean": c["tv_mean"],
                 "scaled": c["tv_mean"] * math.sqrt(c["N"]), "on_curve": True, "reason": ""}
        if c["failed"] == c["trials"]:
            entry.update(scaled=math.nan, on_curve=False, reason="no successful trials")
        elif expected_states is not None and c["states_mode"] != expected_states:
            entry.update(on_curve=False, reason=f"modal state count {c['states_mode']} != {expected_states}")
        table.append(entry)
    for L in sorted({e["L_max"] for e in table}):
        vals = [e["scaled"] for e in table if e["L_max"] == L and e["on_curve"]]
        if len(vals) >= 2:
            ratios[L] = max(vals) / min(vals) if min(vals) > 0 else math.inf
    return {"cells": table, "ratio": ratios}


def runtime_report(results, method: str = CSSR) -> dict:
    """Per-symbol wall-clock cost across N at each L_max.

    Returns, per L_max, the per-symbol seconds at each N, the max/min ratio
    of those costs and the slope of log time against log N.
    """
    cells = summarize(results) if results and isinstance(results[0], TrialResult) else results
    cells = [c for c in cells if c["method"] == method and c["failed"] < c["trials"]]
    out = {}
    for L in sorted({c["L_max"] for c in cells}):
        cs = sorted((c for c in cells if c["L_max"] == L), key=lambda c: c["N"])
        if len(cs) < 3:
            raise ValueError(f"need at least 3 N values at L_max={L}, got {len(cs)}")
        N = np.array([c["N"] for c in cs], dtype=float)
        t = np.array([c["seconds_mean"] for c in cs])
        per = t / N
        out[L] = {"N": N.astype(int).tolist(), "per_symbol": per.tolist(),
                  "ratio": float(per.max() / per.min()),
                  "slope": float(np.polyfit(np.log(N), np.log(t), 1)[0])}
    return out


def write_csv(results: list[TrialResult], path_or_file):
    """Write trial rows with the fixed ``CSV_COLUMNS`` header."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(r.row())
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[TrialResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            phases = {k: float(row[f"t_{k}"]) for k in ("parse_tree", "sufficiency", "recursion")}
            out.append(TrialResult(
                row["method"], row["source"], int(row["N"]), int(row["L_max"]), float(row["alpha"]),
                int(row["trial"]), int(row["states"]) if row["states"] else None,
                float(row["tv_dist"]) if row["tv_dist"] else None, float(row["seconds"]),
                int(row["seed"]), int(row["sync_failures"]), phases, row["error"]))
    return out


def write_summary(config: ExperimentConfig, results: list[TrialResult], path):
    def clean(v):
        return None if isinstance(v, float) and math.isnan(v) else v

    cells = [{k: clean(v) for k, v in c.items()} for c in summarize(results)]
    Path(path).write_text(json.dumps({"config": config.to_dict(), "cells": cells}, indent=2) + "\n")

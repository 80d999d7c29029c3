"""Next-symbol distributions, two-sample tests and total variation distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaincc

KS = "ks"
CHI2 = "chi2"
TEST_KINDS = (KS, CHI2)


@dataclass(frozen=True)
class Distribution:
    """A probability vector over an alphabet's symbol ordering.

    ``count`` is the number of observations behind an estimate (0 for exact
    distributions).  A distribution built from an all-zero count vector is the
    "no data" distribution: its probabilities are NaN and :attr:`has_data` is
    false.
    """

    probs: np.ndarray
    count: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if not np.isnan(p).any():
            if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"not a probability vector: {p}")

    @classmethod
    def from_counts(cls, counts) -> "Distribution":
        c = np.asarray(counts, dtype=float)
        n = c.sum()
        if n <= 0:
            return cls(np.full(len(c), np.nan), 0)
        return cls(c / n, int(round(n)))

    @property
    def has_data(self) -> bool:
        return not np.isnan(self.probs).any()

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i):
        return self.probs[i]


def _as_probs(P) -> np.ndarray:
    return P.probs if isinstance(P, Distribution) else np.asarray(P, dtype=float)


def tv_distance(P, Q) -> float:
    """Sum of absolute differences between two distributions (range [0, 2])."""
    p, q = _as_probs(P), _as_probs(Q)
    if p.shape != q.shape:
        raise ValueError(f"distributions over different alphabets: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).sum())


def tv_distance_words(P: dict, Q: dict) -> float:
    """Total variation between two word distributions given as mappings."""
    return float(sum(abs(P.get(w, 0.0) - Q.get(w, 0.0)) for w in set(P) | set(Q)))


@dataclass(frozen=True)
class TestDecision:
    """Outcome of a two-sample test.

    ``reference`` is the critical value for KS and the p-value for chi-squared.
    """

    kind: str
    statistic: float
    reference: float
    reject: bool
    no_data: bool = False

    __test__ = False  # keep pytest from collecting this


@lru_cache(maxsize=64)
def ks_critical_coefficient(alpha: float) -> float:
    """Asymptotic two-sample KS coefficient c(alpha) = sqrt(-ln(alpha/2) / 2)."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0)


def _check_pair(counts1, counts2):
    c1 = np.asarray(counts1, dtype=float)
    c2 = np.asarray(counts2, dtype=float)
    if c1.shape != c2.shape or c1.ndim != 1:
        raise ValueError("count vectors must have the same length")
    return c1, c2


def ks_two_sample(counts1, counts2, alpha: float) -> TestDecision:
    """Two-sample Kolmogorov-Smirnov test on count vectors.

    The empirical CDFs are taken over the fixed alphabet ordering.  Rejects
    when D > c(alpha) * sqrt((n1 + n2) / (n1 * n2)).  An empty sample gives a
    non-rejecting "no data" decision.
    """
    c1, c2 = _check_pair(counts1, counts2)
    # alphabets are small: a plain loop beats numpy's per-call overhead
    a, b = c1.tolist(), c2.tolist()
    n1, n2 = sum(a), sum(b)
    if n1 <= 0 or n2 <= 0:
        return TestDecision(KS, math.nan, math.nan, False, no_data=True)
    d = s1 = s2 = 0.0
    for x, y in zip(a, b):
        s1 += x
        s2 += y
        d = max(d, abs(s1 / n1 - s2 / n2))
    crit = ks_critical_coefficient(alpha) * math.sqrt((n1 + n2) / (n1 * n2))
    return TestDecision(KS, d, crit, d > crit)


def chi2_two_sample(counts1, counts2, alpha: float) -> TestDecision:
    """Pearson chi-squared test of homogeneity for two count vectors.

    Cells empty in both samples are dropped; the test has (cells - 1) degrees
    of freedom and a single surviving cell never rejects.
    """
    c1, c2 = _check_pair(counts1, counts2)
    n1, n2 = c1.sum(), c2.sum()
    if n1 <= 0 or n2 <= 0:
        return TestDecision(CHI2, math.nan, math.nan, False, no_data=True)
    keep = (c1 + c2) > 0
    c1, c2 = c1[keep], c2[keep]
    dof = len(c1) - 1
    if dof == 0:
        return TestDecision(CHI2, 0.0, 1.0, False)
    pooled = (c1 + c2) / (n1 + n2)
    e1, e2 = n1 * pooled, n2 * pooled
    stat = float(((c1 - e1) ** 2 / e1).sum() + ((c2 - e2) ** 2 / e2).sum())
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return TestDecision(CHI2, stat, p, p < alpha)


def two_sample_test(counts1, counts2, alpha: float, kind: str = KS) -> TestDecision:
    if kind == KS:
        return ks_two_sample(counts1, counts2, alpha)
    if kind == CHI2:
        return chi2_two_sample(counts1, counts2, alpha)
    raise ValueError(f"unknown test kind {kind!r}; expected one of {TEST_KINDS}")

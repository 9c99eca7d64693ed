"""Rank and location statistics used to validate hardness measurements.

Everything here is implemented directly on numpy arrays: regression
metrics, Spearman correlation, the two-sample Wilcoxon rank-sum test
(exact for small samples, normal approximation otherwise), Welch's
t-test, a one-sample t-test, and Holm's step-down correction.  The
Student-t tail is computed through the regularized incomplete beta
function so no statistics package is required at runtime; scipy is only
used in the test suite to cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# The exact rank-sum null is enumerated over C(n1+n2, n1) group
# assignments; 12 keeps that below 1000 subsets.
EXACT_ENUMERATION_LIMIT = 12

ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single hypothesis test.

    `statistic` is the U statistic of the *first* sample for rank-sum
    tests (number of (a, b) pairs with a > b, ties counting 1/2) and the
    t statistic for t-tests.  `method` records how the p-value was
    obtained: "exact", "normal-approx", "welch-t" or "one-sample-t".
    """

    statistic: float
    p_value: float
    n1: int
    n2: int
    alternative: str
    method: str
    df: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0 + 1e-12):
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def _as_1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_alternative(alternative: str):
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


# ---------------------------------------------------------------------------
# regression metrics


def rmse(predictions, labels) -> float:
    p = _as_1d(predictions, "predictions")
    l = _as_1d(labels, "labels")
    if p.shape != l.shape:
        raise ValueError("predictions and labels must have the same length")
    return float(np.sqrt(np.mean((p - l) ** 2)))


def r2_score(predictions, labels) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot.

    Undefined (raises) when the labels are constant, because SS_tot = 0.
    """
    p = _as_1d(predictions, "predictions")
    l = _as_1d(labels, "labels")
    if p.shape != l.shape:
        raise ValueError("predictions and labels must have the same length")
    ss_tot = float(np.sum((l - l.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2_score undefined for constant labels")
    ss_res = float(np.sum((p - l) ** 2))
    return 1.0 - ss_res / ss_tot


def rankdata(x) -> np.ndarray:
    """Ranks starting at 1, with tied values sharing their average rank."""
    arr = _as_1d(x, "x")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=float)
    sorted_vals = arr[order]
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # Average of positions i..j, 1-based.
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def spearman(predictions, labels) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    p = rankdata(predictions)
    l = rankdata(labels)
    if p.shape != l.shape:
        raise ValueError("predictions and labels must have the same length")
    pc = p - p.mean()
    lc = l - l.mean()
    denom = math.sqrt(float(np.sum(pc**2)) * float(np.sum(lc**2)))
    if denom == 0.0:
        raise ValueError("spearman undefined when either input is constant")
    return float(np.sum(pc * lc) / denom)


# ---------------------------------------------------------------------------
# normal and t distributions


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    max_iter = 300
    eps = 1e-14
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x < 0.0 or x > 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # The continued fraction converges fast only for x < (a+1)/(a+b+2).
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - math.exp(
        math.lgamma(a + b)
        - math.lgamma(b)
        - math.lgamma(a)
        + b * math.log1p(-x)
        + a * math.log(x)
    ) * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Survival function P(T > t) of Student's t with `df` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t != t:
        raise ValueError("t statistic is NaN")
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def _t_pvalue(t: float, df: float, alternative: str) -> float:
    if alternative == "greater":
        return t_sf(t, df)
    if alternative == "less":
        return t_sf(-t, df)
    return min(1.0, 2.0 * t_sf(abs(t), df))


# ---------------------------------------------------------------------------
# rank-sum test


def _u_statistic_from_ranks(ranks_first: np.ndarray, n1: int) -> float:
    return float(np.sum(ranks_first)) - n1 * (n1 + 1) / 2.0


def wilcoxon_rank_sum(
    a, b, alternative: str = "two-sided", method: str = "auto"
) -> TestResult:
    """Two-sample Wilcoxon rank-sum (Mann-Whitney) test.

    The statistic is U of the first sample: the number of pairs
    (a_i, b_j) with a_i > b_j, ties contributing 1/2.  "greater" tests
    whether values in `a` tend to exceed those in `b`.

    Small samples (n1 + n2 <= 12) use the exact permutation null,
    enumerated over all assignments of the pooled values to the first
    group, which stays valid under ties.  Larger samples use the normal
    approximation with tie-corrected variance and a 0.5 continuity
    correction.  `method` ("auto", "exact", "normal-approx") overrides
    the size-based choice.
    """
    _check_alternative(alternative)
    if method not in ("auto", "exact", "normal-approx"):
        raise ValueError(f"unknown method {method!r}")
    x = _as_1d(a, "a")
    y = _as_1d(b, "b")
    n1, n2 = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    u_obs = _u_statistic_from_ranks(ranks[:n1], n1)

    use_exact = n1 + n2 <= EXACT_ENUMERATION_LIMIT if method == "auto" else method == "exact"
    if use_exact:
        if n1 + n2 > 20:
            raise ValueError("exact enumeration is limited to n1 + n2 <= 20")
        total = 0
        count_ge = 0
        count_le = 0
        # U is a function of which pooled positions form group one, so
        # the null is a uniform draw of n1 positions out of n1+n2.
        for subset in itertools.combinations(range(n1 + n2), n1):
            u = _u_statistic_from_ranks(ranks[list(subset)], n1)
            total += 1
            if u >= u_obs - 1e-9:
                count_ge += 1
            if u <= u_obs + 1e-9:
                count_le += 1
        p_greater = count_ge / total
        p_less = count_le / total
        if alternative == "greater":
            p = p_greater
        elif alternative == "less":
            p = p_less
        else:
            p = min(1.0, 2.0 * min(p_greater, p_less))
        return TestResult(u_obs, p, n1, n2, alternative, "exact")

    n = n1 + n2
    mu = n1 * n2 / 2.0
    # Tie correction: subtract sum(t^3 - t) over tie groups.
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        # All pooled values identical: no evidence either way.
        p = 1.0
        return TestResult(u_obs, p, n1, n2, alternative, "normal-approx")
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (u_obs - mu - 0.5) / sd
        p = 1.0 - normal_cdf(z)
    elif alternative == "less":
        z = (u_obs - mu + 0.5) / sd
        p = normal_cdf(z)
    else:
        z = (abs(u_obs - mu) - 0.5) / sd
        p = min(1.0, 2.0 * (1.0 - normal_cdf(z)))
    return TestResult(u_obs, p, n1, n2, alternative, "normal-approx")


# ---------------------------------------------------------------------------
# t-tests


def welch_t(a, b, alternative: str = "two-sided") -> TestResult:
    """Welch's unequal-variance t-test with Welch-Satterthwaite df."""
    _check_alternative(alternative)
    x = _as_1d(a, "a")
    y = _as_1d(b, "b")
    if x.size < 2 or y.size < 2:
        raise ValueError("welch_t needs at least two observations per group")
    vx = float(np.var(x, ddof=1))
    vy = float(np.var(y, ddof=1))
    sx2 = vx / x.size
    sy2 = vy / y.size
    if sx2 + sy2 == 0.0:
        raise ValueError("welch_t undefined when both samples are constant")
    t = (float(np.mean(x)) - float(np.mean(y))) / math.sqrt(sx2 + sy2)
    df = (sx2 + sy2) ** 2 / (
        sx2**2 / (x.size - 1) + sy2**2 / (y.size - 1)
    )
    p = _t_pvalue(t, df, alternative)
    return TestResult(t, p, x.size, y.size, alternative, "welch-t", df=df)


def one_sample_t(x, popmean: float, alternative: str = "two-sided") -> TestResult:
    _check_alternative(alternative)
    arr = _as_1d(x, "x")
    if arr.size < 2:
        raise ValueError("one_sample_t needs at least two observations")
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise ValueError("one_sample_t undefined for a constant sample")
    t = (float(np.mean(arr)) - popmean) / (sd / math.sqrt(arr.size))
    df = arr.size - 1
    p = _t_pvalue(t, df, alternative)
    return TestResult(t, p, arr.size, 0, alternative, "one-sample-t", df=float(df))


# ---------------------------------------------------------------------------
# multiple comparisons


def holm_correct(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in the input order.

    Sort ascending, multiply the i-th smallest by (m - i), enforce
    monotonicity with a running max, clip at 1.
    """
    ps = [float(p) for p in p_values]
    if not ps:
        return []
    for p in ps:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"p-value {p} outside [0, 1]")
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    adjusted = [0.0] * m
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, min(1.0, ps[idx] * (m - i)))
        adjusted[idx] = running
    return adjusted


# ---------------------------------------------------------------------------
# rank report


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    median: float
    q25: float
    q75: float


@dataclass(frozen=True)
class PairwiseComparison:
    first: str
    second: str
    statistic: float
    p_value: float
    p_adjusted: float
    alternative: str
    method: str
    significant: bool


@dataclass(frozen=True)
class RankReport:
    """Medians/IQRs per group plus Holm-corrected pairwise rank-sum tests."""

    groups: tuple[GroupSummary, ...]
    comparisons: tuple[PairwiseComparison, ...]
    alpha: float
    statistic_convention: str = field(
        default="U of first-named group; ties count 1/2", repr=False
    )

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "statistic_convention": self.statistic_convention,
            "groups": [
                {
                    "label": g.label,
                    "n": g.n,
                    "median": g.median,
                    "q25": g.q25,
                    "q75": g.q75,
                }
                for g in self.groups
            ],
            "comparisons": [
                {
                    "first": c.first,
                    "second": c.second,
                    "u": c.statistic,
                    "p": c.p_value,
                    "p_adjusted": c.p_adjusted,
                    "alternative": c.alternative,
                    "method": c.method,
                    "significant": c.significant,
                }
                for c in self.comparisons
            ],
        }


def rank_report(
    named_groups: Sequence[tuple[str, Sequence[float]]],
    comparisons: Sequence[tuple[str, str]],
    alternative: str = "greater",
    alpha: float = 0.01,
) -> RankReport:
    """Summarize measurement groups and test ordered pairs.

    `comparisons` lists (first, second) labels; with the default
    "greater" alternative each test asks whether the first group's
    values tend to exceed the second's.  All p-values are Holm-corrected
    as one family.
    """
    if not named_groups:
        raise ValueError("named_groups must be non-empty")
    values = {}
    summaries = []
    for label, vals in named_groups:
        arr = _as_1d(vals, f"group {label!r}")
        if label in values:
            raise ValueError(f"duplicate group label {label!r}")
        values[label] = arr
        q25, med, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
        summaries.append(GroupSummary(label, arr.size, float(med), float(q25), float(q75)))

    raw = []
    for first, second in comparisons:
        if first not in values or second not in values:
            raise ValueError(f"comparison ({first!r}, {second!r}) names unknown group")
        raw.append(wilcoxon_rank_sum(values[first], values[second], alternative))
    adjusted = holm_correct([r.p_value for r in raw])
    pairs = tuple(
        PairwiseComparison(
            first=first,
            second=second,
            statistic=r.statistic,
            p_value=r.p_value,
            p_adjusted=adj,
            alternative=r.alternative,
            method=r.method,
            significant=adj < alpha,
        )
        for (first, second), r, adj in zip(comparisons, raw, adjusted)
    )
    return RankReport(tuple(summaries), pairs, alpha)

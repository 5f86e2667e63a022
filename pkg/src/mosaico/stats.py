"""Score aggregation, inter-rater agreement, and significance testing.

Implements the analysis battery applied to collected naturalness ratings:
per-group MOS tables, Krippendorff's alpha (coincidence matrix, native
missing-data handling), ICC(2,1) from the two-way ANOVA decomposition,
Kruskal-Wallis with tie correction, Tukey HSD over MOS bins backed by a
quadrature studentized-range survival function, regression metrics, and
percentile bootstrap confidence intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaincc


@dataclass(frozen=True)
class RatingMatrix:
    """Raters x groups score matrix; NaN marks a missing cell."""

    raters: list[str]
    groups: list[str]
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        object.__setattr__(self, "cells", cells)
        if cells.shape != (len(self.raters), len(self.groups)):
            raise ValueError(
                f"cells shape {cells.shape} does not match "
                f"{len(self.raters)} raters x {len(self.groups)} groups"
            )
        if len(self.raters) < 2 or len(self.groups) < 2:
            raise ValueError("need at least 2 raters and 2 groups")
        present = cells[~np.isnan(cells)]
        if present.size and (present.min() < 1.0 or present.max() > 5.0):
            raise ValueError("present cells must lie in [1, 5]")


@dataclass(frozen=True)
class KWResult:
    H: float
    df: int
    p: float


@dataclass(frozen=True)
class Metrics:
    pcc: float
    mae: float
    rmse: float
    pcc_ci: tuple[float, float] | None = None
    mae_ci: tuple[float, float] | None = None
    rmse_ci: tuple[float, float] | None = None


@dataclass(frozen=True)
class TukeyComparison:
    group_i: str
    group_j: str
    diff: float
    q: float
    p: float


def mos_table(scores_by_group: dict[str, list[float]]) -> list[dict]:
    """Per-group mean/sd/n, sorted by mean descending (sd uses n-1)."""
    if not scores_by_group:
        raise ValueError("no rating groups")
    rows = []
    for group, scores in scores_by_group.items():
        if len(scores) == 0:
            raise ValueError(f"group {group!r} has no ratings")
        arr = np.asarray(scores, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        rows.append({"group": group, "mean": float(arr.mean()), "sd": sd, "n": len(arr)})
    rows.sort(key=lambda r: (-r["mean"], r["group"]))
    return rows


def _alpha_delta(values: np.ndarray, counts: np.ndarray, metric: str) -> np.ndarray:
    """Pairwise difference matrix between rating values for alpha."""
    if metric == "interval":
        return (values[:, None] - values[None, :]) ** 2
    if metric == "ordinal":
        # Cumulative-marginal distance: (sum of n_g between the two values,
        # minus half the endpoints) squared.
        cum = np.cumsum(counts)
        k = len(values)
        delta = np.zeros((k, k))
        for a in range(k):
            for b in range(k):
                lo, hi = min(a, b), max(a, b)
                between = cum[hi] - (cum[lo - 1] if lo > 0 else 0.0)
                delta[a, b] = (between - (counts[a] + counts[b]) / 2.0) ** 2
        return delta
    raise ValueError(f"unknown alpha metric {metric!r}")


def krippendorff_alpha(matrix: RatingMatrix, metric: str = "interval") -> float:
    """Krippendorff's alpha via the coincidence-matrix formulation.

    Units are the group columns; values from any subset of raters
    contribute, and units with fewer than two ratings are dropped.
    alpha = 1 - D_observed / D_expected.
    """
    cells = matrix.cells
    unit_values = []
    for j in range(cells.shape[1]):
        col = cells[:, j]
        vals = col[~np.isnan(col)]
        if len(vals) >= 2:
            unit_values.append(vals)
    if not unit_values:
        raise ValueError("no unit has two or more ratings; alpha undefined")

    values = np.unique(np.concatenate(unit_values))
    index = {v: i for i, v in enumerate(values)}
    k = len(values)
    coincidence = np.zeros((k, k))
    for vals in unit_values:
        m = len(vals)
        idx = [index[v] for v in vals]
        for a in idx:
            for b in idx:
                coincidence[a, b] += 1.0 / (m - 1)
        for a in idx:
            coincidence[a, a] -= 1.0 / (m - 1)
    n_c = coincidence.sum(axis=1)
    n_total = n_c.sum()
    delta = _alpha_delta(values, n_c, metric)
    d_obs = float(np.sum(coincidence * delta))
    d_exp = float(n_c @ delta @ n_c - np.sum(n_c * np.diag(delta))) / (n_total - 1)
    if d_exp == 0.0:
        return 1.0
    return 1.0 - d_obs / d_exp


def impute_column_means(matrix: RatingMatrix) -> np.ndarray:
    """Replace missing cells with their group-column mean."""
    cells = matrix.cells.copy()
    for j in range(cells.shape[1]):
        col = cells[:, j]
        present = ~np.isnan(col)
        if not present.any():
            raise ValueError(f"group {matrix.groups[j]!r} has no ratings to impute from")
        col[~present] = col[present].mean()
    return cells


def icc_2_1(matrix: RatingMatrix) -> float:
    """ICC(2,1): two-way random effects, single rater, absolute agreement.

    Missing cells are imputed with the group mean, then
    ICC = (MSR - MSE) / (MSR + (k-1) MSE + k (MSC - MSE) / n)
    with n = groups (targets), k = raters, from the two-way ANOVA sums.
    """
    cells = impute_column_means(matrix)
    k, n = cells.shape  # raters x groups
    grand = cells.mean()
    group_means = cells.mean(axis=0)
    rater_means = cells.mean(axis=1)
    ssr = k * np.sum((group_means - grand) ** 2)  # between targets
    ssc = n * np.sum((rater_means - grand) ** 2)  # between raters
    sst = np.sum((cells - grand) ** 2)
    sse = sst - ssr - ssc
    msr = ssr / (n - 1)
    msc = ssc / (k - 1)
    mse = sse / ((n - 1) * (k - 1))
    denom = msr + (k - 1) * mse + k * (msc - mse) / n
    if denom == 0.0:
        raise ValueError("degenerate matrix: zero ICC denominator")
    return float((msr - mse) / denom)


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..N with ties sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def chi2_sf(x: float, df: int) -> float:
    """Chi-square survival function via the regularized upper incomplete gamma."""
    return float(gammaincc(df / 2.0, x / 2.0))


def kruskal_wallis(groups: list[list[float]]) -> KWResult:
    """Kruskal-Wallis H over independent groups, mid-ranks and tie correction.

    H' = H / (1 - sum(t^3 - t) / (N^3 - N)); p from the chi-square survival
    function with df = groups - 1.  All-identical observations give p = 1.
    """
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    sizes = [len(g) for g in groups]
    if any(s == 0 for s in sizes):
        raise ValueError("every group must be nonempty")
    df = len(groups) - 1
    pooled = np.concatenate([np.asarray(g, dtype=np.float64) for g in groups])
    n_total = len(pooled)
    ranks = _midranks(pooled)
    h = 0.0
    start = 0
    for s in sizes:
        r_mean = ranks[start : start + s].mean()
        h += s * (r_mean - (n_total + 1) / 2.0) ** 2
        start += s
    h *= 12.0 / (n_total * (n_total + 1))
    _, tie_counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - np.sum(tie_counts**3 - tie_counts) / (n_total**3 - n_total)
    if correction == 0.0:
        return KWResult(H=0.0, df=df, p=1.0)
    h /= correction
    return KWResult(H=float(h), df=df, p=chi2_sf(h, df))


def bin_by_mos(table: list[dict], k: int) -> dict[str, int]:
    """Equal-frequency bins over group-level MOS, bin index ascending with MOS.

    Ties are broken by group id; bin sizes differ by at most one.
    """
    if k < 2:
        raise ValueError("need at least 2 bins")
    if k > len(table):
        raise ValueError(f"k = {k} exceeds {len(table)} groups")
    ordered = sorted(table, key=lambda r: (r["mean"], r["group"]))
    assignment: dict[str, int] = {}
    for b, chunk in enumerate(np.array_split(np.arange(len(ordered)), k)):
        for i in chunk:
            assignment[ordered[i]["group"]] = b
    return assignment


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def studentized_range_sf(q: float, k: int, df: float = math.inf) -> float:
    """Survival function of the studentized range, infinite df.

    P(Q > q) = 1 - k * Int phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz, evaluated
    by adaptive quadrature to absolute error <= 1e-8.  Finite df is not
    implemented (all intended uses have residual df in the thousands).
    """
    if q < 0:
        raise ValueError("q must be non-negative")
    if k < 2:
        raise ValueError("k must be at least 2")
    if math.isfinite(df):
        raise NotImplementedError("finite-df studentized range not supported")
    if q == 0.0:
        return 1.0

    def integrand(z):
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * (_phi(z) - _phi(z - q)) ** (k - 1)

    cdf, err = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-10, limit=200)
    if err > 1e-8:
        raise RuntimeError(f"studentized-range quadrature did not converge (err {err:g})")
    return float(min(1.0, max(0.0, 1.0 - k * cdf)))


def studentized_range_crit(alpha: float, k: int, tol: float = 1e-10) -> float:
    """Critical value q with survival(q) = alpha, by bisection."""
    lo, hi = 0.0, 1.0
    while studentized_range_sf(hi, k) > alpha:
        hi *= 2.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if studentized_range_sf(mid, k) > alpha:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def tukey_hsd(scores_by_group: dict[str, list[float]]) -> list[TukeyComparison]:
    """All-pairs Tukey HSD with pooled within-group variance.

    q = |mean_i - mean_j| / sqrt(MSw/2 * (1/n_i + 1/n_j)); p from the
    infinite-df studentized range with k = number of groups.
    """
    names = sorted(scores_by_group)
    if len(names) < 2:
        raise ValueError("need at least 2 groups")
    arrays = {g: np.asarray(scores_by_group[g], dtype=np.float64) for g in names}
    for g, arr in arrays.items():
        if len(arr) < 2:
            raise ValueError(f"group {g!r} needs at least 2 scores")
    n_total = sum(len(a) for a in arrays.values())
    k = len(names)
    ss_within = sum(float(np.sum((a - a.mean()) ** 2)) for a in arrays.values())
    msw = ss_within / (n_total - k)
    if msw == 0.0:
        raise ValueError("zero within-group variance; q undefined")
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            a, b = arrays[names[i]], arrays[names[j]]
            diff = float(a.mean() - b.mean())
            se = math.sqrt(msw / 2.0 * (1.0 / len(a) + 1.0 / len(b)))
            q = abs(diff) / se
            out.append(
                TukeyComparison(names[i], names[j], diff, q, studentized_range_sf(q, k))
            )
    return out


def regression_metrics(pred, target) -> Metrics:
    """PCC / MAE / RMSE with standard definitions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1 or len(pred) == 0:
        raise ValueError("pred and target must be equal-length nonempty vectors")
    err = pred - target
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    dp = pred - pred.mean()
    dt = target - target.mean()
    denom = math.sqrt(float(np.sum(dp**2)) * float(np.sum(dt**2)))
    if float(np.sum(dt**2)) == 0.0:
        raise ValueError("target is constant; PCC undefined")
    if denom == 0.0:
        raise ValueError("constant predictions; PCC undefined")
    pcc = float(np.sum(dp * dt) / denom)
    return Metrics(pcc=pcc, mae=mae, rmse=rmse)


_METRIC_FUNCS = {
    "pcc": lambda p, t: regression_metrics(p, t).pcc,
    "mae": lambda p, t: float(np.mean(np.abs(np.asarray(p) - np.asarray(t)))),
    "rmse": lambda p, t: float(np.sqrt(np.mean((np.asarray(p) - np.asarray(t)) ** 2))),
}


def bootstrap_ci(
    pred,
    target,
    metric: str,
    n_boot: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap CI for one regression metric.

    Resamples (pred, target) pairs with replacement; degenerate PCC
    resamples (constant target or pred) are redrawn, up to 10x n_boot draws.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    func = _METRIC_FUNCS[metric]
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = len(pred)
    rng = np.random.default_rng(seed)
    stats = []
    attempts = 0
    while len(stats) < n_boot:
        if attempts >= 10 * n_boot:
            raise ValueError("too many degenerate bootstrap resamples")
        attempts += 1
        idx = rng.integers(0, n, size=n)
        p, t = pred[idx], target[idx]
        if metric == "pcc" and (np.all(t == t[0]) or np.all(p == p[0])):
            continue
        stats.append(func(p, t))
    lo = (1.0 - level) / 2.0
    lower, upper = np.quantile(stats, [lo, 1.0 - lo])
    return float(lower), float(upper)


def metrics_with_ci(pred, target, n_boot: int = 1000, seed: int = 0) -> Metrics:
    """Regression metrics plus 95% percentile-bootstrap intervals."""
    base = regression_metrics(pred, target)
    return Metrics(
        pcc=base.pcc,
        mae=base.mae,
        rmse=base.rmse,
        pcc_ci=bootstrap_ci(pred, target, "pcc", n_boot=n_boot, seed=seed),
        mae_ci=bootstrap_ci(pred, target, "mae", n_boot=n_boot, seed=seed),
        rmse_ci=bootstrap_ci(pred, target, "rmse", n_boot=n_boot, seed=seed),
    )

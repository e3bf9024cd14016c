"""Rolling-window backtesting, rank aggregation, and nonparametric model comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import baselines, core, ewnet
from .core import MetricSet, SplitSpec, TimeSeries
from .ewnet import EwnetConfig

_WEEKLY_STEPS = {"short": 13, "medium": 26, "long": 52}
_MONTHLY_STEPS = {"short": 3, "medium": 6, "long": 12}


@dataclass(frozen=True)
class HorizonSpec:
    kind: str
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be positive")

    @classmethod
    def for_frequency(cls, kind: str, frequency: int) -> "HorizonSpec":
        """Short/medium/long spans: 13/26/52 weekly, 3/6/12 monthly."""
        table = _WEEKLY_STEPS if frequency == 52 else _MONTHLY_STEPS
        if kind not in table:
            raise ValueError(f"unknown horizon kind {kind!r}")
        if frequency not in (12, 52):
            raise ValueError("frequency-derived horizons need weekly or monthly data")
        return cls(kind=kind, steps=table[kind])


@dataclass(frozen=True)
class RankTable:
    """D x M matrix of per-case model ranks (1 = best, midranks for ties)."""

    models: tuple[str, ...]
    datasets: tuple[str, ...]
    ranks: np.ndarray
    metric: str

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=float)
        d, m = ranks.shape
        if d != len(self.datasets) or m != len(self.models):
            raise ValueError("rank matrix shape does not match labels")
        expected = m * (m + 1) / 2.0
        if not np.allclose(ranks.sum(axis=1), expected):
            raise ValueError("each row must sum to M(M+1)/2")
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def from_scores(cls, models, datasets, scores, metric: str) -> "RankTable":
        """Rank models per dataset row by score, lower is better."""
        scores = np.asarray(scores, dtype=float)
        ranks = np.vstack([stats.rankdata(row) for row in scores])
        return cls(models=tuple(models), datasets=tuple(datasets), ranks=ranks, metric=metric)

    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: str
    p_value: float
    alpha: float
    decision: str

    @classmethod
    def from_p(cls, statistic: float, df: str, p_value: float, alpha: float) -> "TestResult":
        p_value = float(min(max(p_value, 0.0), 1.0))
        return cls(
            statistic=float(statistic), df=df, p_value=p_value, alpha=alpha,
            decision="reject" if p_value < alpha else "retain",
        )


@dataclass(frozen=True)
class EvaluationCell:
    forecaster: str
    metrics: MetricSet
    coverage: float | None = None


@dataclass(frozen=True)
class EvaluationReport:
    horizon: HorizonSpec
    split: SplitSpec
    cells: tuple[EvaluationCell, ...]
    forecasts: dict
    seed: int

    def metric_table(self, metric: str) -> dict[str, float]:
        return {c.forecaster: getattr(c.metrics, metric) for c in self.cells}


DEFAULT_FORECASTERS = ("EWNet", "RW", "RWD", "ARNN")


def rolling_evaluate(series: TimeSeries, horizon: HorizonSpec,
                     forecasters=DEFAULT_FORECASTERS,
                     cfg: EwnetConfig | None = None,
                     seed: int = 0,
                     external: dict | None = None) -> EvaluationReport:
    """Hold out the last ``steps`` points as test with a validation window
    twice as long, fit each forecaster on the prefix, and score the test span.

    The EWNet forecaster selects its lag order on the validation window, is
    refit on train + validation, and additionally reports pre-control interval
    coverage. ``external`` maps names to precomputed h-step forecasts.
    """
    values = series.values
    split = SplitSpec.for_series(values.size, test_len=horizon.steps)
    if split.train_len < 8:
        raise ValueError(
            f"series of length {values.size} too short for horizon {horizon.steps}"
        )
    train = values[: split.train_len]
    val = values[split.train_len: split.train_len + split.val_len]
    test = values[split.train_len + split.val_len:]
    fit_span = np.concatenate([train, val])

    if cfg is None:
        cfg = EwnetConfig(horizon=horizon.steps)
    cfg = EwnetConfig(
        levels=cfg.levels, p_grid=cfg.p_grid, selection_metric=cfg.selection_metric,
        horizon=horizon.steps, seasonal_lag=cfg.seasonal_lag,
        train_cfg=cfg.train_cfg.replace(seed=seed),
    )

    cells: list[EvaluationCell] = []
    forecasts: dict[str, np.ndarray] = {}
    for name in forecasters:
        coverage = None
        if name == "EWNet":
            model = ewnet.fit_ewnet_selected(train, val, cfg)
            point = ewnet.forecast_ewnet(model, horizon.steps)
            interval = ewnet.precontrol_interval(point, ewnet.in_sample_residuals(model))
            coverage = float(np.mean((test >= interval.lower) & (test <= interval.upper)))
        elif name == "RW":
            point = baselines.rw_forecast(fit_span, horizon.steps)
        elif name == "RWD":
            point = baselines.rwd_forecast(fit_span, horizon.steps)
        elif name == "ARNN":
            point = baselines.arnn_forecast(fit_span, horizon.steps, cfg.train_cfg,
                                            p_grid=cfg.p_grid)
        else:
            raise ValueError(f"unknown forecaster {name!r}")
        forecasts[name] = point
        cells.append(EvaluationCell(
            forecaster=name,
            metrics=core.metric_set(test, point, fit_span, cfg.seasonal_lag),
            coverage=coverage,
        ))

    for name, point in (external or {}).items():
        point = np.asarray(point, dtype=float)
        if point.size != horizon.steps:
            raise ValueError(f"external forecast {name!r} has length {point.size}, "
                             f"expected {horizon.steps}")
        forecasts[name] = point
        cells.append(EvaluationCell(
            forecaster=name,
            metrics=core.metric_set(test, point, fit_span, cfg.seasonal_lag),
        ))

    return EvaluationReport(horizon=horizon, split=split, cells=tuple(cells),
                            forecasts=forecasts, seed=seed)


def friedman_chi2(table: RankTable, alpha: float = 0.05) -> TestResult:
    """Friedman statistic 12D/(M(M+1)) * [sum R_m^2 - M(M+1)^2/4] on mean ranks."""
    d, m = table.ranks.shape
    if d < 2 or m < 2:
        raise ValueError("need at least 2 datasets and 2 models")
    mean_ranks = table.mean_ranks()
    statistic = 12.0 * d / (m * (m + 1)) * (np.sum(mean_ranks**2) - m * (m + 1) ** 2 / 4.0)
    p_value = stats.chi2.sf(statistic, df=m - 1)
    return TestResult.from_p(statistic, df=str(m - 1), p_value=p_value, alpha=alpha)


def iman_f(chi2: float, m: int, d: int, alpha: float = 0.05) -> TestResult:
    """Iman-Davenport F_F = (D-1) chi2 / (D(M-1) - chi2), df (M-1, (M-1)(D-1))."""
    if m < 2 or d < 2:
        raise ValueError("need at least 2 datasets and 2 models")
    denom = d * (m - 1) - chi2
    if denom <= 0:
        raise ValueError("chi-square statistic too large for the Iman F transform")
    statistic = (d - 1) * chi2 / denom
    df1, df2 = m - 1, (m - 1) * (d - 1)
    p_value = stats.f.sf(statistic, df1, df2)
    return TestResult.from_p(statistic, df=f"({df1}, {df2})", p_value=p_value, alpha=alpha)


def _wilcoxon_prepare(errors_a, errors_b):
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    if diffs.size < 5:
        raise ValueError("too few non-zero differences (need at least 5)")
    ranks = stats.rankdata(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    return diffs, ranks, w_plus


def _wilcoxon_exact_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided p by dynamic programming over all 2^n sign assignments.

    Midranks are half-integers, so everything is doubled to stay integral.
    """
    doubled = np.rint(2.0 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r else counts
        counts = counts + shifted if r else 2 * counts
    counts /= counts.sum()
    w2 = int(round(2.0 * w_plus))
    lower = counts[: w2 + 1].sum()
    upper = counts[w2:].sum()
    return min(1.0, 2.0 * min(lower, upper))


def _wilcoxon_normal_p(diffs: np.ndarray, ranks: np.ndarray, w_plus: float) -> float:
    n = diffs.size
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    var -= np.sum(tie_counts**3 - tie_counts) / 48.0
    if var <= 0:
        raise ValueError("degenerate variance (all differences tied)")
    # Continuity correction toward the mean.
    z = (w_plus - mu - 0.5 * np.sign(w_plus - mu)) / math.sqrt(var)
    return min(1.0, 2.0 * stats.norm.sf(abs(z)))


def wilcoxon_signed_rank(errors_a, errors_b, alpha: float = 0.05) -> TestResult:
    """Two-sided paired Wilcoxon test; exact enumeration for n <= 20, normal
    approximation with continuity and tie corrections beyond."""
    diffs, ranks, w_plus = _wilcoxon_prepare(errors_a, errors_b)
    n = diffs.size
    w_stat = min(w_plus, ranks.sum() - w_plus)
    if n <= 20:
        p_value = _wilcoxon_exact_p(ranks, w_plus)
        branch = "exact"
    else:
        p_value = _wilcoxon_normal_p(diffs, ranks, w_plus)
        branch = "normal"
    return TestResult.from_p(w_stat, df=f"n={n} ({branch})", p_value=p_value, alpha=alpha)


@dataclass(frozen=True)
class McbEntry:
    model: str
    mean_rank: float
    lower: float
    upper: float
    significantly_worse: bool


def _studentized_range_q(alpha: float, m: int) -> float:
    # Normal-based Tukey quantile: infinite error degrees of freedom.
    return float(stats.studentized_range.ppf(1.0 - alpha, m, np.inf))


def mcb_analysis(table: RankTable, alpha: float = 0.05,
                 critical_constant: float | None = None) -> list[McbEntry]:
    """Multiple comparisons with the best: mean ranks with symmetric intervals
    of half-width (q_alpha,M / sqrt(2)) * sqrt(M(M+1) / (12 D)).

    A model is significantly worse when its whole interval lies above the
    best model's upper bound. ``critical_constant`` overrides q_alpha,M.
    """
    d, m = table.ranks.shape
    if d < 2 or m < 2:
        raise ValueError("need at least 2 datasets and 2 models")
    q = critical_constant if critical_constant is not None else _studentized_range_q(alpha, m)
    half = (q / math.sqrt(2.0)) * math.sqrt(m * (m + 1) / (12.0 * d))
    means = table.mean_ranks()
    best_upper = means.min() + half
    entries = []
    for name, mean_rank in zip(table.models, means):
        entries.append(McbEntry(
            model=name,
            mean_rank=float(mean_rank),
            lower=float(mean_rank - half),
            upper=float(mean_rank + half),
            significantly_worse=bool(mean_rank - half > best_upper),
        ))
    return entries


def hurst_exponent(series, min_window: int = 32) -> float:
    """Rescaled-range Hurst estimate: slope of log(R/S) on log(window size)
    over dyadic windows; zero-variance blocks are skipped."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    n = values.size
    if n < 32:
        raise ValueError("need at least 32 observations")
    sizes = []
    # Short series start from smaller windows so at least two sizes exist.
    w = min(min_window, max(8, n // 4))
    while w <= n // 2:
        sizes.append(w)
        w *= 2
    log_w, log_rs = [], []
    for w in sizes:
        ratios = []
        for start in range(0, n - w + 1, w):
            block = values[start:start + w]
            dev = block - block.mean()
            spread = float(np.std(block))
            if spread == 0.0:
                continue
            walk = np.cumsum(dev)
            ratios.append((walk.max() - walk.min()) / spread)
        if ratios:
            log_w.append(math.log(w))
            log_rs.append(math.log(np.mean(ratios)))
    if len(log_w) < 2:
        raise ValueError("not enough usable windows (constant series?)")
    slope = np.polyfit(log_w, log_rs, 1)[0]
    return float(slope)

"""EWNet: wavelet-decomposed ensemble of autoregressive neural networks.

The training series is MODWT-decomposed into J details plus a smooth; one
network is fitted per component with a shared lag order chosen on a
validation window; component forecasts are extended recursively and summed.
Prediction intervals come from pre-control limits or split conformal
calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core, neuralnet
from .neuralnet import NeuralNetModel, TrainConfig, hidden_neurons
from .wavelet import WaveletDecomposition, haar_filter, modwt_forward


@dataclass(frozen=True)
class EwnetConfig:
    levels: int | None = None
    p_grid: tuple[int, ...] = tuple(range(1, 21))
    selection_metric: str = "mase"
    horizon: int = 1
    seasonal_lag: int = 1
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.p_grid:
            raise ValueError("p_grid must be non-empty")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.selection_metric not in ("mase", "smape"):
            raise ValueError("selection_metric must be 'mase' or 'smape'")


@dataclass
class EwnetModel:
    decomposition: WaveletDecomposition
    component_models: list[NeuralNetModel]
    chosen_p: int
    chosen_k: int
    config: EwnetConfig
    train_series: np.ndarray

    def __post_init__(self):
        if len(self.component_models) != self.decomposition.levels + 1:
            raise ValueError("one model required per detail plus the smooth")
        if self.chosen_k != hidden_neurons(self.chosen_p):
            raise ValueError("chosen_k must equal floor((chosen_p + 1) / 2)")


@dataclass(frozen=True)
class IntervalForecast:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    method: str
    nominal_level: float

    def __post_init__(self):
        if np.any(self.lower > self.point) or np.any(self.point > self.upper):
            raise ValueError("interval must bracket the point forecast")


def default_levels(n: int) -> int:
    """Detail count J with J + 1 = floor(ln n) total components."""
    if n < 8:
        raise ValueError("need at least 8 training observations")
    return int(math.floor(math.log(n))) - 1


def _component_cfg(cfg: TrainConfig, component: int) -> TrainConfig:
    # Independent deterministic seed stream per component.
    seed = int(np.random.SeedSequence([cfg.seed, component]).generate_state(1)[0])
    return cfg.replace(seed=seed)


def _fit_components(train: np.ndarray, p: int, cfg: EwnetConfig) -> EwnetModel:
    levels = cfg.levels if cfg.levels is not None else default_levels(train.size)
    decomp = modwt_forward(train, levels, haar_filter())
    k = hidden_neurons(p)
    models = [
        neuralnet.fit_network(comp, p, k, _component_cfg(cfg.train_cfg, idx))
        for idx, comp in enumerate(decomp.components())
    ]
    return EwnetModel(
        decomposition=decomp,
        component_models=models,
        chosen_p=p,
        chosen_k=k,
        config=cfg,
        train_series=np.asarray(train, dtype=float),
    )


def forecast_ewnet(model: EwnetModel, h: int) -> np.ndarray:
    """Sum of the h-step recursive forecasts of every component network."""
    if h < 1:
        raise ValueError("h must be >= 1")
    total = np.zeros(h)
    for net, comp in zip(model.component_models, model.decomposition.components()):
        total += neuralnet.forecast_recursive(net, comp, h)
    return total


def _score(actual, forecast, train, cfg: EwnetConfig) -> float:
    if cfg.selection_metric == "smape":
        return core.smape(actual, forecast)
    return core.mase(actual, forecast, train, cfg.seasonal_lag)


def select_p(train, val, cfg: EwnetConfig) -> int:
    """Grid-search the shared lag order by validation-window forecast error.

    Each candidate refits the full ensemble on ``train`` only and forecasts
    len(val) steps; ties break toward the smaller lag.
    """
    train = np.asarray(train, dtype=float)
    val = np.asarray(val, dtype=float)
    if val.size == 0:
        raise ValueError("validation window must be non-empty")
    best_p = None
    best_score = math.inf
    errors: list[str] = []
    for p in sorted(cfg.p_grid):
        try:
            candidate = _fit_components(train, p, cfg)
            forecast = forecast_ewnet(candidate, val.size)
            score = _score(val, forecast, train, cfg)
        except ValueError as exc:
            errors.append(f"p={p}: {exc}")
            continue
        if score < best_score:
            best_score = score
            best_p = p
    if best_p is None:
        raise ValueError("no feasible lag order in the grid: " + "; ".join(errors))
    return best_p


def fit_ewnet(train, cfg: EwnetConfig, p: int | None = None) -> EwnetModel:
    """Fit the ensemble with a fixed lag order (no selection step)."""
    train = np.asarray(train, dtype=float)
    chosen = p if p is not None else min(cfg.p_grid)
    return _fit_components(train, chosen, cfg)


def fit_ewnet_selected(train, val, cfg: EwnetConfig, refit_on_both: bool = True) -> EwnetModel:
    """Select the lag order on the validation window, then refit.

    The final refit uses train + validation when ``refit_on_both`` so the
    model sees the most recent observations before forecasting the test span.
    """
    train = np.asarray(train, dtype=float)
    val = np.asarray(val, dtype=float)
    p = select_p(train, val, cfg)
    refit_series = np.concatenate([train, val]) if refit_on_both else train
    return _fit_components(refit_series, p, cfg)


def in_sample_residuals(model: EwnetModel) -> np.ndarray:
    """One-step residuals (fitted - actual) of the ensemble on its training window."""
    p = model.chosen_p
    n = model.train_series.size
    fitted = np.zeros(n - p)
    for net, comp in zip(model.component_models, model.decomposition.components()):
        fitted += neuralnet.fitted_values(net, comp)
    return fitted - model.train_series[p:]


def precontrol_interval(point, residuals) -> IntervalForecast:
    """Constant-width band point +/- 1.5 sigma of the in-sample residuals."""
    point = np.asarray(point, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size < 2:
        raise ValueError("need at least 2 residuals")
    half_width = 1.5 * float(np.std(residuals, ddof=1))
    return IntervalForecast(
        point=point,
        lower=point - half_width,
        upper=point + half_width,
        method="precontrol",
        nominal_level=0.86,
    )


def conformal_interval(point, calibration_abs_residuals, level: float) -> IntervalForecast:
    """Split-conformal band with half-width the ceil((n+1)*level)-th order statistic."""
    point = np.asarray(point, dtype=float)
    cal = np.sort(np.asarray(calibration_abs_residuals, dtype=float))
    if cal.size == 0:
        raise ValueError("calibration set must be non-empty")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    rank = math.ceil((cal.size + 1) * level)
    if rank > cal.size:
        raise ValueError(
            f"level {level} infeasible for calibration size {cal.size}: "
            f"required rank {rank} exceeds {cal.size}"
        )
    q = float(cal[rank - 1])
    return IntervalForecast(
        point=point, lower=point - q, upper=point + q,
        method="conformal", nominal_level=level,
    )


def validation_abs_residuals(model: EwnetModel, val) -> np.ndarray:
    """Absolute one-step-ahead errors over a validation window for conformal calibration.

    The fitted component models roll forward through the validation span one
    observation at a time, each step forecasting from the true history so far.
    """
    val = np.asarray(val, dtype=float)
    residuals = np.empty(val.size)
    history = model.train_series.copy()
    for i, actual in enumerate(val):
        # Component series are extended by re-decomposing the growing history so
        # each one-step forecast conditions on all observed data.
        decomp = modwt_forward(history, model.decomposition.levels, haar_filter())
        pred = 0.0
        for net, comp in zip(model.component_models, decomp.components()):
            pred += neuralnet.forecast_recursive(net, comp, 1)[0]
        residuals[i] = abs(pred - actual)
        history = np.append(history, actual)
    return residuals

"""Time series container, CSV ingestion, and forecast accuracy metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric has no defined value (e.g. MASE on a constant train series)."""


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class TimeSeries:
    """Ordered real-valued observations with an observations-per-cycle tag.

    ``frequency`` is 52 for weekly, 12 for monthly, 1 when unspecified.
    ``labels`` are opaque timestamp strings carried through but never parsed.
    """

    values: np.ndarray
    frequency: int = 1
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DataError("series must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"non-finite value at position {bad}")
        if self.labels is not None and len(self.labels) != values.size:
            raise DataError("labels length does not match values length")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    mae: float
    mase: float
    smape: float

    def as_dict(self) -> dict[str, float]:
        return {"rmse": self.rmse, "mae": self.mae, "mase": self.mase, "smape": self.smape}


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test partition sizes; validation defaults to twice the test."""

    train_len: int
    val_len: int
    test_len: int

    def __post_init__(self):
        if self.train_len < 3:
            raise ValueError("train_len must be at least 3")
        if self.val_len < 0 or self.test_len < 1:
            raise ValueError("invalid split sizes")

    @classmethod
    def for_series(cls, n: int, test_len: int, val_len: int | None = None) -> "SplitSpec":
        if val_len is None:
            val_len = 2 * test_len
        train_len = n - val_len - test_len
        return cls(train_len=train_len, val_len=val_len, test_len=test_len)

    @property
    def total(self) -> int:
        return self.train_len + self.val_len + self.test_len


def load_csv(path, value_column: str, label_column: str | None = None,
             frequency: int = 1) -> TimeSeries:
    """Read one observation per row from a UTF-8 CSV with a header row.

    Rows are assumed to already be in temporal order.
    """
    values: list[float] = []
    labels: list[str] = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or value_column not in reader.fieldnames:
            raise DataError(f"column {value_column!r} not found in {path}")
        if label_column is not None and label_column not in reader.fieldnames:
            raise DataError(f"column {label_column!r} not found in {path}")
        for i, row in enumerate(reader, start=2):  # header is line 1
            raw = row[value_column]
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise DataError(f"row {i}: cannot parse value {raw!r}") from None
            if not np.isfinite(value):
                raise DataError(f"row {i}: non-finite value {raw!r}")
            values.append(value)
            if label_column is not None:
                labels.append(row[label_column])
    if not values:
        raise DataError(f"no data rows in {path}")
    return TimeSeries(
        values=np.array(values),
        frequency=frequency,
        labels=tuple(labels) if label_column is not None else None,
    )


def _paired(actual, forecast) -> tuple[np.ndarray, np.ndarray]:
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.size == 0:
        raise ValueError("empty input")
    if actual.shape != forecast.shape:
        raise ValueError(f"length mismatch: {actual.shape} vs {forecast.shape}")
    return actual, forecast


def rmse(actual, forecast) -> float:
    actual, forecast = _paired(actual, forecast)
    return float(np.sqrt(np.mean((actual - forecast) ** 2)))


def mae(actual, forecast) -> float:
    actual, forecast = _paired(actual, forecast)
    return float(np.mean(np.abs(actual - forecast)))


def mase(actual, forecast, train, seasonal_lag: int = 1) -> float:
    """Test-set MAE scaled by the in-sample seasonal-naive MAE of the train series."""
    actual, forecast = _paired(actual, forecast)
    train = np.asarray(train, dtype=float)
    if seasonal_lag < 1:
        raise ValueError("seasonal_lag must be >= 1")
    if train.size <= seasonal_lag:
        raise ValueError("train series shorter than seasonal lag")
    scale = np.mean(np.abs(train[seasonal_lag:] - train[:-seasonal_lag]))
    if scale == 0.0:
        raise UndefinedMetricError("MASE undefined: constant training series")
    return float(np.mean(np.abs(actual - forecast)) / scale)


def smape(actual, forecast) -> float:
    """Symmetric MAPE on the 0-200 scale; a term with both values zero contributes 0."""
    actual, forecast = _paired(actual, forecast)
    denom = np.abs(actual) + np.abs(forecast)
    terms = np.where(denom == 0.0, 0.0, 200.0 * np.abs(forecast - actual) / np.where(denom == 0.0, 1.0, denom))
    return float(np.mean(terms))


def metric_set(actual, forecast, train, seasonal_lag: int = 1) -> MetricSet:
    return MetricSet(
        rmse=rmse(actual, forecast),
        mae=mae(actual, forecast),
        mase=mase(actual, forecast, train, seasonal_lag),
        smape=smape(actual, forecast),
    )

"""Univariate summaries, Pearson correlations, and high-NOx flagging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateDataError
from .ingest import Dataset, PREDICTORS, TARGET, OPTIONAL_TARGET

DEFAULT_BINS = 30
DEFAULT_HIGH_NOX_QUANTILE = 0.80


@dataclass(frozen=True)
class VariableSummary:
    name: str
    count: int
    mean: float
    std: float          # sample (n-1) standard deviation
    min: float
    max: float
    q1: float
    median: float
    q3: float
    histogram: tuple[tuple[float, float, int], ...]  # (bin_lower, bin_upper, count)


@dataclass(frozen=True)
class CorrelationMatrix:
    variables: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def value(self, a: str, b: str) -> float:
        i, j = self.variables.index(a), self.variables.index(b)
        return float(self.matrix[i, j])


def default_summary_variables(ds: Dataset) -> list[str]:
    names = list(PREDICTORS) + [TARGET]
    if ds.has_co:
        names.append(OPTIONAL_TARGET)
    return names


def _histogram(values: np.ndarray, bins: int) -> tuple[tuple[float, float, int], ...]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return ((lo, hi, int(values.size)),)
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return tuple((float(edges[i]), float(edges[i + 1]), int(counts[i]))
                 for i in range(bins))


def summarize(ds: Dataset, bins: int = DEFAULT_BINS,
              variables: Sequence[str] | None = None) -> list[VariableSummary]:
    """One summary per numeric variable; equal-width bins over [min, max].

    The last bin is closed so the histogram counts sum to the record
    count.  A constant column collapses to a single occupied bin.
    """
    if ds.n_records == 0:
        raise DegenerateDataError("cannot summarize an empty dataset")
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    names = list(variables) if variables is not None else default_summary_variables(ds)
    out = []
    for name in names:
        col = ds.column(name)
        q1, med, q3 = (float(q) for q in np.quantile(col, [0.25, 0.5, 0.75]))
        out.append(VariableSummary(
            name=name,
            count=int(col.size),
            mean=float(col.mean()),
            std=float(col.std(ddof=1)) if col.size > 1 else 0.0,
            min=float(col.min()),
            max=float(col.max()),
            q1=q1, median=med, q3=q3,
            histogram=_histogram(col, bins),
        ))
    return out


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson coefficient of two equal-length vectors."""
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.dot(xc, xc)))
    sy = float(np.sqrt(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateDataError("zero-variance input to Pearson correlation")
    return float(np.dot(xc, yc) / (sx * sy))


def correlation_matrix(ds: Dataset,
                       variables: Sequence[str] | None = None) -> CorrelationMatrix:
    """Pairwise Pearson coefficients over all records.

    The result is exactly symmetric with a unit diagonal; entries are
    clipped to [-1, 1] to absorb last-ulp excursions.
    """
    names = tuple(variables) if variables is not None else PREDICTORS
    if ds.n_records < 2:
        raise DegenerateDataError("correlation needs at least 2 records")
    data = ds.matrix(names)
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    for i, n in enumerate(norms):
        if n == 0.0:
            raise DegenerateDataError(f"variable '{names[i]}' has zero variance")
    z = centered / norms
    corr = z.T @ z
    corr = (corr + corr.T) / 2.0
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(names, corr)


def flag_high_nox(ds: Dataset,
                  quantile: float = DEFAULT_HIGH_NOX_QUANTILE) -> np.ndarray:
    """Boolean mask of records with NOx strictly above the given quantile.

    Accepts the closed range [0, 1]: 0 flags everything above the
    minimum, 1 flags nothing.
    """
    if not 0.0 <= quantile <= 1.0:
        raise ConfigError(f"quantile must be in [0, 1], got {quantile}")
    nox = ds.column(TARGET)
    threshold = float(np.quantile(nox, quantile))
    return nox > threshold

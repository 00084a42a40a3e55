from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from coalescent.grid import GridSpec
from common.errors import CovariateError


class Transform(str, Enum):
    IDENTITY = "identity"
    LOG = "log"
    LOG1P = "log1p"

    @classmethod
    def parse(cls, name: str) -> "Transform":
        aliases = {"none": cls.IDENTITY, "log(x+1)": cls.LOG1P, "log_plus_one": cls.LOG1P}
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError as e:
            raise CovariateError(f"unknown covariate transform '{name}'") from e

    def apply(self, values: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            if self is Transform.LOG:
                return np.log(values)
            if self is Transform.LOG1P:
                return np.log1p(values)
        return values.copy()


@dataclass(frozen=True, eq=False)
class CovariateMatrix:
    """
    The (M + 1) x P design Z after transformation, with NaN marking missing cells. Row k belongs to grid
    interval k. times holds the measurement time (or interval endpoint) of each row when known.
    """

    values: np.ndarray = field(repr=False)
    labels: tuple[str, ...] = ()
    transforms: tuple[Transform, ...] = ()
    times: tuple[float, ...] | None = None
    centers: tuple[float, ...] = ()
    scales: tuple[float, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise CovariateError(f"covariates must form a matrix, got shape {values.shape}")
        n, p = values.shape
        if np.any(np.isinf(values)):
            raise CovariateError("observed covariate values must be finite after transformation")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"Z{j + 1}" for j in range(p)))
        if not self.transforms:
            object.__setattr__(self, "transforms", (Transform.IDENTITY,) * p)
        if not self.centers:
            object.__setattr__(self, "centers", (0.0,) * p)
        if not self.scales:
            object.__setattr__(self, "scales", (1.0,) * p)
        if len(self.labels) != p or len(self.transforms) != p:
            raise CovariateError(f"{p} columns but {len(self.labels)} labels and {len(self.transforms)} transforms")
        if self.times is not None and len(self.times) != n:
            raise CovariateError(f"{n} rows but {len(self.times)} measurement times")
        for j in range(p):
            if p and n and np.all(np.isnan(values[:, j])):
                raise CovariateError(f"covariate '{self.labels[j]}' has no observed values")

    @classmethod
    def empty(cls, n_rows: int) -> "CovariateMatrix":
        return cls(values=np.zeros((n_rows, 0)))

    @classmethod
    def from_raw(
        cls,
        raw: np.ndarray,
        labels: Sequence[str],
        transforms: Mapping[str, str] | None = None,
        times: Sequence[float] | None = None,
        standardize: bool = False,
        intercept: bool = False,
    ) -> "CovariateMatrix":
        """
        This function applies the per-column transformations, optional standardization of the observed values
        and an optional leading intercept column.

        :param raw: untransformed values with NaN for missing cells
        :param labels: column labels
        :param transforms: column label to transform name; unlisted columns are left as they are
        :param times: measurement time of each row
        :param standardize: center and scale every column by its observed mean and standard deviation
        :param intercept: prepend a column of ones labelled "intercept"
        :return: the covariate matrix
        """
        raw = np.array(raw, dtype=float)
        if raw.ndim == 1:
            raw = raw[:, None]
        transforms = transforms or {}
        unknown = set(transforms) - set(labels)
        if unknown:
            raise CovariateError(f"transforms given for unknown columns {sorted(unknown)}")

        columns: list[np.ndarray] = []
        records: list[Transform] = []
        centers: list[float] = []
        scales: list[float] = []
        for j, label in enumerate(labels):
            transform = Transform.parse(transforms.get(label, "identity"))
            column = raw[:, j]
            observed = ~np.isnan(column)
            transformed = np.full_like(column, np.nan)
            transformed[observed] = transform.apply(column[observed])
            if not np.all(np.isfinite(transformed[observed])):
                raise CovariateError(f"covariate '{label}' has values outside the domain of the {transform.value} transform")
            center, scale = 0.0, 1.0
            if standardize and observed.sum() > 1:
                center = float(np.mean(transformed[observed]))
                scale = float(np.std(transformed[observed], ddof=1)) or 1.0
                transformed = (transformed - center) / scale
            columns.append(transformed)
            records.append(transform)
            centers.append(center)
            scales.append(scale)

        labels = list(labels)
        if intercept:
            columns.insert(0, np.ones(raw.shape[0]))
            labels.insert(0, "intercept")
            records.insert(0, Transform.IDENTITY)
            centers.insert(0, 0.0)
            scales.insert(0, 1.0)

        values = np.column_stack(columns) if columns else np.zeros((raw.shape[0], 0))
        return cls(
            values=values,
            labels=tuple(labels),
            transforms=tuple(records),
            times=None if times is None else tuple(float(t) for t in times),
            centers=tuple(centers),
            scales=tuple(scales),
        )

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def has_missing(self) -> bool:
        return bool(np.any(np.isnan(self.values)))

    @property
    def missing_columns(self) -> list[int]:
        return [j for j in range(self.n_columns) if np.any(np.isnan(self.values[:, j]))]

    def missing_rows(self, j: int) -> np.ndarray:
        return np.flatnonzero(np.isnan(self.values[:, j]))

    def design(self) -> np.ndarray:
        """Z itself; only valid when nothing is missing."""
        if self.has_missing:
            raise CovariateError("covariate matrix has missing cells; fill them before use")
        return np.array(self.values)

    def filled(self, imputed: np.ndarray) -> np.ndarray:
        """Z with missing cells taken from imputed, an array of the same shape."""
        imputed = np.asarray(imputed, dtype=float)
        if imputed.shape != self.values.shape:
            raise ValueError(f"imputed shape {imputed.shape} does not match {self.values.shape}")
        return np.where(self.observed, self.values, imputed)

    def check_rows(self, n_intervals: int) -> None:
        if self.n_rows != n_intervals:
            raise CovariateError(f"covariates have {self.n_rows} rows but the trajectory has {n_intervals} intervals")

    def aligned_grid(self, layout: str = "intervals") -> GridSpec:
        """
        Grid points that make row k cover interval k. Under the intervals layout each time closes its row's
        interval, so the grid is the first M times; under the points layout each row holds from its measurement
        time onward into the past, the first measurement sits at 0 and the grid is the last M times.
        """
        if self.times is None:
            raise CovariateError("covariates carry no measurement times to align the grid with")
        if self.n_rows < 2:
            raise CovariateError("at least two covariate rows are needed to align a grid")
        if layout == "intervals":
            points = self.times[:-1]
        elif layout == "points":
            if self.times[0] != 0:
                raise CovariateError(f"the points layout needs a first measurement at time 0, got {self.times[0]}")
            points = self.times[1:]
        else:
            raise CovariateError(f"unknown covariate layout '{layout}'")
        try:
            return GridSpec(points)
        except ValueError as e:
            raise CovariateError(f"measurement times cannot serve as grid points: {e}") from e

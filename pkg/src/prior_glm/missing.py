import math
from enum import Enum

import numpy as np

from common.errors import CovariateError
from prior_glm.gaussian import Gaussian
from prior_glm.gmrf import GmrfPrecision, structure_matrix

"""
Missing covariate cells under a first-order random walk: each column z_j has the improper density

    log P(z_j | kappa) = (M/2) log kappa - (kappa/2) z_j' Q z_j + const

so the missing block given the observed cells is Gaussian with precision kappa Q_mm and mean -Q_mm^{-1} Q_mo z_o.
When the missing cells are a trailing block this is precision kappa P22 (2 on the diagonal, 1 in the last entry)
around the last observed value.
"""


class MissingLayout(str, Enum):
    TRAILING = "trailing"
    GENERAL = "general"


class MissingPolicy(str, Enum):
    RANDOM_WALK = "random_walk"
    UNIFORM = "uniform"


def is_trailing_block(column: np.ndarray) -> bool:
    missing = np.isnan(np.asarray(column, dtype=float))
    if not missing.any():
        return True
    first = int(np.argmax(missing))
    return bool(missing[first:].all())


def trailing_precision(n_missing: int) -> np.ndarray:
    """P22 for a block of n_missing trailing cells."""
    if n_missing < 1:
        raise ValueError(f"the missing block must hold at least one cell, got {n_missing}")
    diagonal = np.full(n_missing, 2.0)
    diagonal[-1] = 1.0
    return np.diag(diagonal) - np.eye(n_missing, k=1) - np.eye(n_missing, k=-1)


def _check_column(column: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    column = np.asarray(column, dtype=float).reshape(-1)
    missing = np.isnan(column)
    if missing.all():
        raise CovariateError("a covariate column with no observed values cannot be imputed")
    return column, missing


def missing_conditional(
    column: np.ndarray, kappa: float, layout: MissingLayout | str = MissingLayout.TRAILING
) -> Gaussian:
    """
    This function gives the random-walk distribution of the missing cells of one covariate column given its
    observed cells.

    :param column: the column with NaN marking missing cells
    :param kappa: random-walk precision, strictly positive
    :param layout: trailing (closed form, the missing cells must close the column) or general
    :return: Gaussian over the missing cells in row order
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    column, missing = _check_column(column)
    if not missing.any():
        raise CovariateError("the column has no missing cells")
    layout = MissingLayout(layout)

    if layout is MissingLayout.TRAILING:
        if not is_trailing_block(column):
            raise CovariateError("missing cells are interleaved with observed ones; use the general layout")
        n_missing = int(missing.sum())
        last_observed = column[~missing][-1]
        return Gaussian(mean=np.full(n_missing, last_observed), precision=kappa * trailing_precision(n_missing))

    q = structure_matrix(column.size)
    q_mm = q[np.ix_(missing, missing)]
    q_mo = q[np.ix_(missing, ~missing)]
    return Gaussian.from_canonical(kappa * q_mm, -kappa * q_mo @ column[~missing])


def log_random_walk_density(column: np.ndarray, kappa: float) -> float:
    """Unnormalized random-walk log density of a complete column."""
    column = np.asarray(column, dtype=float)
    q = GmrfPrecision(column.size)
    return 0.5 * q.rank * math.log(kappa) - 0.5 * kappa * q.quadratic_form(column)


def kappa_full_conditional(columns: list[np.ndarray], shape: float, rate: float) -> tuple[float, float]:
    """
    Shape and rate of the gamma conditional of the shared kappa given the completed columns that carry
    missing cells.
    """
    if not columns:
        return shape, rate
    n = np.asarray(columns[0]).size
    q = GmrfPrecision(n)
    quadratic = sum(q.quadratic_form(column) for column in columns)
    return shape + 0.5 * len(columns) * q.rank, rate + 0.5 * quadratic


def plausible_range(column: np.ndarray) -> tuple[float, float]:
    """Default support of the uniform missing-cell prior: the observed minimum and maximum."""
    column, missing = _check_column(column)
    observed = column[~missing]
    return float(observed.min()), float(observed.max())

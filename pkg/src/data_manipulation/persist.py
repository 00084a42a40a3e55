import json
import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from common.errors import exit_code_for

"""
The purpose of this module is to hold the writers for every artifact the command line produces, in exactly
the formats the getters in fetch read back.
"""


def ensure_directory(path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(obj: Any, path: str | Path) -> None:
    """Strict JSON: infinite and NaN floats are written as the strings "inf", "-inf" and "nan"."""
    text: str = json.dumps(_finite(obj), indent=2, sort_keys=True, default=_jsonable, allow_nan=False)
    Path(path).write_text(text + "\n")


def _finite(value: Any) -> Any:
    if isinstance(value, (np.ndarray, np.generic)):
        value = value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, Mapping):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_frame(df: pd.DataFrame, path: str | Path) -> None:
    df.to_csv(path, index=False, lineterminator="\n")


def write_newick(trees: Sequence[str], path: str | Path) -> None:
    Path(path).write_text("\n".join(trees) + "\n")


def write_tip_dates(dates: Mapping[str, float], path: str | Path) -> None:
    """Two tab separated columns with a header, in the order of dates."""
    lines: list[str] = ["label\tdate"] + [f"{label}\t{date!r}" for label, date in dates.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_covariates(times: Sequence[float], values: np.ndarray, labels: Sequence[str], path: str | Path) -> None:
    """
    This function writes the covariate CSV: time first, one column per covariate, empty cells where a value is
    missing.

    :param times: measurement time of each row
    :param values: the value matrix with NaN for missing cells
    :param labels: column labels
    :param path: output path
    """
    df: pd.DataFrame = pd.DataFrame(np.asarray(values, dtype=float), columns=list(labels))
    df.insert(0, "time", np.asarray(times, dtype=float))
    df.to_csv(path, index=False, na_rep="", lineterminator="\n")


def write_error(error: BaseException, directory: str | Path) -> Path:
    """The machine-readable failure record of a subcommand."""
    path: Path = ensure_directory(directory) / "error.json"
    write_json({"error": type(error).__name__, "message": str(error), "exit_code": exit_code_for(error)}, path)
    return path

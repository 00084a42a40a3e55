import json
from pathlib import Path

import numpy as np
import pandas as pd

from common.errors import CovariateError, GenealogyError, TraceError
from sampler.trace import Trace

"""
The purpose of this module is to centrally consolidate data getter methods that will return
a source of data for the genealogy, covariate and sampler packages.
"""


def read_trees(path: str | Path) -> list[tuple[str, str]]:
    """
    This function reads one Newick file. A file may hold several trees, each closed by ';'; every tree becomes
    its own locus named after the file stem (with a running suffix when there is more than one).

    :param path: path of a .nwk file
    :return: a list of (locus, newick text) pairs
    """
    path = Path(path)
    text: str = path.read_text()
    trees: list[str] = [chunk.strip() + ";" for chunk in text.split(";") if chunk.strip()]
    if not trees:
        raise GenealogyError(f"{path}: no Newick tree found")
    if len(trees) == 1:
        return [(path.stem, trees[0])]
    return [(f"{path.stem}_{i + 1}", tree) for i, tree in enumerate(trees)]


def read_tip_dates(path: str | Path) -> dict[str, float]:
    """
    This function reads a two-column, tab separated table of tip label and date. A header row is recognised by
    a second cell that is not a number and skipped.

    :param path: path of the table
    :return: mapping of tip label to date
    """
    try:
        table: pd.DataFrame = pd.read_csv(path, sep="\t", header=None, dtype=str, comment="#", skip_blank_lines=True)
    except pd.errors.EmptyDataError as e:
        raise GenealogyError(f"{path}: the tip date file is empty") from e
    if table.shape[1] != 2:
        raise GenealogyError(f"{path}: expected two tab separated columns, found {table.shape[1]}")
    dates: pd.Series = pd.to_numeric(table[1].str.strip(), errors="coerce")
    if len(table) and np.isnan(dates.iloc[0]):
        table, dates = table.iloc[1:], dates.iloc[1:]
    if dates.isna().any():
        bad: list = table.loc[dates.isna(), 0].tolist()
        raise GenealogyError(f"{path}: tips {bad} have no numeric date")
    labels: pd.Series = table[0].str.strip()
    if labels.duplicated().any():
        raise GenealogyError(f"{path}: duplicate tip labels {labels[labels.duplicated()].tolist()}")
    return dict(zip(labels, dates.astype(float)))


def read_covariates(path: str | Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """
    This function reads the covariate CSV: a header row of column names, the measurement time (or interval
    endpoint) in the first column and empty cells for missing values.

    :param path: path of the CSV
    :return: measurement times, the raw value matrix with NaN for missing cells, and the column labels
    """
    try:
        df: pd.DataFrame = pd.read_csv(path, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise CovariateError(f"{path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise CovariateError(f"{path}: the covariate file is empty") from e
    if df.shape[1] < 2 or df.empty:
        raise CovariateError(f"{path}: need a time column, at least one covariate column and one row")
    try:
        values: pd.DataFrame = df.apply(pd.to_numeric, errors="raise")
    except (ValueError, TypeError) as e:
        raise CovariateError(f"{path}: non-numeric covariate cell: {e}") from e
    times: np.ndarray = values.iloc[:, 0].to_numpy(dtype=float)
    if np.isnan(times).any():
        raise CovariateError(f"{path}: every row needs a measurement time")
    if np.any(np.diff(times) <= 0):
        raise CovariateError(f"{path}: measurement times must be strictly increasing")
    return times, values.iloc[:, 1:].to_numpy(dtype=float), [str(c).strip() for c in df.columns[1:]]


def read_manifest(path: str | Path) -> dict:
    with open(path) as handle:
        return json.load(handle)


def read_trace(path: str | Path, manifest: dict | None = None) -> Trace:
    """
    This function reads one trace CSV. Counters and metadata come from manifest when given, otherwise from a
    manifest.json beside the CSV whose "chain_manifests" entry names this file.

    :param path: path of the trace CSV
    :param manifest: the chain's manifest entry
    :return: the trace
    """
    path = Path(path)
    try:
        frame: pd.DataFrame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TraceError(f"{path}: {e}") from e
    if manifest is None:
        sibling: Path = path.parent / "manifest.json"
        if sibling.exists():
            entries: list = read_manifest(sibling).get("chain_manifests", [])
            manifest = next((entry for entry in entries if entry.get("file") == path.name), None)
    return Trace.from_frame(frame, manifest)

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import dendropy
import numpy as np
from dendropy.utility.error import DataParseError

from common.errors import GenealogyError

"""
The purpose of this module is to hold the dated genealogy type together with the getters that turn Newick text
into one and back again. Time runs backward: 0 is the most recent sampling time and larger values lie further
in the past.
"""

DATE_TOLERANCE: float = 1e-8
_PLAIN_LABEL = re.compile(r"^[A-Za-z0-9_.|\-/]+$")


class DateConvention(str, Enum):
    BACKWARD = "backward"
    CALENDAR = "calendar"


@dataclass(frozen=True)
class Node:
    index: int
    time: float
    label: str | None = None
    children: tuple[int, ...] = ()
    parent: int | None = None

    @property
    def is_tip(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Genealogy:
    """
    A rooted, dated, binary tree for one locus. Nodes are stored flat and refer to each other by index; the
    instance validates itself on construction and is immutable afterwards.
    """

    nodes: tuple[Node, ...]
    root: int
    locus: str = "locus"
    _tip_times: np.ndarray = field(init=False, repr=False, compare=False)
    _coalescent_times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tip_times = [node.time for node in self.tips]
        internal_times = [node.time for node in self.internal_nodes]
        object.__setattr__(self, "_tip_times", np.array(tip_times, dtype=float))
        object.__setattr__(self, "_coalescent_times", np.sort(np.array(internal_times, dtype=float)))
        self.validate()

    @property
    def tips(self) -> list[Node]:
        return [node for node in self.nodes if node.is_tip]

    @property
    def internal_nodes(self) -> list[Node]:
        return [node for node in self.nodes if not node.is_tip]

    @property
    def n_tips(self) -> int:
        return len(self._tip_times)

    @property
    def sampling_times(self) -> np.ndarray:
        return self._tip_times.copy()

    @property
    def coalescent_times(self) -> np.ndarray:
        return self._coalescent_times.copy()

    @property
    def t_mrca(self) -> float:
        return float(self.nodes[self.root].time)

    @property
    def most_recent_sampling_time(self) -> float:
        return float(self._tip_times.min())

    def tip_dates(self) -> dict[str, float]:
        return {node.label: node.time for node in self.tips}

    def validate(self) -> None:
        """
        Check the invariants every genealogy must satisfy: n - 1 binary coalescences for n tips, parents
        strictly older than their children, tips at non-negative times, the most recent event a tip, and no
        two coalescences at exactly the same time.
        """
        n_tips = self.n_tips
        if n_tips < 2:
            raise GenealogyError(f"locus {self.locus}: a genealogy needs at least 2 tips, got {n_tips}")
        if len(self.nodes) - n_tips != n_tips - 1:
            raise GenealogyError(
                f"locus {self.locus}: expected {n_tips - 1} internal nodes for {n_tips} tips, "
                f"got {len(self.nodes) - n_tips}"
            )
        labels = [node.label for node in self.tips]
        if len(set(labels)) != len(labels):
            raise GenealogyError(f"locus {self.locus}: duplicate tip labels")
        if not np.all(np.isfinite([node.time for node in self.nodes])):
            raise GenealogyError(f"locus {self.locus}: non-finite node time")
        if np.any(self._tip_times < 0):
            raise GenealogyError(f"locus {self.locus}: tip sampling times must be >= 0")
        for node in self.nodes:
            if node.is_tip:
                continue
            if len(node.children) != 2:
                raise GenealogyError(
                    f"locus {self.locus}: node {node.index} has {len(node.children)} children; only binary "
                    f"coalescences are supported"
                )
            for child in node.children:
                if not node.time > self.nodes[child].time:
                    raise GenealogyError(
                        f"locus {self.locus}: node {node.index} at time {node.time} is not older than its "
                        f"child {child} at time {self.nodes[child].time}"
                    )
        if self._coalescent_times.min() <= self._tip_times.min():
            raise GenealogyError(f"locus {self.locus}: the most recent event must be a sampling event")
        if np.any(np.diff(self._coalescent_times) == 0):
            raise GenealogyError(f"locus {self.locus}: coalescent times must be distinct, found an exact tie")


def _split_embedded_date(label: str, delimiter: str) -> tuple[str, float | None]:
    if delimiter not in label:
        return label, None
    name, _, raw = label.rpartition(delimiter)
    try:
        return name, float(raw)
    except ValueError as e:
        raise GenealogyError(f"tip '{label}': cannot read a date from '{raw}'") from e


def _read_tree(text: str) -> dendropy.Tree:
    if not text or not text.strip():
        raise GenealogyError("empty Newick string")
    try:
        tree = dendropy.Tree.get(data=text, schema="newick", rooting="force-rooted", preserve_underscores=True)
    except (DataParseError, ValueError, TypeError, IndexError) as e:
        raise GenealogyError(f"malformed Newick: {e}") from e
    if tree is None or tree.seed_node is None:
        raise GenealogyError("malformed Newick: no tree found")
    return tree


def embedded_dates(text: str, delimiter: str) -> dict[str, float]:
    """Tip label to date for every tip whose label ends in delimiter followed by a number."""
    tree: dendropy.Tree = _read_tree(text)
    found: dict[str, float] = {}
    for leaf in tree.leaf_node_iter():
        raw_label = leaf.taxon.label if leaf.taxon is not None else leaf.label
        if raw_label is None:
            continue
        label, date = _split_embedded_date(raw_label, delimiter)
        if date is not None:
            found[label] = date
    return found


def parse_genealogy(
    text: str,
    dates: Mapping[str, float] | None = None,
    date_convention: DateConvention | str = DateConvention.BACKWARD,
    delimiter: str | None = None,
    anchor: float | None = None,
    locus: str = "locus",
    tolerance: float = DATE_TOLERANCE,
) -> Genealogy:
    """
    This function reads one Newick tree with branch lengths in time units and dates every node.

    Tip dates come either from a table (dates) or embedded at the end of each tip label after delimiter, or
    are absent, in which case tip ages are read off the branch lengths with the most recent tip at 0. Once a
    table or a delimiter is given, every tip must find its date there.
    Backward offsets map to time date - anchor (anchor defaults to the smallest offset); calendar dates map to
    anchor - date (anchor defaults to the latest date). Internal node times follow from the branch lengths and
    every tip must imply the same root age within tolerance.

    :param text: a Newick string holding one tree
    :param dates: optional mapping of tip label to date
    :param date_convention: "backward" offsets or "calendar" dates
    :param delimiter: when set, tip labels end in delimiter followed by the tip date
    :param anchor: explicit reference date shared across loci
    :param locus: locus label stored on the genealogy
    :param tolerance: allowed disagreement between tip dates and branch lengths
    :return: the dated genealogy
    """
    convention: DateConvention = DateConvention(date_convention)
    tree: dendropy.Tree = _read_tree(text)

    # preorder walk assigns flat indices and distances from the root
    dnodes: list = list(tree.preorder_node_iter())
    index_of: dict = {id(dnode): i for i, dnode in enumerate(dnodes)}
    depth: list[float] = [0.0] * len(dnodes)
    labels: list[str | None] = [None] * len(dnodes)
    declared: dict[int, float] = {}

    for i, dnode in enumerate(dnodes):
        children = dnode.child_nodes()
        if dnode.parent_node is not None:
            length = dnode.edge.length
            if length is None:
                raise GenealogyError(f"locus {locus}: branch without a length")
            if length < 0:
                raise GenealogyError(f"locus {locus}: negative branch length {length}")
            depth[i] = depth[index_of[id(dnode.parent_node)]] + float(length)
        if children and len(children) != 2:
            raise GenealogyError(
                f"locus {locus}: non-binary node with {len(children)} children; polytomies are not supported"
            )
        if not children:
            raw_label = dnode.taxon.label if dnode.taxon is not None else dnode.label
            if raw_label is None:
                raise GenealogyError(f"locus {locus}: unlabelled tip")
            label, embedded = _split_embedded_date(raw_label, delimiter) if delimiter else (raw_label, None)
            labels[i] = label
            if dates is not None and label in dates:
                declared[i] = float(dates[label])
            elif embedded is not None:
                declared[i] = embedded

    tip_indices = [i for i, dnode in enumerate(dnodes) if not dnode.child_nodes()]
    times: np.ndarray = np.zeros(len(dnodes))

    if declared or dates is not None or delimiter:
        missing = [labels[i] for i in tip_indices if i not in declared]
        if missing:
            raise GenealogyError(f"locus {locus}: no date for tips {sorted(missing)}")
        raw = np.array([declared[i] for i in tip_indices])
        if convention is DateConvention.BACKWARD:
            reference = float(raw.min()) if anchor is None else float(anchor)
            tip_times = raw - reference
        else:
            reference = float(raw.max()) if anchor is None else float(anchor)
            tip_times = reference - raw
        if np.any(tip_times < -tolerance):
            raise GenealogyError(f"locus {locus}: tip dates lie after the anchor {reference}")
        tip_times = np.maximum(tip_times, 0.0)

        # every tip implies a root age; they must agree
        root_ages = tip_times + np.array([depth[i] for i in tip_indices])
        spread = float(root_ages.max() - root_ages.min())
        if spread > tolerance * max(1.0, float(np.abs(root_ages).max())):
            raise GenealogyError(
                f"locus {locus}: tip dates are inconsistent with branch lengths (root ages differ by {spread})"
            )
        root_age = math.fsum(root_ages) / len(root_ages)
        times = root_age - np.array(depth)
        for i, t in zip(tip_indices, tip_times):
            times[i] = t
    else:
        deepest = max(depth[i] for i in tip_indices)
        times = deepest - np.array(depth)
        for i in tip_indices:
            times[i] = max(times[i], 0.0)

    nodes: list[Node] = []
    for i, dnode in enumerate(dnodes):
        children = tuple(index_of[id(child)] for child in dnode.child_nodes())
        parent = index_of[id(dnode.parent_node)] if dnode.parent_node is not None else None
        nodes.append(Node(index=i, time=float(times[i]), label=labels[i], children=children, parent=parent))

    return Genealogy(nodes=tuple(nodes), root=0, locus=locus)


def _format_label(label: str) -> str:
    if _PLAIN_LABEL.match(label):
        return label
    return "'" + label.replace("'", "''") + "'"


def emit_newick(genealogy: Genealogy, embed_dates: bool = False, delimiter: str = "|") -> str:
    """
    Write a genealogy back to Newick with branch lengths equal to parent minus child time, printed at full
    precision so that parsing the output reproduces every node time.

    :param genealogy: the tree to write
    :param embed_dates: append each tip's backward time to its label after delimiter
    :param delimiter: separator used when embedding dates
    :return: Newick text terminated by a semicolon
    """
    nodes = genealogy.nodes
    rendered: dict[int, str] = {}
    stack: list[tuple[int, bool]] = [(genealogy.root, False)]

    # iterative postorder
    while stack:
        index, expanded = stack.pop()
        node = nodes[index]
        if node.is_tip:
            label = node.label if not embed_dates else f"{node.label}{delimiter}{float(node.time)!r}"
            rendered[index] = _format_label(label)
        elif expanded:
            rendered[index] = "(" + ",".join(rendered.pop(child) for child in node.children) + ")"
        else:
            stack.append((index, True))
            stack.extend((child, False) for child in reversed(node.children))
            continue
        if node.parent is not None:
            rendered[index] += f":{float(nodes[node.parent].time - node.time)!r}"

    return rendered[genealogy.root] + ";"

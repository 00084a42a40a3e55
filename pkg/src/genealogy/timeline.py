from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from common.errors import GenealogyError
from genealogy.tree import Genealogy


class EventKind(str, Enum):
    SAMPLING = "sampling"
    COALESCENT = "coalescent"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    lineages: int
    size: int = 1


@dataclass(frozen=True)
class EventTimeline:
    """
    Sampling and coalescent events of one locus in backward time, each with the number of lineages present
    just after it (going into the past).
    """

    events: tuple[Event, ...]
    locus: str = "locus"

    def __post_init__(self):
        self.validate()

    @property
    def times(self) -> np.ndarray:
        return np.array([event.time for event in self.events], dtype=float)

    @property
    def lineages(self) -> np.ndarray:
        return np.array([event.lineages for event in self.events], dtype=int)

    @property
    def t0(self) -> float:
        return self.events[0].time

    @property
    def t_mrca(self) -> float:
        return self.events[-1].time

    @property
    def n_coalescent(self) -> int:
        return sum(1 for event in self.events if event.kind is EventKind.COALESCENT)

    @property
    def coalescent_times(self) -> np.ndarray:
        return np.array([event.time for event in self.events if event.kind is EventKind.COALESCENT])

    def segments(self) -> Iterator[tuple[float, float, int]]:
        """Yield (start, end, lineages) for every stretch between consecutive events."""
        for current, following in zip(self.events[:-1], self.events[1:]):
            yield current.time, following.time, current.lineages

    def validate(self) -> None:
        if not self.events:
            raise GenealogyError(f"locus {self.locus}: empty event timeline")
        if self.events[0].kind is not EventKind.SAMPLING:
            raise GenealogyError(f"locus {self.locus}: timeline must open with a sampling event")
        before = 0
        previous_time = -np.inf
        for event in self.events:
            if event.time < previous_time:
                raise GenealogyError(f"locus {self.locus}: events out of order at time {event.time}")
            if event.kind is EventKind.SAMPLING:
                expected = before + event.size
            else:
                if before < 2:
                    raise GenealogyError(
                        f"locus {self.locus}: coalescent event at {event.time} with only {before} lineage(s)"
                    )
                expected = before - 1
            if event.lineages != expected:
                raise GenealogyError(
                    f"locus {self.locus}: lineage count {event.lineages} at {event.time}, expected {expected}"
                )
            before = event.lineages
            previous_time = event.time
        if before != 1:
            raise GenealogyError(f"locus {self.locus}: timeline ends with {before} lineages instead of 1")


def event_timeline(genealogy: Genealogy) -> EventTimeline:
    """
    Merge the sampling and coalescent events of a genealogy into one sorted timeline. Tips sampled at the same
    time become a single sampling event, and at equal times sampling events come before coalescent events.

    :param genealogy: a validated genealogy
    :return: the event timeline with running lineage counts
    """
    sample_times, counts = np.unique(genealogy.sampling_times, return_counts=True)

    # (time, order, kind, size); order puts sampling ahead of coalescence on ties
    raw: list[tuple[float, int, EventKind, int]] = [
        (float(t), 0, EventKind.SAMPLING, int(n)) for t, n in zip(sample_times, counts)
    ]
    raw += [(float(t), 1, EventKind.COALESCENT, 1) for t in genealogy.coalescent_times]
    raw.sort(key=lambda item: (item[0], item[1]))

    events: list[Event] = []
    lineages = 0
    for time, _, kind, size in raw:
        lineages = lineages + size if kind is EventKind.SAMPLING else lineages - 1
        events.append(Event(time=time, kind=kind, lineages=lineages, size=size))

    return EventTimeline(events=tuple(events), locus=genealogy.locus)

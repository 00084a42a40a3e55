import math

import numpy as np

from common.log import module_logger
from genealogy.tree import Genealogy, Node
from simulator.trajectories import SimulationPlan

logger = module_logger(__name__)


def simulate_genealogy(plan: SimulationPlan, rng: np.random.Generator, locus: str = "locus") -> Genealogy:
    """
    This function draws a genealogy under the piecewise-constant trajectory of plan. With v lineages and size
    theta the waiting time is exponential with rate v(v - 1) / (2 theta); a draw that overshoots the next grid
    point or sampling time is discarded and the clock restarts there with the rate that applies beyond it.

    :param plan: sampling schedule, grid and true trajectory
    :param rng: random generator
    :param locus: locus label; tips are named "<locus>_t<i>"
    :return: the simulated genealogy
    """
    points = np.asarray(plan.grid.points)
    theta = plan.trajectory.theta
    schedule = plan.schedule()

    nodes: list[dict] = []
    active: list[int] = []
    n_tips = 0

    def add_tips(t: float, count: int) -> None:
        nonlocal n_tips
        for _ in range(count):
            active.append(len(nodes))
            nodes.append({"time": t, "label": f"{locus}_t{n_tips}", "children": ()})
            n_tips += 1

    t, first_count = schedule[0]
    add_tips(t, first_count)
    pending = schedule[1:]

    while len(active) > 1 or pending:
        next_sample = pending[0][0] if pending else math.inf
        if len(active) < 2:
            t = next_sample
            add_tips(*pending.pop(0))
            continue

        k = int(np.searchsorted(points, t, side="right"))
        next_point = points[k] if k < points.size else math.inf
        boundary = min(next_point, next_sample)
        v = len(active)
        rate = v * (v - 1) / 2.0 / theta[k]
        candidate = t + rng.exponential(1.0 / rate)

        if candidate < boundary:
            t = candidate
            pair = rng.choice(v, size=2, replace=False)
            children = tuple(active[i] for i in sorted(pair))
            index = len(nodes)
            nodes.append({"time": t, "label": None, "children": children})
            active[:] = [a for a in active if a not in children] + [index]
        else:
            t = boundary
            if pending and boundary == next_sample:
                add_tips(*pending.pop(0))

    parents: dict[int, int] = {}
    for index, node in enumerate(nodes):
        for child in node["children"]:
            parents[child] = index
    genealogy = Genealogy(
        nodes=tuple(
            Node(index=i, time=node["time"], label=node["label"], children=node["children"], parent=parents.get(i))
            for i, node in enumerate(nodes)
        ),
        root=active[0],
        locus=locus,
    )
    logger.debug("Simulated locus %s with %d tips and root at %.4g", locus, genealogy.n_tips, genealogy.t_mrca)
    return genealogy

"""Grouping and initial slot assignment.

Functions wired through shared RAM must land on one slot, so the unit of
placement is the RAM-connected group.  Two boot strategies produce the
starting floorplan: recursive min-cut bisection of the slot grid, and a
plain balance-driven fill.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .model import (
    DesignGraph,
    DeviceModel,
    LIMIT_EPS,
    NON_DATAFLOW,
    QoRLibrary,
    ResourceVector,
    utilization_ratio,
)

log = logging.getLogger(__name__)

# Exact bisection is only attempted for this many movable units; beyond it
# (or past the node cap) a greedy split with refinement passes takes over.
EXACT_BISECTION_LIMIT = 20
EXACT_BISECTION_NODE_CAP = 500_000
REFINE_PASSES = 8


class FloorplanError(ValueError):
    """No legal slot assignment under the active limits."""


@dataclass(frozen=True)
class Group:
    """A set of functions that must share a slot.

    ``pinned`` groups contain a function outside any dataflow region; their
    placement is supposed to stay put during offline re-packing.
    """

    gid: str
    members: tuple
    pinned: bool


def ram_groups(graph: DesignGraph) -> list[Group]:
    parent = {f: f for f in graph.functions}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in graph.ram_edges():
        ra, rb = find(e.src), find(e.dst)
        if ra != rb:
            parent[ra] = rb

    buckets: dict[str, list] = {}
    for f in graph.functions:
        buckets.setdefault(find(f), []).append(f)

    groups = []
    for members in buckets.values():
        members = tuple(sorted(members))
        pinned = any(graph.functions[m].kernel_kind == NON_DATAFLOW for m in members)
        groups.append(Group(gid=members[0], members=members, pinned=pinned))
    return sorted(groups, key=lambda g: g.gid)


def group_of_map(groups: list[Group]) -> dict[str, Group]:
    return {m: g for g in groups for m in g.members}


def group_resources(group: Group, lib: QoRLibrary, config: dict) -> ResourceVector:
    return ResourceVector.sum(lib.point(m, config[m]).resources for m in group.members)


def _group_fifo_weights(groups: list[Group], graph: DesignGraph) -> dict[tuple[str, str], int]:
    """Total FIFO width between each unordered pair of distinct groups."""
    gof = group_of_map(groups)
    weights: dict[tuple[str, str], int] = {}
    for e in graph.fifo_edges():
        ga, gb = gof[e.src].gid, gof[e.dst].gid
        if ga == gb:
            continue
        key = (ga, gb) if ga < gb else (gb, ga)
        weights[key] = weights.get(key, 0) + e.width
    return weights


def _budget(slots, limit: float) -> tuple:
    cap = ResourceVector.sum(s.capacity for s in slots)
    return tuple(limit * c + LIMIT_EPS for c in cap.as_tuple())


def _fits_budget(total: ResourceVector, budget: tuple) -> bool:
    return all(u <= b for u, b in zip(total.as_tuple(), budget))


def _split_region(slots) -> tuple[list, list]:
    ys = sorted({s.y for s in slots})
    if len(ys) > 1:
        lower_rows = set(ys[: len(ys) // 2])
        side_a = [s for s in slots if s.y in lower_rows]
    else:
        xs = sorted({s.x for s in slots})
        left_cols = set(xs[: len(xs) // 2])
        side_a = [s for s in slots if s.x in left_cols]
    side_b = [s for s in slots if s not in side_a]
    return side_a, side_b


def _greedy_split(units, sizes, weights, budget_a, budget_b, cap_a, cap_b):
    """Balance-driven split with cut-reducing refinement passes.

    Returns (assignment dict unit->0/1, cut) or None when even this cannot
    satisfy both budgets.
    """
    order = sorted(units, key=lambda u: (-max(sizes[u].as_tuple()), u))
    side = {}
    load = [ResourceVector.zero(), ResourceVector.zero()]
    budgets = [budget_a, budget_b]
    caps = [cap_a, cap_b]
    for u in order:
        choices = []
        for s in (0, 1):
            if _fits_budget(load[s] + sizes[u], budgets[s]):
                choices.append((utilization_ratio(load[s] + sizes[u], caps[s]), s))
        if not choices:
            return None
        side[u] = min(choices)[1]
        load[side[u]] = load[side[u]] + sizes[u]

    def cut_of(assign):
        return sum(w for (a, b), w in weights.items() if assign[a] != assign[b])

    for _ in range(REFINE_PASSES):
        improved = False
        for u in order:
            s = side[u]
            t = 1 - s
            if not _fits_budget(load[t] + sizes[u], budgets[t]):
                continue
            gain = 0
            for (a, b), w in weights.items():
                if a != u and b != u:
                    continue
                other = b if a == u else a
                gain += w if side[other] == t else -w
            if gain > 0:
                side[u] = t
                load[s] = load[s] - sizes[u]
                load[t] = load[t] + sizes[u]
                improved = True
        if not improved:
            break
    return side, cut_of(side)


def _exact_split(units, sizes, weights, budget_a, budget_b, cap_a, cap_b):
    """Branch and bound over 2^n unit assignments, minimizing cut width.

    Ties on cut width prefer the smaller utilization gap between the two
    sides, then the lexicographically smallest assignment vector.  Returns
    None when no assignment satisfies both budgets, or when the node cap
    trips (caller falls back to the greedy split).
    """
    order = sorted(units, key=lambda u: (-max(sizes[u].as_tuple()), u))
    touching: dict[str, list] = {u: [] for u in order}
    for (a, b), w in weights.items():
        touching[a].append((b, w))
        touching[b].append((a, w))

    best: dict = {"cut": None, "side": None, "gap": None, "vec": None}
    nodes = 0

    def finish(side):
        cut = sum(w for (a, b), w in weights.items() if side[a] != side[b])
        load = [ResourceVector.zero(), ResourceVector.zero()]
        for u in order:
            load[side[u]] = load[side[u]] + sizes[u]
        gap = abs(utilization_ratio(load[0], cap_a) - utilization_ratio(load[1], cap_b))
        vec = tuple(side[u] for u in sorted(side))
        key = (cut, gap, vec)
        if best["cut"] is None or key < (best["cut"], best["gap"], best["vec"]):
            best.update(cut=cut, gap=gap, vec=vec, side=dict(side))

    def dfs(i, side, load, partial_cut):
        nonlocal nodes
        nodes += 1
        if nodes > EXACT_BISECTION_NODE_CAP:
            raise _NodeCap
        if best["cut"] is not None and partial_cut > best["cut"]:
            return
        if i == len(order):
            finish(side)
            return
        u = order[i]
        for s in (0, 1):
            budget = budget_a if s == 0 else budget_b
            new_load = load[s] + sizes[u]
            if not _fits_budget(new_load, budget):
                continue
            added = 0
            for other, w in touching[u]:
                if other in side and side[other] != s:
                    added += w
            side[u] = s
            saved = load[s]
            load[s] = new_load
            dfs(i + 1, side, load, partial_cut + added)
            load[s] = saved
            del side[u]

    class _NodeCap(Exception):
        pass

    try:
        dfs(0, {}, [ResourceVector.zero(), ResourceVector.zero()], 0)
    except _NodeCap:
        return None
    if best["cut"] is None:
        return None
    return best["side"], best["cut"]


def _bisect(slots, units, sizes, weights, limit, placement):
    if len(slots) == 1:
        for u in units:
            placement[u] = slots[0].id
        return
    side_a, side_b = _split_region(slots)
    budget_a = _budget(side_a, limit)
    budget_b = _budget(side_b, limit)
    cap_a = ResourceVector.sum(s.capacity for s in side_a)
    cap_b = ResourceVector.sum(s.capacity for s in side_b)

    local = {k: w for k, w in weights.items() if k[0] in units and k[1] in units}
    result = None
    if sum(local.values()) > 0 and len(units) <= EXACT_BISECTION_LIMIT:
        result = _exact_split(units, sizes, local, budget_a, budget_b, cap_a, cap_b)
    if result is None:
        result = _greedy_split(units, sizes, local, budget_a, budget_b, cap_a, cap_b)
    if result is None:
        biggest = max(units, key=lambda u: (max(sizes[u].as_tuple()), u))
        raise FloorplanError(
            f"group {biggest!r} cannot be placed: no split of {len(units)} groups fits"
        )
    side, _ = result
    _bisect(side_a, [u for u in units if side[u] == 0], sizes, weights, limit, placement)
    _bisect(side_b, [u for u in units if side[u] == 1], sizes, weights, limit, placement)


def min_cut_initial(
    device: DeviceModel, graph: DesignGraph, lib: QoRLibrary, config: dict
) -> dict[str, int]:
    """Recursive min-cut bisection of the slot grid, rows before columns.

    Minimizes FIFO width crossing each split while keeping both sides within
    the utilization limit.  If the limit makes a level infeasible the split
    is retried at full capacity with a warning.
    """
    groups = ram_groups(graph)
    sizes = {g.gid: group_resources(g, lib, config) for g in groups}
    weights = _group_fifo_weights(groups, graph)
    unit_ids = [g.gid for g in groups]

    placement_g: dict[str, int] = {}
    slots = sorted(device.slots, key=lambda s: (s.y, s.x))
    try:
        _bisect(slots, unit_ids, sizes, weights, device.util_limit, placement_g)
    except FloorplanError:
        log.warning("initial bisection infeasible at limit %.2f, retrying at 1.0", device.util_limit)
        placement_g = {}
        _bisect(slots, unit_ids, sizes, weights, 1.0, placement_g)

    gof = group_of_map(groups)
    return {f: placement_g[gof[f].gid] for f in graph.functions}


def balanced_initial(
    device: DeviceModel, graph: DesignGraph, lib: QoRLibrary, config: dict
) -> dict[str, int]:
    """Largest groups first, each to the least-utilized slot that fits."""
    groups = ram_groups(graph)
    sizes = {g.gid: group_resources(g, lib, config) for g in groups}
    load = {s.id: ResourceVector.zero() for s in device.slots}

    def place(limit: float) -> dict[str, int] | None:
        for s in load:
            load[s] = ResourceVector.zero()
        out: dict[str, int] = {}
        order = sorted(groups, key=lambda g: (-max(sizes[g.gid].as_tuple()), g.gid))
        for g in order:
            choices = []
            for s in device.slots:
                new = load[s.id] + sizes[g.gid]
                if _fits_budget(new, _budget([s], limit)):
                    choices.append((utilization_ratio(load[s.id], s.capacity), s.id))
            if not choices:
                return None
            sid = min(choices)[1]
            load[sid] = load[sid] + sizes[g.gid]
            for m in g.members:
                out[m] = sid
        return out

    result = place(device.util_limit)
    if result is None:
        log.warning("balanced fill infeasible at limit %.2f, retrying at 1.0", device.util_limit)
        result = place(1.0)
    if result is None:
        biggest = max(groups, key=lambda g: (max(sizes[g.gid].as_tuple()), g.gid))
        raise FloorplanError(f"group {biggest.gid!r} does not fit on any slot even at full capacity")
    return result

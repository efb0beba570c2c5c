"""Bottleneck-driven co-search over QoR points and slot assignments.

Each iteration retargets the current latency bottleneck (all non-excluded
functions tied at the maximum latency) to its descent point DP: the slowest
point strictly faster than the second latency level, so one acceptance
hands the bottleneck role to a different function.  Legalization escalates
through four stages: online packing, offline re-packing plus an online
retry, a bounded look-ahead below DP, and a look-back between DP and the
current latency.  A batch that survives no stage is excluded from future
selection and the search moves on; it stops when nothing is left to select.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from .floorplan import FloorplanError, balanced_initial, min_cut_initial
from .model import (
    DesignGraph,
    DeviceModel,
    QoRLibrary,
    baseline_configuration,
    design_latency,
)
from .packer import PackState, offline_repack, online_pack

log = logging.getLogger(__name__)

DEFAULT_LOOKAHEAD_N = 8

STAGE_ONLINE = "online"
STAGE_OFFLINE = "offline"
STAGE_LOOK_AHEAD = "look_ahead"
STAGE_LOOK_BACK = "look_back"
STAGE_EXCLUDED = "excluded"


def _floor_log2(v: int) -> int:
    return max(0, int(v).bit_length() - 1)


def compute_lookahead_N(lib: QoRLibrary, graph: DesignGraph, mode: str = "min") -> int:
    """Look-ahead window size from loop structure.

    Sums floor(log2(min(64, value))) over the innermost levels of each nest,
    taking the max across all nests of all templates in use: three levels of
    iteration latency, three of loop bound, then two more of loop bound.
    Mode "min" caps the levels considered per nest at those counts; "max"
    takes every level of the nest.  Designs without loop data fall back to
    a fixed default.
    """
    if mode not in ("min", "max"):
        raise ValueError(f"lookahead mode must be 'min' or 'max', got {mode!r}")
    nests = []
    for tname in sorted({lib.template_of[f] for f in graph.functions}):
        nests.extend(lib.templates[tname].nests())
    if not nests:
        return DEFAULT_LOOKAHEAD_N

    def tier(levels: int, value) -> int:
        best = 0
        for nest in nests:
            take = nest if mode == "max" else nest[:levels]
            best = max(best, sum(_floor_log2(min(64, value(l))) for l in take))
        return best

    return (
        tier(3, lambda l: l.iter_latency)
        + tier(3, lambda l: l.bound)
        + tier(2, lambda l: l.bound)
    )


def select_bottleneck(latencies: dict, excluded: set):
    """(L1, batch, L2) over non-excluded functions, or None when done.

    batch = every function at the maximum latency L1; L2 = largest latency
    strictly below L1 (0 when the batch is all that's left).
    """
    active = {f: l for f, l in latencies.items() if f not in excluded}
    if not active:
        return None
    l1 = max(active.values())
    batch = sorted(f for f, l in active.items() if l == l1)
    below = [l for l in active.values() if l < l1]
    return l1, batch, max(below) if below else 0


def prune(template, current_latency: int, l1: int, l2: int):
    """(DS, DP) for one bottleneck function.

    DS keeps the points strictly faster than L2 (faster than L1 in the
    degenerate case where L2 ties the function's own latency), latency
    ascending; DP is its last element.
    """
    threshold = l1 if l2 == current_latency else l2
    ds = [p for p in template.points if p.latency < threshold]
    return ds, (ds[-1] if ds else None)


@dataclass
class TraceRow:
    iteration: int
    l1: int
    l2: int
    batch: list
    stage: str
    accepted: dict
    design_latency: int
    max_util: float
    max_sll_util: float
    moves: list = field(default_factory=list)
    legalize_seconds: float = 0.0


@dataclass
class SearchResult:
    design_latency: int
    baseline_latency: int
    config: dict
    placement: dict
    initial_placement: dict
    excluded: list
    iterations: int
    trace: list
    state: PackState
    lookahead_n: int
    cap_reached: bool = False


def _window_vectors(batch, alts, fallback, limit):
    """Lockstep alternative vectors: attempt k pairs each member with its
    k-th alternative, falling back to its DP when its list runs dry."""
    for k in range(limit):
        if all(k >= len(alts[f]) for f in batch):
            return
        yield {f: (alts[f][k].id if k < len(alts[f]) else fallback[f].id) for f in batch}


def run(
    device: DeviceModel,
    graph: DesignGraph,
    lib: QoRLibrary,
    *,
    initial: str = "mincut",
    freeze_floorplan: bool = False,
    lookahead_n: int | None = None,
    lookahead_mode: str = "min",
    iter_cap: int | None = None,
    on_iteration=None,
) -> SearchResult:
    config = baseline_configuration(graph)
    baseline_lat = design_latency(graph, lib, config)

    if initial == "mincut":
        placement = min_cut_initial(device, graph, lib, config)
    elif initial == "balanced":
        placement = balanced_initial(device, graph, lib, config)
    else:
        raise ValueError(f"unknown initial floorplan strategy {initial!r}")

    state = PackState(device, graph, lib, config, placement)
    issues = state.check_legal()
    hard = [v for v in issues if not v.startswith("boundary")]
    if hard:
        raise FloorplanError("initial floorplan illegal: " + "; ".join(hard))
    for v in issues:
        log.warning("initial floorplan: %s", v)

    n = lookahead_n if lookahead_n is not None else compute_lookahead_N(lib, graph, lookahead_mode)
    cap = iter_cap if iter_cap is not None else 10 * len(graph.functions)

    initial_placement = dict(placement)
    excluded: set = set()
    trace: list[TraceRow] = []
    it = 0
    cap_reached = False

    while True:
        latencies = {f: lib.point(f, state.config[f]).latency for f in graph.functions}
        sel = select_bottleneck(latencies, excluded)
        if sel is None:
            break
        if it >= cap:
            cap_reached = True
            log.warning("iteration cap %d reached with functions still selectable", cap)
            break
        it += 1
        l1, batch, l2 = sel

        dps = {}
        for f in batch:
            _, dp = prune(lib.template_for(f), latencies[f], l1, l2)
            if dp is None:
                break
            dps[f] = dp

        stage = STAGE_EXCLUDED
        accepted: dict = {}
        moves: list = []
        t_legalize = time.perf_counter()
        if len(dps) == len(batch):
            targets = {f: dps[f].id for f in batch}
            ok, m = online_pack(state, targets, allow_moves=not freeze_floorplan)
            if ok:
                stage = STAGE_ONLINE
                accepted = targets
                moves += m
            if not ok and not freeze_floorplan:
                moves += offline_repack(state)
                ok, m = online_pack(state, targets)
                if ok:
                    stage = STAGE_OFFLINE
                    accepted = targets
                    moves += m
            if not ok:
                ahead = {
                    f: [p for p in lib.template_for(f).points if p.latency < dps[f].latency][::-1]
                    for f in batch
                }
                for vec in _window_vectors(batch, ahead, dps, n):
                    ok, m = online_pack(state, vec, allow_moves=not freeze_floorplan)
                    if not ok and not freeze_floorplan:
                        moves += offline_repack(state)
                        ok, m = online_pack(state, vec)
                    if ok:
                        stage = STAGE_LOOK_AHEAD
                        accepted = vec
                        moves += m
                        break
            if not ok:
                back = {
                    f: [
                        p
                        for p in lib.template_for(f).points
                        if dps[f].latency < p.latency < l1
                    ]
                    for f in batch
                }
                for vec in _window_vectors(batch, back, dps, max(map(len, back.values()), default=0)):
                    ok, m = online_pack(state, vec, allow_moves=not freeze_floorplan)
                    if ok:
                        stage = STAGE_LOOK_BACK
                        accepted = vec
                        moves += m
                        break

        t_legalize = time.perf_counter() - t_legalize

        if stage == STAGE_EXCLUDED:
            excluded.update(batch)

        row = TraceRow(
            iteration=it,
            l1=l1,
            l2=l2,
            batch=batch,
            stage=stage,
            accepted=accepted,
            design_latency=design_latency(graph, lib, state.config),
            max_util=state.max_utilization(),
            max_sll_util=state.max_sll_utilization(),
            moves=moves,
            legalize_seconds=t_legalize,
        )
        trace.append(row)
        if on_iteration is not None:
            on_iteration(state, row)

    return SearchResult(
        design_latency=design_latency(graph, lib, state.config),
        baseline_latency=baseline_lat,
        config=dict(state.config),
        placement=dict(state.placement),
        initial_placement=initial_placement,
        excluded=sorted(excluded),
        iterations=it,
        trace=trace,
        state=state,
        lookahead_n=n,
        cap_reached=cap_reached,
    )

"""Structural verification of schedule pairs (algorithm vs. optimum).

Given the algorithm's trace and an SRPT trace on the same instance, this
module machine-checks, with exact rational arithmetic:

* the borrow graph over lifetimes and its reachability closure properties,
* the interval flow network, whose maximum flow must use the entire surplus
  of the algorithm's unfinished-and-not-optimal jobs,
* the work-borrowing matrix obtained by path-decomposing a saturating flow
  (zero off reachability, rows summing to remaining work, columns bounded by
  received work), and its stability under refining the time discretization,
* the progress-segment partition (at most |O|+1 segments, strictly nested
  dominated sets), and
* the pointwise counting bounds relating the algorithm's alive sets to the
  optimum's.

Every check returns a list of violation strings; empty means pass.  A single
violation carries the exact rationals involved so it can be replayed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Iterable, Optional, Sequence

from .engine import simulate
from .model import Instance, ModelError, ScheduleTrace, UnknownJobError, instance_to_json
from .policies import PolicyKind
from .rational import format_rat


# --------------------------------------------------------------------------
# borrow graph
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BorrowGraph:
    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int, str]]  # (j, i, "N"|"C"): i ran inside j's lifetime

    def successors(self, j: int) -> list[int]:
        return sorted({i for (a, i, _) in self.edges if a == j})

    def reachable(self, j: int) -> frozenset[int]:
        if j not in self.vertices:
            raise UnknownJobError(f"job {j} not in borrow graph")
        seen = {j}
        stack = [j]
        while stack:
            u = stack.pop()
            for v in self.successors(u):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return frozenset(seen)


def _lifetime_end(trace: ScheduleTrace, j: int, t: Fraction) -> Fraction:
    done = trace.completions.get(j)
    return t if done is None else min(done, t)


def build_borrow_graph(trace: ScheduleTrace, t: Fraction) -> BorrowGraph:
    """Edges (j, i, tag): job i receives work of positive measure inside j's
    lifetime [r_j, min(C_j, t)]; the tag records whether i was before (N) or
    after (C) its signal on that stretch."""
    t = Fraction(t)
    jobs = [job for job in trace.instance.jobs if job.release <= t]
    ids = [job.id for job in jobs]
    busy = {j: trace.busy_intervals(j) for j in ids}
    signals = trace.emissions
    edges = set()
    for j in ids:
        lo = trace.instance.job(j).release
        hi = _lifetime_end(trace, j, t)
        if hi <= lo:
            continue
        for i in ids:
            if i == j:
                continue
            s_i = signals.get(i)
            for a, b in busy[i]:
                if a >= hi:
                    break
                ov_lo, ov_hi = max(a, lo), min(b, hi)
                if ov_lo >= ov_hi:
                    continue
                pre_signal_hi = ov_hi if s_i is None else min(ov_hi, s_i)
                if ov_lo < pre_signal_hi:
                    edges.add((j, i, "N"))
                if s_i is not None and max(ov_lo, s_i) < ov_hi:
                    edges.add((j, i, "C"))
    return BorrowGraph(tuple(ids), frozenset(edges))


# --------------------------------------------------------------------------
# flow network
# --------------------------------------------------------------------------

Vertex = tuple


def _vkey(v: Vertex):
    if v[0] == "job":
        return (0, v[1], 0)
    if v[0] == "dummy":
        return (1, v[1], v[2])
    if v[0] == "source":
        return (2, 0, 0)
    return (3, 0, 0)


SOURCE: Vertex = ("source",)
SINK: Vertex = ("sink",)


@dataclass
class FlowNetwork:
    time_points: tuple[Fraction, ...]
    jobs: tuple[int, ...]
    arcs: dict[tuple[Vertex, Vertex], Fraction]
    supplies: dict[int, Fraction]
    demands: dict[int, Fraction]
    infinite: Fraction

    @property
    def total_supply(self) -> Fraction:
        return sum(self.supplies.values(), Fraction(0))

    def job_reachable(self, j: int) -> frozenset[int]:
        """Jobs reachable from j along positive-capacity arcs."""
        onward: dict[int, set[int]] = {}
        for (u, v), cap in self.arcs.items():
            if u[0] == "job" and v[0] == "dummy" and cap > 0:
                if self.arcs.get((v, ("job", v[1])), Fraction(0)) > 0:
                    onward.setdefault(u[1], set()).add(v[1])
        seen = {j}
        stack = [j]
        while stack:
            u = stack.pop()
            for w in sorted(onward.get(u, ())):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(seen)


def build_flow_network(
    alg_trace: ScheduleTrace,
    opt_trace: ScheduleTrace,
    t: Fraction,
    extra_points: Iterable[Fraction] = (),
) -> FlowNetwork:
    """Interval network at time t.

    Discretization: 0, t, releases and algorithm completions up to t, plus any
    extra points.  Per job i and interval a dummy vertex caps the flow through
    i at the work i received there; a job j connects to a dummy iff the whole
    interval lies inside j's lifetime.  Supplies are the remaining work of the
    algorithm's alive jobs outside the optimum's alive set O(t); demands are
    the received work of jobs in O(t).  Jobs released after t are omitted:
    they have empty lifetimes and zero capacity everywhere.
    """
    t = Fraction(t)
    if alg_trace.instance.ids != opt_trace.instance.ids:
        raise ModelError("traces must share one instance")
    points = {Fraction(0), t}
    jobs = [job for job in alg_trace.instance.jobs if job.release <= t]
    for job in jobs:
        points.add(job.release)
        done = alg_trace.completions.get(job.id)
        if done is not None and done <= t:
            points.add(done)
    for p in extra_points:
        p = Fraction(p)
        if 0 <= p <= t:
            points.add(p)
    tps = tuple(sorted(points))

    alive_alg = alg_trace.alive_at(t)
    alive_opt = opt_trace.alive_at(t)
    # zero-valued entries are dropped: a job with no received work absorbs
    # nothing, and only positive demands forbid outgoing flow
    supplies = {
        j: alg_trace.remaining(j, t)
        for j in sorted(alive_alg - alive_opt)
        if alg_trace.remaining(j, t) > 0
    }
    demands = {
        i: alg_trace.elapsed_work(i, t)
        for i in sorted(alive_opt)
        if alg_trace.elapsed_work(i, t) > 0
    }
    infinite = sum(supplies.values(), Fraction(0)) + sum(demands.values(), Fraction(1))

    lifetimes = {
        job.id: (job.release, _lifetime_end(alg_trace, job.id, t)) for job in jobs
    }
    arcs: dict[tuple[Vertex, Vertex], Fraction] = {}
    for i in (job.id for job in jobs):
        for l in range(len(tps) - 1):
            lo, hi = tps[l], tps[l + 1]
            dummy = ("dummy", i, l)
            arcs[(dummy, ("job", i))] = alg_trace.interval_work(i, (lo, hi))
            for j in (job.id for job in jobs):
                if j == i:
                    continue
                jl, jh = lifetimes[j]
                if jl <= lo and hi <= jh:
                    arcs[(("job", j), dummy)] = infinite
    for j, s in supplies.items():
        arcs[(SOURCE, ("job", j))] = s
    for i, d in demands.items():
        arcs[(("job", i), SINK)] = d
    return FlowNetwork(
        time_points=tps,
        jobs=tuple(job.id for job in jobs),
        arcs=arcs,
        supplies=supplies,
        demands=demands,
        infinite=infinite,
    )


@dataclass
class FlowResult:
    value: Fraction
    flow: dict[tuple[Vertex, Vertex], Fraction]

    def job_to_job(self, j: int, i: int) -> Fraction:
        total = Fraction(0)
        for (u, v), f in self.flow.items():
            if u == ("job", j) and v[0] == "dummy" and v[1] == i:
                total += f
        return total


def max_flow_saturates(net: FlowNetwork) -> tuple[bool, FlowResult]:
    """Exact max flow, breadth-first augmentation in deterministic order.

    Demand vertices are never used as inner nodes of an augmenting path, so
    the witness flow has no outgoing flow at any demand vertex.
    """
    demand_vertices = {("job", i) for i in net.demands}
    index: dict[Vertex, list[int]] = {}
    ends: list[Vertex] = []
    caps: list[Fraction] = []
    flows: list[Fraction] = []

    def add_edge(u: Vertex, v: Vertex, cap: Fraction) -> None:
        index.setdefault(u, []).append(len(ends))
        ends.append(v)
        caps.append(cap)
        flows.append(Fraction(0))
        index.setdefault(v, []).append(len(ends))
        ends.append(u)
        caps.append(Fraction(0))
        flows.append(Fraction(0))

    for (u, v), cap in sorted(net.arcs.items(), key=lambda kv: (_vkey(kv[0][0]), _vkey(kv[0][1]))):
        if cap > 0:
            add_edge(u, v, cap)

    def bfs() -> Optional[list[int]]:
        parent_edge: dict[Vertex, int] = {SOURCE: -1}
        queue = deque([SOURCE])
        while queue:
            u = queue.popleft()
            if u == SINK:
                break
            if u in demand_vertices:
                allowed = [e for e in index.get(u, []) if ends[e] == SINK]
            else:
                allowed = index.get(u, [])
            for e in allowed:
                v = ends[e]
                if v in parent_edge or caps[e] - flows[e] <= 0:
                    continue
                parent_edge[v] = e
                queue.append(v)
        if SINK not in parent_edge:
            return None
        path = []
        v = SINK
        while v != SOURCE:
            e = parent_edge[v]
            path.append(e)
            v = ends[e ^ 1]
        return path

    value = Fraction(0)
    while True:
        path = bfs()
        if path is None:
            break
        push = min(caps[e] - flows[e] for e in path)
        for e in path:
            flows[e] += push
            flows[e ^ 1] -= push
        value += push

    net_flow: dict[tuple[Vertex, Vertex], Fraction] = {}
    for u, edge_ids in index.items():
        for e in edge_ids:
            if e % 2 == 0 and flows[e] > 0:
                net_flow[(u, ends[e])] = flows[e]
    return value == net.total_supply, FlowResult(value=value, flow=net_flow)


def verify_flow_feasible(net: FlowNetwork, result: FlowResult) -> list[str]:
    """Capacity and conservation audit of a witness flow."""
    violations = []
    balance: dict[Vertex, Fraction] = {}
    for (u, v), f in result.flow.items():
        if f < 0:
            violations.append(f"negative flow on {u}->{v}")
        cap = net.arcs.get((u, v))
        if cap is None:
            violations.append(f"flow on missing arc {u}->{v}")
        elif f > cap:
            violations.append(
                f"capacity violated on {u}->{v}: {format_rat(f)} > {format_rat(cap)}"
            )
        balance[u] = balance.get(u, Fraction(0)) - f
        balance[v] = balance.get(v, Fraction(0)) + f
    for v, b in balance.items():
        if v in (SOURCE, SINK):
            continue
        if b != 0:
            violations.append(f"conservation violated at {v}: net {format_rat(b)}")
    for i in net.demands:
        out = sum(
            (f for (u, v), f in result.flow.items() if u == ("job", i) and v != SINK),
            Fraction(0),
        )
        if out != 0:
            violations.append(f"demand job {i} has outgoing flow {format_rat(out)}")
    return violations


# --------------------------------------------------------------------------
# path decomposition -> borrowing matrix
# --------------------------------------------------------------------------


@dataclass
class BetaMatrix:
    values: dict[tuple[int, int], Fraction]
    discarded_cycle_flow: Fraction = Fraction(0)

    def row_sum(self, j: int) -> Fraction:
        return sum((v for (a, _), v in self.values.items() if a == j), Fraction(0))

    def col_sum(self, i: int) -> Fraction:
        return sum((v for (_, b), v in self.values.items() if b == i), Fraction(0))

    def get(self, j: int, i: int) -> Fraction:
        return self.values.get((j, i), Fraction(0))


def decompose_beta(result: FlowResult, net: FlowNetwork) -> BetaMatrix:
    """Peel source-to-sink path flows, lexicographically smallest vertex
    sequence first; beta sums peeled amounts by path endpoints.  Any residual
    cycle flow carries no supply and is discarded (logged in the result)."""
    fl: dict[Vertex, dict[Vertex, Fraction]] = {}
    excess: dict[int, Fraction] = {}
    absorb: dict[int, Fraction] = {}
    for (u, v), f in result.flow.items():
        if u == SOURCE:
            excess[v[1]] = f
        elif v == SINK:
            absorb[u[1]] = f
        else:
            fl.setdefault(u, {})[v] = f

    beta: dict[tuple[int, int], Fraction] = {}
    discarded = Fraction(0)

    def next_hop(u: Vertex) -> Optional[Vertex]:
        outs = fl.get(u)
        if not outs:
            return None
        live = [v for v, f in outs.items() if f > 0]
        if not live:
            return None
        return min(live, key=_vkey)

    for j in sorted(excess):
        while excess[j] > 0:
            path = [("job", j)]
            on_path = {("job", j): 0}
            reached: Optional[int] = None
            while True:
                u = path[-1]
                if u[0] == "job" and u[1] in absorb and absorb[u[1]] > 0 and len(path) > 1:
                    reached = u[1]
                    break
                v = next_hop(u)
                if v is None:
                    break
                if v in on_path:
                    # cancel the cycle and restart the walk
                    start = on_path[v]
                    cycle = path[start:] + [v]
                    gamma = min(fl[a][b] for a, b in zip(cycle, cycle[1:]))
                    for a, b in zip(cycle, cycle[1:]):
                        fl[a][b] -= gamma
                    discarded += gamma
                    path = [("job", j)]
                    on_path = {("job", j): 0}
                    continue
                on_path[v] = len(path)
                path.append(v)
            if reached is None:
                # no usable outgoing flow: leftover is cycle flow around j
                break
            gamma = min(
                [excess[j], absorb[reached]]
                + [fl[a][b] for a, b in zip(path, path[1:])]
            )
            for a, b in zip(path, path[1:]):
                fl[a][b] -= gamma
            excess[j] -= gamma
            absorb[reached] -= gamma
            key = (j, reached)
            beta[key] = beta.get(key, Fraction(0)) + gamma
    leftover = sum(
        (f for outs in fl.values() for f in outs.values() if f > 0), Fraction(0)
    )
    discarded += leftover
    return BetaMatrix(values=beta, discarded_cycle_flow=discarded)


def check_beta_properties(
    beta: BetaMatrix,
    graph: BorrowGraph,
    alg_trace: ScheduleTrace,
    opt_trace: ScheduleTrace,
    t: Fraction,
) -> list[str]:
    """Borrowing matrix properties: support inside reachability, rows equal to
    remaining work, columns bounded by received work."""
    t = Fraction(t)
    violations = []
    alive_alg = alg_trace.alive_at(t)
    alive_opt = opt_trace.alive_at(t)
    sources = sorted(alive_alg - alive_opt)
    sinks = sorted(alive_opt)
    reach = {j: graph.reachable(j) for j in sources}
    for (j, i), v in sorted(beta.values.items()):
        if v < 0:
            violations.append(f"beta({j},{i}) negative")
        if v > 0 and (j not in set(sources) or i not in set(sinks)):
            violations.append(f"beta({j},{i}) positive outside supply x demand")
        if v > 0 and i not in reach.get(j, frozenset()):
            violations.append(f"beta({j},{i}) positive but {i} unreachable from {j}")
    for j in sources:
        rs = beta.row_sum(j)
        expected = alg_trace.remaining(j, t)
        if rs != expected:
            violations.append(
                f"row sum of {j} is {format_rat(rs)}, expected {format_rat(expected)}"
            )
    for i in sinks:
        cs = beta.col_sum(i)
        bound = alg_trace.elapsed_work(i, t)
        if cs > bound:
            violations.append(
                f"column sum of {i} is {format_rat(cs)} > received {format_rat(bound)}"
            )
    return violations


def refine_flow(
    net: FlowNetwork, result: FlowResult, alg_trace: ScheduleTrace, opt_trace: ScheduleTrace, t: Fraction
) -> tuple[FlowNetwork, FlowResult]:
    """Split every discretization interval at its midpoint and carry the flow
    over; job-to-job amounts are preserved arc by arc."""
    tps = net.time_points
    mids = [(a + b) / 2 for a, b in zip(tps, tps[1:])]
    refined = build_flow_network(alg_trace, opt_trace, t, extra_points=mids)
    new_flow: dict[tuple[Vertex, Vertex], Fraction] = {}
    for (u, v), f in result.flow.items():
        if u == SOURCE or v == SINK:
            new_flow[(u, v)] = new_flow.get((u, v), Fraction(0)) + f
    inflows: dict[tuple[int, int], list[tuple[Vertex, Fraction]]] = {}
    for (u, v), f in sorted(result.flow.items(), key=lambda kv: (_vkey(kv[0][0]), _vkey(kv[0][1]))):
        if v[0] == "dummy":
            inflows.setdefault((v[1], v[2]), []).append((u, f))
    for (i, l), entries in inflows.items():
        sub1 = ("dummy", i, 2 * l)
        sub2 = ("dummy", i, 2 * l + 1)
        cap1 = refined.arcs[(sub1, ("job", i))]
        room1 = cap1
        total1 = Fraction(0)
        total2 = Fraction(0)
        for u, f in entries:
            take = min(room1, f)
            if take > 0:
                new_flow[(u, sub1)] = new_flow.get((u, sub1), Fraction(0)) + take
                room1 -= take
                total1 += take
            rest = f - take
            if rest > 0:
                new_flow[(u, sub2)] = new_flow.get((u, sub2), Fraction(0)) + rest
                total2 += rest
        if total1 > 0:
            new_flow[(sub1, ("job", i))] = total1
        if total2 > 0:
            new_flow[(sub2, ("job", i))] = total2
    return refined, FlowResult(value=result.value, flow=new_flow)


# --------------------------------------------------------------------------
# truncated progress and segments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    jobs: frozenset[int]
    dominated: frozenset[int]  # jobs of the optimum with no more truncated progress


@dataclass
class SegmentPartition:
    segments: tuple[Segment, ...]  # ordered by strictly growing dominated sets
    truncated: dict[int, Fraction]
    beyond: dict[int, frozenset[int]]  # per job: reachable optimum jobs ahead of it
    violations: list[str] = field(default_factory=list)


def compute_segments(
    alg_trace: ScheduleTrace,
    opt_trace: ScheduleTrace,
    t: Fraction,
    graph: Optional[BorrowGraph] = None,
) -> SegmentPartition:
    """Group the algorithm's unsignalled alive jobs outside O(t) by the set of
    optimum jobs whose truncated progress they meet or exceed."""
    t = Fraction(t)
    alpha = alg_trace.instance.alpha
    part = alg_trace.partition(t)
    opt_alive = opt_trace.alive_at(t)
    if graph is None:
        graph = build_borrow_graph(alg_trace, t)

    def truncated(j: int) -> Fraction:
        p = alg_trace.instance.proc_of(j)
        return min(alg_trace.elapsed_work(j, t), alpha * p)

    candidates = sorted(part.nonclairvoyant - opt_alive)
    tvals = {j: truncated(j) for j in set(candidates) | set(opt_alive)}
    groups: dict[frozenset[int], list[int]] = {}
    beyond: dict[int, frozenset[int]] = {}
    for j in candidates:
        dominated = frozenset(i for i in opt_alive if tvals[j] >= tvals[i])
        groups.setdefault(dominated, []).append(j)
        reach = graph.reachable(j)
        beyond[j] = frozenset(
            i for i in opt_alive if tvals[j] < tvals[i] and i in reach
        )
    ordered = sorted(groups.items(), key=lambda kv: len(kv[0]))
    violations = []
    for (d1, _), (d2, _) in zip(ordered, ordered[1:]):
        if not (d1 < d2):
            violations.append(
                f"dominated sets not strictly nested: {sorted(d1)} vs {sorted(d2)}"
            )
    if len(ordered) > len(opt_alive) + 1:
        violations.append(
            f"segment count {len(ordered)} exceeds |O|+1 = {len(opt_alive) + 1}"
        )
    segments = tuple(
        Segment(jobs=frozenset(js), dominated=dom) for dom, js in ordered
    )
    return SegmentPartition(
        segments=segments, truncated=tvals, beyond=beyond, violations=violations
    )


# --------------------------------------------------------------------------
# counting bounds
# --------------------------------------------------------------------------


@dataclass
class LocalBoundsResult:
    counts: dict[str, int]
    bounds: dict[str, Fraction]
    extrapolated: bool
    violations: list[str]


def check_local_bounds(
    alg_trace: ScheduleTrace, opt_trace: ScheduleTrace, t: Fraction
) -> LocalBoundsResult:
    """Pointwise alive-count bounds of the algorithm against the optimum.

    Stated for alpha with integer 1/(1-alpha); other alphas are checked
    against the bound with the factor rounded up and flagged as extrapolation.
    """
    t = Fraction(t)
    alpha = alg_trace.instance.alpha
    if alpha == 1:
        raise ModelError("counting bounds are undefined at alpha = 1")
    factor = 1 / (1 - alpha)
    extrapolated = factor.denominator != 1
    c = Fraction(ceil(factor))
    part = alg_trace.partition(t)
    opt_alive = opt_trace.alive_at(t)
    counts = {
        "alive": len(part.alive),
        "alive_minus_opt": len(part.alive - opt_alive),
        "unsignalled_minus_opt": len(part.nonclairvoyant - opt_alive),
        "signalled_minus_opt": len(part.clairvoyant - opt_alive),
        "opt_alive": len(opt_alive),
    }
    bounds = {
        "alive_minus_opt": (3 + 2 * c) * len(opt_alive),
        "unsignalled_minus_opt": (2 + c) * len(opt_alive),
        "signalled_minus_opt": (1 + c) * len(opt_alive),
        "alive": (4 + 2 * c) * len(opt_alive),
    }
    violations = []
    for key, bound in bounds.items():
        if counts[key] > bound:
            violations.append(
                f"|{key}| = {counts[key]} exceeds {format_rat(bound)} at t={format_rat(t)}"
            )
    if not opt_alive and part.alive:
        violations.append(
            f"optimum idle but algorithm has {sorted(part.alive)} alive at t={format_rat(t)}"
        )
    return LocalBoundsResult(
        counts=counts, bounds=bounds, extrapolated=extrapolated, violations=violations
    )


# --------------------------------------------------------------------------
# trace-level invariants
# --------------------------------------------------------------------------


def _signalled_at(trace: ScheduleTrace, j: int, t: Fraction) -> bool:
    s = trace.emissions.get(j)
    return s is not None and s <= t


def check_branch_observations(trace: ScheduleTrace) -> list[str]:
    """At every event time of a fused-policy trace: on the single-job branch
    the job run has globally minimal remaining work; on the sharing branch
    every shared job has globally minimal progress.

    Rates are read as right limits, so instants strictly inside a merged
    segment (an emission that did not change the decision) are covered too.
    """
    alpha = trace.instance.alpha
    violations = []
    for t in trace.event_times():
        if t >= trace.makespan:
            continue
        seg = trace.segment_at(t)
        alive = trace.alive_at(t)
        if seg is None:
            continue  # idle gap; feasibility check owns non-idling
        if not alive:
            violations.append(f"segment at {format_rat(t)} rates dead jobs")
            continue
        signalled = {j for j in alive if _signalled_at(trace, j, t)}
        fresh = alive - signalled
        if signalled:
            if not fresh:
                srpt_side = True
            elif alpha == 1:
                srpt_side = False
            else:
                lhs = min(trace.remaining(j, t) for j in signalled)
                rhs = (1 - alpha) / alpha * min(trace.elapsed_work(j, t) for j in fresh)
                srpt_side = lhs <= rhs
        else:
            srpt_side = False
        rated = [j for j, _ in seg.rates]
        if srpt_side:
            if len(rated) != 1:
                violations.append(
                    f"single-job branch at {format_rat(t)} rated {rated}"
                )
                continue
            k = rated[0]
            if k not in signalled:
                violations.append(
                    f"single-job branch at {format_rat(t)} ran unsignalled job {k}"
                )
            rem_k = trace.remaining(k, t)
            for j in alive:
                if trace.remaining(j, t) < rem_k:
                    violations.append(
                        f"job {k} run at {format_rat(t)} but job {j} has less remaining work"
                    )
        else:
            least = min(trace.elapsed_work(j, t) for j in fresh) if fresh else None
            for k in rated:
                if k not in fresh:
                    violations.append(
                        f"sharing branch at {format_rat(t)} rated signalled job {k}"
                    )
                    continue
                yk = trace.elapsed_work(k, t)
                for j in alive:
                    if trace.elapsed_work(j, t) < yk:
                        violations.append(
                            f"job {k} shared at {format_rat(t)} but job {j} has less progress"
                        )
            if fresh and set(rated) != {j for j in fresh if trace.elapsed_work(j, t) == least}:
                violations.append(
                    f"sharing branch at {format_rat(t)} did not rate the least-progressed set"
                )
    return violations


def check_clairvoyant_runs_block(trace: ScheduleTrace) -> list[str]:
    """Once a signalled job k runs at time t', no job alive at t' may run
    again before k completes, and k completes no later than any of them.

    The signalled stretch of a segment starts at max(segment start, signal
    time of k): work before the signal is not covered by the claim.
    """
    if not trace.complete:
        return []
    violations = []
    for seg in trace.segments:
        for k, _ in seg.rates:
            s_k = trace.emissions.get(k)
            if s_k is None:
                continue
            clair_lo = max(seg.start, s_k)
            if clair_lo >= seg.end:
                continue  # k not yet signalled anywhere on this stretch
            ck = trace.completions[k]
            for job in trace.instance.jobs:
                j = job.id
                if j == k:
                    continue
                cj = trace.completions[j]
                t0 = max(clair_lo, job.release)
                if t0 >= min(seg.end, cj):
                    continue  # j never alive strictly inside the signalled stretch
                if ck > cj:
                    violations.append(
                        f"job {k} ran signalled at {format_rat(t0)} but completes after job {j}"
                    )
                if ck > t0 and trace.interval_work(j, (t0, ck)) > 0:
                    violations.append(
                        f"job {j} received work during [{format_rat(t0)}, {format_rat(ck)}] "
                        f"while signalled job {k} was pending"
                    )
    return violations


def check_catch_up(trace: ScheduleTrace, times: Sequence[Fraction]) -> list[str]:
    """If an unsignalled job i is processed while j is also unsignalled, then
    j stays at least as progressed as i for as long as both stay unsignalled."""
    violations = []
    dominated: set[tuple[int, int]] = set()  # (i, j): y_j must stay >= y_i
    boundaries = {seg.start for seg in trace.segments} | {seg.end for seg in trace.segments}
    for t in times:
        part = trace.partition(t)
        for i, j in dominated:
            if i in part.nonclairvoyant and j in part.nonclairvoyant:
                yi, yj = trace.elapsed_work(i, t), trace.elapsed_work(j, t)
                if yj < yi:
                    violations.append(
                        f"catch-up violated at {format_rat(t)}: y_{j}={format_rat(yj)} "
                        f"< y_{i}={format_rat(yi)} after {i} ran"
                    )
        if t in boundaries:
            continue  # record processing only at interior sample points
        running = [
            j
            for seg in trace.segments
            if seg.start < t < seg.end
            for j, _ in seg.rates
        ]
        for i in running:
            if i in part.nonclairvoyant:
                for j in part.nonclairvoyant:
                    if j != i:
                        dominated.add((i, j))
    return violations


def check_direct_borrow_order(
    trace: ScheduleTrace, graph: BorrowGraph, t: Fraction
) -> list[str]:
    """An unsignalled borrow edge (j -> i) between two currently unsignalled
    jobs implies j has at least i's progress."""
    t = Fraction(t)
    part = trace.partition(t)
    violations = []
    for (j, i, tag) in graph.edges:
        if tag != "N":
            continue
        if j in part.nonclairvoyant and i in part.nonclairvoyant:
            yj, yi = trace.elapsed_work(j, t), trace.elapsed_work(i, t)
            if yj < yi:
                violations.append(
                    f"borrow edge ({j},{i},N) at t={format_rat(t)} with "
                    f"y_{j}={format_rat(yj)} < y_{i}={format_rat(yi)}"
                )
    return violations


def check_reachability_closure(
    trace: ScheduleTrace, graph: BorrowGraph, t: Fraction
) -> list[str]:
    """The lifetime of a reachability set is one interval; every job executed
    inside it belongs to the set; for alive jobs the interval ends at t."""
    t = Fraction(t)
    alive = trace.alive_at(t)
    violations = []
    busy = {j: trace.busy_intervals(j) for j in graph.vertices}
    for j in graph.vertices:
        reach = graph.reachable(j)
        intervals = trace.lifetime(reach, t)
        if len(intervals) != 1:
            violations.append(
                f"lifetime of reachability set of {j} at t={format_rat(t)} is "
                f"{len(intervals)} intervals"
            )
            continue
        lo, hi = intervals[0]
        if j in alive and hi != t:
            violations.append(
                f"alive job {j}: reachability lifetime ends at {format_rat(hi)}, not t"
            )
        for i in graph.vertices:
            if i in reach:
                continue
            for a, b in busy[i]:
                if max(a, lo) < min(b, hi):
                    violations.append(
                        f"job {i} executed inside lifetime of reachability set of {j} "
                        f"but is not reachable (t={format_rat(t)})"
                    )
                    break
    return violations


def check_feasibility(trace: ScheduleTrace, non_idling: bool = True) -> list[str]:
    """Unit speed, only alive jobs rated, and (for the built-in policies)
    full speed whenever something is alive."""
    violations = []
    for seg in trace.segments:
        mid = (seg.start + seg.end) / 2
        alive = trace.alive_at(mid)
        for j, _ in seg.rates:
            if j not in alive:
                violations.append(f"job {j} rated while not alive at {format_rat(mid)}")
        if seg.total_rate > 1:
            violations.append(f"total rate {seg.total_rate} > 1 at {format_rat(mid)}")
        if non_idling and alive and seg.total_rate != 1:
            violations.append(
                f"idle capacity at {format_rat(mid)} with alive jobs {sorted(alive)}"
            )
    spans = [(seg.start, seg.end) for seg in trace.segments]
    prev_end = Fraction(0)
    for lo, hi in spans + [(trace.makespan, trace.makespan)]:
        if lo > prev_end:
            mid = (prev_end + lo) / 2
            if non_idling and trace.alive_at(mid):
                violations.append(
                    f"machine idle on [{format_rat(prev_end)}, {format_rat(lo)}] "
                    f"with alive jobs"
                )
        prev_end = max(prev_end, hi)
    return violations


# --------------------------------------------------------------------------
# orchestration
# --------------------------------------------------------------------------


def check_times(alg_trace: ScheduleTrace, opt_trace: ScheduleTrace) -> tuple[list[Fraction], list[Fraction]]:
    """(event times, event times plus midpoints), shared by both traces."""
    events = sorted(set(alg_trace.event_times()) | set(opt_trace.event_times()))
    dense = list(events)
    for a, b in zip(events, events[1:]):
        dense.append((a + b) / 2)
    return events, sorted(dense)


@dataclass
class VerificationReport:
    instance: Instance
    ok: bool
    time_checks: list[dict]
    trace_checks: dict[str, list[str]]
    first_failure: Optional[dict]

    def to_json(self) -> dict:
        return {
            "instance": instance_to_json(self.instance),
            "ok": self.ok,
            "time_checks": self.time_checks,
            "trace_checks": self.trace_checks,
            "first_failure": self.first_failure,
        }


def verify_traces(
    alg_trace: ScheduleTrace,
    opt_trace: ScheduleTrace,
    *,
    flow_checks: bool = True,
    refinement: bool = True,
    branch_checks: bool = True,
) -> VerificationReport:
    """Run the full structural battery on an (algorithm, optimum) trace pair."""
    events, dense = check_times(alg_trace, opt_trace)
    alpha = alg_trace.instance.alpha
    time_checks = []
    first_failure = None

    trace_checks = {
        "feasibility_alg": check_feasibility(alg_trace),
        "feasibility_opt": check_feasibility(opt_trace),
        "catch_up": check_catch_up(alg_trace, dense),
    }
    if branch_checks:
        trace_checks["branch_observations"] = check_branch_observations(alg_trace)
        trace_checks["clairvoyant_runs_block"] = check_clairvoyant_runs_block(alg_trace)

    event_set = set(events)
    for t in dense:
        entry: dict = {"t": format_rat(t)}
        violations: list[str] = []
        graph = build_borrow_graph(alg_trace, t)
        violations += check_direct_borrow_order(alg_trace, graph, t)
        violations += check_reachability_closure(alg_trace, graph, t)
        if alpha != 1:
            lb = check_local_bounds(alg_trace, opt_trace, t)
            entry["counts"] = lb.counts
            violations += lb.violations
        seg_part = compute_segments(alg_trace, opt_trace, t, graph=graph)
        entry["segments"] = len(seg_part.segments)
        violations += seg_part.violations
        if flow_checks and t in event_set:
            net = build_flow_network(alg_trace, opt_trace, t)
            saturated, flow = max_flow_saturates(net)
            entry["supply"] = format_rat(net.total_supply)
            entry["max_flow"] = format_rat(flow.value)
            if not saturated:
                violations.append(
                    f"max flow {format_rat(flow.value)} below supply "
                    f"{format_rat(net.total_supply)} at t={format_rat(t)}"
                )
            violations += verify_flow_feasible(net, flow)
            for j in net.supplies:
                net_reach = net.job_reachable(j)
                graph_reach = graph.reachable(j)
                for i in net.demands:
                    if (i in net_reach) != (i in graph_reach):
                        violations.append(
                            f"positive-capacity reachability and borrow reachability "
                            f"disagree for ({j},{i}) at t={format_rat(t)}"
                        )
            if saturated:
                beta = decompose_beta(flow, net)
                if beta.discarded_cycle_flow != 0:
                    violations.append(
                        f"path decomposition discarded cycle flow "
                        f"{format_rat(beta.discarded_cycle_flow)}"
                    )
                violations += check_beta_properties(
                    beta, graph, alg_trace, opt_trace, t
                )
                if refinement:
                    refined_net, refined_flow = refine_flow(
                        net, flow, alg_trace, opt_trace, t
                    )
                    violations += verify_flow_feasible(refined_net, refined_flow)
                    for j in net.supplies:
                        for i in net.demands:
                            a = flow.job_to_job(j, i)
                            b = refined_flow.job_to_job(j, i)
                            if a != b:
                                violations.append(
                                    f"refinement changed direct flow ({j},{i}): "
                                    f"{format_rat(a)} -> {format_rat(b)}"
                                )
                    refined_beta = decompose_beta(refined_flow, refined_net)
                    if refined_beta.values != beta.values:
                        violations.append(
                            f"refinement changed the borrowing matrix at t={format_rat(t)}"
                        )
        if violations:
            entry["violations"] = violations
            if first_failure is None:
                first_failure = {"t": format_rat(t), "violations": violations}
        time_checks.append(entry)

    ok = first_failure is None and all(not v for v in trace_checks.values())
    if ok is False and first_failure is None:
        for name, v in trace_checks.items():
            if v:
                first_failure = {"check": name, "violations": v}
                break
    return VerificationReport(
        instance=alg_trace.instance,
        ok=ok,
        time_checks=time_checks,
        trace_checks=trace_checks,
        first_failure=first_failure,
    )


def verify_instance(
    instance: Instance,
    *,
    flow_checks: bool = True,
    refinement: bool = True,
    alg_trace: Optional[ScheduleTrace] = None,
) -> VerificationReport:
    """Simulate the fused policy and SRPT on an instance and verify the pair.

    The optimum side always runs on the realized instance (adversary commits
    resolved), since SRPT needs full knowledge.
    """
    if alg_trace is None:
        alg_trace, _ = simulate(instance, PolicyKind.ALPHA)
    opt_trace, _ = simulate(alg_trace.instance, PolicyKind.SRPT)
    return verify_traces(
        alg_trace,
        opt_trace,
        flow_checks=flow_checks,
        refinement=refinement,
    )

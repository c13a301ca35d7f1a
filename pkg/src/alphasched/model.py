"""Domain model: instances, schedule traces and the derived-quantity calculus.

A ``ScheduleTrace`` is the single ground-truth record of a schedule, a list of
non-overlapping constant-rate segments.  Elapsed work, remaining work, the
alive/signalled partitions, lifetimes and completion/signal times are all
derived from it with exact rational arithmetic, so equality tests carry no
tolerance anywhere.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .rational import format_rat, parse_rat


class ModelError(Exception):
    """Invalid instance or trace data."""


class UnknownJobError(ModelError):
    """A job id that does not exist in the instance."""


class UnresolvedProcError(ModelError):
    """A clairvoyant-only quantity was requested for an uncommitted job."""


@dataclass(frozen=True)
class Deferred:
    """Processing time left open, to be committed later by a scripted trigger."""

    trigger_id: str


@dataclass(frozen=True)
class Job:
    id: int
    release: Fraction
    proc: Union[Fraction, Deferred]

    def __post_init__(self):
        object.__setattr__(self, "release", Fraction(self.release))
        if self.release < 0:
            raise ModelError(f"job {self.id}: negative release {self.release}")
        if not isinstance(self.proc, Deferred):
            object.__setattr__(self, "proc", Fraction(self.proc))
            if self.proc <= 0:
                raise ModelError(f"job {self.id}: processing time must be positive")

    @property
    def committed(self) -> bool:
        return not isinstance(self.proc, Deferred)


@dataclass(frozen=True)
class ProgressScaledRule:
    """Commit p = scale * observed_progress + offset for each listed job.

    Jobs are ranked by (observed progress, id) and assigned by rank, so equal
    observations resolve deterministically.
    """

    jobs: tuple[int, ...]
    scale: Fraction
    offset: Fraction

    kind = "progress-scaled"

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "scale", Fraction(self.scale))
        object.__setattr__(self, "offset", Fraction(self.offset))

    def commit(self, observed: Mapping[int, Fraction]) -> dict[int, Fraction]:
        ranked = sorted(self.jobs, key=lambda j: (observed[j], j))
        levels = sorted(observed[j] for j in self.jobs)
        return {j: self.scale * y + self.offset for j, y in zip(ranked, levels)}


@dataclass(frozen=True)
class RankPairRule:
    """Commit the long processing time to whichever of two jobs has made more
    progress; on a tie the lower id takes the long one."""

    jobs: tuple[int, int]
    high: Fraction
    low: Fraction

    kind = "rank-pair"

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "high", Fraction(self.high))
        object.__setattr__(self, "low", Fraction(self.low))
        if len(self.jobs) != 2:
            raise ModelError("rank-pair rule needs exactly two jobs")

    def commit(self, observed: Mapping[int, Fraction]) -> dict[int, Fraction]:
        a, b = self.jobs
        if observed[a] > observed[b] or (observed[a] == observed[b] and a < b):
            return {a: self.high, b: self.low}
        return {b: self.high, a: self.low}


CommitRule = Union[ProgressScaledRule, RankPairRule]


@dataclass(frozen=True)
class Trigger:
    id: str
    fire_at: Fraction
    rule: CommitRule

    def __post_init__(self):
        object.__setattr__(self, "fire_at", Fraction(self.fire_at))
        if self.fire_at < 0:
            raise ModelError(f"trigger {self.id}: negative fire time")


@dataclass(frozen=True)
class AdversaryScript:
    triggers: tuple[Trigger, ...]

    def __post_init__(self):
        object.__setattr__(self, "triggers", tuple(self.triggers))
        times = [tr.fire_at for tr in self.triggers]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ModelError("trigger fire times must be strictly increasing")
        ids = [tr.id for tr in self.triggers]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate trigger ids")

    def trigger(self, trigger_id: str) -> Trigger:
        for tr in self.triggers:
            if tr.id == trigger_id:
                return tr
        raise ModelError(f"unknown trigger {trigger_id!r}")


@dataclass(frozen=True)
class Instance:
    jobs: tuple[Job, ...]
    alpha: Fraction
    adversary: Optional[AdversaryScript] = None

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if not (0 <= self.alpha <= 1):
            raise ModelError(f"alpha must lie in [0,1], got {self.alpha}")
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate job ids")
        keys = [(j.release, j.id) for j in self.jobs]
        if keys != sorted(keys):
            raise ModelError("jobs must be sorted by (release, id)")
        for job in self.jobs:
            if not job.committed:
                if self.adversary is None:
                    raise ModelError(f"job {job.id} is deferred but no adversary script given")
                trigger = self.adversary.trigger(job.proc.trigger_id)
                if job.id not in trigger.rule.jobs:
                    raise ModelError(
                        f"job {job.id} defers to trigger {trigger.id!r} which does not commit it"
                    )

    def job(self, job_id: int) -> Job:
        by_id = getattr(self, "_by_id", None)
        if by_id is None:
            by_id = {j.id: j for j in self.jobs}
            object.__setattr__(self, "_by_id", by_id)
        try:
            return by_id[job_id]
        except KeyError:
            raise UnknownJobError(f"unknown job id {job_id}") from None

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(j.id for j in self.jobs)

    @property
    def resolved(self) -> bool:
        return all(j.committed for j in self.jobs)

    def proc_of(self, job_id: int) -> Fraction:
        job = self.job(job_id)
        if not job.committed:
            raise UnresolvedProcError(f"job {job_id} has an unresolved processing time")
        return job.proc

    def with_committed(self, procs: Mapping[int, Fraction]) -> "Instance":
        """Return the realized instance with the given deferred jobs committed.

        The adversary script is dropped once every job is committed.
        """
        jobs = []
        for job in self.jobs:
            if job.id in procs:
                if job.committed:
                    raise ModelError(f"job {job.id} is already committed")
                jobs.append(Job(job.id, job.release, Fraction(procs[job.id])))
            else:
                jobs.append(job)
        adversary = None if all(j.committed for j in jobs) else self.adversary
        return Instance(tuple(jobs), self.alpha, adversary)

    def with_alpha(self, alpha: Fraction) -> "Instance":
        return Instance(self.jobs, Fraction(alpha), self.adversary)


def _rule_to_json(rule: CommitRule) -> dict:
    if isinstance(rule, ProgressScaledRule):
        return {
            "kind": rule.kind,
            "jobs": list(rule.jobs),
            "scale": format_rat(rule.scale),
            "offset": format_rat(rule.offset),
        }
    return {
        "kind": rule.kind,
        "jobs": list(rule.jobs),
        "high": format_rat(rule.high),
        "low": format_rat(rule.low),
    }


def _rule_from_json(obj: dict) -> CommitRule:
    kind = obj.get("kind")
    if kind == "progress-scaled":
        return ProgressScaledRule(tuple(obj["jobs"]), parse_rat(obj["scale"]), parse_rat(obj["offset"]))
    if kind == "rank-pair":
        return RankPairRule(tuple(obj["jobs"]), parse_rat(obj["high"]), parse_rat(obj["low"]))
    raise ModelError(f"unknown commit rule kind {kind!r}")


def instance_to_json(instance: Instance) -> dict:
    jobs = []
    for job in instance.jobs:
        proc = {"deferred": job.proc.trigger_id} if not job.committed else format_rat(job.proc)
        jobs.append({"id": job.id, "release": format_rat(job.release), "proc": proc})
    obj = {"alpha": format_rat(instance.alpha), "jobs": jobs}
    if instance.adversary is not None:
        obj["adversary"] = {
            "triggers": [
                {"id": tr.id, "fire_at": format_rat(tr.fire_at), "rule": _rule_to_json(tr.rule)}
                for tr in instance.adversary.triggers
            ]
        }
    return obj


def instance_from_json(obj: dict) -> Instance:
    jobs = []
    for rec in obj["jobs"]:
        proc = rec["proc"]
        if isinstance(proc, dict):
            proc = Deferred(str(proc["deferred"]))
        else:
            proc = parse_rat(proc)
        jobs.append(Job(int(rec["id"]), parse_rat(rec["release"]), proc))
    adversary = None
    if obj.get("adversary"):
        triggers = tuple(
            Trigger(str(rec["id"]), parse_rat(rec["fire_at"]), _rule_from_json(rec["rule"]))
            for rec in obj["adversary"]["triggers"]
        )
        adversary = AdversaryScript(triggers)
    return Instance(tuple(jobs), parse_rat(obj["alpha"]), adversary)


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(json.load(fh))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(
        json.dumps(instance_to_json(instance), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@dataclass(frozen=True)
class ExecutionSegment:
    """Constant rate assignment on [start, end); rates are positive and sum to at most 1."""

    start: Fraction
    end: Fraction
    rates: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        object.__setattr__(self, "start", Fraction(self.start))
        object.__setattr__(self, "end", Fraction(self.end))
        rates = tuple(sorted((int(j), Fraction(r)) for j, r in self.rates))
        object.__setattr__(self, "rates", rates)
        if self.start < 0 or self.start >= self.end:
            raise ModelError(f"bad segment bounds [{self.start}, {self.end}]")
        ids = [j for j, _ in rates]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate job in segment rates")
        if any(r <= 0 for _, r in rates):
            raise ModelError("segment rates must be positive")
        if sum((r for _, r in rates), Fraction(0)) > 1:
            raise ModelError("segment rates exceed unit speed")

    def rate(self, job_id: int) -> Fraction:
        for j, r in self.rates:
            if j == job_id:
                return r
        return Fraction(0)

    @property
    def total_rate(self) -> Fraction:
        return sum((r for _, r in self.rates), Fraction(0))

    @property
    def length(self) -> Fraction:
        return self.end - self.start


Interval = tuple[Fraction, Fraction]


class Partition:
    """Job partition at one instant: alive = nonclairvoyant + clairvoyant."""

    __slots__ = ("alive", "nonclairvoyant", "clairvoyant", "finished")

    def __init__(self, alive, nonclairvoyant, clairvoyant, finished):
        self.alive = frozenset(alive)
        self.nonclairvoyant = frozenset(nonclairvoyant)
        self.clairvoyant = frozenset(clairvoyant)
        self.finished = frozenset(finished)


def _merge_adjacent(segments: Sequence[ExecutionSegment]) -> tuple[ExecutionSegment, ...]:
    merged: list[ExecutionSegment] = []
    for seg in segments:
        if merged and merged[-1].end == seg.start and merged[-1].rates == seg.rates:
            merged[-1] = ExecutionSegment(merged[-1].start, seg.end, seg.rates)
        else:
            merged.append(seg)
    return tuple(merged)


class ScheduleTrace:
    """Canonical schedule record over a fully resolved instance.

    Completion and signal times are derived from the segments at construction
    time, and the representation is validated: segments are ordered and
    disjoint, rated jobs are released and unfinished, per-job work never
    exceeds the processing time, and the total-flow identity
    sum_j (C_j - r_j) = integral |A(t)| dt holds exactly for complete traces.
    """

    def __init__(self, instance: Instance, segments: Sequence[ExecutionSegment], horizon: Optional[Fraction] = None):
        if not instance.resolved:
            raise ModelError("schedule trace requires a fully resolved instance")
        self.instance = instance
        self.horizon = None if horizon is None else Fraction(horizon)
        self.segments = _merge_adjacent(sorted(segments, key=lambda s: s.start))
        for a, b in zip(self.segments, self.segments[1:]):
            if a.end > b.start:
                raise ModelError(f"overlapping segments at {b.start}")
        known = set(instance.ids)
        for seg in self.segments:
            for j, _ in seg.rates:
                if j not in known:
                    raise UnknownJobError(f"segment rates unknown job {j}")

        self._profiles: dict[int, tuple[list[Fraction], list[Fraction]]] = {}
        for job in instance.jobs:
            self._profiles[job.id] = ([job.release], [Fraction(0)])
        for seg in self.segments:
            for j, r in seg.rates:
                times, cums = self._profiles[j]
                if seg.start < times[0]:
                    raise ModelError(f"job {j} rated before release")
                if seg.start > times[-1]:
                    times.append(seg.start)
                    cums.append(cums[-1])
                times.append(seg.end)
                cums.append(cums[-1] + r * seg.length)
        for job in instance.jobs:
            if self._profiles[job.id][1][-1] > job.proc:
                raise ModelError(f"job {job.id} receives more work than its processing time")

        self.completions: dict[int, Fraction] = {}
        self.emissions: dict[int, Fraction] = {}
        alpha = instance.alpha
        for job in instance.jobs:
            done = self._crossing_time(job.id, job.proc)
            if done is not None:
                self.completions[job.id] = done
            if alpha == 0:
                self.emissions[job.id] = job.release
            else:
                hit = self._crossing_time(job.id, alpha * job.proc)
                if hit is not None:
                    self.emissions[job.id] = hit

        for seg in self.segments:
            for j, _ in seg.rates:
                done = self.completions.get(j)
                if done is not None and done <= seg.start:
                    raise ModelError(f"job {j} rated after completion")

        last = self.segments[-1].end if self.segments else Fraction(0)
        self.makespan = self.horizon if self.horizon is not None else last
        if self.makespan < last:
            raise ModelError("horizon precedes the last segment")
        self._check_flow_identity()

    # -- derived quantities ------------------------------------------------

    def _crossing_time(self, job_id: int, target: Fraction) -> Optional[Fraction]:
        """Earliest time the cumulative work of a job reaches target, if ever."""
        times, cums = self._profiles[job_id]
        if target == 0:
            return times[0]
        if cums[-1] < target:
            return None
        lo = 0
        while cums[lo] < target:
            lo += 1
        if cums[lo] == target:
            return times[lo]
        rate = (cums[lo] - cums[lo - 1]) / (times[lo] - times[lo - 1])
        return times[lo - 1] + (target - cums[lo - 1]) / rate

    def elapsed_work(self, job_id: int, t: Fraction) -> Fraction:
        """Total processing received by the job up to time t."""
        t = Fraction(t)
        if t < 0:
            raise ModelError("time must be nonnegative")
        if job_id not in self._profiles:
            raise UnknownJobError(f"unknown job id {job_id}")
        times, cums = self._profiles[job_id]
        if t <= times[0]:
            return Fraction(0)
        idx = bisect_right(times, t) - 1
        if idx >= len(times) - 1:
            return cums[-1]
        if cums[idx + 1] == cums[idx]:
            return cums[idx]
        rate = (cums[idx + 1] - cums[idx]) / (times[idx + 1] - times[idx])
        return cums[idx] + rate * (t - times[idx])

    def remaining(self, job_id: int, t: Fraction) -> Fraction:
        """Remaining processing time at t; zero once completed."""
        return self.instance.proc_of(job_id) - self.elapsed_work(job_id, t)

    def completion(self, job_id: int) -> Optional[Fraction]:
        self.instance.job(job_id)
        return self.completions.get(job_id)

    def alive_at(self, t: Fraction) -> frozenset[int]:
        t = Fraction(t)
        out = set()
        for job in self.instance.jobs:
            if job.release > t:
                continue
            done = self.completions.get(job.id)
            if done is None or t < done:
                out.add(job.id)
        return frozenset(out)

    def partition(self, t: Fraction) -> Partition:
        """Alive/nonclairvoyant/clairvoyant/finished split at time t.

        A job sits on the nonclairvoyant side while its elapsed work is at
        most alpha * p (boundary inclusive); strictly beyond it counts as
        clairvoyant.
        """
        t = Fraction(t)
        alpha = self.instance.alpha
        alive, nonclair, clair, finished = set(), set(), set(), set()
        for job in self.instance.jobs:
            if job.release > t:
                continue
            done = self.completions.get(job.id)
            if done is not None and done <= t:
                finished.add(job.id)
                continue
            alive.add(job.id)
            if self.elapsed_work(job.id, t) <= alpha * job.proc:
                nonclair.add(job.id)
            else:
                clair.add(job.id)
        return Partition(alive, nonclair, clair, finished)

    def lifetime(self, job_ids: Iterable[int], t: Fraction) -> list[Interval]:
        """Union of per-job intervals [release, min(completion, t)], merged to
        maximal disjoint closed intervals."""
        ids = sorted(set(job_ids))
        if not ids:
            raise ModelError("lifetime of an empty job set")
        t = Fraction(t)
        spans = []
        for j in ids:
            job = self.instance.job(j)
            hi = self.completions.get(j)
            hi = t if hi is None else min(hi, t)
            if job.release <= hi:
                spans.append((job.release, hi))
        spans.sort()
        merged: list[list[Fraction]] = []
        for lo, hi in spans:
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(lo, hi) for lo, hi in merged]

    def interval_work(self, job_id: int, interval: Interval) -> Fraction:
        lo, hi = Fraction(interval[0]), Fraction(interval[1])
        if lo < 0 or hi < lo:
            raise ModelError(f"bad interval [{lo}, {hi}]")
        return self.elapsed_work(job_id, hi) - self.elapsed_work(job_id, lo)

    def segment_at(self, t: Fraction) -> Optional[ExecutionSegment]:
        """The segment in force on [t, t + eps), if any (right-limit view)."""
        t = Fraction(t)
        starts = [seg.start for seg in self.segments]
        idx = bisect_right(starts, t) - 1
        if idx >= 0 and self.segments[idx].end > t:
            return self.segments[idx]
        return None

    def busy_intervals(self, job_id: int) -> list[Interval]:
        """Maximal intervals on which the job receives positive rate."""
        if job_id not in self._profiles:
            raise UnknownJobError(f"unknown job id {job_id}")
        out: list[list[Fraction]] = []
        for seg in self.segments:
            if seg.rate(job_id) > 0:
                if out and out[-1][1] == seg.start:
                    out[-1][1] = seg.end
                else:
                    out.append([seg.start, seg.end])
        return [(lo, hi) for lo, hi in out]

    @property
    def complete(self) -> bool:
        return len(self.completions) == len(self.instance.jobs)

    def event_times(self) -> list[Fraction]:
        """Sorted distinct times at which any derived quantity can change."""
        points = {Fraction(0), self.makespan}
        for seg in self.segments:
            points.add(seg.start)
            points.add(seg.end)
        for job in self.instance.jobs:
            if job.release <= self.makespan:
                points.add(job.release)
        points.update(self.completions.values())
        points.update(s for s in self.emissions.values() if s <= self.makespan)
        return sorted(points)

    # -- invariants ----------------------------------------------------------

    def alive_steps(self) -> list[tuple[tuple[Fraction, Fraction], int]]:
        """Constant-count spans ((lo, hi), |alive|) sweeping releases against
        completions; unfinished jobs stay alive through the horizon."""
        deltas: dict[Fraction, int] = {}
        for job in self.instance.jobs:
            if job.release > self.makespan:
                continue
            deltas[job.release] = deltas.get(job.release, 0) + 1
            end = self.completions.get(job.id)
            if end is not None:
                deltas[end] = deltas.get(end, 0) - 1
        points = sorted(set(deltas) | {Fraction(0), self.makespan})
        steps = []
        count = 0
        for lo, hi in zip(points, points[1:]):
            count += deltas.get(lo, 0)
            steps.append(((lo, hi), count))
        return steps

    def _check_flow_identity(self) -> None:
        if not self.complete:
            return
        total = sum(
            (self.completions[j.id] - j.release for j in self.instance.jobs), Fraction(0)
        )
        area = sum((count * (hi - lo) for (lo, hi), count in self.alive_steps()), Fraction(0))
        if total != area:
            raise ModelError(
                f"flow-time identity violated: sum flows {total} != alive area {area}"
            )

    # -- serialization ---------------------------------------------------------

    def canonical_dict(self) -> dict:
        return {
            "instance": instance_to_json(self.instance),
            "segments": [
                [format_rat(s.start), format_rat(s.end), [[j, format_rat(r)] for j, r in s.rates]]
                for s in self.segments
            ],
            "completions": {str(j): format_rat(c) for j, c in sorted(self.completions.items())},
            "emissions": {str(j): format_rat(s) for j, s in sorted(self.emissions.items())},
            "makespan": format_rat(self.makespan),
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":")).encode()

    def csv_rows(self) -> list[str]:
        rows = ["start,end,job_id,rate"]
        for seg in self.segments:
            for j, r in seg.rates:
                rows.append(f"{format_rat(seg.start)},{format_rat(seg.end)},{j},{format_rat(r)}")
        return rows

    @staticmethod
    def from_csv_rows(instance: Instance, rows: Sequence[str], horizon: Optional[Fraction] = None) -> "ScheduleTrace":
        body = [r for r in rows[1:] if r.strip()]
        spans: dict[tuple[Fraction, Fraction], list[tuple[int, Fraction]]] = {}
        for row in body:
            start, end, job_id, rate = row.split(",")
            spans.setdefault((parse_rat(start), parse_rat(end)), []).append(
                (int(job_id), parse_rat(rate))
            )
        segments = [ExecutionSegment(lo, hi, tuple(rates)) for (lo, hi), rates in sorted(spans.items())]
        return ScheduleTrace(instance, segments, horizon=horizon)

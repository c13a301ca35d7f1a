import json
from fractions import Fraction as F
from pathlib import Path

import pytest

from alphasched.adversary import gen_det_lb2
from alphasched.engine import (
    CommitmentError,
    EngineError,
    SimState,
    first_divergence,
    replay_check,
    simulate,
)
from alphasched.metrics import build_report
from alphasched.model import (
    AdversaryScript,
    Deferred,
    ExecutionSegment,
    Instance,
    Job,
    ProgressScaledRule,
    ScheduleTrace,
    Trigger,
)
from alphasched.policies import PolicyKind, setf_decide

DATA = Path(__file__).parent / "data"


class TestSimulateBasics:
    @pytest.mark.parametrize("kind", list(PolicyKind))
    def test_single_job_any_policy(self, kind):
        inst = Instance((Job(1, 0, 1),), F(1, 2))
        trace, _ = simulate(inst, kind)
        assert trace.segments == (ExecutionSegment(0, 1, ((1, F(1)),)),)
        assert trace.completions == {1: F(1)}

    def test_setf_pair(self, pair_instance):
        trace, _ = simulate(pair_instance, PolicyKind.SETF)
        assert trace.completions == {1: F(4), 2: F(4)}
        assert build_report(trace).total_flow == 8

    def test_srpt_preemption(self):
        inst = Instance((Job(1, 0, 3), Job(2, 1, 1)), F(1, 2))
        trace, _ = simulate(inst, PolicyKind.SRPT)
        assert trace.completions == {2: F(2), 1: F(4)}
        assert build_report(trace).total_flow == 5

    def test_arrival_gap_idles(self):
        inst = Instance((Job(1, 0, 1), Job(2, 5, 1)), F(1, 2))
        trace, _ = simulate(inst, PolicyKind.ALPHA)
        assert [(s.start, s.end) for s in trace.segments] == [(F(0), F(1)), (F(5), F(6))]

    def test_event_log_order_and_kinds(self, worked_example):
        _, log = simulate(worked_example, PolicyKind.ALPHA)
        assert [(e.time, e.kind) for e in log] == [
            (F(0), "arrival"),
            (F(2), "emission"),
            (F(2), "mode-switch"),
            (F(3), "completion"),
            (F(3), "mode-switch"),
            (F(4), "emission"),
            (F(4), "mode-switch"),
            (F(6), "completion"),
        ]

    def test_horizon_truncates(self, pair_instance):
        trace, _ = simulate(pair_instance, PolicyKind.SETF, horizon=F(3))
        assert trace.makespan == 3
        assert not trace.complete
        assert trace.elapsed_work(1, 3) == F(3, 2)


class TestNextEvent:
    def test_future_arrival_only(self):
        inst = Instance((Job(1, 5, 1),), F(1, 2))
        state = SimState(inst, PolicyKind.ALPHA)
        state.apply_instant_events()
        state.make_decision()
        assert state.next_event() == (F(5), ("arrival",))

    def test_joint_emission_of_shared_pair(self, pair_instance):
        state = SimState(pair_instance, PolicyKind.ALPHA)
        state.apply_instant_events()
        state.make_decision()
        assert state.next_event() == (F(2), ("emission",))

    def test_merge_when_shared_set_catches_up(self):
        inst = Instance((Job(1, 0, 10), Job(2, 0, 10), Job(3, 0, 10)), F(1))
        state = SimState(inst, PolicyKind.SETF)
        state.apply_instant_events()
        state.progress[3] = F(1)
        state.make_decision()
        time, kinds = state.next_event()
        assert time == F(2) and "merge" in kinds

    def test_threshold_crossing_reported_as_mode_switch(self):
        # signalled job remaining 2 waits until shared progress reaches 2
        inst = Instance((Job(1, 0, 4), Job(2, 0, 8)), F(1, 2))
        state = SimState(inst, PolicyKind.ALPHA)
        state.apply_instant_events()
        state.progress[1] = F(2)
        state.emitted.add(1)
        state.signal[1] = F(0)
        state.make_decision()
        assert state.decision.branch == "setf"
        time, kinds = state.next_event()
        assert time == F(2) and "mode-switch" in kinds


class TestDeterminismAndReplay:
    def test_identical_event_logs(self, worked_example):
        _, log1 = simulate(worked_example, PolicyKind.ALPHA)
        _, log2 = simulate(worked_example, PolicyKind.ALPHA)
        assert log1 == log2

    def test_replay_check_true(self, worked_example):
        trace, _ = simulate(worked_example, PolicyKind.ALPHA)
        assert replay_check(trace, worked_example, PolicyKind.ALPHA)

    def test_replay_detects_perturbation(self, pair_instance):
        trace, _ = simulate(pair_instance, PolicyKind.SETF)
        tampered = ScheduleTrace(
            trace.instance,
            [ExecutionSegment(0, 4, ((1, F(1, 2)), (2, F(1, 4))))],
        )
        assert not replay_check(tampered, pair_instance, PolicyKind.SETF)
        assert first_divergence(tampered, trace) is not None

    def test_golden_adaptive_phase_instance(self):
        golden = json.loads((DATA / "golden_lb2_a12_k3.json").read_text())
        inst, _ = gen_det_lb2(F(1, 2), 3)
        trace, log = simulate(inst, PolicyKind.ALPHA)
        assert trace.canonical_dict() == golden["trace"]
        assert log.csv_rows() == golden["events"]


class TestInformationHiding:
    class SpyPolicy:
        omniscient = False
        merge_pool = "all"

        def __init__(self, instance):
            self.instance = instance
            self.views = []

        def decide(self, view):
            self.views.append(view)
            return setf_decide(view)

    def test_unsignalled_jobs_hide_remaining(self, worked_example):
        spy = self.SpyPolicy(worked_example)
        simulate(worked_example, spy)
        assert spy.views
        for view in spy.views:
            for entry in view.jobs:
                p = self.instance_proc(worked_example, entry.job_id)
                if entry.elapsed < view.alpha * p:
                    assert not entry.emitted
                    assert entry.remaining is None
                    assert entry.signal_time is None
                else:
                    assert entry.emitted
                    assert entry.remaining == p - entry.elapsed

    @staticmethod
    def instance_proc(instance, job_id):
        return instance.job(job_id).proc

    def test_deferred_jobs_never_signalled(self):
        script = AdversaryScript(
            (Trigger("c", F(2), ProgressScaledRule((1,), 2, 1)),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        spy = self.SpyPolicy(inst)
        simulate(inst, spy)
        for view in spy.views:
            for entry in view.jobs:
                if view.now < 2:
                    assert not entry.emitted and entry.remaining is None


class TestAdversaryExecution:
    def test_commit_resolves_and_schedule_finishes(self):
        script = AdversaryScript(
            (Trigger("c", F(2), ProgressScaledRule((1,), 2, 1)),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        trace, log = simulate(inst, PolicyKind.ALPHA)
        # observed progress 2 at the trigger: p = 2*2 + 1 = 5
        assert trace.instance.job(1).proc == 5
        assert trace.completions == {1: F(5)}
        assert any(e.kind == "adversary-commit" for e in log)

    def test_illegal_commit_rejected(self):
        # progress 2 at fire time but alpha * p = 3/4 < 2
        script = AdversaryScript(
            (Trigger("c", F(2), ProgressScaledRule((1,), 0, F(3, 2))),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        with pytest.raises(CommitmentError, match="inconsistent commitment"):
            simulate(inst, PolicyKind.ALPHA)

    def test_commit_at_signal_boundary_emits_instantly(self):
        # alpha * p equals observed progress exactly: legal, signals at once
        script = AdversaryScript(
            (Trigger("c", F(2), ProgressScaledRule((1,), 2, 0)),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        trace, log = simulate(inst, PolicyKind.ALPHA)
        assert trace.emissions[1] == 2
        times = [e.time for e in log if e.kind == "emission"]
        assert times == [F(2)]

    def test_unresolved_at_horizon_errors(self):
        script = AdversaryScript(
            (Trigger("c", F(10), ProgressScaledRule((1,), 2, 1)),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        with pytest.raises(EngineError, match="unresolved deferred"):
            simulate(inst, PolicyKind.ALPHA, horizon=F(5))

    def test_srpt_on_deferred_instance_errors(self):
        script = AdversaryScript(
            (Trigger("c", F(2), ProgressScaledRule((1,), 2, 1)),)
        )
        inst = Instance((Job(1, 0, Deferred("c")),), F(1, 2), script)
        with pytest.raises(EngineError, match="omniscient"):
            simulate(inst, PolicyKind.SRPT)


class TestGuards:
    def test_event_cap_is_diagnostic(self, worked_example):
        state = SimState(worked_example, PolicyKind.ALPHA)
        state._event_cap = 1
        with pytest.raises(EngineError, match="runaway event loop"):
            state.run()

    def test_feasibility_of_traces(self, worked_example):
        from alphasched.analysis import check_feasibility

        for kind in PolicyKind:
            trace, _ = simulate(worked_example, kind)
            assert check_feasibility(trace) == []

"""Command-line front end.

Commands: simulate | compare | verify | lowerbound | sweep.  All numeric
output is exact "num/den" text; --float adds decimal columns for plotting.
Outputs are byte-deterministic for fixed inputs and seeds.

Exit codes: 0 pass, 1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import adversary
from .analysis import verify_instance, verify_traces
from .engine import EngineError, simulate
from .metrics import (
    FLAT_CSV_HEADER,
    build_report,
    delta,
    flat_csv_row,
    integrate_curve,
    ratio,
)
from .model import (
    Instance,
    ModelError,
    ScheduleTrace,
    instance_to_json,
    load_instance,
    save_instance,
)
from .oracle import quantum_simulate
from .policies import PolicyKind
from .rational import format_rat, parse_rat

USAGE_ERROR = 2
VERIFY_ERROR = 1

POLICY_NAMES = {"alpha": PolicyKind.ALPHA, "srpt": PolicyKind.SRPT, "setf": PolicyKind.SETF}

QUANTUM = Fraction(1, 64)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_instance_arg(args) -> Instance:
    path = Path(args.instance)
    if not path.exists():
        raise FileNotFoundError(f"instance not found: {path}")
    inst = load_instance(path)
    if getattr(args, "alpha", None):
        inst = inst.with_alpha(parse_rat(args.alpha))
    return inst


def _quantum_entry(inst: Instance, kind: PolicyKind, fluid_flow: Fraction) -> dict:
    run = quantum_simulate(inst, kind, QUANTUM)
    gap = abs(run.total_flow - fluid_flow)
    bound = Fraction(len(inst.jobs) ** 2, QUANTUM.denominator)
    return {
        "quantum": format_rat(QUANTUM),
        "total_flow": format_rat(run.total_flow),
        "gap": format_rat(gap),
        "bound": format_rat(bound),
        "ok": gap <= bound,
    }


def cmd_simulate(args) -> int:
    inst = _load_instance_arg(args)
    kind = POLICY_NAMES[args.policy]
    horizon = parse_rat(args.horizon) if args.horizon else None
    trace, log = simulate(inst, kind, horizon=horizon)
    report = build_report(trace)
    out = Path(args.out)
    _write_text(out / "trace.csv", "\n".join(trace.csv_rows()) + "\n")
    _write_text(out / "events.csv", "\n".join(log.csv_rows()) + "\n")
    metrics = report.to_json()
    if args.float:
        metrics["total_flow_float"] = float(report.total_flow)
        metrics["makespan_float"] = float(report.makespan)
    code = 0
    if args.quantum_oracle:
        if not trace.complete:
            raise ModelError("quantum cross-check needs a complete run")
        entry = _quantum_entry(trace.instance, kind, report.total_flow)
        metrics["quantum_check"] = entry
        if not entry["ok"]:
            code = VERIFY_ERROR
    _write_json(out / "metrics.json", metrics)
    return code


def cmd_compare(args) -> int:
    inst = _load_instance_arg(args)
    traces = {}
    for name, kind in POLICY_NAMES.items():
        if kind is PolicyKind.ALPHA:
            trace, _ = simulate(inst, kind)
        else:
            base = traces["alpha"].instance if "alpha" in traces else inst
            trace, _ = simulate(base, kind)
        traces[name] = trace
    reports = {name: build_report(tr) for name, tr in traces.items()}
    opt = reports["srpt"]
    instance_id = Path(args.instance).stem
    header = [FLAT_CSV_HEADER]
    if args.float:
        header += ["total_flow_float", "ratio_float"]
    if args.quantum_oracle:
        header += ["quantum_flow", "quantum_gap"]
    rows = [",".join(header)]
    code = 0
    for name in ("alpha", "srpt", "setf"):
        rep = reports[name]
        row = [flat_csv_row(instance_id, name, inst.alpha, rep, opt)]
        if args.float:
            r = ratio(rep, opt)
            row += [f"{float(rep.total_flow):.6f}", f"{float(r):.6f}"]
        if args.quantum_oracle:
            entry = _quantum_entry(traces[name].instance, POLICY_NAMES[name], rep.total_flow)
            row += [entry["total_flow"], entry["gap"]]
            if not entry["ok"]:
                code = VERIFY_ERROR
        rows.append(",".join(row))
    _write_text(Path(args.out) / "compare.csv", "\n".join(rows) + "\n")
    return code


def cmd_verify(args) -> int:
    inst = _load_instance_arg(args)
    out = Path(args.out) if args.out else None
    if args.trace_override:
        override_path = Path(args.trace_override)
        if not override_path.exists():
            raise FileNotFoundError(f"trace override not found: {override_path}")
        rows = override_path.read_text(encoding="utf-8").splitlines()
        if not inst.resolved:
            raise ModelError("trace override requires a resolved instance")
        alg_trace = ScheduleTrace.from_csv_rows(inst, rows)
        opt_trace, _ = simulate(inst, PolicyKind.SRPT)
        report = verify_traces(
            alg_trace,
            opt_trace,
            flow_checks=not args.no_flow_checks,
            refinement=not args.no_refinement,
        )
    else:
        report = verify_instance(
            inst,
            flow_checks=not args.no_flow_checks,
            refinement=not args.no_refinement,
        )
    if out is not None:
        _write_json(out / "report.json", report.to_json())
    if report.ok:
        print("verify: all checks passed")
        return 0
    print(f"verify: FAILED: {json.dumps(report.first_failure, sort_keys=True)}")
    if out is not None:
        _write_json(out / "counterexample-instance.json", instance_to_json(report.instance))
        if args.trace_override:
            _write_text(
                out / "counterexample-trace.csv",
                Path(args.trace_override).read_text(encoding="utf-8"),
            )
    return VERIFY_ERROR


def _lowerbound_deterministic(args, which: str, out: Path | None) -> int:
    alpha = parse_rat(args.alpha)
    k = args.k
    if which == "lb1":
        inst, t = adversary.gen_det_lb1(alpha, k)
    else:
        inst, t = adversary.gen_det_lb2(alpha, k)
    if args.dos_m:
        inst = adversary.append_dos_tail(inst, t, args.dos_m)
    alg, _ = simulate(inst, PolicyKind.ALPHA)
    opt, _ = simulate(alg.instance, PolicyKind.SRPT)
    result = {
        "which": which,
        "alpha": format_rat(alpha),
        "k": k,
        "measure_time": format_rat(t),
        "delta_alg_ge1": delta(alg, t, 1),
        "delta_alg": delta(alg, t),
        "delta_opt": delta(opt, t),
    }
    if args.dos_m:
        ra, ro = build_report(alg), build_report(opt)
        hi = t + args.dos_m + 1
        wa = integrate_curve(ra.delta_curve, t, hi)
        wo = integrate_curve(ro.delta_curve, t, hi)
        result["dos_m"] = args.dos_m
        result["window_flow_alg"] = format_rat(wa)
        result["window_flow_opt"] = format_rat(wo)
        result["window_ratio"] = format_rat(wa / wo)
        result["window_ratio_float"] = float(wa / wo)
        result["total_ratio"] = format_rat(ratio(ra, ro))
    print(
        f"{which} alpha={format_rat(alpha)} k={k}: "
        f"delta(t,1)={result['delta_alg_ge1']} delta*(t)={result['delta_opt']}"
        + (f" window_ratio={result['window_ratio_float']:.4f}" if args.dos_m else "")
    )
    if out is not None:
        _write_json(out / "lowerbound.json", result)
        save_instance(alg.instance, out / "realized-instance.json")
    return 0


def _lowerbound_randomized(args, which: str, out: Path | None) -> int:
    alpha = parse_rat(args.alpha)
    if which == "rand32":
        inst, t = adversary.gen_rand32(alpha, args.k, args.seed)
        alg, _ = simulate(inst, PolicyKind.ALPHA)
        opt, _ = simulate(inst, PolicyKind.SRPT)
        result = {
            "which": which,
            "alpha": format_rat(alpha),
            "k": args.k,
            "seed": args.seed,
            "measure_time": format_rat(t),
            "delta_alg_ge1": delta(alg, t, 1),
            "delta_opt": delta(opt, t),
        }
        print(
            f"rand32 alpha={format_rat(alpha)} k={args.k} seed={args.seed}: "
            f"delta(t,1)={result['delta_alg_ge1']} delta*(t)={result['delta_opt']}"
        )
        if out is not None:
            _write_json(out / "lowerbound.json", result)
        return 0
    k, t = adversary.randomized_params(alpha)
    bound = 1 / (1 - alpha)
    totals = {"alg": 0, "opt": 0, "alg_cond": 0, "opt_cond": 0, "n_cond": 0}
    for seed in range(args.seed, args.seed + args.seeds):
        inst, _ = adversary.gen_rand_lb(alpha, seed)
        alg, _ = simulate(inst, PolicyKind.ALPHA)
        opt, _ = simulate(inst, PolicyKind.SRPT)
        da, do = delta(alg, t, 1), delta(opt, t)
        totals["alg"] += da
        totals["opt"] += do
        if all(j.proc <= bound for j in inst.jobs):
            totals["alg_cond"] += da
            totals["opt_cond"] += do
            totals["n_cond"] += 1
    n = args.seeds
    result = {
        "which": "rand",
        "alpha": format_rat(alpha),
        "k": k,
        "measure_time": t,
        "seeds": n,
        "first_seed": args.seed,
        "mean_delta_alg_ge1": totals["alg"] / n,
        "mean_delta_opt": totals["opt"] / n,
        "conditioned_samples": totals["n_cond"],
        "mean_delta_alg_ge1_conditioned": (
            totals["alg_cond"] / totals["n_cond"] if totals["n_cond"] else None
        ),
        "mean_delta_opt_conditioned": (
            totals["opt_cond"] / totals["n_cond"] if totals["n_cond"] else None
        ),
    }
    print(
        f"rand alpha={format_rat(alpha)} k={k} t={t} over {n} seeds: "
        f"mean delta(t,1)={result['mean_delta_alg_ge1']:.3f} "
        f"mean delta*(t)={result['mean_delta_opt']:.3f}"
    )
    if out is not None:
        _write_json(out / "lowerbound.json", result)
    return 0


def cmd_lowerbound(args) -> int:
    out = Path(args.out) if args.out else None
    if args.which in ("lb1", "lb2"):
        return _lowerbound_deterministic(args, args.which, out)
    return _lowerbound_randomized(args, args.which, out)


def _sweep_one(inst: Instance, alpha: Fraction):
    inst = inst.with_alpha(alpha)
    alg, _ = simulate(inst, PolicyKind.ALPHA)
    opt, _ = simulate(inst, PolicyKind.SRPT)
    flow_ratio = ratio(build_report(alg), build_report(opt))
    worst = Fraction(0)
    points = sorted(set(alg.event_times()) | set(opt.event_times()))
    samples = list(points)
    for a, b in zip(points, points[1:]):
        samples.append((a + b) / 2)
    for t in samples:
        alive = len(alg.alive_at(t))
        opt_alive = len(opt.alive_at(t))
        if opt_alive:
            worst = max(worst, Fraction(alive, opt_alive))
    return worst, flow_ratio


def cmd_sweep(args) -> int:
    grid = [parse_rat(text) for text in args.grid.split(",") if text.strip()]
    if not grid:
        raise ModelError("empty alpha grid")
    for alpha in grid:
        if not (0 <= alpha < 1):
            raise ModelError(f"grid alpha {format_rat(alpha)} outside [0, 1)")
        if (1 / (1 - alpha)).denominator != 1:
            raise ModelError(
                f"grid alpha {format_rat(alpha)} has non-integer 1/(1-alpha)"
            )
    instances = [
        adversary.gen_random_instance(
            1 + (args.seed + i) % args.max_jobs, args.max_p, args.density, args.seed + i
        )
        for i in range(args.fuzz)
    ]
    header = ["alpha", "max_alive_ratio", "max_flow_ratio"]
    if args.float:
        header += ["max_alive_ratio_float", "max_flow_ratio_float"]
    rows = [",".join(header)]
    if instances:
        for alpha in grid:
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(lambda inst: _sweep_one(inst, alpha), instances))
            worst_alive = max(r[0] for r in results)
            worst_flow = max(r[1] for r in results)
            row = [format_rat(alpha), format_rat(worst_alive), format_rat(worst_flow)]
            if args.float:
                row += [f"{float(worst_alive):.6f}", f"{float(worst_flow):.6f}"]
            rows.append(",".join(row))
    _write_text(Path(args.out) / "sweep.csv", "\n".join(rows) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphasched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one policy over an instance")
    sim.add_argument("--instance", required=True)
    sim.add_argument("--policy", choices=sorted(POLICY_NAMES), default="alpha")
    sim.add_argument("--alpha", help="override the instance alpha (num/den)")
    sim.add_argument("--horizon", help="stop the run at this time (num/den)")
    sim.add_argument("--out", required=True)
    sim.add_argument("--quantum-oracle", action="store_true")
    sim.add_argument("--float", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="run all three policies and compare flows")
    cmp_.add_argument("--instance", required=True)
    cmp_.add_argument("--alpha")
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--quantum-oracle", action="store_true")
    cmp_.add_argument("--float", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    ver = sub.add_parser("verify", help="machine-check the structural analysis")
    ver.add_argument("--instance", required=True)
    ver.add_argument("--alpha")
    ver.add_argument("--out")
    ver.add_argument("--trace-override", help="verify this trace CSV instead of simulating")
    ver.add_argument("--no-flow-checks", action="store_true")
    ver.add_argument("--no-refinement", action="store_true")
    ver.set_defaults(func=cmd_verify)

    low = sub.add_parser("lowerbound", help="reproduce the adversarial constructions")
    low.add_argument("--which", choices=["lb1", "lb2", "rand", "rand32"], required=True)
    low.add_argument("--alpha", required=True)
    low.add_argument("--k", type=int, default=5)
    low.add_argument("--seed", type=int, default=0)
    low.add_argument("--seeds", type=int, default=500, help="sample count for rand")
    low.add_argument("--dos-M", type=int, default=0, dest="dos_m")
    low.add_argument("--out")
    low.set_defaults(func=cmd_lowerbound)

    swp = sub.add_parser("sweep", help="alpha grid over a fuzz corpus")
    swp.add_argument("--grid", required=True, help="comma-separated alphas (num/den)")
    swp.add_argument("--fuzz", type=int, default=50)
    swp.add_argument("--seed", type=int, default=1)
    swp.add_argument("--max-jobs", type=int, default=6)
    swp.add_argument("--max-p", type=int, default=8)
    swp.add_argument("--density", type=float, default=0.8)
    swp.add_argument("--workers", type=int, default=4)
    swp.add_argument("--out", required=True)
    swp.add_argument("--float", action="store_true")
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ModelError, EngineError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

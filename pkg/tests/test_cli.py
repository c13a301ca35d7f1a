import json
from fractions import Fraction as F
from pathlib import Path

import pytest

from alphasched.cli import main
from alphasched.model import Instance, Job, save_instance


@pytest.fixture
def pair_path(tmp_path, pair_instance) -> Path:
    path = tmp_path / "pair.json"
    save_instance(pair_instance, path)
    return path


def read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


class TestSimulateCommand:
    def test_writes_artifacts(self, tmp_path, pair_path):
        out = tmp_path / "out"
        code = main(
            ["simulate", "--instance", str(pair_path), "--policy", "setf", "--out", str(out)]
        )
        assert code == 0
        metrics = json.loads(read(out / "metrics.json"))
        assert metrics["total_flow"] == "8/1"
        assert read(out / "trace.csv").splitlines()[0] == "start,end,job_id,rate"
        assert read(out / "events.csv").splitlines()[0] == "time,kind,job_ids"

    def test_single_job_flow_equals_proc(self, tmp_path):
        inst_path = tmp_path / "one.json"
        save_instance(Instance((Job(1, 0, 5),), F(1, 2)), inst_path)
        out = tmp_path / "out"
        assert main(["simulate", "--instance", str(inst_path), "--out", str(out)]) == 0
        assert json.loads(read(out / "metrics.json"))["total_flow"] == "5/1"

    def test_missing_instance_exits_2(self, tmp_path):
        code = main(
            ["simulate", "--instance", str(tmp_path / "none.json"), "--out", str(tmp_path)]
        )
        assert code == 2

    def test_malformed_instance_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"alpha": "1/0", "jobs": []}', encoding="utf-8")
        assert main(["simulate", "--instance", str(bad), "--out", str(tmp_path)]) == 2
        bad.write_text('{"jobs": []}', encoding="utf-8")
        assert main(["simulate", "--instance", str(bad), "--out", str(tmp_path)]) == 2
        bad.write_text("not json", encoding="utf-8")
        assert main(["simulate", "--instance", str(bad), "--out", str(tmp_path)]) == 2

    def test_byte_identical_reruns(self, tmp_path, pair_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main(
                [
                    "simulate",
                    "--instance",
                    str(pair_path),
                    "--policy",
                    "alpha",
                    "--out",
                    str(out),
                ]
            )
            outs.append(
                tuple(read(out / f) for f in ("trace.csv", "events.csv", "metrics.json"))
            )
        assert outs[0] == outs[1]

    def test_quantum_cross_check(self, tmp_path, pair_path):
        out = tmp_path / "out"
        code = main(
            [
                "simulate",
                "--instance",
                str(pair_path),
                "--policy",
                "setf",
                "--out",
                str(out),
                "--quantum-oracle",
            ]
        )
        assert code == 0
        entry = json.loads(read(out / "metrics.json"))["quantum_check"]
        assert entry["ok"] is True


class TestCompareCommand:
    def test_table(self, tmp_path, pair_path):
        out = tmp_path / "cmp"
        assert main(["compare", "--instance", str(pair_path), "--out", str(out)]) == 0
        rows = read(out / "compare.csv").splitlines()
        assert rows[0] == "instance_id,policy,alpha,total_flow,ratio"
        table = {r.split(",")[1]: r.split(",") for r in rows[1:]}
        assert table["srpt"][0] == "pair" and table["srpt"][2] == "1/2"
        assert table["srpt"][4] == "1/1"
        assert table["setf"][4] == "4/3"
        assert table["alpha"][3] == "7/1"


class TestVerifyCommand:
    def test_clean_instance_passes(self, tmp_path, pair_path):
        out = tmp_path / "ver"
        code = main(["verify", "--instance", str(pair_path), "--out", str(out)])
        assert code == 0
        report = json.loads(read(out / "report.json"))
        assert report["ok"] is True

    @pytest.mark.parametrize("seed", [3, 4])  # alpha = 1/2 and 2/3 corpus picks
    def test_fuzz_instances_pass(self, tmp_path, seed):
        from conftest import corpus_instance

        inst = corpus_instance(seed)
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        assert main(["verify", "--instance", str(path)]) == 0

    def test_corrupted_trace_fails_and_round_trips(self, tmp_path, pair_path):
        sim_out = tmp_path / "sim"
        main(
            [
                "simulate",
                "--instance",
                str(pair_path),
                "--policy",
                "alpha",
                "--out",
                str(sim_out),
            ]
        )
        rows = read(sim_out / "trace.csv").replace("0/1,2/1,2,1/2", "0/1,2/1,2,1/4")
        bad = tmp_path / "bad-trace.csv"
        bad.write_text(rows, encoding="utf-8")
        out = tmp_path / "ver"
        code = main(
            [
                "verify",
                "--instance",
                str(pair_path),
                "--trace-override",
                str(bad),
                "--out",
                str(out),
            ]
        )
        assert code == 1
        assert (out / "counterexample-instance.json").exists()
        # the emitted counterexample reproduces the failure verbatim
        code2 = main(
            [
                "verify",
                "--instance",
                str(out / "counterexample-instance.json"),
                "--trace-override",
                str(out / "counterexample-trace.csv"),
            ]
        )
        assert code2 == 1


class TestLowerboundCommand:
    def test_lb1(self, tmp_path, capsys):
        out = tmp_path / "lb"
        code = main(
            ["lowerbound", "--which", "lb1", "--alpha", "1/2", "--k", "6", "--out", str(out)]
        )
        assert code == 0
        result = json.loads(read(out / "lowerbound.json"))
        assert result["delta_alg_ge1"] == 6
        assert (out / "realized-instance.json").exists()

    def test_lb2_with_tail(self, tmp_path):
        out = tmp_path / "lb"
        code = main(
            [
                "lowerbound",
                "--which",
                "lb2",
                "--alpha",
                "1/2",
                "--k",
                "2",
                "--dos-M",
                "50",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        result = json.loads(read(out / "lowerbound.json"))
        assert result["delta_alg_ge1"] == 4 and result["delta_opt"] == 2
        assert result["window_ratio_float"] > 1.0

    def test_rand_means(self, tmp_path):
        out = tmp_path / "lb"
        code = main(
            [
                "lowerbound",
                "--which",
                "rand",
                "--alpha",
                "7/8",
                "--seeds",
                "20",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        result = json.loads(read(out / "lowerbound.json"))
        assert result["k"] == 16 and result["measure_time"] == 24
        assert result["mean_delta_alg_ge1"] > result["mean_delta_opt"]

    def test_rand32(self, tmp_path):
        out = tmp_path / "lb"
        code = main(
            [
                "lowerbound",
                "--which",
                "rand32",
                "--alpha",
                "1/2",
                "--k",
                "3",
                "--seed",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        result = json.loads(read(out / "lowerbound.json"))
        assert result["delta_opt"] <= 3

    def test_bad_alpha_range_exits_2(self):
        assert main(["lowerbound", "--which", "rand", "--alpha", "1/4", "--seeds", "1"]) == 2


class TestSweepCommand:
    def test_grid_rows(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--grid",
                "0,1/2",
                "--fuzz",
                "4",
                "--seed",
                "2",
                "--out",
                str(out),
                "--workers",
                "2",
            ]
        )
        assert code == 0
        rows = read(out / "sweep.csv").splitlines()
        assert rows[0] == "alpha,max_alive_ratio,max_flow_ratio"
        assert rows[1].startswith("0/1,") and rows[1].endswith(",1/1")

    def test_alive_ratio_maxima_respect_bound(self, tmp_path):
        from alphasched.rational import parse_rat

        out = tmp_path / "sweep"
        code = main(
            [
                "sweep",
                "--grid",
                "1/2,2/3,3/4",
                "--fuzz",
                "12",
                "--seed",
                "7",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        for row in read(out / "sweep.csv").splitlines()[1:]:
            alpha, alive_ratio, _ = row.split(",")
            alpha, alive_ratio = parse_rat(alpha), parse_rat(alive_ratio)
            assert alive_ratio <= 4 + 2 / (1 - alpha)

    def test_non_integer_factor_rejected(self, tmp_path):
        assert (
            main(["sweep", "--grid", "1/3", "--fuzz", "1", "--out", str(tmp_path)]) == 2
        )

    def test_empty_corpus_header_only(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            ["sweep", "--grid", "1/2", "--fuzz", "0", "--seed", "1", "--out", str(out)]
        )
        assert code == 0
        rows = read(out / "sweep.csv").splitlines()
        assert rows == ["alpha,max_alive_ratio,max_flow_ratio"]

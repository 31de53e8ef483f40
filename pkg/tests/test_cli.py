import csv
import io
import json
import math

import numpy as np
import pytest

from crowdte import bench
from crowdte.bench import BenchConfig, IdentifiabilityError, cmd_bench, cmd_bounds, cmd_estimate, cmd_predict
from crowdte.cli import main
from crowdte.data import write_labels
from crowdte.estimator import TeState, estimate
from crowdte.simulate import InstanceSpec, generate_run


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _simulate(directory, *extra):
    directory.mkdir(exist_ok=True)
    labels, gold = directory / "labels.csv", directory / "gold.csv"
    code = main(["simulate", "--instance", "i", "--a", "0.9", "--n", "20", "--t", "2000", "--seed", "3",
                 "--output", str(labels), "--gold", str(gold), *extra])
    assert code == 0
    return labels, gold


class TestBench:
    def test_single_run_deterministic(self):
        cfg = BenchConfig(InstanceSpec("iii", n=12, t=500, b=1.0), runs=1, seed=7)
        a, b = cmd_bench(cfg), cmd_bench(cfg)
        assert a.algorithms == b.algorithms

    def test_parallel_matches_serial(self):
        spec = InstanceSpec("ii", n=15, t=800, a=0.7)
        serial = cmd_bench(BenchConfig(spec, runs=6, seed=2))
        parallel = cmd_bench(BenchConfig(spec, runs=6, seed=2, jobs=2))
        assert serial.rows() == parallel.rows()

    def test_standard_error_scaling(self):
        spec = InstanceSpec("i", n=20, t=1000, a=0.5)
        small = cmd_bench(BenchConfig(spec, runs=100, seed=0, algorithms=("te",))).algorithms["te"]
        large = cmd_bench(BenchConfig(spec, runs=400, seed=0, algorithms=("te",))).algorithms["te"]
        assert small.estimation_se / large.estimation_se == pytest.approx(2.0, rel=0.3)
        assert small.prediction_se / large.prediction_se == pytest.approx(2.0, rel=0.3)

    @pytest.mark.parametrize("spec", [
        InstanceSpec("i", n=20, t=500, a=0.6),
        InstanceSpec("ii", n=20, t=500, a=0.55),
        InstanceSpec("iii", n=20, t=500, b=2.0),
        InstanceSpec("explicit", t=500, explicit_theta=(0.8, -0.3, 0.1, 0.5, 0.0)),
    ])
    def test_oracle_beats_majority(self, spec):
        res = cmd_bench(BenchConfig(spec, runs=30, seed=1, algorithms=("majority", "oracle")))
        o, m = res.algorithms["oracle"], res.algorithms["majority"]
        assert o.prediction_error <= m.prediction_error + 2 * math.hypot(o.prediction_se, m.prediction_se)

    def test_errors_in_unit_interval(self):
        res = cmd_bench(BenchConfig(InstanceSpec("i", n=10, t=50, a=0.3), runs=5))
        for s in res.algorithms.values():
            assert 0 <= s.prediction_error <= 1 and s.prediction_se >= 0
        assert 0 <= res.algorithms["te"].estimation_error <= 2

    def test_reference_columns(self):
        res = cmd_bench(BenchConfig(InstanceSpec.published("iii", "sqrt-n"), runs=2, algorithms=("oracle",)))
        (row,) = res.rows()
        assert row["instance"] == "(iii) b=sqrt(n)" and row["reference_prediction_error"] == "0.1260"
        off_table = cmd_bench(BenchConfig(InstanceSpec("i", n=10, t=50), runs=2)).rows()
        assert all(r["reference_prediction_error"] == "" for r in off_table)

    def test_bad_config(self):
        with pytest.raises(ValueError):
            BenchConfig(InstanceSpec("i"), runs=0)
        with pytest.raises(ValueError):
            BenchConfig(InstanceSpec("i"), algorithms=("spectral",))


class TestEstimatePredict:
    def test_serialized_run_matches_in_process(self, tmp_path):
        spec = InstanceSpec("i", n=20, t=2000, a=0.9)
        run = generate_run(spec, 3)
        write_labels(tmp_path / "l.csv", run.answers)
        rows = cmd_estimate(tmp_path / "l.csv")
        in_process = estimate(TeState.from_answers(run.answers)).theta_hat
        np.testing.assert_array_equal([float(r["theta_hat"]) for r in rows], in_process)
        assert sum(r["k_star"] for r in rows) == 1

    def test_snapshot_written(self, tmp_path):
        labels, _ = _simulate(tmp_path)
        assert main(["estimate", str(labels), "--snapshot", str(tmp_path / "s.csv"),
                     "--output", str(tmp_path / "e.csv")]) == 0
        assert (tmp_path / "s.csv").read_text().startswith("crowdte-te-state,1,20,")

    def test_two_workers_not_identifiable(self, tmp_path):
        write_labels(tmp_path / "l.csv", np.ones((30, 2), dtype=int))
        with pytest.raises(IdentifiabilityError, match="at least 3"):
            cmd_estimate(tmp_path / "l.csv")
        assert main(["estimate", str(tmp_path / "l.csv")]) == 1

    def test_empty_file(self, tmp_path, capsys):
        (tmp_path / "l.csv").write_text("")
        assert main(["estimate", str(tmp_path / "l.csv")]) == 1
        assert "l.csv:1:" in capsys.readouterr().err

    def test_predict_with_gold(self, tmp_path):
        labels, gold = _simulate(tmp_path)
        report = cmd_predict(labels, gold)
        assert report.te_error <= report.majority_error
        assert report.gold_tasks == len(report.rows)

    def test_predict_without_gold(self, tmp_path, capsys):
        labels, _ = _simulate(tmp_path)
        assert main(["predict", str(labels)]) == 0
        out, err = capsys.readouterr()
        assert "gold" not in _rows(out)[0]
        assert "te_error" not in json.loads(err)

    def test_unlabeled_tasks_are_flagged(self, tmp_path):
        answers = np.ones((40, 4), dtype=int)
        answers[:, 3] = 0
        answers[0] = [0, 0, 0, 1]  # only the filtered-out worker labels task 0
        write_labels(tmp_path / "l.csv", answers)
        report = cmd_predict(tmp_path / "l.csv", min_worker_labels=10)
        assert report.rows[0]["te_tie"] == 1 and report.rows[0]["majority_tie"] == 1
        assert report.tied_tasks == 1

    def test_gold_mismatch_exit(self, tmp_path, capsys):
        labels, gold = _simulate(tmp_path)
        with open(gold, "a") as fh:
            fh.write("ghost,1\n")
        assert main(["predict", str(labels), "--gold", str(gold)]) == 1
        assert "ghost" in capsys.readouterr().err


class TestBounds:
    def test_default_lemma1_passes(self):
        rows, code = cmd_bounds(("lemma1",))
        assert code == 0 and all(r["satisfied"] for r in rows)

    def test_quarter_delta_row(self):
        rows, _ = cmd_bounds(("thresholds",))
        quarter = [r for r in rows if r["delta"] == 0.25]
        assert quarter and all(r["T1"] == 0.0 for r in quarter)

    def test_corrupted_constant(self, capsys):
        assert main(["bounds", "--sweeps", "lemma1", "--set-constant", "kl_abs_factor=5.12"]) == 2
        assert "violated" in capsys.readouterr().err

    def test_known_false_chernoff_form(self):
        _, code = cmd_bounds(("chernoff-kl",))
        assert code == 2

    def test_bad_sweep_and_constant(self):
        assert main(["bounds", "--sweeps", "nope"]) == 1
        assert main(["bounds", "--sweeps", "lemma1", "--set-constant", "bogus=1"]) == 1
        assert main(["bounds", "--set-constant", "kl_abs_factor"]) == 1


class TestCommandLine:
    def test_usage_errors_exit_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--no-such-flag"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_invalid_instance(self):
        assert main(["bench", "--instance", "iii", "--n", "4"]) == 1
        assert main(["bench", "--instance", "explicit"]) == 1

    def test_byte_identical_outputs(self, tmp_path):
        args = ["bench", "--instance", "ii", "--a", "0.8", "--n", "10", "--t", "300", "--runs", "3", "--seed", "9"]
        assert main(args + ["--output", str(tmp_path / "a.csv")]) == 0
        assert main(args + ["--output", str(tmp_path / "b.csv"), "--jobs", "2"]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        _simulate(tmp_path / "x")
        _simulate(tmp_path / "y")
        for name in ("labels.csv", "gold.csv"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_config_file_and_markdown(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"instance": "iii", "b": "sqrt-n", "n": 9, "t": 200, "runs": 2,
                                   "algorithms": "oracle", "format": "markdown"}))
        assert main(["--config", str(cfg), "bench", "--runs", "3"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("| instance |") and "(iii) b=sqrt(n) | oracle | 3 |" in out

    def test_explicit_theta_and_theta_output(self, tmp_path):
        code = main(["simulate", "--instance", "explicit", "--theta", "0.9,0.5,-0.2", "--t", "50",
                     "--output", str(tmp_path / "l.csv"), "--theta-output", str(tmp_path / "th.csv")])
        assert code == 0
        thetas = sorted(float(r["theta"]) for r in _rows((tmp_path / "th.csv").read_text()))
        assert thetas == [-0.2, 0.5, 0.9]

    def test_labels_config(self, tmp_path):
        (tmp_path / "l.csv").write_text("task,worker,label\n" + "".join(
            f"{t},{w},{5 if (t + w) % 3 else 1}\n" for t in range(12) for w in range(3)))
        (tmp_path / "c.json").write_text('{"positive": ["4", "5"], "negative": ["1", "2", "3"]}')
        assert main(["estimate", str(tmp_path / "l.csv"), "--labels-config", str(tmp_path / "c.json"),
                     "--output", str(tmp_path / "o.csv")]) == 0
        assert main(["estimate", str(tmp_path / "l.csv"), "--output", str(tmp_path / "o.csv")]) == 1

    def test_reference_tables_cover_rows(self):
        for kind, value in bench.REFERENCE_ROWS:
            assert bench.reference_key(InstanceSpec.published(kind, value)) in bench.REFERENCE_PREDICTION

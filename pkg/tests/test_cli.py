import csv
import json

import numpy as np
import pytest

from neurobilevel.cli import (EXIT_CONFIG, EXIT_GUARD, EXIT_INFEASIBLE, EXIT_OK, main, parse_config,
                              replication_seeds)
from neurobilevel.driver import ConfigError
from neurobilevel.instance import BilevelInstance, generate_instance, load_instance, save_instance, validate_instance
from neurobilevel.oracle import brute_force_bilevel
from neurobilevel.sampler import SamplePool

FAST = ["--n-samples", "8", "--n-updates", "2", "--epochs", "60", "--no-timings"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def inst_path(tmp_path):
    path = tmp_path / "inst.json"
    save_instance(generate_instance(6, 6, "Continuous", 2), path)
    return path


class TestConfig:
    def test_defaults(self):
        cfg = parse_config()
        s = cfg.solver
        assert (s.n_samples, s.epochs, s.lr, s.decay, s.n_iterations) == (1000, 1000, 1e-3, 1e-3, 1)
        assert cfg.replications == 1

    def test_cuts_with_gnn_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(overrides={"mode": "cuts", "kind": "gnn"})

    def test_unknown_keys(self, tmp_path):
        for doc in ({"solver": {"epoch": 3}}, {"solvers": {}}, {"bench": {"kind": ["GNN"]}}):
            path = tmp_path / "cfg.json"
            path.write_text(json.dumps(doc))
            with pytest.raises(ConfigError):
                parse_config(path)
        with pytest.raises(ConfigError):
            parse_config(overrides={"learning_rate": 0.1})

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"solver": {"epochs": 5, "lr": 0.01}, "seed": 3, "replications": 2}))
        cfg = parse_config(path, {"epochs": 7, "seed": None})
        assert cfg.solver.epochs == 7 and cfg.solver.lr == 0.01
        assert cfg.seed == 3 and cfg.solver.seed == 3 and cfg.replications == 2

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{\n  \"seed\": ,\n}")
        with pytest.raises(ConfigError, match="line 2"):
            parse_config(path)

    def test_replication_seeds(self):
        a = replication_seeds(42, 5)
        assert a == replication_seeds(42, 5) and len(set(a)) == 5
        assert replication_seeds(42, 3) == a[:3]

    def test_invalid_replications(self):
        with pytest.raises(ConfigError):
            parse_config(overrides={"replications": 0})


class TestCommands:
    def test_generate(self, tmp_path):
        out = tmp_path / "inst.json"
        assert main(["generate", "--n", "10", "--m", "20", "--kind", "milp", "--seed", "1", "-o", str(out)]) == EXIT_OK
        inst = load_instance(out)
        assert validate_instance(inst) == [] and inst.integer_lower and (inst.n, inst.m) == (10, 20)
        assert inst == generate_instance(10, 20, "Integer", 1)

    def test_oracle(self, inst_path, tmp_path):
        out = tmp_path / "oracle"
        assert main(["oracle", str(inst_path), "-o", str(out)]) == EXIT_OK
        doc = json.loads((out / "oracle.json").read_text())
        assert doc["f"] == brute_force_bilevel(load_instance(inst_path)).f
        rows = read_csv(out / "oracle_audit.csv")
        assert len(rows) == 64 and set(rows[0]) == {"x", "feasible", "phi", "best_f"}

    def test_solve_files_and_determinism(self, inst_path, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            argv = ["solve", str(inst_path), "--kind", "isnn", "--mode", "cuts", "--seed", "42", "-o", str(out)]
            assert main(argv + FAST) == EXIT_OK
        for name in ("rep-00/report.json", "rep-00/iterations.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        configs = [json.loads((o / "config.json").read_text()) for o in outs]
        for c in configs:
            c.pop("output")
        assert configs[0] == configs[1]
        report = json.loads((outs[0] / "rep-00/report.json").read_text())
        assert report["config"]["kind"] == "ISNN" and report["config"]["mode"] == "cuts"
        assert len(read_csv(outs[0] / "rep-00/iterations.csv")) == 2

    def test_bench_single_replication(self, inst_path, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            argv = ["bench", str(inst_path), "--kinds", "GNN", "ISNN", "--iterations", "1", "2", "-o", str(out)]
            assert main(argv + FAST) == EXIT_OK
        agg = read_csv(outs[0] / "aggregate.csv")
        assert len(agg) == 4
        for row in agg:
            assert row["benchmark"] == "oracle" and row["replications"] == "1"
            assert row["avg_gap"] == row["min_gap"] == row["max_gap"]
            assert float(row["min_gap"]) >= 0.0
        for name in ("aggregate.csv", "rep-00/bench.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_bench_without_oracle(self, inst_path, tmp_path):
        out = tmp_path / "b"
        argv = ["bench", str(inst_path), "--kinds", "ISNN", "--no-oracle", "--replications", "2", "-o", str(out)]
        assert main(argv + FAST) == EXIT_OK
        rows = read_csv(out / "rep-00/bench.csv") + read_csv(out / "rep-01/bench.csv")
        assert all(r["benchmark"] == "best-known" for r in rows)
        assert min(float(r["gap"]) for r in rows) == 0.0

    def test_bench_exact_fit_has_zero_gap(self, tmp_path):
        path = tmp_path / "inst.json"
        save_instance(generate_instance(10, 20, "Continuous", 1), path)
        out = tmp_path / "exact"
        argv = ["bench", str(path), "--kinds", "ISNN", "--mode", "cuts", "--sampling", "enumerate", "--fit", "exact",
                "--replications", "10", "--no-timings", "-o", str(out)]
        assert main(argv) == EXIT_OK
        (row,) = read_csv(out / "aggregate.csv")
        assert row["replications"] == "10"
        assert abs(float(row["avg_gap"])) <= 1e-6 and abs(float(row["max_gap"])) <= 1e-6

    def test_sample_stats(self, inst_path, tmp_path):
        out = tmp_path / "zero"
        argv = ["sample-stats", str(inst_path), "--time-budget", "0", "-o", str(out)]
        assert main(argv) == EXIT_OK
        rows = read_csv(out / "sampling.csv")
        assert {r["strategy"] for r in rows} == {"enhanced", "random"}
        assert all(r["samples"] == "0" for r in rows)

        out = tmp_path / "some"
        argv = ["sample-stats", str(inst_path), "--time-budget", "5", "--n-samples", "6", "--attempt-limit", "300",
                "-o", str(out)]
        assert main(argv) == EXIT_OK
        inst = load_instance(inst_path)
        for row in read_csv(out / "sampling.csv"):
            pool = SamplePool.load(out / "pools" / f"{row['instance']}-{row['strategy']}.json")
            assert int(row["samples"]) == len(pool)
            for rec in pool:
                assert inst.upper_feasible(rec.x)
                assert np.all(inst.B2 @ rec.y_star <= inst.b2 - inst.A2 @ np.array(rec.x) + 1e-7)


class TestExitCodes:
    def test_config_error(self, inst_path, tmp_path, capsys):
        assert main(["solve", str(inst_path), "--mode", "cuts", "--kind", "gnn", "-o", str(tmp_path)]) == EXIT_CONFIG
        assert "cuts" in capsys.readouterr().err
        assert not (tmp_path / "config.json").exists()

    def test_bad_instance_and_usage(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"n\": 2}")
        assert main(["oracle", str(bad)]) == EXIT_CONFIG
        assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_CONFIG
        assert main(["solve"]) == EXIT_CONFIG
        assert main(["frobnicate"]) == EXIT_CONFIG

    def test_infeasible(self, tmp_path):
        inst = BilevelInstance(n=2, m=1, c=[0.0, 0.0], d1=[0.0], d2=[1.0], A1=np.zeros((2, 2)), b1=[1.0, 1.0],
                               A2=np.zeros((1, 2)), B2=[[1.0]], b2=[-1.0], y_upper=[1.0])
        path = tmp_path / "inf.json"
        save_instance(inst, path)
        assert main(["oracle", str(path), "-o", str(tmp_path / "o")]) == EXIT_INFEASIBLE
        assert main(["solve", str(path), "-o", str(tmp_path / "s")] + FAST) == EXIT_INFEASIBLE

    def test_guard(self, tmp_path):
        path = tmp_path / "big.json"
        save_instance(generate_instance(21, 3, "Continuous", 0), path)
        assert main(["oracle", str(path), "-o", str(tmp_path / "o")]) == EXIT_GUARD

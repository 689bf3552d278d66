import csv
import json

import numpy as np
import pytest
import yaml

from gpselect.cli import main
from gpselect.harness import ConfigError, compare, load_config, run

BASE = {
    "dataset": {"synth": {"n": 50, "d": 2}, "noise_bound": 0.1},
    "kernel": {"variant": "rbf", "bandwidth": 0.2},
    "beta": {"mode": "constant", "value": 2.0},
    "budget": 20,
    "checkpoints": [5, 10, 20],
    "seeds": [0, 1, 2],
    "policies": ["random", "gp_select"],
}


def write_config(tmp_path, **changes):
    data = {**BASE, **changes, "output": str(tmp_path / "out")}
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_override(self, tmp_path):
        cfg = load_config(write_config(tmp_path), ["budget=7", "kernel.bandwidth=0.5", "checkpoints=[7]"])
        assert cfg.budget == 7 and cfg.kernel.bandwidth == 0.5

    @pytest.mark.parametrize("override,field", [
        ("budget=-1", "budget"),
        ("kernel.variant=poly", "kernel"),
        ("policies=[{name: gp_select, rule: nope}]", "policies[0].rule"),
        ("checkpoints=[30]", "checkpoints"),
        ("lazy=sometimes", "lazy"),
        ("policies=[{name: gp_select, rule: diverse}]", "sigma_n"),
        ("beta.mode=scaled", "beta"),
    ])
    def test_errors_name_field(self, tmp_path, override, field):
        extra = ["beta.scale=2"] if field == "beta" else []
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path), [override] + extra)
        assert err.value.field == field


class TestRun:
    def test_artifact_counts(self, tmp_path):
        out = run(load_config(write_config(tmp_path)))
        traces = sorted(p.name for p in (out / "traces").iterdir())
        assert len(traces) == 6
        rows = read_csv(out / "regret.csv")
        assert len(rows) == 6 * 3
        for name in ("timing.csv", "summary.json", "manifest.json"):
            assert (out / name).exists()

    def test_regret_csv_deterministic(self, tmp_path):
        cfg = write_config(tmp_path)
        a = run(load_config(cfg, ["output=" + str(tmp_path / "a")]))
        b = run(load_config(cfg, ["output=" + str(tmp_path / "b")]))
        assert (a / "regret.csv").read_bytes() == (b / "regret.csv").read_bytes()

    def test_lazy_both_same_sequences(self, tmp_path):
        policies = ["gp_select", {"name": "gp_select", "rule": "cost"}, "pure_exploit",
                    {"name": "gp_select", "rule": "diverse", "lambda": 0.5}]
        cfg = write_config(tmp_path, lazy="both", sigma_n=0.2, policies=policies,
                           dataset={"synth": {"n": 80, "d": 2, "cost_range": [0.5, 2]}, "noise_bound": 0.1})
        out = run(load_config(cfg))
        for lazy in (out / "traces").glob("*__lazy.jsonl"):
            naive = lazy.with_name(lazy.name.replace("__lazy", "__naive"))
            items = lambda p: [json.loads(line)["item"] for line in p.read_text().splitlines()]
            assert items(lazy) == items(naive)
        rows = read_csv(out / "regret.csv")
        by_key = {}
        for r in rows:
            by_key.setdefault((r["policy"], r["seed"], r["B"]), set()).add(r["F_S"])
        assert all(len(v) == 1 for v in by_key.values())

    def test_trace_self_consistency(self, tmp_path):
        out = run(load_config(write_config(tmp_path)))
        for p in (out / "traces").iterdir():
            rounds = [json.loads(line) for line in p.read_text().splitlines()]
            np.testing.assert_allclose([r["cum_cost"] for r in rounds], np.cumsum([r["cost"] for r in rounds]))
            np.testing.assert_allclose([r["cum_value"] for r in rounds], np.cumsum([r["value"] for r in rounds]))

    def test_dataset_from_file(self, tmp_path):
        from gpselect.items import save_itemset, synth_gp_itemset
        from gpselect.kernels import KernelSpec
        items, oracle = synth_gp_itemset(30, 2, KernelSpec("rbf", 0.2), 0.1, seed=1)
        save_itemset(tmp_path / "items.csv", items, oracle.true_values)
        cfg = write_config(tmp_path, dataset={"path": str(tmp_path / "items.csv"), "noise_bound": 0.1},
                           budget=5, checkpoints=[5], seeds=[0])
        out = run(load_config(cfg))
        assert len(list((out / "traces").iterdir())) == 2


class TestCompare:
    GRID = [0, 0.5, 0.75, 0.875, 0.9375, 0.96875]

    def test_lambda_grid(self, tmp_path):
        policies = [{"name": "gp_select", "rule": "diverse", "lambda": lam} for lam in self.GRID]
        cfg = write_config(tmp_path, sigma_n=0.2, policies=policies, seeds=[0],
                           dataset={"synth": {"n": 60, "d": 2, "seed": 3}, "noise_bound": 0.1})
        out = run(load_config(cfg))
        table = compare([out], tmp_path / "table.csv")
        gp = [r for r in table if r["policy"] != "greedy"]
        assert [r["lambda"] for r in gp] == self.GRID
        assert sum(r["policy"] == "greedy" for r in table) == len(self.GRID)
        assert len(read_csv(tmp_path / "table.csv")) == len(table)

    def test_lambda_one_most_diverse(self, tmp_path):
        policies = [{"name": "gp_select", "rule": "diverse", "lambda": lam} for lam in (0.0, 0.5, 1.0)]
        cfg = write_config(tmp_path, sigma_n=0.2, policies=policies, seeds=[0],
                           dataset={"synth": {"n": 60, "d": 2, "seed": 3}, "noise_bound": 0.1})
        table = compare([run(load_config(cfg))])
        gp = {r["lambda"]: r["diversity"] for r in table if r["policy"] != "greedy"}
        assert gp[1.0] >= max(gp.values())

    def test_single_lambda_zero_has_diversity(self, tmp_path):
        cfg = write_config(tmp_path, sigma_n=0.2, policies=["gp_select"], seeds=[0])
        table = compare([run(load_config(cfg))])
        assert table[0]["diversity"] is not None and table[0]["diversity"] > 0

    def test_hash_mismatch(self, tmp_path):
        a = run(load_config(write_config(tmp_path), ["output=" + str(tmp_path / "a"), "seeds=[0]"]))
        b = run(load_config(write_config(tmp_path), ["output=" + str(tmp_path / "b"), "seeds=[1]"]))
        with pytest.raises(ValueError):
            compare([a, b])


class TestCli:
    def test_run_and_compare(self, tmp_path, capsys):
        cfg = write_config(tmp_path, sigma_n=0.2)
        assert main(["run", "--config", str(cfg), "--lazy", "both", "--out", str(tmp_path / "r")]) == 0
        assert len(list((tmp_path / "r" / "traces").iterdir())) == 9
        assert main(["compare", "--inputs", str(tmp_path / "r"), "--out", str(tmp_path / "t.csv")]) == 0

    def test_config_error_exit_code(self, tmp_path, capsys):
        assert main(["run", "--config", str(write_config(tmp_path)), "--override", "budget=0"]) == 2
        assert "budget" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1

"""Experiment runner: config files, seeded runs and on-disk reports.

A run directory contains

* ``traces/<policy>__seed<k>__<variant>.jsonl`` - one JSON object per round
* ``regret.csv``   - regret at every checkpoint for every run
* ``timing.csv``   - lazy vs naive cost (median over seeds)
* ``summary.json`` - final value/diversity per run plus greedy references
* ``manifest.json``- resolved config and its hash

Everything except the timing columns is a deterministic function of the
config.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import os
import statistics
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .diversity import diversity_value
from .items import FeedbackOracle, ItemSet, load_itemset, synth_gp_itemset
from .kernels import GramMatrix, KernelSpec, information_constant
from .oracles import (
    exhaustive_combined_opt,
    greedy_oracle,
    greedy_references,
    regret_curve,
    value_references,
)
from .policies import BASELINES, RULES, BetaSchedule, PolicyConfig, run_baseline, run_gp_select

log = logging.getLogger(__name__)

DENSE_LIMIT = 5000


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


DEFAULTS: dict[str, Any] = {
    "dataset": {},
    "kernel": {"variant": "rbf", "bandwidth": 1.0},
    "noise": None,
    "sigma_n": None,
    "lambda": 0.0,
    "beta": {"mode": "constant", "value": 1.0},
    "budget": None,
    "budget_unit": "items",
    "checkpoints": None,
    "seeds": [0],
    "lazy": "on",
    "failsafe_threshold": None,
    "resolution": 1.0,
    "policies": ["gp_select"],
    "output": "runs/out",
}


@dataclass
class PolicySpec:
    name: str
    label: str
    rule: str = "uniform"
    lam: float = 0.0
    fraction: float = 0.2

    @property
    def is_gp_select(self):
        return self.name == "gp_select"


@dataclass
class ExperimentConfig:
    raw: dict
    kernel: KernelSpec
    policies: list
    beta: BetaSchedule
    budget: float
    checkpoints: list
    seeds: list
    lazy: str
    output: Path
    noise: Optional[float] = None
    sigma_n: Optional[float] = None
    failsafe_threshold: Optional[int] = None
    budget_unit: str = "items"
    resolution: float = 1.0
    dataset: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, value = assignment.split("=", 1)
    node = raw
    parts = key.strip().split(".")
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = node[p] = {}
        node = nxt
    node[parts[-1]] = yaml.safe_load(value)
    return raw


def load_config(path=None, overrides=(), data: Optional[dict] = None) -> ExperimentConfig:
    if data is None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    raw = _merge(DEFAULTS, data)
    for item in overrides:
        apply_override(raw, item)
    return parse_config(raw)


def _policy(entry, index, default_lam) -> PolicySpec:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"policies[{index}]", "expected a name or a mapping with 'name'")
    name = entry["name"]
    if name != "gp_select" and name not in BASELINES:
        raise ConfigError(f"policies[{index}].name", f"unknown policy {name!r}")
    rule = entry.get("rule", "uniform")
    if rule not in RULES:
        raise ConfigError(f"policies[{index}].rule", f"unknown rule {rule!r}")
    lam = float(entry.get("lambda", default_lam if rule.startswith("diverse") else 0.0))
    if not 0 <= lam <= 1:
        raise ConfigError(f"policies[{index}].lambda", "must lie in [0, 1]")
    fraction = float(entry.get("fraction", 0.2))
    if name == "epsilon_first" and not 0 < fraction < 1:
        raise ConfigError(f"policies[{index}].fraction", "must lie in (0, 1)")
    if "label" in entry:
        label = str(entry["label"])
    elif name == "gp_select":
        label = f"gp_select-{rule}" + (f"-lam{lam:g}" if rule.startswith("diverse") else "")
    elif name == "epsilon_first":
        label = f"epsilon_first-{fraction:g}"
    else:
        label = name
    return PolicySpec(name, label, rule, lam, fraction)


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        kernel = KernelSpec.from_dict(raw["kernel"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("kernel", str(exc)) from exc
    try:
        beta = BetaSchedule(**raw["beta"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("beta", str(exc)) from exc
    budget = raw.get("budget")
    if budget is None or not float(budget) > 0:
        raise ConfigError("budget", "a positive budget is required")
    budget = float(budget)
    checkpoints = raw.get("checkpoints") or [budget]
    checkpoints = [float(c) for c in checkpoints]
    if checkpoints != sorted(checkpoints) or checkpoints[-1] > budget or checkpoints[0] <= 0:
        raise ConfigError("checkpoints", "must be positive, ascending and <= budget")
    seeds = raw.get("seeds")
    if not seeds:
        raise ConfigError("seeds", "at least one seed is required")
    seeds = [int(s) for s in seeds]
    lazy = raw.get("lazy")
    lazy = {True: "on", False: "off"}.get(lazy, lazy)
    if lazy not in ("on", "off", "both"):
        raise ConfigError("lazy", "must be on, off or both")
    policies = raw.get("policies") or []
    if not policies:
        raise ConfigError("policies", "at least one policy is required")
    default_lam = float(raw.get("lambda") or 0.0)
    specs = [_policy(p, i, default_lam) for i, p in enumerate(policies)]
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ConfigError("policies", f"duplicate policy labels {labels}")
    sigma_n = raw.get("sigma_n")
    if any(s.is_gp_select and s.rule.startswith("diverse") for s in specs) and not sigma_n:
        raise ConfigError("sigma_n", "diverse rules need sigma_n")
    if raw.get("budget_unit") not in ("items", "cost"):
        raise ConfigError("budget_unit", "must be items or cost")
    dataset = raw.get("dataset") or {}
    if not ("synth" in dataset or "path" in dataset):
        raise ConfigError("dataset", "needs either 'synth' or 'path'")
    noise = raw.get("noise")
    if noise is None:
        noise = dataset.get("noise_bound")
    if noise is None or not float(noise) > 0:
        raise ConfigError("noise", "a positive GP noise scale is required")
    threshold = raw.get("failsafe_threshold")
    if threshold is not None and int(threshold) < 1:
        raise ConfigError("failsafe_threshold", "must be a positive integer")
    resolution = float(raw.get("resolution") or 1.0)
    if not resolution > 0:
        raise ConfigError("resolution", "must be positive")
    return ExperimentConfig(
        raw=raw, kernel=kernel, policies=specs, beta=beta, budget=budget,
        checkpoints=checkpoints, seeds=seeds, lazy=lazy, output=Path(raw["output"]),
        noise=float(noise), sigma_n=None if sigma_n is None else float(sigma_n),
        failsafe_threshold=None if threshold is None else int(threshold),
        budget_unit=raw["budget_unit"], resolution=resolution, dataset=dataset,
    )


# ---------------------------------------------------------------------------


def make_instance(cfg: ExperimentConfig, seed: int):
    ds = cfg.dataset
    noise_bound = float(ds.get("noise_bound", cfg.noise))
    if "path" in ds:
        items, oracle = load_itemset(ds["path"], ds.get("format"), noise_bound=noise_bound)
        if oracle is None:
            raise ConfigError("dataset.path", "item file needs a value column for simulation")
        return items, oracle
    synth = dict(ds["synth"])
    kernel = KernelSpec.from_dict(synth.pop("kernel")) if "kernel" in synth else cfg.kernel
    instance_seed = synth.pop("seed", seed)
    try:
        return synth_gp_itemset(
            int(synth.pop("n")), int(synth.pop("d")), kernel, noise_bound,
            cost_range=tuple(synth.pop("cost_range", (1.0, 1.0))), seed=int(instance_seed),
            method=synth.pop("method", "auto"),
        )
    except KeyError as exc:
        raise ConfigError(f"dataset.synth.{exc.args[0]}", "missing") from exc


def _stream_seed(seed: int, label: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(label.encode())]).generate_state(1)[0])


def _variants(cfg, spec):
    if not spec.is_gp_select and spec.name == "random":
        return ["lazy"] if cfg.lazy != "off" else ["naive"]
    return {"on": ["lazy"], "off": ["naive"], "both": ["lazy", "naive"]}[cfg.lazy]


def run_policy(spec: PolicySpec, cfg: ExperimentConfig, items: ItemSet, oracle: FeedbackOracle,
               gram: GramMatrix, seed: int, lazy: bool, info_constant=None):
    oracle.reseed(_stream_seed(seed, spec.label))
    if spec.is_gp_select:
        pc = PolicyConfig(
            rule=spec.rule, budget=cfg.budget, beta=cfg.beta, lam=spec.lam,
            sigma_n=cfg.sigma_n, noise=cfg.noise, lazy=lazy,
            failsafe_threshold=cfg.failsafe_threshold,
        )
        return run_gp_select(items, oracle, cfg.kernel, pc, gram=gram,
                             info_constant=info_constant, label=spec.label)
    return run_baseline(
        items, oracle, cfg.kernel, spec.name, cfg.budget, fraction=spec.fraction,
        noise=cfg.noise, seed=_stream_seed(seed, spec.label + "/policy"),
        cost_aware=cfg.budget_unit == "cost", lazy=lazy,
        failsafe_threshold=cfg.failsafe_threshold, gram=gram, label=spec.label,
    )


def charged_costs(spec: PolicySpec, cfg: ExperimentConfig, items: ItemSet):
    if spec.is_gp_select:
        return items.costs if spec.rule in ("cost", "diverse_cost") else None
    return items.costs if cfg.budget_unit == "cost" else None


def regret_mode(spec: PolicySpec) -> str:
    if spec.is_gp_select and spec.rule != "uniform":
        return "greedy_relative_regret"
    return "value_regret"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return "" if x is None else repr(float(x))


def run(cfg: ExperimentConfig) -> Path:
    """Execute every (policy, seed, variant) and write the reports."""
    out = cfg.output
    (out / "traces").mkdir(parents=True, exist_ok=True)
    regret_rows, timing, records, greedy_rows, instance_hashes = [], {}, [], [], []
    instance_cache = {}
    for seed in cfg.seeds:
        fixed = "path" in cfg.dataset or "seed" in cfg.dataset.get("synth", {})
        key = "fixed" if fixed else seed
        if key not in instance_cache:
            instance_cache[key] = make_instance(cfg, seed)
        items, oracle = instance_cache[key]
        instance_hashes.append(items.digest() + hashlib.sha256(oracle.true_values.tobytes()).hexdigest())
        gram = GramMatrix(cfg.kernel, items.features)
        if items.n <= DENSE_LIMIT:
            gram.entries
        f = oracle.true_values
        info_constant = None
        if cfg.beta.needs_info_constant:
            info_constant = information_constant(gram, cfg.noise)
        ref_cache = {}
        for spec in cfg.policies:
            costs = charged_costs(spec, cfg, items)
            mode = regret_mode(spec)
            ref_key = (mode, costs is None, spec.lam)
            if ref_key not in ref_cache:
                ref_cache[ref_key] = _references(cfg, spec, mode, f, gram, costs)
            for variant in _variants(cfg, spec):
                trace = run_policy(spec, cfg, items, oracle, gram, seed, variant == "lazy", info_constant)
                name = f"{spec.label}__seed{seed}__{variant}.jsonl"
                trace.to_jsonl(out / "traces" / name)
                report = regret_curve(trace, mode, ref_cache[ref_key], f=f, gram=gram,
                                      lam=spec.lam if spec.is_gp_select else 0.0, sigma_n=cfg.sigma_n)
                for r in report.rows:
                    regret_rows.append([spec.label, variant, seed, mode, _fmt(r.B), _fmt(r.F_S),
                                        _fmt(r.oracle), _fmt(r.R_B), _fmt(r.avg_regret),
                                        _fmt(r.R_B_half)])
                rounds = trace.rounds[1:]  # first round is warm-up
                timing.setdefault((spec.label, variant), []).append((
                    trace.recomputations,
                    sum(r.seconds for r in rounds),
                ))
                S = trace.selected
                records.append({
                    "policy": spec.label, "variant": variant, "seed": seed,
                    "rule": spec.rule if spec.is_gp_select else spec.name,
                    "lambda": spec.lam if spec.is_gp_select else 0.0,
                    "value": float(f[S].sum()) if S else 0.0,
                    "diversity": diversity_value(gram, S, cfg.sigma_n) if cfg.sigma_n else None,
                    "cost": trace.cum_cost, "selected": S,
                })
        if cfg.sigma_n:
            lams = sorted({s.lam for s in cfg.policies if s.is_gp_select})
            for lam in lams:
                S = greedy_oracle(f, gram, lam, cfg.sigma_n, None, cfg.budget)
                greedy_rows.append({
                    "seed": seed, "lambda": lam, "value": float(f[S].sum()),
                    "diversity": diversity_value(gram, S, cfg.sigma_n),
                })
    dataset_hash = hashlib.sha256("".join(instance_hashes).encode()).hexdigest()
    _atomic_write(out / "regret.csv", _csv_text(
        ["policy", "variant", "seed", "mode", "B", "F_S", "oracle", "R_B", "avg_regret", "R_B_half"], regret_rows))
    trows = []
    for (label, variant), vals in timing.items():
        updates = statistics.median(v[0] for v in vals)
        wall = statistics.median(v[1] for v in vals)
        per_update = statistics.median(v[1] / v[0] if v[0] else 0.0 for v in vals)
        trows.append([label, variant, len(vals), updates, repr(per_update), repr(wall)])
    _atomic_write(out / "timing.csv", _csv_text(
        ["policy", "variant", "seeds", "updates", "seconds_per_update", "wall_seconds"], trows))
    summary = {"dataset_hash": dataset_hash, "sigma_n": cfg.sigma_n, "budget": cfg.budget,
               "runs": records, "greedy": greedy_rows}
    _atomic_write(out / "summary.json", json.dumps(summary, indent=1))
    manifest = {"config": cfg.raw, "config_hash": cfg.digest, "version": __version__,
                "dataset_hash": dataset_hash}
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True, default=str))
    log.info("wrote %s", out)
    return out


def _references(cfg, spec, mode, f, gram, costs):
    if mode == "value_regret":
        return value_references(f, costs, cfg.checkpoints, cfg.resolution)
    lam = spec.lam
    if f.size <= 12:
        return {B: exhaustive_combined_opt(f, gram, lam, cfg.sigma_n, costs, B)[1]
                for B in cfg.checkpoints}
    return greedy_references(f, gram, cfg.checkpoints, lam, cfg.sigma_n, costs)


# ---------------------------------------------------------------------------


def _load_summary(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    return json.loads(path.read_text())


def compare(inputs, out=None) -> list:
    """Value/diversity table across runs that share a dataset.

    One row per (policy, lambda) with seed means, followed by the greedy
    references computed with the true utility.
    """
    summaries = [_load_summary(p) for p in inputs]
    if not summaries:
        raise ValueError("no inputs")
    hashes = {s["dataset_hash"] for s in summaries}
    if len(hashes) != 1:
        raise ValueError("inputs were produced on different datasets")
    groups, greedy = {}, {}
    for s in summaries:
        for r in s["runs"]:
            if r["variant"] == "naive" and any(
                q["policy"] == r["policy"] and q["variant"] == "lazy" for q in s["runs"]
            ):
                continue
            groups.setdefault((r["policy"], r["lambda"]), []).append(r)
        for g in s["greedy"]:
            greedy.setdefault(g["lambda"], {})[g["seed"]] = g

    def mean(rows, key):
        vals = [r[key] for r in rows if r[key] is not None]
        return float(np.mean(vals)) if vals else None

    table = []
    for (policy, lam), rows in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        table.append({"policy": policy, "lambda": lam, "value": mean(rows, "value"),
                      "diversity": mean(rows, "diversity")})
    for lam in sorted(greedy):
        rows = list(greedy[lam].values())
        table.append({"policy": "greedy", "lambda": lam, "value": mean(rows, "value"),
                      "diversity": mean(rows, "diversity")})
    if out is not None:
        _atomic_write(Path(out), _csv_text(
            ["policy", "lambda", "value", "diversity"],
            [[r["policy"], r["lambda"], _fmt(r["value"]), _fmt(r["diversity"])] for r in table]))
    return table

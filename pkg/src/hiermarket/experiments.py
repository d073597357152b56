"""Configured beta sweeps, the fixed worked example, and the oracle / IC suites.

Run ``r`` of a sweep draws its types from ``numpy.random.default_rng([seed, r])``:
first the ``M`` PO types, then the ``M x N`` SO types. The same draws are
reused for every beta, so curves across beta use common random numbers.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .auctions import (
    balanced_po_values,
    beta_optimal_allocate,
    co_balanced_allocate,
    co_efficient_allocate,
    efficient_benchmark,
    po_welfare,
    socially_aware_allocate,
)
from .market import MarketInstance, TypeDistribution, ValuationProfile, welfare_of
from .mechanism import (
    MechanismConfig,
    po_best_response,
    run_regulated,
    run_unregulated,
    so_payoff,
    stage1_channels,
)
from .oracle import brute_force_allocate, po_regret, so_regret

CSV_HEADER = [
    "scenario", "beta", "run", "seed", "po_channels", "so_channels",
    "welfare", "welfare_efficient", "revenue_total", "payments_total",
]
PIPELINES = ("unregulated", "regulated", "efficient")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "sweep"
    K: int = 80
    M: int = 2
    N: int = 10
    po_profile: dict = field(default_factory=lambda: {"family": "reciprocal", "scale": 1.0})
    po_type_range: tuple = (5.0, 6.0)
    so_profile: dict = field(default_factory=lambda: {"family": "reciprocal", "scale": 0.1})
    so_dist: dict = field(default_factory=lambda: {"kind": "uniform", "upper": 4.0})
    betas: tuple = (0.0, 0.1)
    runs: int = 40
    seed: int = 0
    output: Optional[str] = None
    payments: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("K", "M", "N", "runs", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"field {name!r}: expected an integer, got {v!r}")
        if self.K < 1 or self.M < 1 or self.N < 0:
            raise ConfigError("fields 'K', 'M' must be >= 1 and 'N' >= 0")
        if self.runs < 1:
            raise ConfigError(f"field 'runs': must be >= 1, got {self.runs}")
        if self.seed < 0:
            raise ConfigError("field 'seed': must be nonnegative")
        lo, hi = _pair(self.po_type_range, "po_type_range")
        if not 0 < lo <= hi:
            raise ConfigError("field 'po_type_range': need 0 < low <= high")
        self.po_type_range = (lo, hi)
        try:
            self.betas = tuple(float(b) for b in self.betas)
        except (TypeError, ValueError):
            raise ConfigError("field 'betas': expected a list of numbers") from None
        if not self.betas or any(b < 0 for b in self.betas):
            raise ConfigError("field 'betas': need at least one nonnegative value")
        if self.so_dist.get("kind", "uniform") != "uniform":
            raise ConfigError("field 'so_dist.kind': only 'uniform' is supported in config files")
        try:
            self.build_profiles()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"profile fields: {exc}") from None

    def build_profiles(self):
        dist = TypeDistribution.uniform(float(self.so_dist["upper"]))
        po = _profile(self.po_profile, self.po_type_range[1])
        so = _profile(self.so_profile, dist.upper)
        return po, so, dist

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown field(s): {sorted(extra)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(raw)


def _pair(v, name):
    try:
        lo, hi = (float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"field {name!r}: expected [low, high]") from None
    return lo, hi


def _profile(entry: dict, type_max: float) -> ValuationProfile:
    family = entry.get("family", "reciprocal")
    if family == "reciprocal":
        return ValuationProfile.reciprocal(float(entry.get("scale", 1.0)), type_max)
    if family == "custom-table":
        return ValuationProfile.custom_table(entry["grid"], entry["table"])
    raise ValueError(f"unknown family {family!r}")


def draw_instance(cfg: ExperimentConfig, run: int) -> MarketInstance:
    po, so, dist = cfg.build_profiles()
    rng = np.random.default_rng([cfg.seed, run])
    p = rng.uniform(*cfg.po_type_range, size=cfg.M)
    a = dist.sample(rng, (cfg.M, cfg.N))
    return MarketInstance(cfg.K, p, a, po, so, dist, 0.0)


def _run_one(args):
    cfg, run = args
    inst = draw_instance(cfg, run)
    eff = efficient_benchmark(inst)
    eff_welfare = welfare_of(inst, eff).aggregate_valuation
    unreg = run_unregulated(inst, payments=cfg.payments)
    rows, details = [], []
    for beta in cfg.betas:
        reg = run_regulated(inst, MechanismConfig(beta=beta), payments=cfg.payments)
        for name, alloc, rev, pay in (
            ("unregulated", unreg.allocation, unreg.revenue_total, unreg.payments_total),
            ("regulated", reg.allocation, reg.revenue_total, reg.payments_total),
            ("efficient", eff, 0.0, 0.0),
        ):
            w = welfare_of(inst, alloc).aggregate_valuation
            rows.append([name, beta, run, cfg.seed, alloc.po_channels, alloc.so_channels,
                         w, eff_welfare, rev, pay])
            details.append({
                "scenario": name, "beta": beta, "run": run,
                "po_types": list(inst.po_types), "so_types": [list(r) for r in inst.so_types],
                "k_j0": list(alloc.k_j0), "k_ji": [list(r) for r in alloc.k_ji],
            })
    return rows, details


@dataclass
class ExperimentResult:
    rows: list
    details: list

    def means(self, column: str) -> dict:
        """Mean of ``column`` keyed by (scenario, beta)."""
        col = CSV_HEADER.index(column)
        acc = {}
        for row in self.rows:
            acc.setdefault((row[0], row[1]), []).append(row[col])
        return {key: math.fsum(v) / len(v) for key, v in acc.items()}

    def welfare_improvement(self) -> dict:
        """Mean regulated-minus-unregulated welfare per beta."""
        w = CSV_HEADER.index("welfare")
        by = {(r[0], r[1], r[2]): r[w] for r in self.rows}
        acc = {}
        for (name, beta, run), val in by.items():
            if name == "regulated":
                acc.setdefault(beta, []).append(val - by[("unregulated", beta, run)])
        return {b: math.fsum(v) / len(v) for b, v in acc.items()}

    def summary_lines(self) -> list:
        so, po, w = self.means("so_channels"), self.means("po_channels"), self.means("welfare")
        gain = self.welfare_improvement()
        lines = ["scenario,beta,mean_po_channels,mean_so_channels,mean_welfare,welfare_improvement"]
        for (name, beta) in sorted(so, key=lambda k: (k[1], PIPELINES.index(k[0]))):
            g = gain[beta] if name == "regulated" else ""
            lines.append(f"{name},{beta},{po[(name, beta)]:.6g},{so[(name, beta)]:.6g},"
                         f"{w[(name, beta)]:.6g},{g if g == '' else format(g, '.6g')}")
        return lines


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out_dir=None) -> ExperimentResult:
    tasks = [(cfg, r) for r in range(cfg.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_one, tasks))
    else:
        parts = [_run_one(t) for t in tasks]
    order = {b: n for n, b in enumerate(cfg.betas)}
    rows = [r for p, _ in parts for r in p]
    details = [d for _, p in parts for d in p]
    idx = sorted(range(len(rows)), key=lambda n: (order[rows[n][1]], rows[n][2], PIPELINES.index(rows[n][0])))
    result = ExperimentResult([rows[n] for n in idx], [details[n] for n in idx])
    out_dir = out_dir or cfg.output
    if out_dir:
        write_outputs(result, out_dir)
    return result


def write_outputs(result: ExperimentResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in result.rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    with open(out / "details.jsonl", "w") as fh:
        for d in result.details:
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def sweep_config(N: int = 10, K: int = 80, betas=None, runs: int = 40, seed: int = 0, payments=True):
    if betas is None:
        betas = [round(0.05 * n, 2) for n in range(21)]
    return ExperimentConfig(scenario=f"N{N}", K=K, N=N, betas=betas, runs=runs, seed=seed,
                            payments=payments)


# ---------------------------------------------------------------- worked example


def appendix_instance(beta: float = 0.2) -> MarketInstance:
    """12 channels, 2 POs with V = 3p/k, 2 SOs each with U = a/k and F(x) = x/2."""
    dist = TypeDistribution.uniform(2.0)
    return MarketInstance(
        K=12,
        po_types=(1.0, 1.2),
        so_types=((1.2, 1.5), (1.3, 1.4)),
        po_profile=ValuationProfile.reciprocal(3.0, 2.0),
        so_profile=ValuationProfile.reciprocal(1.0, 2.0),
        so_dist=dist,
        beta=beta,
    )


APPENDIX_EXPECTED = {
    "unregulated": [10, 2],
    "socially-aware": [8, 4],
    "efficient": [7, 5],
    "regulated(beta=0.2)": [9, 3],
}


def run_appendix_regression() -> list:
    """Rows of (case, expected totals, computed totals, passed)."""
    inst = appendix_instance(0.2)
    unreg = run_unregulated(inst.replace(beta=0.0))
    got = {
        "unregulated": unreg.allocation.totals,
        "socially-aware": socially_aware_allocate(inst, unreg.allocation.k_cj).totals,
        "efficient": efficient_benchmark(inst).totals,
        "regulated(beta=0.2)": run_regulated(inst).allocation.totals,
    }
    return [(name, exp, got[name], got[name] == exp) for name, exp in APPENDIX_EXPECTED.items()]


# ---------------------------------------------------------------- suites


def random_instance(rng: np.random.Generator, K_max=6, M_max=3, N_max=3, beta=None) -> MarketInstance:
    """Small reciprocal/uniform market for oracle and incentive checks."""
    K = int(rng.integers(1, K_max + 1))
    M = int(rng.integers(1, M_max + 1))
    N = int(rng.integers(1, N_max + 1))
    p_max = 2.0
    upper = float(rng.uniform(1.0, 4.0))
    dist = TypeDistribution.uniform(upper)
    po = ValuationProfile.reciprocal(float(rng.uniform(0.5, 3.0)), p_max)
    so = ValuationProfile.reciprocal(float(rng.uniform(0.5, 2.0)), upper)
    p = rng.uniform(0.05 * p_max, p_max, M)
    a = dist.sample(rng, (M, N))
    if beta is None:
        beta = float(rng.choice([0.0, 0.1, 0.2, 0.5, 1.0]))
    return MarketInstance(K, p, a, po, so, dist, beta)


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def greedy_values(inst: MarketInstance) -> dict:
    """Objective values reached by each greedy solver on ``inst``."""
    args = (inst.po_profile, inst.so_profile, inst.so_dist)
    kc = co_efficient_allocate(inst.po_types, inst.po_profile, inst.K)
    vals = {"co": po_welfare(inst.po_types, inst.po_profile, kc)}
    bal = co_balanced_allocate(inst.po_types, inst.so_types, inst.beta, inst.K, *args)
    vals["co-bal"] = math.fsum(balanced_po_values(inst.po_types, inst.so_types, inst.beta, bal, *args))
    eff = efficient_benchmark(inst)
    vals["efficient"] = welfare_of(inst, eff).aggregate_valuation
    for kind, beta in (("po", 0.0), ("po-beta", inst.beta)):
        for j in range(inst.M):
            out = beta_optimal_allocate(inst.po_types[j], inst.po_profile, inst.so_types[j],
                                        inst.so_profile, inst.so_dist, beta, kc[j], j)
            one = type(bal)([kc[j]], [out.reserved], [out.sold])
            vals[(kind, j, kc[j])] = math.fsum(
                balanced_po_values([inst.po_types[j]], [inst.so_types[j]], beta, one, *args)
            )
    return vals


def oracle_suite(n_instances: int = 200, seed: int = 0) -> dict:
    """Greedy-vs-enumeration agreement; returns mismatch counts per solver."""
    rng = np.random.default_rng(seed)
    checked = {"co": 0, "po": 0, "po-beta": 0, "co-bal": 0, "efficient": 0}
    mismatches = {k: [] for k in checked}
    for n in range(n_instances):
        inst = random_instance(rng)
        for key, val in greedy_values(inst).items():
            if isinstance(key, tuple):
                kind, j, cap = key
                ref = brute_force_allocate(kind, inst, k_cap=cap, j=j).value
            else:
                kind = key
                ref = brute_force_allocate(kind, inst).value
            checked[kind] += 1
            if not _close(val, ref):
                mismatches[kind].append((n, key, val, ref))
    return {"checked": checked, "mismatches": mismatches}


IC_BETAS = (0.0, 0.1, 0.2, 1.0)


def ic_suite(n_instances: int = 100, grid: int = 100, seed: int = 1) -> dict:
    """Max regret from unilateral misreports for SOs (every IC beta) and POs (regulated stage 1)."""
    rng = np.random.default_rng(seed)
    so_max = {b: -math.inf for b in IC_BETAS}
    po_max = -math.inf
    ir_min = math.inf
    for _ in range(n_instances):
        base = random_instance(rng, beta=0.0)
        j = int(rng.integers(base.M))
        for beta in IC_BETAS:
            inst = base.replace(beta=beta)
            kc = stage1_channels(inst)
            for i in range(inst.N):
                so_max[beta] = max(so_max[beta], so_regret(inst, j, i, beta, kc[j], grid))
                ir_min = min(ir_min, so_payoff(inst, j, i, inst.so_types[j][i], beta, kc[j]))
        inst = base.replace(beta=float(rng.choice(IC_BETAS)))
        for m in range(inst.M):
            po_max = max(po_max, po_regret(inst, m, "regulated", grid))
    return {"so_regret": so_max, "po_regret": po_max, "min_truthful_so_payoff": ir_min}


def untruthful_witness(grid: int = 200) -> dict:
    """Largest PO regret for truthful bidding in the aware unregulated market of the worked example."""
    inst = appendix_instance(0.0)
    out = {}
    for j in range(inst.M):
        out[j] = {
            "regret": po_regret(inst, j, "unregulated-aware", grid),
            "best_response": po_best_response(inst, j, "unregulated-aware", grid),
            "type": inst.po_types[j],
        }
    return out

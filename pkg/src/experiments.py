"""
Experiment bodies behind the CLI. Every experiment splits into run_seed (one unit of
work per seed, safe to run in a worker process) and summarize (merges the per-seed
results, in seed order, into summary.json).
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .adversaries import (AdversarySpec, build_adversary, dynamic_optimum, gen_lemma_c1, gen_lemma_c2,
                          lemma_c1_policy_reward, lemma_c2_delta, lemma_c2_guess_reward,
                          lemma_c2_informed_reward)
from .batched import DEFAULT_ALPHA, random_matching_instance, simulate_matching
from .constraints import ConstraintFamily, MatchingFamily, Rank1Family, TemporalPolytope, is_temporally_feasible
from .data_models import INFINITE_ACTIVITY, FractionalPoint, InstanceSequence, MatchingInstance
from .errors import ConfigError
from .instance_io import read_json, load_instance, load_matching_instance
from .lp import expected_offline_optimum, solve_matching_lp
from .ocrs.ocrs_factory import create_ocrs
from .ocrs.temporal_ocrs import TemporalOcrs, estimate_selectability, exact_selectability, run_direct
from .regret.benchmarks import compute_benchmarks, linear_slope, loglog_slope
from .regret.runners import block_semibandit_run, full_feedback_run, osmd_semibandit_run
from .report_writer import RunsWriter, columns_for, write_summary, write_transcripts

logger = logging.getLogger(__name__)

EXPERIMENTS = ("selectability", "temporal-reduction", "matching-appendix-b", "regret-full", "regret-osmd",
               "regret-blocked", "lowerbound-c1", "lowerbound-c2")

# Activity values the generated selectability panels draw from.
PANEL_ACTIVITIES = (0, 1, 2, INFINITE_ACTIVITY)
MAX_PANEL_M = 8


class ExperimentConfig(BaseModel):
    experiment: Literal["selectability", "temporal-reduction", "matching-appendix-b", "regret-full", "regret-osmd",
                        "regret-blocked", "lowerbound-c1", "lowerbound-c2"]
    scheme: str = "rank1"
    b: float = Field(default=1.0, gt=0, le=1)
    instance: Optional[str] = None
    adversary: Optional[AdversarySpec] = None
    seeds: List[int] = Field(default_factory=lambda: [0])
    runs_per_seed: int = Field(default=1000, ge=1)
    horizons: List[int] = Field(default_factory=lambda: [256])
    alpha: Optional[float] = Field(default=None, gt=0, le=1)
    epsilon: float = Field(default=0.1, gt=0, lt=1)
    n: int = Field(default=4, ge=2)
    m: int = Field(default=4, ge=1)
    panel_size: int = Field(default=20, ge=1)
    panel_seed: int = 0
    machines: int = Field(default=2, ge=1)
    jobs: int = Field(default=3, ge=1)
    policies: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0])
    stage_rows: bool = True
    audit_transcripts: int = Field(default=0, ge=0)
    output: Optional[str] = None

    @field_validator("seeds")
    @classmethod
    def _seeds_nonempty(cls, value):
        if not value:
            raise ValueError("seed list must be non-empty")
        return value

    @field_validator("horizons")
    @classmethod
    def _horizons_positive(cls, value):
        if not value or any(T < 1 for T in value):
            raise ValueError("horizons must be a non-empty list of positive integers")
        return sorted(value)

    @field_validator("policies")
    @classmethod
    def _policies_are_probabilities(cls, value):
        if any(not 0 <= p <= 1 for p in value):
            raise ValueError("policies are acceptance probabilities in [0, 1]")
        return value

    @field_validator("instance")
    @classmethod
    def _instance_exists(cls, value):
        if value is not None and not os.path.isfile(value):
            raise ValueError(f"instance file not found: {value}")
        return value

    @model_validator(mode="after")
    def _experiment_inputs(self):
        if self.experiment.startswith("regret-"):
            if self.instance is None or self.adversary is None:
                raise ValueError(f"{self.experiment} needs both 'instance' and 'adversary'")
            if self.adversary.kind in ("lemma-c1", "lemma-c2"):
                raise ValueError("regret experiments need a fixed-sequence adversary")
            if self.adversary.kind == "custom-file" and (self.adversary.path is None or not os.path.isfile(self.adversary.path)):
                raise ValueError(f"adversary weight file not found: {self.adversary.path}")
        if self.experiment in ("selectability", "temporal-reduction") and self.instance is None and self.m > MAX_PANEL_M:
            raise ValueError(f"generated panels are limited to m <= {MAX_PANEL_M}")
        return self


def _resolve(path: Optional[str], base_dir: str) -> Optional[str]:
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def load_config(path: str) -> ExperimentConfig:
    """Reads and validates a config file; relative file references resolve against its directory."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a JSON object")
    base_dir = os.path.dirname(os.path.abspath(path))
    data["instance"] = _resolve(data.get("instance"), base_dir)
    if isinstance(data.get("adversary"), dict):
        data["adversary"]["path"] = _resolve(data["adversary"].get("path"), base_dir)
    return ExperimentConfig.model_validate(data)


@dataclass
class SeedResult:
    seed: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    transcripts: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)


# --- Panels -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PanelEntry:
    seq: InstanceSequence
    family: ConstraintFamily
    x: FractionalPoint


def _tight_point(polytope: TemporalPolytope, direction: np.ndarray, b: float) -> FractionalPoint:
    """The point on the ray through direction where the first constraint becomes tight."""
    return FractionalPoint(polytope.repair(polytope.max_scale(direction) * direction), scale_hint=b)


def _random_family(scheme: str, m: int, rng: np.random.Generator) -> ConstraintFamily:
    if scheme == "matching":
        left, right = max(1, m // 3), max(2, m // 2)
        return MatchingFamily([(f"u{rng.integers(left)}", f"v{rng.integers(right)}") for _ in range(m)])
    return Rank1Family(m)


def selection_panel(config: ExperimentConfig) -> List[PanelEntry]:
    """The instance file, or panel_size random (arrival order, activity vector) configurations."""
    if config.instance is not None:
        seq, family = load_instance(config.instance)
        polytope = TemporalPolytope.for_family(family, seq, config.b)
        return [PanelEntry(seq, family, _tight_point(polytope, np.ones(seq.m), config.b))]
    rng = np.random.default_rng(config.panel_seed)
    panel = []
    for _ in range(config.panel_size):
        family = _random_family(config.scheme, config.m, rng)
        arrivals = rng.permutation(config.m) + 1
        activities = [PANEL_ACTIVITIES[i] for i in rng.integers(len(PANEL_ACTIVITIES), size=config.m)]
        seq = InstanceSequence.from_lists(np.round(rng.random(config.m), 3).tolist(), activities, arrivals.tolist())
        polytope = TemporalPolytope.for_family(family, seq, config.b)
        panel.append(PanelEntry(seq, family, _tight_point(polytope, rng.random(config.m) + 0.1, config.b)))
    return panel


def matching_panel(config: ExperimentConfig) -> List[MatchingInstance]:
    if config.instance is not None:
        return [load_matching_instance(config.instance)]
    rng = np.random.default_rng(config.panel_seed)
    return [random_matching_instance(config.machines, config.jobs, rng) for _ in range(config.panel_size)]


def _temporal_scheme(config: ExperimentConfig, family: ConstraintFamily, seq: InstanceSequence) -> TemporalOcrs:
    scheme = create_ocrs(config.scheme, family, seq, config.b, temporal=True)
    if not isinstance(scheme, TemporalOcrs):
        raise ConfigError(f"Experiment {config.experiment} needs a greedy OCRS, not '{config.scheme}'")
    return scheme


# --- selectability ------------------------------------------------------------------

def run_selectability(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    rng = np.random.default_rng(seed)
    for index, entry in enumerate(selection_panel(config)):
        scheme = _temporal_scheme(config, entry.family, entry.seq)
        target = scheme.selectability()
        estimate = estimate_selectability(scheme, entry.x, entry.seq, config.runs_per_seed, rng,
                                          keep_transcripts=audit if index == 0 else 0)
        exact = exact_selectability(scheme, entry.x, entry.seq)
        result.transcripts.extend(t.to_jsonl(run_id=r) for r, t in enumerate(estimate["transcripts"]))
        for e in range(entry.seq.m):
            result.rows.append({"seed": seed, "config": index, "element": e, "runs": config.runs_per_seed,
                                "sampled": estimate["sampled"][e], "selected": estimate["selected"][e],
                                "selection_rate": estimate["selection_rate"][e],
                                "selectable": estimate["selectable"][e], "stderr": estimate["stderr"][e],
                                "exact": exact[e], "target": target, "feasible_runs": estimate["feasible_runs"]})
    return result


def summarize_selectability(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    """
    Pools the per-seed counts. The measured quantity is Pr[e selected | e sampled] from the
    runs; the closed form is the reference it must reach within 3 sigma, and the closed
    form itself must reach the proven constant.
    """
    pooled: Dict[Tuple[int, int], Dict[str, float]] = {}
    target = None
    feasible = checked = 0
    for result in results:
        for row in result.rows:
            item = pooled.setdefault((row["config"], row["element"]),
                                     {"sampled": 0, "selected": 0, "selectable": 0.0, "runs": 0, "exact": row["exact"]})
            item["sampled"] += row["sampled"]
            item["selected"] += row["selected"]
            item["selectable"] += row["selectable"] * row["runs"]
            item["runs"] += row["runs"]
            target = row["target"]
            if row["element"] == 0:
                feasible += row["feasible_runs"]
                checked += row["runs"]
    worst = None
    rates, unsampled, max_gap = [], 0, 0.0
    for key, item in pooled.items():
        selectable = item["selectable"] / item["runs"]
        spread = math.sqrt(selectable * (1 - selectable) / item["runs"])
        max_gap = max(max_gap, abs(selectable - item["exact"]) - 3 * spread)
        if item["sampled"] == 0:
            unsampled += 1
            continue
        p = item["selected"] / item["sampled"]
        sigma = math.sqrt(p * (1 - p) / item["sampled"])
        rates.append(p)
        margin = p - (item["exact"] - 3 * sigma)
        if worst is None or margin < worst["margin"]:
            worst = {"config": key[0], "element": key[1], "selection_rate": p, "stderr": sigma,
                     "sampled": item["sampled"], "exact": item["exact"], "margin": margin}
    min_exact = min(item["exact"] for item in pooled.values())
    return {"target": target, "worst": worst,
            "min_selection_rate": min(rates) if rates else None,
            "min_exact": min_exact,
            "selectable_excess_gap": max_gap,
            "unsampled_elements": unsampled,
            "feasible_fraction": feasible / checked if checked else 1.0,
            "passed": bool(worst is not None and worst["margin"] >= 0 and min_exact >= target - 1e-12
                           and feasible == checked)}


# --- temporal-reduction -------------------------------------------------------------

def run_temporal_reduction(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    for index, entry in enumerate(selection_panel(config)):
        seq_inf = entry.seq.with_activities([INFINITE_ACTIVITY] * entry.seq.m)
        polytope = TemporalPolytope.for_family(entry.family, None, config.b)
        x = _tight_point(polytope, np.ones(entry.seq.m), config.b)
        wrapper = _temporal_scheme(config, entry.family, seq_inf)
        direct = create_ocrs(config.scheme, entry.family, b=config.b, temporal=False)
        real = _temporal_scheme(config, entry.family, entry.seq)
        identical = feasible = selected = 0
        weight = 0.0
        for r in range(config.runs_per_seed):
            stream_seed = [seed, index, r]
            S_wrapped, _ = wrapper.run(x, np.random.default_rng(stream_seed))
            S_direct, _ = run_direct(direct, x, seq_inf.order, np.random.default_rng(stream_seed))
            identical += S_wrapped == S_direct
            S_real, transcript = real.run(x, np.random.default_rng(stream_seed + [1]))
            feasible += is_temporally_feasible(S_real, entry.seq, entry.family)
            selected += len(S_real)
            weight += float(entry.seq.weights[list(S_real)].sum())
            if index == 0 and r < audit:
                result.transcripts.append(transcript.to_jsonl(run_id=r))
        runs = config.runs_per_seed
        result.rows.append({"seed": seed, "config": index, "runs": runs, "identical": identical,
                            "feasible": feasible, "mean_selected": selected / runs, "mean_weight": weight / runs})
    return result


def summarize_temporal_reduction(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    rows = [row for result in results for row in result.rows]
    runs = sum(row["runs"] for row in rows)
    identical = sum(row["identical"] for row in rows)
    feasible = sum(row["feasible"] for row in rows)
    return {"runs": runs, "identical_fraction": identical / runs, "feasible_fraction": feasible / runs,
            "target": 1.0, "passed": identical == runs and feasible == runs}


# --- matching-appendix-b ------------------------------------------------------------

def run_matching_appendix_b(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    alpha = config.alpha if config.alpha is not None else DEFAULT_ALPHA
    rng = np.random.default_rng(seed)
    for index, instance in enumerate(matching_panel(config)):
        solution = solve_matching_lp(instance)
        sim = simulate_matching(instance, config.runs_per_seed, rng, alpha, solution)
        rewards = sim["rewards"]
        lp_value = sim["lp_value"]
        mean = float(rewards.mean())
        result.rows.append({"run_id": f"{seed}-{index}", "seed": seed, "instance": index,
                            "runs": config.runs_per_seed, "reward": mean, "lp_value": lp_value,
                            "ratio": mean / lp_value if lp_value > 0 else 1.0,
                            "min_availability": sim["table"].minimum})
        result.stats[index] = {"sum": float(rewards.sum()), "sumsq": float((rewards ** 2).sum()), "n": rewards.size}
    return result


def summarize_matching_appendix_b(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    alpha = config.alpha if config.alpha is not None else DEFAULT_ALPHA
    instances = matching_panel(config)
    per_instance = []
    for index, instance in enumerate(instances):
        total = sum(r.stats[index]["sum"] for r in results)
        sumsq = sum(r.stats[index]["sumsq"] for r in results)
        n = sum(r.stats[index]["n"] for r in results)
        lp_value = results[0].rows[index]["lp_value"]
        mean = total / n
        sigma = math.sqrt(max(sumsq / n - mean ** 2, 0.0) / n)
        ratio = mean / lp_value if lp_value > 0 else 1.0
        ratio_sigma = sigma / lp_value if lp_value > 0 else 0.0
        per_instance.append({"instance": index, "ratio": ratio, "stderr": ratio_sigma, "lp_value": lp_value,
                             "min_availability": min(r.rows[index]["min_availability"] for r in results),
                             "margin": ratio - (alpha - 3 * ratio_sigma)})
    summary = {"target": alpha, "instances": per_instance,
               "min_ratio": min(item["ratio"] for item in per_instance),
               "min_availability": min(item["min_availability"] for item in per_instance),
               "passed": all(item["margin"] >= 0 and item["min_availability"] >= alpha - 1e-9 for item in per_instance)}
    if all(inst.n_machines <= 3 and inst.n_jobs <= 3 for inst in instances):
        dominated = [item["lp_value"] >= expected_offline_optimum(inst) - 1e-8
                     for item, inst in zip(per_instance, instances)]
        summary["lp_dominates_offline"] = {"checked": len(dominated), "holds": sum(dominated)}
        summary["passed"] = summary["passed"] and all(dominated)
    return summary


# --- regret ---------------------------------------------------------------------------

RUNNERS: Dict[str, Callable] = {
    "regret-full": full_feedback_run,
    "regret-osmd": osmd_semibandit_run,
    "regret-blocked": block_semibandit_run,
}
SLOPE_TARGETS = {"regret-full": (0.5, 0.6), "regret-osmd": (0.5, 0.6), "regret-blocked": (2.0 / 3.0, 0.75)}


def run_regret(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    seq, family = load_instance(config.instance)
    runner = RUNNERS[config.experiment]
    for T in config.horizons:
        stream = build_adversary(config.adversary, family, seq, T,
                                 rng=np.random.default_rng([config.adversary.seed, seed, T]))
        selector = create_ocrs(config.scheme, family, seq, config.b, temporal=True)
        trace = runner(T, family, seq, selector, stream.weights, np.random.default_rng([seed, T]))
        bench = compute_benchmarks(trace, family, seq, config.alpha)
        cumulative = np.cumsum(trace.rewards)
        stages = range(T) if config.stage_rows else [T - 1]
        for t in stages:
            result.rows.append({"seed": seed, "T": T, "t": t + 1, "reward": trace.rewards[t],
                                "best_fixed_prefix": bench.best_fixed_prefix[t],
                                "alpha_regret": bench.alpha_regret[t]})
        quarter = max(T // 4, 1)
        regret = np.concatenate([[0.0], bench.alpha_regret])
        result.stats[T] = {"alpha_regret": bench.final_alpha_regret,
                           "fractional_regret": bench.final_fractional_regret,
                           "best_fixed": bench.best_fixed_value, "lp_value": bench.best_fixed_lp_value,
                           "first_quarter": float(regret[quarter] - regret[0]) / quarter,
                           "last_quarter": float(regret[T] - regret[T - quarter]) / quarter,
                           "alpha": bench.alpha, "misses": trace.exploration_misses,
                           "reward": float(cumulative[-1])}
    return result


def summarize_regret(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    rate, target = SLOPE_TARGETS[config.experiment]
    by_horizon = []
    for T in config.horizons:
        stats = [r.stats[T] for r in results]
        values = np.array([s["alpha_regret"] for s in stats])
        by_horizon.append({
            "T": T,
            "alpha_regret": float(values.mean()),
            "stderr": float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0,
            "fractional_regret": float(np.mean([s["fractional_regret"] for s in stats])),
            "first_quarter_per_stage": float(np.mean([s["first_quarter"] for s in stats])),
            "last_quarter_per_stage": float(np.mean([s["last_quarter"] for s in stats])),
            "exploration_misses": int(sum(s["misses"] for s in stats)),
            "lp_matches_best_fixed": all(abs(s["best_fixed"] - s["lp_value"]) <= 1e-6 * max(1.0, s["lp_value"])
                                         for s in stats),
        })
    summary = {"alpha": results[0].stats[config.horizons[0]]["alpha"], "rate": rate, "slope_target": target,
               "horizons": by_horizon}
    if len(config.horizons) >= 2:
        slope = loglog_slope(config.horizons, [item["alpha_regret"] for item in by_horizon])
        summary["slope"] = slope
        summary["passed"] = slope <= target
    return summary


# --- lower bounds ---------------------------------------------------------------------

def run_lowerbound_c1(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    for T in config.horizons:
        rng = np.random.default_rng([seed, T])
        stream = gen_lemma_c1(T, rng, config.epsilon)
        heads = stream.meta["heads"]
        optimum_cache: Dict[bool, float] = {}
        dynamic = 0.0
        for t in range(T):
            if heads[t] not in optimum_cache:
                optimum_cache[heads[t]] = dynamic_optimum(stream, t)
            dynamic += optimum_cache[heads[t]]
        for p in config.policies:
            accept = rng.random(T) < p
            reward_cache: Dict[Tuple[bool, bool], float] = {}
            reward = 0.0
            for t in range(T):
                key = (bool(heads[t]), bool(accept[t]))
                if key not in reward_cache:
                    reward_cache[key] = lemma_c1_policy_reward(stream, t, key[1])
                reward += reward_cache[key]
            result.rows.append({"seed": seed, "T": T, "policy": p, "policy_reward": reward,
                                "dynamic_opt": dynamic, "regret": dynamic - reward})
    return result


def summarize_lowerbound_c1(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    rows = [row for result in results for row in result.rows]
    first_policy = config.policies[0]
    stages = sum(row["T"] for row in rows if row["policy"] == first_policy)
    dynamic = sum(row["dynamic_opt"] for row in rows if row["policy"] == first_policy)
    target_slope = (1 - config.epsilon) / 2
    policies = []
    for p in config.policies:
        means = [np.mean([row["regret"] for row in rows if row["policy"] == p and row["T"] == T]) for T in config.horizons]
        entry = {"policy": p, "expected_slope": (1 - config.epsilon * p) / 2, "mean_regret": means}
        if len(config.horizons) >= 2:
            entry["slope"] = linear_slope(config.horizons, means)
        policies.append(entry)
    summary = {"dynamic_per_stage": dynamic / stages, "dynamic_target": 1.5, "slope_target": target_slope,
               "policies": policies}
    if len(config.horizons) >= 2:
        summary["min_slope"] = min(entry["slope"] for entry in policies)
        summary["passed"] = abs(summary["dynamic_per_stage"] - 1.5) <= 0.01 and summary["min_slope"] >= target_slope - 0.02
    return summary


def run_lowerbound_c2(config: ExperimentConfig, seed: int, audit: int = 0) -> SeedResult:
    result = SeedResult(seed)
    alpha = config.alpha if config.alpha is not None else 1.0 / math.e
    for T in config.horizons:
        rng = np.random.default_rng([seed, T])
        stream = gen_lemma_c2(T, config.n, alpha, rng)
        scheme = create_ocrs("rank1", stream.family, stream.sequence(0), 1.0, temporal=True)
        informed = sum(lemma_c2_informed_reward(stream, t, scheme, rng) for t in range(T))
        best_guess = max(sum(lemma_c2_guess_reward(stream, t, position) for t in range(T))
                         for position in range(config.n))
        result.rows.append({"seed": seed, "T": T, "informed_reward": informed, "best_guess_reward": best_guess,
                            "gap_per_stage": (informed - best_guess) / T})
    return result


def summarize_lowerbound_c2(config: ExperimentConfig, results: List[SeedResult]) -> Dict[str, Any]:
    alpha = config.alpha if config.alpha is not None else 1.0 / math.e
    delta = lemma_c2_delta(config.n, alpha)
    rows = [row for result in results for row in result.rows]
    stages = sum(row["T"] for row in rows)
    gaps = np.array([row["gap_per_stage"] for row in rows])
    gap = float(sum(row["informed_reward"] - row["best_guess_reward"] for row in rows) / stages)
    sigma = float(gaps.std(ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0
    return {"delta": delta, "gap_per_stage": gap, "stderr": sigma, "gap_target": delta ** 2,
            "informed_per_stage": sum(row["informed_reward"] for row in rows) / stages,
            "informed_target": alpha * delta,
            "best_guess_per_stage": sum(row["best_guess_reward"] for row in rows) / stages,
            "best_guess_bound": delta / config.n + delta ** 2,
            "passed": gap >= delta ** 2 - 3 * sigma}


# --- driver ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    run_seed: Callable[[ExperimentConfig, int, int], SeedResult]
    summarize: Callable[[ExperimentConfig, List[SeedResult]], Dict[str, Any]]


REGISTRY: Dict[str, Experiment] = {
    "selectability": Experiment(run_selectability, summarize_selectability),
    "temporal-reduction": Experiment(run_temporal_reduction, summarize_temporal_reduction),
    "matching-appendix-b": Experiment(run_matching_appendix_b, summarize_matching_appendix_b),
    "regret-full": Experiment(run_regret, summarize_regret),
    "regret-osmd": Experiment(run_regret, summarize_regret),
    "regret-blocked": Experiment(run_regret, summarize_regret),
    "lowerbound-c1": Experiment(run_lowerbound_c1, summarize_lowerbound_c1),
    "lowerbound-c2": Experiment(run_lowerbound_c2, summarize_lowerbound_c2),
}


def run_seed_task(task: Tuple[Dict[str, Any], int, int]) -> SeedResult:
    """Worker entry point; takes a plain config dict so it pickles cleanly."""
    config_data, seed, audit = task
    config = ExperimentConfig.model_validate(config_data)
    return REGISTRY[config.experiment].run_seed(config, seed, audit)


def run_experiment(config: ExperimentConfig, out_dir: str, workers: int = 1) -> Dict[str, Any]:
    """
    Fans the seeds out, streams rows to runs.csv in seed order and writes summary.json.
    On failure the rows of the seeds finished so far stay on disk.
    """
    experiment = REGISTRY[config.experiment]
    logger.info(f"Running '{config.experiment}' over {len(config.seeds)} seeds with {workers} worker(s)")
    tasks = [(config.model_dump(), seed, config.audit_transcripts if i == 0 else 0)
             for i, seed in enumerate(config.seeds)]
    results: List[SeedResult] = []
    with RunsWriter(out_dir, columns_for(config.experiment)) as writer:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(run_seed_task, tasks):
                    writer.append(result.rows)
                    results.append(result)
        else:
            for task in tasks:
                result = run_seed_task(task)
                writer.append(result.rows)
                results.append(result)
    write_transcripts(out_dir, [line for result in results for line in result.transcripts])
    summary = {"experiment": config.experiment, "scheme": config.scheme, "b": config.b,
               "seeds": len(config.seeds), "runs_per_seed": config.runs_per_seed}
    summary.update(experiment.summarize(config, results))
    write_summary(out_dir, summary)
    logger.info(f"Experiment '{config.experiment}' finished: passed = {summary.get('passed')}")
    return summary

import csv
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

RUNS_FILE = "runs.csv"
SUMMARY_FILE = "summary.json"
TRANSCRIPTS_FILE = "transcripts.jsonl"

# runs.csv column contract per experiment (printed by the `schema` subcommand).
CSV_SCHEMA: Dict[str, Dict[str, str]] = {
    "selectability": {
        "seed": "seed of the replicate batch",
        "config": "index of the (arrival order, activity vector) configuration in the panel",
        "element": "element id",
        "runs": "full temporal runs in this batch",
        "sampled": "runs in which the element was in R",
        "selected": "runs in which the element was sampled and selected",
        "selection_rate": "selected / sampled, the measured Pr[e selected | e sampled] (nan if never sampled)",
        "selectable": "fraction of runs in which the element was selectable on the realised R and subfamily",
        "stderr": "binomial standard error of the selectable fraction",
        "exact": "closed-form selectability ratio(x_e) * exp(-sum of active conflicting x_f)",
        "target": "proven selectability constant c",
        "feasible_runs": "runs of this batch whose output was temporally feasible",
    },
    "temporal-reduction": {
        "seed": "seed of the replicate batch",
        "config": "index of the configuration in the panel",
        "runs": "replicates in this batch",
        "identical": "replicates where wrapper and direct scheme agree with all activities infinite",
        "feasible": "replicates whose wrapper output on the real activities is temporally feasible",
        "mean_selected": "average number of elements selected on the real activities",
        "mean_weight": "average selected weight on the real activities",
    },
    "matching-appendix-b": {
        "run_id": "<seed>-<instance>",
        "seed": "seed of the replicate batch",
        "instance": "index of the instance in the panel",
        "runs": "simulated runs in this batch",
        "reward": "average realised reward over the batch",
        "lp_value": "value of the matching LP",
        "ratio": "reward / lp_value",
        "min_availability": "smallest entry of the availability table",
    },
    "regret": {
        "seed": "seed of the run",
        "T": "horizon",
        "t": "stage (1-based)",
        "reward": "realised reward <a_t, w_t>",
        "best_fixed_prefix": "best fixed super-arm value over stages 1..t",
        "alpha_regret": "alpha * best_fixed_prefix - cumulative reward",
    },
    "lowerbound-c1": {
        "seed": "seed of the run",
        "T": "horizon",
        "policy": "probability p of accepting the first job of a stage",
        "policy_reward": "total reward of the accept-first-with-p greedy policy",
        "dynamic_opt": "total reward of the per-stage clairvoyant optimum",
        "regret": "dynamic_opt - policy_reward",
    },
    "lowerbound-c2": {
        "seed": "seed of the run",
        "T": "horizon",
        "informed_reward": "total reward of the greedy OCRS told where delta lands",
        "best_guess_reward": "total reward of the best fixed-position guess policy in hindsight",
        "gap_per_stage": "(informed_reward - best_guess_reward) / T",
    },
}
for _name in ("regret-full", "regret-osmd", "regret-blocked"):
    CSV_SCHEMA[_name] = CSV_SCHEMA["regret"]


def columns_for(experiment: str) -> List[str]:
    return list(CSV_SCHEMA[experiment].keys())


def schema_document() -> Dict[str, Any]:
    return {name: columns for name, columns in CSV_SCHEMA.items() if name != "regret"}


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{float(value):.12g}"
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class RunsWriter:
    """Streams rows into runs.csv, flushing after every batch so partial output survives a failure."""

    def __init__(self, out_dir: str, columns: Sequence[str]):
        os.makedirs(out_dir, exist_ok=True)
        self.path = os.path.join(out_dir, RUNS_FILE)
        self.columns = list(columns)
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.columns)
        self.rows_written = 0

    def append(self, rows: Iterable[Dict[str, Any]]):
        for row in rows:
            self._writer.writerow([_format(row[c]) for c in self.columns])
            self.rows_written += 1
        self._file.flush()

    def close(self):
        if not self._file.closed:
            self._file.close()
            logger.info(f"Wrote {self.rows_written} rows to {self.path}")

    def __enter__(self) -> "RunsWriter":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def write_summary(out_dir: str, summary: Dict[str, Any]) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, SUMMARY_FILE)
    with open(path, "w") as f:
        json.dump(_jsonable(summary), f, indent=4, sort_keys=True)
    logger.info(f"Summary written to {path}")
    return path


def write_transcripts(out_dir: str, lines: Sequence[str]) -> Optional[str]:
    if not lines:
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, TRANSCRIPTS_FILE)
    with open(path, "w") as f:
        f.writelines(lines)
    logger.info(f"{len(lines)} transcript blocks written to {path}")
    return path

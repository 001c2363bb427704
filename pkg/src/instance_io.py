import json
import logging
import os
from typing import Any, Dict, List, Tuple

import numpy as np

from .constraints import ConstraintFamily, create_family
from .data_models import (DiscreteDistribution, Element, InstanceSequence, Job, MatchingInstance,
                          activity_from_json)
from .errors import InstanceError

logger = logging.getLogger(__name__)


def read_json(path: str) -> Any:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise InstanceError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise InstanceError(f"Malformed JSON in {path}: line {e.lineno} column {e.colno}: {e.msg}")


def write_json(path: str, data: Any):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=4)
    logger.info(f"Wrote {path}")


# --- Element instances: {m, kind, kind_params, elements: [{id, weight, activity, arrival}]} ---

def parse_instance(data: Dict) -> Tuple[InstanceSequence, ConstraintFamily]:
    try:
        m = int(data["m"])
        elements = [Element(id=int(item["id"]), weight=float(item["weight"]),
                            activity=activity_from_json(item["activity"]), arrival=int(item["arrival"]))
                    for item in data["elements"]]
        kind = data["kind"]
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"Instance is missing or mistypes a field: {e}")
    if len(elements) != m:
        raise InstanceError(f"Instance declares m = {m} but lists {len(elements)} elements")
    seq = InstanceSequence(tuple(elements))
    family = create_family(kind, m, data.get("kind_params") or {})
    return seq, family


def instance_as_dict(seq: InstanceSequence, family: ConstraintFamily) -> Dict:
    return {"m": seq.m, "kind": family.kind, "kind_params": family.kind_params(), "elements": seq.elements_as_dicts()}


def load_instance(path: str) -> Tuple[InstanceSequence, ConstraintFamily]:
    seq, family = parse_instance(read_json(path))
    logger.info(f"Loaded {family.kind} instance with m = {seq.m} from {path}")
    return seq, family


def save_instance(path: str, seq: InstanceSequence, family: ConstraintFamily):
    write_json(path, instance_as_dict(seq, family))


# --- Matching instances: {U, V: [{arrival, weights, activity_pmf | activity_pmfs, weight_pmfs?}]} ---

def _parse_pmf(items: List[Dict]) -> DiscreteDistribution:
    try:
        return DiscreteDistribution(tuple(activity_from_json(item["value"]) for item in items),
                                    tuple(float(item["prob"]) for item in items))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"Malformed activity pmf {items!r}: {e}")


def _parse_weight_pmf(items: List[Dict]) -> DiscreteDistribution:
    try:
        return DiscreteDistribution(tuple(float(item["value"]) for item in items), tuple(float(item["prob"]) for item in items))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"Malformed weight pmf {items!r}: {e}")


def parse_matching_instance(data: Dict) -> MatchingInstance:
    try:
        n_machines = int(data["U"])
        jobs = []
        for item in data["V"]:
            weights = tuple(float(w) for w in item["weights"])
            if "activity_pmfs" in item:
                activity = tuple(_parse_pmf(pmf) for pmf in item["activity_pmfs"])
            else:
                shared = _parse_pmf(item["activity_pmf"])
                activity = tuple(shared for _ in weights)
            weight_dists = None
            if item.get("weight_pmfs") is not None:
                weight_dists = tuple(_parse_weight_pmf(pmf) for pmf in item["weight_pmfs"])
            jobs.append(Job(arrival=int(item["arrival"]), weights=weights, activity=activity, weight_dists=weight_dists))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"Matching instance is missing or mistypes a field: {e}")
    return MatchingInstance(n_machines=n_machines, jobs=tuple(jobs))


def matching_instance_as_dict(instance: MatchingInstance) -> Dict:
    jobs = []
    for job in instance.jobs:
        item = {"arrival": job.arrival, "weights": list(job.weights),
                "activity_pmfs": [dist.as_dicts() for dist in job.activity]}
        if job.weight_dists is not None:
            item["weight_pmfs"] = [dist.as_dicts() for dist in job.weight_dists]
        jobs.append(item)
    return {"U": instance.n_machines, "V": jobs}


def load_matching_instance(path: str) -> MatchingInstance:
    instance = parse_matching_instance(read_json(path))
    logger.info(f"Loaded matching instance |U| = {instance.n_machines}, |V| = {instance.n_jobs} from {path}")
    return instance


def save_matching_instance(path: str, instance: MatchingInstance):
    write_json(path, matching_instance_as_dict(instance))


# --- Weight streams for custom-file adversaries: {"weights": [[w_1e ...], ...]} ---

def load_weight_stream(path: str) -> np.ndarray:
    data = read_json(path)
    try:
        weights = np.array(data["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"Weight stream {path} must hold a rectangular 'weights' array: {e}")
    if weights.ndim != 2:
        raise InstanceError(f"Weight stream {path} must be a T x m array, got shape {weights.shape}")
    return weights


def save_weight_stream(path: str, weights: np.ndarray):
    write_json(path, {"weights": np.asarray(weights).tolist()})

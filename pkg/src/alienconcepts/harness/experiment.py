"""Running models on trials: pools, prediction reports, synthetic data, correlations."""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import asdict, dataclass, field

import jsonschema
import numpy as np

from ..baselines import FeatureTable, GcmParams, encode_string, feature_distance, gcm_predict, string_distance
from ..dsl.evaluate import Evaluator
from ..dsl.grammar import Grammar
from ..errors import ConstantVector, DimensionMismatch, MissingPool, SchemaError
from ..fitting import DEFAULT_PARAMS, FitParams, ResponseData, TrialPool, model_predictions, response_prob
from ..inference import HypothesisSet, mcmc_run
from .trials import TrialSpec

log = logging.getLogger(__name__)

MODELS = ("bayesian", "string-gcm", "feature-gcm")
REPORT_SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "model", "params", "trials"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "prediction_report"},
        "model": {"enum": list(MODELS)},
        "params": {"type": "object"},
        "config": {"type": "object"},
        "trials": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["trial_id", "items"],
                "properties": {
                    "trial_id": {"type": "string"},
                    "concept_id": {"type": "string"},
                    "n_examples": {"type": "integer", "minimum": 1},
                    "items": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["item_id", "q", "response_prob"],
                            "properties": {
                                "item_id": {"type": "string"},
                                "tag": {"type": ["string", "null"]},
                                "figure": {"type": "string"},
                                "q": {"type": "number", "minimum": 0, "maximum": 1},
                                "response_prob": {"type": "number", "minimum": 0, "maximum": 1},
                            },
                        },
                    },
                },
            },
        },
    },
}

COMPARISON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "model", "trials", "average_r", "scatter"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "comparison_report"},
        "trials": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["trial_id", "r", "n_items"],
                "properties": {"r": {"type": ["number", "null"], "minimum": -1, "maximum": 1}},
            },
        },
        "average_r": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "scatter": {"type": "array"},
    },
}


@dataclass
class RunConfig:
    """Settings shared by every stage of a pipeline run.

    Pools are sampled under ``sample_theta_*``; predictions re-score them under
    ``params``.  A flat sampling grammar keeps orientation- and
    configuration-specific programs in the pool so either parameter can later
    be re-weighted in both directions.
    """

    seed: int = 0
    chains: int = 3
    steps: int = 10_000
    depth_cap: int = 12
    pool_mode: str = "visited"
    burn_in: float = 0.1
    closure: bool = True
    sample_theta_orient: float = 0.5
    sample_theta_config: float = 0.5
    params: FitParams = field(default_factory=lambda: FitParams(*DEFAULT_PARAMS))
    gcm: GcmParams = field(default_factory=GcmParams)
    gcm_alpha: float = DEFAULT_PARAMS[2]
    gcm_beta: float = DEFAULT_PARAMS[3]
    feature_file: str = None
    relax_test_length: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"unknown config keys {sorted(unknown)}")
        if "params" in doc:
            doc["params"] = FitParams(**doc["params"])
        if "gcm" in doc:
            doc["gcm"] = GcmParams(**doc["gcm"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except FileNotFoundError:
            raise SchemaError(f"config file {path} does not exist") from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise SchemaError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        return d

    def sampling_grammar(self) -> Grammar:
        return Grammar(self.sample_theta_orient, self.sample_theta_config, self.depth_cap)


def trial_seed(seed: int, trial_id: str) -> int:
    """Per-trial seed: trials get independent streams from one run seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(trial_id.encode())])
    return int(ss.generate_state(1)[0])


_evaluators = {}


def evaluator_for(universe) -> Evaluator:
    ev = _evaluators.get(id(universe))
    if ev is None or ev.universe is not universe:
        ev = Evaluator(universe)
        _evaluators[id(universe)] = ev
    return ev


def infer_trial(spec: TrialSpec, cfg: RunConfig) -> HypothesisSet:
    hs = mcmc_run(
        cfg.sampling_grammar(),
        spec.universe,
        spec.training,
        cfg.steps,
        chains=cfg.chains,
        seed=trial_seed(cfg.seed, spec.trial_id),
        pool=cfg.pool_mode,
        burn_in=cfg.burn_in,
        evaluator=evaluator_for(spec.universe),
        closure=cfg.closure,
    )
    hs.meta["trial_id"] = spec.trial_id
    return hs


def load_pool(path, spec: TrialSpec) -> HypothesisSet:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise MissingPool(f"pool file {path} does not exist") from None
    if doc.get("trial_id") != spec.trial_id:
        raise SchemaError(f"{path} holds the pool of {doc.get('trial_id')!r}, not {spec.trial_id!r}")
    if doc.get("examples") != list(spec.training):
        raise SchemaError(f"{path} was sampled for different training examples")
    return HypothesisSet.from_dict(doc, evaluator_for(spec.universe))


def trial_pool(spec: TrialSpec, hs: HypothesisSet) -> TrialPool:
    return TrialPool(spec.trial_id, hs, list(spec.training), spec.items())


def model_q(model: str, spec: TrialSpec, cfg: RunConfig, pool: HypothesisSet = None, features=None) -> list:
    """Model probability of 'yes' for each test item, before the lapse layer."""
    if model == "bayesian":
        if pool is None:
            raise MissingPool(f"trial {spec.trial_id}: the Bayesian model needs a hypothesis pool")
        p = cfg.params
        return [float(v) for v in model_predictions(trial_pool(spec, pool), p.theta_orient, p.theta_config)]
    if model == "string-gcm":
        dist = string_distance(spec.universe, cfg.gcm)
    elif model == "feature-gcm":
        if features is None:
            if not cfg.feature_file:
                raise SchemaError("feature-gcm needs feature_file in the config")
            features = FeatureTable.load(cfg.feature_file)
        dist = feature_distance(spec.universe, features)
    else:
        raise SchemaError(f"unknown model {model!r}; choose from {MODELS}")
    return [gcm_predict(spec.training, y, cfg.gcm, dist) for y in spec.test_figures()]


def _lapse(model, cfg):
    if model == "bayesian":
        return cfg.params.alpha, cfg.params.beta
    return cfg.gcm_alpha, cfg.gcm_beta


def run_trial(model: str, spec: TrialSpec, cfg: RunConfig, pool: HypothesisSet = None, features=None) -> dict:
    """Per-item predictions for one trial."""
    qs = model_q(model, spec, cfg, pool, features)
    alpha, beta = _lapse(model, cfg)
    items = []
    for item, q in zip(spec.test, qs):
        items.append(
            {
                "item_id": item.item_id,
                "tag": item.tag,
                "figure": str(encode_string(spec.universe[item.figure])),
                "q": q,
                "response_prob": float(response_prob(q, alpha, beta)),
            }
        )
    return {
        "trial_id": spec.trial_id,
        "concept_id": spec.concept_id,
        "archetype": spec.archetype,
        "n_examples": len(spec.training),
        "items": items,
    }


def prediction_report(model: str, specs, cfg: RunConfig, pools: dict = None, features=None) -> dict:
    pools = pools or {}
    if model == "bayesian":
        params = cfg.params.as_dict()
    else:
        params = {**asdict(cfg.gcm), "alpha": cfg.gcm_alpha, "beta": cfg.gcm_beta}
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "prediction_report",
        "model": model,
        "params": params,
        "config": {"seed": cfg.seed, "chains": cfg.chains, "steps": cfg.steps, "depth_cap": cfg.depth_cap},
        "trials": [
            run_trial(model, s, cfg, pools.get(s.trial_id), features)
            for s in sorted(specs, key=lambda s: s.trial_id)
        ],
    }
    validate_report(report)
    return report


def validate_report(report: dict, schema: dict = REPORT_SCHEMA):
    try:
        jsonschema.validate(report, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"report {where}: {exc.message}") from None


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def load_report(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"report file {path} does not exist") from None
    validate_report(doc)
    return doc


def synthesize(report: dict, n_participants: int, seed: int) -> ResponseData:
    """Binomial yes-counts drawn from a report's response probabilities."""
    if n_participants < 1:
        raise ValueError("need at least one participant")
    rng = np.random.default_rng(seed)
    data = ResponseData()
    for trial in report["trials"]:
        for item in trial["items"]:
            n_yes = int(rng.binomial(n_participants, item["response_prob"]))
            data.add(trial["trial_id"], item["item_id"], n_yes, n_participants)
    return data


def pearson_r(model_probs, human_props) -> float:
    """Sample correlation of two equal-length vectors."""
    x = np.asarray(model_probs, dtype=float)
    y = np.asarray(human_props, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"vectors of shape {x.shape} and {y.shape}")
    if len(x) < 2:
        raise DimensionMismatch("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantVector("correlation is undefined for a constant vector")
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


def compare(report: dict, data: ResponseData) -> dict:
    """Per-trial and average correlations between a report and response data.

    Trials whose r is undefined (a constant vector) are listed with ``r =
    null`` and left out of the average.
    """
    rows = []
    scatter = []
    for trial in report["trials"]:
        tid = trial["trial_id"]
        observed = data.for_trial(tid)
        if not observed:
            continue
        model, human = [], []
        for item in trial["items"]:
            if item["item_id"] not in observed:
                continue
            n_yes, n_total = observed[item["item_id"]]
            if n_total == 0:
                continue
            model.append(item["response_prob"])
            human.append(n_yes / n_total)
            scatter.append(
                {
                    "trial_id": tid,
                    "item_id": item["item_id"],
                    "tag": item.get("tag"),
                    "model": item["response_prob"],
                    "human": n_yes / n_total,
                }
            )
        try:
            r = pearson_r(model, human)
        except (ConstantVector, DimensionMismatch) as exc:
            log.warning("trial %s: r undefined (%s); excluded from the average", tid, exc)
            r = None
        rows.append({"trial_id": tid, "r": r, "n_items": len(model)})
    defined = [row["r"] for row in rows if row["r"] is not None]
    out = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "comparison_report",
        "model": report["model"],
        "trials": rows,
        "average_r": sum(defined) / len(defined) if defined else None,
        "excluded": [row["trial_id"] for row in rows if row["r"] is None],
        "scatter": scatter,
    }
    validate_report(out, COMPARISON_SCHEMA)
    return out


def format_comparison(cmp: dict) -> str:
    """Correlation table: one line per trial, then the average."""
    width = max([len(row["trial_id"]) for row in cmp["trials"]] + [5])
    lines = [f"{'trial':<{width}}  {'r':>7}  n"]
    for row in cmp["trials"]:
        r = "undef" if row["r"] is None else f"{row['r']:.3f}"
        lines.append(f"{row['trial_id']:<{width}}  {r:>7}  {row['n_items']}")
    avg = "undef" if cmp["average_r"] is None else f"{cmp['average_r']:.3f}"
    lines.append(f"{cmp['model']}: average r = {avg}")
    return "\n".join(lines) + "\n"

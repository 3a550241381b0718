"""Response model and MCMC estimation of grammar and noise parameters.

Responses are aggregated per test item into binomial counts.  A response is a
model-driven guess with probability ``alpha`` and otherwise a lapse answered
'yes' with probability ``beta``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .dsl.grammar import Grammar, log_prior
from .errors import DegenerateData, MissingData, MissingPool, OutOfRange, SchemaError
from .inference import HypothesisSet, log_likelihood

PARAM_NAMES = ("theta_orient", "theta_config", "alpha", "beta")
DEFAULT_PARAMS = (0.999, 0.725, 0.839, 0.714)


@dataclass(frozen=True)
class FitParams:
    theta_orient: float
    theta_config: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise OutOfRange(f"{name}={v} must lie strictly inside (0, 1)")

    def as_tuple(self):
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def as_dict(self):
        return {n: getattr(self, n) for n in PARAM_NAMES}


def response_prob(q, alpha, beta):
    """Probability of a 'yes' given model probability ``q``."""
    for name, v in (("q", q), ("alpha", alpha), ("beta", beta)):
        arr = np.asarray(v, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
            raise OutOfRange(f"{name} must lie in [0, 1]")
    out = alpha * np.asarray(q, dtype=float) + (1.0 - alpha) * beta
    return float(out) if np.ndim(out) == 0 else out


class ResponseData:
    """Yes/total counts keyed by ``(trial_id, item_id)``."""

    def __init__(self, counts=None):
        self.counts = {}
        for key, (n_yes, n_total) in (counts or {}).items():
            self.add(key[0], key[1], n_yes, n_total)

    def add(self, trial_id, item_id, n_yes, n_total):
        n_yes, n_total = int(n_yes), int(n_total)
        if not 0 <= n_yes <= n_total:
            raise SchemaError(f"{trial_id}/{item_id}: need 0 <= n_yes <= n_total, got {n_yes}/{n_total}")
        self.counts[(str(trial_id), str(item_id))] = (n_yes, n_total)

    def __len__(self):
        return len(self.counts)

    def trials(self):
        return sorted({t for t, _ in self.counts})

    def for_trial(self, trial_id) -> dict:
        return {i: v for (t, i), v in self.counts.items() if t == trial_id}

    def proportion(self, trial_id, item_id) -> float:
        n_yes, n_total = self.counts[(trial_id, item_id)]
        return n_yes / n_total if n_total else float("nan")

    @classmethod
    def load(cls, path) -> "ResponseData":
        data = cls()
        try:
            fh = open(path, newline="")
        except FileNotFoundError:
            raise MissingData(f"response file {path} does not exist") from None
        with fh:
            reader = csv.DictReader(fh)
            need = {"trial_id", "item_id", "n_yes", "n_total"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise SchemaError(f"{path}: expected columns {sorted(need)}")
            for row in reader:
                data.add(row["trial_id"], row["item_id"], row["n_yes"], row["n_total"])
        return data

    def dumps(self) -> str:
        lines = ["trial_id,item_id,n_yes,n_total"]
        for (t, i), (y, n) in sorted(self.counts.items()):
            lines.append(f"{t},{i},{y},{n}")
        return "\n".join(lines) + "\n"


@dataclass
class TrialPool:
    """A trial's hypothesis pool with its examples and test items (figure ids)."""

    trial_id: str
    pool: HypothesisSet
    examples: list
    items: list  # (item_id, figure_id) pairs in test order

    def item_ids(self):
        return [i for i, _ in self.items]


@dataclass
class _Compiled:
    item_ids: list
    counts: np.ndarray  # groups x 4
    base: np.ndarray  # groups; log_const - k log|h| summed within group
    members: np.ndarray  # groups x items


def compile_pool(tp: TrialPool) -> _Compiled:
    """Collapse a pool to the statistics the response likelihood needs.

    Hypotheses inconsistent with the examples weigh nothing for any parameter
    value and are dropped; the rest are grouped by identical counts and test
    membership, their fixed log-weights combined with logaddexp.
    """
    groups = {}
    figs = [f for _, f in tp.items]
    for h in tp.pool.ordered():
        ll = log_likelihood(h, tp.examples)
        if ll == -math.inf:
            continue
        key = (h.counts.vector(), tuple(h.extension.mask >> f & 1 for f in figs))
        val = h.counts.log_const + ll
        groups[key] = np.logaddexp(groups[key], val) if key in groups else val
    if not groups:
        raise MissingPool(f"trial {tp.trial_id}: no pooled hypothesis explains the examples")
    keys = sorted(groups)
    return _Compiled(
        tp.item_ids(),
        np.array([k[0] for k in keys], dtype=float),
        np.array([groups[k] for k in keys]),
        np.array([k[1] for k in keys], dtype=float),
    )


def _theta_vector(theta_orient, theta_config):
    return np.array(
        [math.log(theta_orient), math.log1p(-theta_orient), math.log(theta_config), math.log1p(-theta_config)]
    )


def model_predictions(tp: TrialPool, theta_orient, theta_config, compiled=None) -> np.ndarray:
    """Posterior predictive per test item after re-scoring priors at new thetas."""
    c = compiled if compiled is not None else compile_pool(tp)
    scores = c.base + c.counts @ _theta_vector(theta_orient, theta_config)
    w = np.exp(scores - scores.max())
    w /= w.sum()
    return np.clip(w @ c.members, 0.0, 1.0)


def model_predictions_full(tp: TrialPool, theta_orient, theta_config) -> np.ndarray:
    """Same as :func:`model_predictions` but recomputing every prior from its program."""
    g = Grammar(**{**tp.pool.meta["grammar"], "theta_orient": theta_orient, "theta_config": theta_config})
    hyps = tp.pool.ordered()
    scores = np.array([log_prior(h.program, g) + log_likelihood(h, tp.examples) for h in hyps])
    w = np.exp(scores - scores.max())
    w /= w.sum()
    figs = [f for _, f in tp.items]
    members = np.array([[h.extension.mask >> f & 1 for f in figs] for h in hyps], dtype=float)
    return np.clip(w @ members, 0.0, 1.0)


def _binom_loglik(n_yes, n_total, p):
    return gammaln(n_total + 1) - gammaln(n_yes + 1) - gammaln(n_total - n_yes + 1) + xlogy(n_yes, p) + xlog1py(n_total - n_yes, -p)


class _Objective:
    """Binomial log-likelihood over all trials, with pools compiled once."""

    def __init__(self, trial_pools, data: ResponseData, rescoring="counts"):
        if not trial_pools:
            raise DegenerateData("no trials to fit")
        pools = {tp.trial_id: tp for tp in trial_pools}
        for t in data.trials():
            if t not in pools:
                raise MissingPool(f"responses given for trial {t} but no hypothesis pool")
        self.rescoring = rescoring
        self.parts = []
        for tid in sorted(pools):
            tp = pools[tid]
            rows = data.for_trial(tid)
            if not rows:
                raise MissingData(f"no responses for trial {tid}")
            ids = tp.item_ids()
            unknown = set(rows) - set(ids)
            if unknown:
                raise SchemaError(f"trial {tid}: responses for unknown items {sorted(unknown)}")
            sel = np.array([i in rows for i in ids])
            n_yes = np.array([rows[i][0] for i in ids if i in rows], dtype=float)
            n_tot = np.array([rows[i][1] for i in ids if i in rows], dtype=float)
            compiled = compile_pool(tp) if rescoring == "counts" else None
            self.parts.append((tp, compiled, sel, n_yes, n_tot))

    def __call__(self, theta_orient, theta_config, alpha, beta) -> float:
        total = 0.0
        for tp, compiled, sel, n_yes, n_tot in self.parts:
            if self.rescoring == "counts":
                q = model_predictions(tp, theta_orient, theta_config, compiled)
            else:
                q = model_predictions_full(tp, theta_orient, theta_config)
            r = alpha * q[sel] + (1.0 - alpha) * beta
            total += float(np.sum(_binom_loglik(n_yes, n_tot, r)))
        return total


def data_log_likelihood(fit: FitParams, trial_pools, data: ResponseData, rescoring: str = "counts") -> float:
    """Binomial log-likelihood of the responses under ``fit``.

    ``rescoring="counts"`` re-weights pools through expansion counts;
    ``"full"`` recomputes each program's prior from scratch.
    """
    return _Objective(trial_pools, data, rescoring)(*fit.as_tuple())


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass
class FitResult:
    chain: np.ndarray  # iterations x 4, probability scale
    log_lik: np.ndarray
    map: FitParams
    map_log_lik: float
    acceptance_rate: float
    step_size: float
    burn_in: int
    fixed: dict = field(default_factory=dict)

    def quantiles(self, qs=(0.05, 0.5, 0.95)) -> dict:
        kept = self.chain[self.burn_in:]
        return {name: [float(np.quantile(kept[:, j], q)) for q in qs] for j, name in enumerate(PARAM_NAMES)}

    def report(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "fit_result",
            "map": self.map.as_dict(),
            "map_log_likelihood": self.map_log_lik,
            "quantiles": {"levels": [0.05, 0.5, 0.95], **self.quantiles()},
            "acceptance_rate": self.acceptance_rate,
            "step_size": self.step_size,
            "iterations": int(len(self.chain)),
            "burn_in": self.burn_in,
            "fixed": dict(self.fixed),
        }


def adaptive_metropolis(log_target, z0, iters, rng, burn, step_size=0.3, window=100):
    """Random-walk Metropolis with a step size tuned during burn-in.

    ``log_target(z)`` returns ``(log density, aux)``; ``aux`` is recorded for
    every iteration.  Returns ``(states, aux, acceptance after burn-in, step)``.
    """
    z = np.asarray(z0, dtype=float)
    cur_t, cur_aux = log_target(z)
    states = np.empty((iters, len(z)))
    auxes = []
    accepted_after = 0
    window_acc = 0
    for it in range(iters):
        if len(z):
            prop = z + step_size * rng.standard_normal(len(z))
            t, aux = log_target(prop)
            if math.log(rng.random()) < t - cur_t:
                z, cur_t, cur_aux = prop, t, aux
                window_acc += 1
                if it >= burn:
                    accepted_after += 1
        states[it] = z
        auxes.append(cur_aux)
        if it < burn and (it + 1) % window == 0:
            rate = window_acc / window
            if rate < 0.2:
                step_size *= 0.7
            elif rate > 0.4:
                step_size *= 1.3
            window_acc = 0
    kept = iters - burn
    return states, auxes, (accepted_after / kept if kept else 0.0), step_size


def fit_mcmc(
    trial_pools,
    data: ResponseData,
    iters: int,
    seed: int = 0,
    burn_fraction: float = 0.2,
    init: FitParams = None,
    fixed: dict = None,
    step_size: float = 0.3,
) -> FitResult:
    """Metropolis-Hastings over (theta_orient, theta_config, alpha, beta).

    Proposals are Gaussian on the log-odds scale; priors are uniform on the
    probability scale, which contributes ``log p + log(1 - p)`` per free
    coordinate in log-odds space.  The step size adapts toward 20-40%
    acceptance during burn-in and is frozen afterwards.  Parameters listed in
    ``fixed`` are held at the given value (which may be 0 or 1).
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    objective = _Objective(trial_pools, data)
    fixed = dict(fixed or {})
    for name in fixed:
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {name}")
    free = [j for j, n in enumerate(PARAM_NAMES) if n not in fixed]
    rng = np.random.default_rng(seed)
    start = init.as_tuple() if init is not None else (0.5, 0.5, 0.5, 0.5)
    base = np.array([fixed.get(n, start[j]) for j, n in enumerate(PARAM_NAMES)], dtype=float)

    def log_target(zv):
        pv = base.copy()
        for k, j in enumerate(free):
            pv[j] = _expit(zv[k])
        if np.any(pv[free] <= 0.0) or np.any(pv[free] >= 1.0):
            return -math.inf, (pv, -math.inf)
        ll = objective(*pv)
        return ll + float(np.sum(np.log(pv[free]) + np.log1p(-pv[free]))), (pv, ll)

    burn = int(iters * burn_fraction)
    z0 = [_logit(base[j]) for j in free]
    _, aux, rate, step = adaptive_metropolis(log_target, z0, iters, rng, burn, step_size)
    chain = np.array([a[0] for a in aux])
    lls = np.array([a[1] for a in aux])
    best = int(np.argmax(lls))
    map_params = FitParams(*[min(max(v, 1e-12), 1 - 1e-12) for v in chain[best]])
    return FitResult(
        chain=chain,
        log_lik=lls,
        map=map_params,
        map_log_lik=float(lls[best]),
        acceptance_rate=rate,
        step_size=step,
        burn_in=burn,
        fixed=fixed,
    )

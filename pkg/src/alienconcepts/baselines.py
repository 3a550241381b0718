"""Exemplar (GCM) baselines over string encodings and external feature vectors."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, MissingFeature, NoParse, SchemaError, ZeroVector
from .fitting import _binom_loglik, _expit, adaptive_metropolis
from .geometry import Figure

_TOKEN = re.compile(r"[A-Za-z]+\d*|\d+|\S")


class StringEncoding(NamedTuple):
    parts: str
    config: str
    orient: str

    def __str__(self):
        return f"{self.parts}+{self.config}+{self.orient}"


def encode_string(f: Figure) -> StringEncoding:
    """Encode a figure from its least construction record.

    ``(p1p2)+1+180`` reads: primitives p1 and p2 in their first configuration,
    the whole turned 180 degrees.  Three parts nest as ``((p1p2)p3)`` with
    configuration indices joined by ``-``.
    """
    d = f.least_derivation()
    if d is None:
        raise NoParse("figure has no construction record")
    return StringEncoding(d.parts, "-".join(str(i) for i in d.configs), str(d.rotation))


def tokens(s: str) -> list:
    return _TOKEN.findall(s)


def levenshtein(a, b) -> int:
    """Unit-cost edit distance between two token sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ta in enumerate(a, 1):
        cur = [i]
        for j, tb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ta != tb)))
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class GcmParams:
    w_parts: float = 1.0
    w_config: float = 1.0
    w_orient: float = 1.0
    w_scale: float = 1.0

    def __post_init__(self):
        ws = (self.w_parts, self.w_config, self.w_orient)
        if min(ws) < 0 or sum(ws) == 0:
            raise ValueError("substring weights must be non-negative and not all zero")
        if not self.w_scale > 0:
            raise ValueError("w_scale must be positive")


def weighted_distance(a: StringEncoding, b: StringEncoding, g: GcmParams) -> float:
    total = g.w_parts + g.w_config + g.w_orient
    d = (
        g.w_parts * levenshtein(tokens(a.parts), tokens(b.parts))
        + g.w_config * levenshtein(tokens(a.config), tokens(b.config))
        + g.w_orient * levenshtein(tokens(a.orient), tokens(b.orient))
    )
    return d / total


def gcm_predict(examples, y, g: GcmParams, dist) -> float:
    """Mean exponentially decaying similarity of ``y`` to the examples."""
    examples = list(examples)
    if not examples:
        raise ValueError("need at least one example")
    return sum(math.exp(-g.w_scale * dist(y, x)) for x in examples) / len(examples)


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vectors of shape {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine distance is undefined for a zero vector")
    return float(min(2.0, max(0.0, 1.0 - np.dot(u, v) / (nu * nv))))


class FeatureTable:
    """Precomputed feature vectors keyed by figure key (canonical cell text)."""

    def __init__(self, vectors: dict):
        dims = {len(v) for v in vectors.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"feature rows have differing dimensions {sorted(dims)}")
        self.vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}

    def __getitem__(self, key):
        try:
            return self.vectors[key]
        except KeyError:
            raise MissingFeature(f"no feature vector for figure {key}") from None

    def distance(self, a_key, b_key) -> float:
        return cosine_distance(self[a_key], self[b_key])

    @classmethod
    def load(cls, path) -> "FeatureTable":
        vectors = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh, delimiter="\t")
            for lineno, row in enumerate(reader, 1):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    vectors[row[0]] = [float(x) for x in row[1:]]
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: non-numeric feature value") from None
        return cls(vectors)


def string_distance(universe, g: GcmParams):
    """Distance function over universe ids using the string encodings."""
    cache = {}

    def enc(i):
        if i not in cache:
            cache[i] = encode_string(universe[i])
        return cache[i]

    return lambda y, x: weighted_distance(enc(y), enc(x), g)


def feature_distance(universe, table: FeatureTable):
    return lambda y, x: table.distance(universe[y].shape.key, universe[x].shape.key)


class GcmTrial(NamedTuple):
    """What the GCM needs from a trial: examples and test items as universe ids."""

    trial_id: str
    universe: object
    examples: list
    items: list  # (item_id, figure_id)


GCM_PARAM_NAMES = ("w_parts", "w_config", "w_orient", "w_scale", "alpha", "beta")
LOG_WEIGHT_BOUNDS = (math.log(1e-3), math.log(1e3))


@dataclass
class GcmFitResult:
    chain: np.ndarray  # iterations x 6: four weights, alpha, beta
    log_lik: np.ndarray
    map: GcmParams
    map_alpha: float
    map_beta: float
    map_log_lik: float
    acceptance_rate: float
    step_size: float
    burn_in: int

    def report(self) -> dict:
        kept = self.chain[self.burn_in:]
        return {
            "schema_version": 1,
            "kind": "gcm_fit_result",
            "map": {**self.map.__dict__, "alpha": self.map_alpha, "beta": self.map_beta},
            "map_log_likelihood": self.map_log_lik,
            "median": {n: float(np.median(kept[:, j])) for j, n in enumerate(GCM_PARAM_NAMES)},
            "acceptance_rate": self.acceptance_rate,
            "step_size": self.step_size,
            "iterations": int(len(self.chain)),
            "burn_in": self.burn_in,
        }


def _component_distances(trial: GcmTrial) -> np.ndarray:
    """items x examples x 3 array of per-substring edit distances."""
    enc = {}

    def e(i):
        if i not in enc:
            s = encode_string(trial.universe[i])
            enc[i] = (tokens(s.parts), tokens(s.config), tokens(s.orient))
        return enc[i]

    out = np.empty((len(trial.items), len(trial.examples), 3))
    for a, (_, y) in enumerate(trial.items):
        for b, x in enumerate(trial.examples):
            out[a, b] = [levenshtein(u, v) for u, v in zip(e(y), e(x))]
    return out


def fit_gcm(trials, data, iters: int, seed: int = 0, burn_fraction: float = 0.2, step_size: float = 0.3):
    """Metropolis-Hastings over string-GCM weights and the lapse layer.

    Weights move on the log scale under a flat prior over [1e-3, 1e3];
    alpha and beta move on the log-odds scale under uniform priors.
    """
    if iters < 1:
        raise ValueError("iters must be positive")
    prepared = []
    for t in trials:
        rows = data.for_trial(t.trial_id)
        idx = [k for k, (item_id, _) in enumerate(t.items) if item_id in rows]
        if not idx:
            continue
        d = _component_distances(t)[idx]
        n_yes = np.array([rows[t.items[k][0]][0] for k in idx], dtype=float)
        n_tot = np.array([rows[t.items[k][0]][1] for k in idx], dtype=float)
        prepared.append((d, n_yes, n_tot))
    if not prepared:
        raise DimensionMismatch("no responses match any trial item")
    lo, hi = LOG_WEIGHT_BOUNDS

    def log_target(z):
        if np.any(z[:4] < lo) or np.any(z[:4] > hi):
            return -math.inf, (z, -math.inf)
        w = np.exp(z[:4])
        alpha, beta = _expit(z[4]), _expit(z[5])
        if not (0 < alpha < 1 and 0 < beta < 1):
            return -math.inf, (z, -math.inf)
        ll = 0.0
        for d, n_yes, n_tot in prepared:
            dist = d @ w[:3] / w[:3].sum()
            q = np.exp(-w[3] * dist).mean(axis=1)
            p = alpha * q + (1 - alpha) * beta
            ll += float(np.sum(_binom_loglik(n_yes, n_tot, p)))
        jac = math.log(alpha) + math.log1p(-alpha) + math.log(beta) + math.log1p(-beta)
        return ll + jac, (z, ll)

    rng = np.random.default_rng(seed)
    burn = int(iters * burn_fraction)
    z0 = np.zeros(6)
    _, aux, rate, step = adaptive_metropolis(log_target, z0, iters, rng, burn, step_size)
    zs = np.array([a[0] for a in aux])
    lls = np.array([a[1] for a in aux])
    chain = np.column_stack([np.exp(zs[:, :4]), 1 / (1 + np.exp(-zs[:, 4:]))])
    best = int(np.argmax(lls))
    m = chain[best]
    return GcmFitResult(
        chain=chain,
        log_lik=lls,
        map=GcmParams(*m[:4]),
        map_alpha=float(m[4]),
        map_beta=float(m[5]),
        map_log_lik=float(lls[best]),
        acceptance_rate=rate,
        step_size=step,
        burn_in=burn,
    )

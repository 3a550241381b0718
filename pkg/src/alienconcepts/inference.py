"""Size-principle likelihood, tree-regeneration MCMC and posterior prediction."""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .dsl.evaluate import Evaluator, Extension
from .dsl.grammar import (
    START,
    ExpansionCounts,
    Grammar,
    enumerate_programs,
    expansion_counts,
    log_prior,
    positions,
    replace_at,
    sample_program,
    sample_subtree,
    subtree_at,
)
from .dsl.syntax import AllRotations, Attach, AttachFixed, children, node_count, parse_program, to_text
from .errors import AllZeroWeights, IllTypedProgram, SchemaError, UnknownFigure

POOL_SCHEMA_VERSION = 1


@dataclass
class Hypothesis:
    program: object
    text: str
    counts: ExpansionCounts
    extension: Extension
    log_prior: float

    @property
    def size(self) -> int:
        return self.extension.size

    @classmethod
    def build(cls, program, grammar: Grammar, evaluator: Evaluator, text: str = None):
        counts = expansion_counts(program, grammar)
        return cls(
            program,
            text or to_text(program),
            counts,
            evaluator.extension(program),
            counts.log_prior(grammar.theta_orient, grammar.theta_config),
        )


def _check_ids(ids, n):
    for i in ids:
        if not isinstance(i, (int, np.integer)) or not 0 <= i < n:
            raise UnknownFigure(f"figure id {i!r} is not in the universe")


def log_likelihood(h: Hypothesis, examples, universe_size: int = None) -> float:
    """``-k log|h|`` when every example is in the extension, else ``-inf``."""
    if not examples:
        raise ValueError("need at least one example")
    if universe_size is not None:
        _check_ids(examples, universe_size)
    size = h.extension.size
    if size == 0:
        return -math.inf
    mask = h.extension.mask
    for x in examples:
        if not mask >> x & 1:
            return -math.inf
    return -len(examples) * math.log(size)


@dataclass
class HypothesisSet:
    """Distinct hypotheses pooled from MCMC chains, keyed by program text."""

    hypotheses: dict = field(default_factory=dict)
    visits: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.ordered())

    def ordered(self) -> list:
        return [self.hypotheses[k] for k in sorted(self.hypotheses)]

    def add(self, h: Hypothesis):
        if h.text not in self.hypotheses:
            self.hypotheses[h.text] = h
            self.visits.setdefault(h.text, 0)

    def map_hypothesis(self, examples):
        best = None
        best_score = -math.inf
        for h in self.ordered():
            score = h.log_prior + log_likelihood(h, examples)
            if score > best_score:
                best, best_score = h, score
        return best

    def to_dict(self) -> dict:
        rows = []
        for h in self.ordered():
            rows.append(
                {
                    "program": h.text,
                    "counts": list(h.counts.vector()),
                    "log_const": h.counts.log_const,
                    "size": h.size,
                    "visits": self.visits.get(h.text, 0),
                }
            )
        return {"schema_version": POOL_SCHEMA_VERSION, "kind": "hypothesis_pool", **self.meta, "hypotheses": rows}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict, evaluator: Evaluator) -> "HypothesisSet":
        if doc.get("schema_version") != POOL_SCHEMA_VERSION or doc.get("kind") != "hypothesis_pool":
            raise SchemaError("not a hypothesis pool file")
        meta = {k: v for k, v in doc.items() if k not in ("schema_version", "kind", "hypotheses")}
        g = Grammar(**meta["grammar"])
        hs = cls(meta=meta)
        for row in doc["hypotheses"]:
            prog = parse_program(row["program"])
            yes, no, free, fixed = row["counts"]
            counts = ExpansionCounts(yes, no, free, fixed, row["log_const"])
            ext = evaluator.extension(prog)
            if ext.size != row["size"]:
                raise SchemaError(f"pool entry {row['program']} has size {ext.size}, file says {row['size']}")
            h = Hypothesis(prog, row["program"], counts, ext, counts.log_prior(g.theta_orient, g.theta_config))
            hs.hypotheses[h.text] = h
            hs.visits[h.text] = row["visits"]
        return hs


def _differing_path(a, b):
    """Deepest path whose subtree contains every difference; None if equal."""
    if a == b:
        return None
    path = ()
    while True:
        if type(a) is not type(b):
            return path
        ka, kb = children(a), children(b)
        if not ka:
            return path
        # attributes other than children (angle, index, name) must match to descend
        if _attrs(a) != _attrs(b):
            return path
        diff = [i for i, (x, y) in enumerate(zip(ka, kb)) if x != y]
        if len(diff) != 1:
            return path
        path = path + (diff[0],)
        a, b = ka[diff[0]], kb[diff[0]]


def _attrs(node):
    return tuple(v for k, v in vars(node).items() if k not in ("child", "left", "right", "body", "over"))


def log_proposal(src, dst, grammar: Grammar, src_positions=None) -> float:
    """Log probability that one regeneration step turns ``src`` into ``dst``.

    Sums over every node of ``src`` whose regeneration can produce ``dst``.
    """
    pos = src_positions if src_positions is not None else positions(src, START)
    d = _differing_path(src, dst)
    labels = dict(pos)
    if d is None:
        candidates = [p for p, _ in pos]
    else:
        candidates = [d[:i] for i in range(len(d) + 1)]
    total = -math.inf
    for path in candidates:
        label = labels[path]
        try:
            lp = log_prior(subtree_at(dst, path), grammar, label)
        except IllTypedProgram:
            continue
        total = np.logaddexp(total, lp)
    return float(total) - math.log(len(pos))


MAX_VARIANTS = 200


def parameter_variants(program, n_indices: int, limit: int = MAX_VARIANTS) -> list:
    """Programs reachable by changing only what the grammar parameters govern.

    The root ``all-rotations`` is toggled and every ``attach``/``attach*`` node
    takes each of its ``1 + n_indices`` forms.  If that product exceeds
    ``limit`` only the orientation toggle is applied.
    """
    body = program.child if isinstance(program, AllRotations) else program
    slots = [
        path for path, _ in positions(body, START) if isinstance(subtree_at(body, path), (Attach, AttachFixed))
    ]
    forms = [None] + list(range(1, n_indices + 1))
    if 2 * len(forms) ** len(slots) > limit:
        slots = []
    bodies = []
    for combo in itertools.product(forms, repeat=len(slots)):
        prog = body
        for path, idx in zip(slots, combo):
            node = subtree_at(prog, path)
            new = Attach(node.left, node.right) if idx is None else AttachFixed(node.left, node.right, idx)
            prog = replace_at(prog, path, new)
        bodies.append(prog)
    return bodies + [AllRotations(b) for b in bodies]


def _chain_seeds(seed, chains):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(chains)]


def mcmc_run(
    grammar: Grammar,
    universe,
    examples,
    steps: int,
    chains: int = 3,
    seed: int = 0,
    pool: str = "visited",
    burn_in: float = 0.1,
    evaluator: Evaluator = None,
    closure: bool = True,
) -> HypothesisSet:
    """Tree-regeneration Metropolis-Hastings over programs.

    ``pool="visited"`` keeps every hypothesis the chains evaluated, rejected
    proposals included; ``pool="accepted"`` keeps chain states only.  Visit
    counts record chain occupancy after the burn-in fraction.

    With ``closure`` every pooled hypothesis consistent with the examples is
    joined by its :func:`parameter_variants`.  Re-weighting a pool under new
    grammar parameters moves mass along exactly these directions, and a chain
    run under one setting rarely visits all of them (``attach*`` indices also
    wrap, so several variants may share an extension).
    """
    if steps < 1 or chains < 1:
        raise ValueError("steps and chains must be positive")
    if pool not in ("visited", "accepted"):
        raise ValueError("pool must be 'visited' or 'accepted'")
    examples = list(examples)
    _check_ids(examples, len(universe))
    ev = evaluator if evaluator is not None else Evaluator(universe)
    hs = HypothesisSet()
    cache = {}

    def hyp(program):
        text = to_text(program)
        h = cache.get(text)
        if h is None:
            h = Hypothesis.build(program, grammar, ev, text)
            cache[text] = h
        return h

    acceptance = []
    burn = int(steps * burn_in)
    for seed_c in _chain_seeds(seed, chains):
        rng = random.Random(seed_c)
        cur = hyp(sample_program(grammar, rng))
        cur_score = cur.log_prior + log_likelihood(cur, examples)
        cur_pos = positions(cur.program, START)
        hs.add(cur)
        accepted = 0
        for step in range(steps):
            path, label = cur_pos[int(rng.random() * len(cur_pos))]
            new_sub = sample_subtree(grammar, rng, label)
            prop = hyp(replace_at(cur.program, path, new_sub))
            prop_pos = positions(prop.program, START)
            if pool == "visited":
                hs.add(prop)
            prop_score = prop.log_prior + log_likelihood(prop, examples)
            if prop.text == cur.text:
                accept = True
            elif cur_score == -math.inf:
                accept = True
            elif prop_score == -math.inf:
                accept = False
            else:
                fwd = log_proposal(cur.program, prop.program, grammar, cur_pos)
                back = log_proposal(prop.program, cur.program, grammar, prop_pos)
                log_ratio = (prop_score + back) - (cur_score + fwd)
                accept = log_ratio >= 0 or rng.random() < math.exp(log_ratio)
            if accept:
                cur, cur_score, cur_pos = prop, prop_score, prop_pos
                accepted += 1
                hs.add(cur)
            if step >= burn:
                hs.visits[cur.text] = hs.visits.get(cur.text, 0) + 1
        acceptance.append(accepted / steps)
    if closure:
        for h in list(hs.hypotheses.values()):
            if log_likelihood(h, examples) == -math.inf:
                continue
            for variant in parameter_variants(h.program, grammar.n_indices):
                try:
                    hs.add(hyp(variant))
                except IllTypedProgram:
                    pass  # variant breaks the depth cap
    hs.meta = {
        "grammar": grammar.to_dict(),
        "seed": seed,
        "steps": steps,
        "chains": chains,
        "pool_mode": pool,
        "burn_in": burn_in,
        "closure": closure,
        "examples": examples,
        "acceptance_rates": acceptance,
    }
    return hs


def posterior_weights(hs, examples, theta_orient: float, theta_config: float) -> np.ndarray:
    """Normalized posterior over the pool, re-scoring priors at new parameters."""
    hyps = hs.ordered() if isinstance(hs, HypothesisSet) else list(hs)
    if not hyps:
        raise AllZeroWeights("empty hypothesis set")
    scores = np.array(
        [h.counts.log_prior(theta_orient, theta_config) + log_likelihood(h, examples) for h in hyps]
    )
    top = scores.max()
    if not np.isfinite(top):
        raise AllZeroWeights("no hypothesis is consistent with the examples")
    w = np.exp(scores - top)
    return w / w.sum()


def predict(hs, weights, y: int, universe_size: int = None) -> float:
    """Posterior predictive probability that figure ``y`` belongs to the concept."""
    if universe_size is not None:
        _check_ids([y], universe_size)
    hyps = hs.ordered() if isinstance(hs, HypothesisSet) else list(hs)
    q = 0.0
    for h, w in zip(hyps, weights):
        if w and h.extension.mask >> y & 1:
            q += w
    return float(min(1.0, q))


def membership_matrix(hs, items) -> np.ndarray:
    hyps = hs.ordered() if isinstance(hs, HypothesisSet) else list(hs)
    return np.array([[h.extension.mask >> y & 1 for y in items] for h in hyps], dtype=float)


@dataclass
class ExactPosterior:
    programs: list
    masks: list
    log_priors: np.ndarray
    weights: np.ndarray

    def predict(self, y: int) -> float:
        q = 0.0
        for m, w in zip(self.masks, self.weights):
            if w and m >> y & 1:
                q += w
        return float(min(1.0, q))

    def predict_many(self, ys) -> list:
        return [self.predict(y) for y in ys]

    def map_program(self):
        return self.programs[int(np.argmax(self.weights))]


def exact_posterior(
    grammar: Grammar,
    universe,
    examples,
    depth_cap: int = None,
    budget: int = 10**6,
    evaluator: Evaluator = None,
) -> ExactPosterior:
    """Posterior over every program within the depth cap, by full enumeration."""
    if depth_cap is not None:
        grammar = grammar.with_params(depth_cap=depth_cap)
    examples = list(examples)
    _check_ids(examples, len(universe))
    ev = evaluator if evaluator is not None else Evaluator(universe)
    programs = enumerate_programs(grammar, START, budget)
    masks = [ev.mask(p) for p in programs]
    lps = np.array([log_prior(p, grammar) for p in programs])
    need = 0
    for x in examples:
        need |= 1 << x
    k = len(examples)
    scores = np.full(len(programs), -math.inf)
    for i, m in enumerate(masks):
        if m & need == need:
            scores[i] = lps[i] - k * math.log(bin(m).count("1"))
    top = scores.max()
    if not np.isfinite(top):
        raise AllZeroWeights("no program within the depth cap explains the examples")
    w = np.exp(scores - top)
    return ExactPosterior(programs, masks, lps, w / w.sum())


def pool_size_summary(hs: HypothesisSet) -> dict:
    sizes = [node_count(h.program) for h in hs.ordered()]
    return {"hypotheses": len(hs), "mean_nodes": float(np.mean(sizes)) if sizes else 0.0}

"""Command-line interface.

    alienconcepts enumerate --primitives bowtie arrow flag diamond
    alienconcepts sample -n 5
    alienconcepts infer --out pools/
    alienconcepts predict --pools pools/ --out report.json
    alienconcepts synthesize --pools pools/ --participants 25 --out responses.csv
    alienconcepts fit --pools pools/ --responses responses.csv --out fit.json
    alienconcepts compare --report report.json --responses responses.csv
    alienconcepts render --encoding "(p1p2)+1+180" --primitives bowtie arrow flag diamond

Failures print ``{"error": CODE, "message": ...}`` on stderr and exit with
status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from .baselines import GcmTrial, fit_gcm
from .dsl.grammar import Grammar, log_prior, sample_program
from .dsl.syntax import to_text
from .errors import AlienError, SchemaError
from .fitting import DEFAULT_PARAMS, FitParams, ResponseData, fit_mcmc
from .harness import experiment as ex
from .harness.render import SvgStyle, render_svg
from .harness.trials import bundled_trial_paths, load_trial, resolve_figure, trial_universe

log = logging.getLogger("alienconcepts")


def _global_flags(default=None) -> argparse.ArgumentParser:
    # subcommands repeat the flags with SUPPRESS so they do not reset values
    # given before the subcommand name
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=default, help="run seed (default 0)")
    g.add_argument("--config", default=default, help="JSON run configuration")
    g.add_argument("--chains", type=int, default=default, help="MCMC chains per trial")
    g.add_argument("--steps", type=int, default=default, help="MCMC steps per chain")
    g.add_argument("--depth-cap", type=int, default=default, help="grammar depth cap")
    g.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return p


def _config(args) -> ex.RunConfig:
    cfg = ex.RunConfig.load(args.config) if args.config else ex.RunConfig()
    for flag, attr in (("seed", "seed"), ("chains", "chains"), ("steps", "steps"), ("depth_cap", "depth_cap")):
        v = getattr(args, flag)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg


def _trials(args, cfg):
    paths = args.trials or bundled_trial_paths()
    return [load_trial(p, relax_test_length=cfg.relax_test_length) for p in paths]


def _pool_path(directory, trial_id) -> Path:
    return Path(directory) / f"{trial_id}.pool.json"


def _pools(args, specs, cfg) -> dict:
    """Pools from ``--pools`` when given, otherwise fresh inference."""
    if args.pools:
        return {s.trial_id: ex.load_pool(_pool_path(args.pools, s.trial_id), s) for s in specs}
    return {s.trial_id: ex.infer_trial(s, cfg) for s in specs}


def _write(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_enumerate(args, cfg):
    names = tuple(args.primitives)
    u = trial_universe(names, args.max_parts)
    by_parts = {}
    for n in u.part_counts:
        by_parts[str(n)] = by_parts.get(str(n), 0) + 1
    configs = {
        f"{a}{b}": len(u.attachments(u.base[a], u.base[b])) for a in u.primitive_ids for b in u.primitive_ids
    }
    doc = {"primitives": dict(zip(u.primitive_ids, names)), "figures": len(u), "by_parts": by_parts, "configurations": configs}
    _write(ex.dumps(doc), args.out)


def cmd_sample(args, cfg):
    g = Grammar(
        args.theta_orient if args.theta_orient is not None else cfg.params.theta_orient,
        args.theta_config if args.theta_config is not None else cfg.params.theta_config,
        cfg.depth_cap,
    )
    rng = random.Random(cfg.seed)
    lines = []
    for _ in range(args.n):
        prog = sample_program(g, rng)
        lines.append(f"{log_prior(prog, g):.6f}\t{to_text(prog)}")
    _write("\n".join(lines) + "\n", args.out)


def cmd_infer(args, cfg):
    specs = _trials(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for s in specs:
        hs = ex.infer_trial(s, cfg)
        path = _pool_path(out, s.trial_id)
        path.write_text(hs.dumps())
        summary.append({"trial_id": s.trial_id, "hypotheses": len(hs), "pool": str(path),
                        "acceptance_rates": hs.meta["acceptance_rates"]})
    sys.stdout.write(ex.dumps({"pools": summary}))


def _params(args, cfg) -> FitParams:
    if getattr(args, "params", None):
        return FitParams(*args.params)
    if getattr(args, "fit", None):
        with open(args.fit) as fh:
            return FitParams(**json.load(fh)["map"])
    return cfg.params


def _report(args, cfg, specs):
    if args.model == "bayesian":
        pools = _pools(args, specs, cfg)
        return ex.prediction_report("bayesian", specs, cfg, pools)
    return ex.prediction_report(args.model, specs, cfg)


def cmd_predict(args, cfg):
    cfg.params = _params(args, cfg)
    specs = _trials(args, cfg)
    _write(ex.dumps(_report(args, cfg, specs)), args.out)


def cmd_synthesize(args, cfg):
    cfg.params = _params(args, cfg)
    if args.report:
        report = ex.load_report(args.report)
    else:
        specs = _trials(args, cfg)
        report = ex.prediction_report("bayesian", specs, cfg, _pools(args, specs, cfg))
    data = ex.synthesize(report, args.participants, cfg.seed)
    _write(data.dumps(), args.out)


def cmd_fit(args, cfg):
    data = ResponseData.load(args.responses)
    specs = [s for s in _trials(args, cfg) if data.for_trial(s.trial_id)]
    if not specs:
        raise SchemaError("no trial has responses in the response file")
    if args.model == "bayesian":
        pools = _pools(args, specs, cfg)
        tps = [ex.trial_pool(s, pools[s.trial_id]) for s in specs]
        fixed = None
        if args.fix:
            fixed = {}
            for kv in args.fix:
                name, _, value = kv.partition("=")
                fixed[name] = float(value)
        result = fit_mcmc(tps, data, args.iters, seed=cfg.seed, fixed=fixed)
    elif args.model == "string-gcm":
        trials = [GcmTrial(s.trial_id, s.universe, s.training, s.items()) for s in specs]
        result = fit_gcm(trials, data, args.iters, seed=cfg.seed)
    else:
        raise SchemaError("fit supports the bayesian and string-gcm models")
    _write(ex.dumps(result.report()), args.out)


def cmd_compare(args, cfg):
    report = ex.load_report(args.report)
    data = ResponseData.load(args.responses)
    cmp = ex.compare(report, data)
    if args.out:
        _write(ex.dumps(cmp), args.out)
    sys.stdout.write(ex.format_comparison(cmp))


def cmd_render(args, cfg):
    style = SvgStyle(color=args.color, unit=args.unit)
    if args.trial:
        spec = load_trial(args.trial, relax_test_length=True)
        u = spec.universe
        if args.item is None:
            raise SchemaError("--trial needs --item (a test item id or train:<index>)")
        if args.item.startswith("train:"):
            fid = spec.training[int(args.item.split(":", 1)[1])]
        else:
            match = [t.figure for t in spec.test if t.item_id == args.item]
            if not match:
                raise SchemaError(f"trial {spec.trial_id} has no item {args.item!r}")
            fid = match[0]
    else:
        if not args.primitives or not args.encoding:
            raise SchemaError("render needs --trial/--item or --primitives with --encoding")
        u = trial_universe(tuple(args.primitives))
        fid = resolve_figure({"encoding": args.encoding}, u)
    _write(render_svg(u[fid], style, u.primitives), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alienconcepts", description="Concept learning over compositional figures: program induction and exemplar baselines.", parents=[_global_flags()])
    common = _global_flags(argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=func)
        return p

    def trial_args(p):
        p.add_argument("--trials", nargs="+", help="trial files (default: the bundled suite)")

    p = add("enumerate", cmd_enumerate, "universe statistics for four catalog primitives")
    p.add_argument("--primitives", nargs=4, required=True)
    p.add_argument("--max-parts", type=int, default=3)
    p.add_argument("--out")

    p = add("sample", cmd_sample, "draw programs from the grammar")
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--theta-orient", type=float)
    p.add_argument("--theta-config", type=float)
    p.add_argument("--out")

    p = add("infer", cmd_infer, "run MCMC on trials and write hypothesis pools")
    trial_args(p)
    p.add_argument("--out", required=True, help="directory for <trial_id>.pool.json files")

    for name, func, help_text in (
        ("predict", cmd_predict, "write a prediction report"),
        ("synthesize", cmd_synthesize, "simulate ideal-learner responses"),
    ):
        p = add(name, func, help_text)
        trial_args(p)
        p.add_argument("--pools", help="directory written by infer (default: run inference)")
        p.add_argument("--params", type=float, nargs=4, metavar=("THETA_O", "THETA_C", "ALPHA", "BETA"),
                       help=f"model parameters (default {DEFAULT_PARAMS})")
        p.add_argument("--fit", help="take parameters from the MAP of a fit result")
        p.add_argument("--out")
        if name == "predict":
            p.add_argument("--model", choices=ex.MODELS, default="bayesian")
        else:
            p.add_argument("--report", help="draw from this report instead of running the model")
            p.add_argument("--participants", type=int, default=25)

    p = add("fit", cmd_fit, "estimate parameters from response counts")
    trial_args(p)
    p.add_argument("--responses", required=True)
    p.add_argument("--pools")
    p.add_argument("--model", choices=("bayesian", "string-gcm"), default="bayesian")
    p.add_argument("--iters", type=int, default=50_000)
    p.add_argument("--fix", nargs="*", metavar="NAME=VALUE", help="hold parameters fixed")
    p.add_argument("--out")

    p = add("compare", cmd_compare, "correlate a report with response data")
    p.add_argument("--report", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--out", help="also write the full comparison (with scatter rows) as JSON")

    p = add("render", cmd_render, "draw a figure as SVG")
    p.add_argument("--trial")
    p.add_argument("--item")
    p.add_argument("--primitives", nargs=4)
    p.add_argument("--encoding")
    p.add_argument("--color", action="store_true")
    p.add_argument("--unit", type=int, default=24)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except AlienError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return 2
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

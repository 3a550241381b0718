import copy
import json
import math
import os
from pathlib import Path

import pytest

from alienconcepts import cli
from alienconcepts.errors import (
    ConstantVector,
    DimensionMismatch,
    InvalidFigure,
    MissingPool,
    SchemaError,
    UnknownPrimitive,
)
from alienconcepts.fitting import ResponseData
from alienconcepts.geometry import Primitive, primitive_figure
from alienconcepts.harness import experiment as ex
from alienconcepts.harness.render import SvgStyle, render_svg
from alienconcepts.harness.trials import (
    ARCHETYPES,
    TRIAL_SCHEMA_VERSION,
    bundled_trial_paths,
    load_trial,
    parse_trial,
    resolve_figure,
)

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def minimal_doc(n_test=9):
    return {
        "schema_version": TRIAL_SCHEMA_VERSION,
        "trial_id": "tiny",
        "primitives": ["bar", "wedge", "trapezoid", "stair"],
        "training": [{"encoding": "(p1p4)+1+0"}],
        "test": [{"id": f"t{i}", "encoding": "(p1p4)+1+0"} for i in range(n_test)],
    }


class TestTrials:
    def test_bundled_suite(self, bundled):
        assert len(bundled) >= 10
        assert {s.archetype for s in bundled.values()} == set(ARCHETYPES)
        for s in bundled.values():
            assert 9 <= len(s.test) <= 13
            assert any(t.rotation_of is not None for t in s.test)

    def test_set_size_pairs_share_concept(self, bundled):
        by_concept = {}
        for s in bundled.values():
            by_concept.setdefault(s.concept_id, set()).add(len(s.training))
        assert {3, 6} in by_concept.values()

    def test_rotation_items_are_rotations(self, bundled):
        for s in bundled.values():
            for t in s.test:
                if t.rotation_of is not None:
                    src = s.training[t.rotation_of]
                    assert t.figure in {s.universe.rotated(src, a) for a in (90, 180, 270)}

    def test_concept_explains_training(self, bundled):
        from alienconcepts.dsl.evaluate import Evaluator
        from alienconcepts.dsl.syntax import parse_program

        for s in bundled.values():
            ext = Evaluator(s.universe).extension(parse_program(s.concept))
            assert all(x in ext for x in s.training)

    def test_three_descriptions_agree(self, rich_universe):
        u = rich_universe
        fid = resolve_figure({"encoding": "(p1p2)+1+90"}, u)
        f = u[fid]
        cells = [[c.x, c.y, c.half.name] for c in f.shape.cells]
        assert resolve_figure({"cells": cells}, u) == fid
        parse = min(u[resolve_figure({"encoding": "(p1p2)+1+0"}, u)].parses)
        parts = [list(p) for p in parse]
        assert resolve_figure({"parts": parts, "rotation": 90}, u) == fid

    def test_encoding_errors(self, rich_universe):
        with pytest.raises(UnknownPrimitive):
            resolve_figure({"encoding": "(p1p7)+1+0"}, rich_universe)
        with pytest.raises(SchemaError):
            resolve_figure({"encoding": "p1 p2"}, rich_universe)
        with pytest.raises(InvalidFigure):
            resolve_figure({"encoding": "(p1p2)+99+0"}, rich_universe)

    def test_cells_errors(self, small_universe):
        with pytest.raises(InvalidFigure):
            resolve_figure({"cells": [[0, 0, "NW"], [0, 0, "NE"]]}, small_universe)
        with pytest.raises(InvalidFigure):
            resolve_figure({"cells": [[0, 0, "NW"]]}, small_universe)
        with pytest.raises(SchemaError):
            resolve_figure({"cells": [[0, 0, "UP"]]}, small_universe)

    def test_parse_minimal(self):
        spec = parse_trial(minimal_doc())
        assert spec.concept_id == "tiny" and len(spec.test) == 9

    def test_test_length(self):
        with pytest.raises(SchemaError):
            parse_trial(minimal_doc(3))
        assert len(parse_trial(minimal_doc(3), relax_test_length=True).test) == 3

    def test_schema_errors(self):
        doc = minimal_doc()
        doc["schema_version"] = 2
        with pytest.raises(SchemaError):
            parse_trial(doc)
        doc = minimal_doc()
        doc["test"][1]["id"] = "t0"
        with pytest.raises(SchemaError):
            parse_trial(doc)
        doc = minimal_doc()
        doc["test"][0]["rotation_of"] = 3
        with pytest.raises(SchemaError):
            parse_trial(doc)

    def test_unknown_catalog_name(self):
        doc = minimal_doc()
        doc["primitives"][0] = "blob"
        with pytest.raises(UnknownPrimitive):
            parse_trial(doc)

    def test_error_names_location(self):
        doc = minimal_doc()
        doc["test"][4]["encoding"] = "(p1p4)+7+0"
        with pytest.raises(InvalidFigure, match="t4"):
            parse_trial(doc)

    def test_load_errors(self, tmp_path):
        with pytest.raises(SchemaError):
            load_trial(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(SchemaError):
            load_trial(bad)

    def test_asset_override(self, tmp_path, monkeypatch):
        import shutil

        from alienconcepts.catalog import ASSETS_ENV, asset_dir

        shutil.copytree(asset_dir(), tmp_path / "assets")
        for p in (tmp_path / "assets" / "trials").glob("*.json"):
            if p.stem != "orient-3":
                p.unlink()
        monkeypatch.setenv(ASSETS_ENV, str(tmp_path / "assets"))
        assert [p.stem for p in bundled_trial_paths()] == ["orient-3"]


class TestReports:
    def test_run_trial(self, bundled, quick_pools, quick_cfg):
        spec = bundled["orient-3"]
        out = ex.run_trial("bayesian", spec, quick_cfg, quick_pools["orient-3"])
        assert [i["item_id"] for i in out["items"]] == spec.item_ids()
        a, b = quick_cfg.params.alpha, quick_cfg.params.beta
        for item in out["items"]:
            assert 0 <= item["q"] <= 1
            assert item["response_prob"] == pytest.approx(a * item["q"] + (1 - a) * b)
            if item["tag"] == "identity":
                assert item["q"] == pytest.approx(1.0)

    def test_bayesian_needs_pool(self, bundled, quick_cfg):
        with pytest.raises(MissingPool):
            ex.model_q("bayesian", bundled["orient-3"], quick_cfg)

    def test_unknown_model(self, bundled, quick_cfg):
        with pytest.raises(SchemaError):
            ex.model_q("prototype", bundled["orient-3"], quick_cfg)
        with pytest.raises(SchemaError):
            ex.model_q("feature-gcm", bundled["orient-3"], quick_cfg)

    def test_report_schema(self, bundled, quick_pools, quick_cfg):
        specs = [bundled[t] for t in quick_pools]
        report = ex.prediction_report("bayesian", specs, quick_cfg, quick_pools)
        assert [t["trial_id"] for t in report["trials"]] == sorted(quick_pools)
        broken = copy.deepcopy(report)
        broken["trials"][0]["items"][0]["q"] = 1.5
        with pytest.raises(SchemaError):
            ex.validate_report(broken)

    def test_pool_files(self, bundled, quick_pools, tmp_path):
        spec = bundled["orient-3"]
        path = tmp_path / "orient-3.pool.json"
        path.write_text(quick_pools["orient-3"].dumps())
        assert ex.load_pool(path, spec).dumps() == quick_pools["orient-3"].dumps()
        with pytest.raises(SchemaError):
            ex.load_pool(path, bundled["has-part-3"])
        with pytest.raises(MissingPool):
            ex.load_pool(tmp_path / "none.json", spec)

    def test_trial_seeds_differ(self):
        assert ex.trial_seed(0, "a") != ex.trial_seed(0, "b")
        assert ex.trial_seed(0, "a") == ex.trial_seed(0, "a")

    def test_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 4, "params": {"theta_orient": 0.9, "theta_config": 0.5, "alpha": 0.8, "beta": 0.5}}))
        cfg = ex.RunConfig.load(path)
        assert cfg.seed == 4 and cfg.params.theta_orient == 0.9
        assert ex.RunConfig.from_dict(cfg.to_dict()) == cfg
        path.write_text(json.dumps({"sed": 4}))
        with pytest.raises(SchemaError):
            ex.RunConfig.load(path)

    def test_synthesize(self):
        report = {"trials": [{"trial_id": "t", "items": [{"item_id": "a", "response_prob": 1.0},
                                                          {"item_id": "b", "response_prob": 0.0}]}]}
        data = ex.synthesize(report, 25, seed=0)
        assert data.counts == {("t", "a"): (25, 25), ("t", "b"): (0, 25)}
        assert ex.synthesize(report, 25, 1).counts == ex.synthesize(report, 25, 1).counts


class TestCompare:
    def test_pearson(self):
        assert ex.pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert ex.pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        with pytest.raises(ConstantVector):
            ex.pearson_r([1, 1, 1], [1, 2, 3])
        with pytest.raises(DimensionMismatch):
            ex.pearson_r([1, 2], [1, 2, 3])

    def test_fixture_by_hand(self):
        report = ex.load_report(FIXTURES / "three_item_report.json")
        data = ResponseData.load(FIXTURES / "three_item_responses.csv")
        cmp = ex.compare(report, data)
        # model (0.2, 0.5, 0.8) against human (0.1, 0.6, 0.7):
        # Sxy = 0.18, Sxx = 0.18, Syy = 0.86 - 1.96/3 = 0.62/3, so r^2 = 0.54/0.62
        expected = math.sqrt(27 / 31)
        assert abs(cmp["trials"][0]["r"] - expected) <= 1e-12

    def test_undefined_trial_excluded(self):
        report = {"schema_version": 1, "kind": "prediction_report", "model": "bayesian", "params": {},
                  "trials": [{"trial_id": "flat", "items": [{"item_id": i, "q": 0.5, "response_prob": 0.5} for i in "abc"]},
                             {"trial_id": "ok", "items": [{"item_id": i, "q": q, "response_prob": q} for i, q in zip("abc", (0.1, 0.5, 0.9))]}]}
        data = ResponseData({("flat", "a"): (1, 2), ("flat", "b"): (2, 2), ("flat", "c"): (0, 2),
                             ("ok", "a"): (0, 4), ("ok", "b"): (2, 4), ("ok", "c"): (4, 4)})
        cmp = ex.compare(report, data)
        assert cmp["excluded"] == ["flat"]
        assert cmp["average_r"] == pytest.approx(1.0)
        assert "flat     undef  3" in ex.format_comparison(cmp)

    def test_format(self):
        cmp = {"model": "bayesian", "trials": [{"trial_id": "a", "r": 0.91234, "n_items": 10}], "average_r": 0.91234}
        assert ex.format_comparison(cmp) == "trial        r  n\na        0.912  10\nbayesian: average r = 0.912\n"


GOLDEN = {
    "bar": ("bar", False),
    "flag": ("flag", False),
    "bowtie": ("bowtie", False),
    "stair": ("stair", False),
    "zigzag": ("zigzag", False),
}


def golden_figure(catalog, name):
    return primitive_figure(Primitive("p1", catalog[name]))


class TestRender:
    @pytest.mark.parametrize("name", sorted(GOLDEN))
    def test_primitive_golden(self, catalog, name):
        svg = render_svg(golden_figure(catalog, name))
        golden = GOLDEN_DIR / f"{name}.svg"
        if os.environ.get("UPDATE_GOLDEN"):
            golden.write_text(svg)
        assert golden.exists(), f"missing golden SVG {golden}"
        assert svg == golden.read_text()

    def test_composite_golden(self, rich_universe):
        u = rich_universe
        f = u[resolve_figure({"encoding": "((p1p2)p3)+1-2+90"}, u)]
        svg = render_svg(f, SvgStyle(color=True), u.primitives)
        golden = GOLDEN_DIR / "composite-color.svg"
        if os.environ.get("UPDATE_GOLDEN"):
            golden.write_text(svg)
        assert svg == golden.read_text()

    def test_one_outline_per_part(self, rich_universe):
        u = rich_universe
        f = u[resolve_figure({"encoding": "((p1p2)p3)+1-2+0"}, u)]
        svg = render_svg(f, SvgStyle(), u.primitives)
        assert svg.count("<path") == 3
        assert [s for s in ('data-part="p1"', 'data-part="p2"', 'data-part="p3"') if s in svg] == [
            'data-part="p1"', 'data-part="p2"', 'data-part="p3"']

    def test_size_follows_unit(self, catalog):
        svg = render_svg(golden_figure(catalog, "bar"), SvgStyle(unit=10, margin=0))
        assert 'width="20" height="10"' in svg or 'width="10" height="20"' in svg


def run_cli(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


class TestCli:
    def test_enumerate(self, capsys):
        code, out, _ = run_cli(["enumerate", "--primitives", "bar", "wedge", "trapezoid", "stair"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert doc["figures"] == 105 and doc["configurations"]["p1p4"] == 2

    def test_sample(self, capsys):
        code, out, _ = run_cli(["--seed", "3", "sample", "-n", "4"], capsys)
        assert code == 0 and len(out.splitlines()) == 4
        assert run_cli(["sample", "-n", "4", "--seed", "3"], capsys)[1] == out

    def test_render(self, capsys):
        code, out, _ = run_cli(["render", "--primitives", "bowtie", "arrow", "flag", "diamond",
                                "--encoding", "(p1p2)+1+180"], capsys)
        assert code == 0 and out.startswith("<svg")

    def test_error_exit(self, capsys, tmp_path):
        code, _, err = run_cli(["compare", "--report", str(tmp_path / "r.json"), "--responses", "x.csv"], capsys)
        assert code == 2
        assert json.loads(err)["error"] == "SchemaError"

    def test_pipeline(self, capsys, tmp_path):
        trial = str(bundled_trial_paths()[-1])
        base = ["--steps", "300", "--chains", "1"]
        assert run_cli(base + ["infer", "--trials", trial, "--out", str(tmp_path / "pools")], capsys)[0] == 0
        report = tmp_path / "report.json"
        code, _, _ = run_cli(base + ["predict", "--trials", trial, "--pools", str(tmp_path / "pools"),
                                     "--out", str(report)], capsys)
        assert code == 0
        responses = tmp_path / "resp.csv"
        assert run_cli(["synthesize", "--report", str(report), "--out", str(responses)], capsys)[0] == 0
        code, out, _ = run_cli(["compare", "--report", str(report), "--responses", str(responses)], capsys)
        assert code == 0 and "bayesian: average r =" in out
        fit = tmp_path / "fit.json"
        code, _, _ = run_cli(["fit", "--trials", trial, "--pools", str(tmp_path / "pools"), "--responses",
                              str(responses), "--iters", "200", "--out", str(fit)], capsys)
        assert code == 0 and json.loads(fit.read_text())["kind"] == "fit_result"
        code, _, _ = run_cli(["predict", "--trials", trial, "--model", "string-gcm", "--out",
                              str(tmp_path / "gcm.json")], capsys)
        assert code == 0

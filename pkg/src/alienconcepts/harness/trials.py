"""Trial files: primitives, training examples and tagged test items.

A trial is a JSON document::

    {"schema_version": 1, "trial_id": "...", "concept_id": "...",
     "archetype": "fixed-configuration", "primitives": [4 catalog ids],
     "training": [FIGURE, ...],
     "test": [{"id": "t1", "tag": "identity", "rotation_of": 0, ...FIGURE}, ...]}

A FIGURE is one of

* ``{"encoding": "(p1p2)+1+180"}`` -- a construction record: nested parts,
  configuration indices joined by ``-``, global rotation;
* ``{"parts": [["p1", dx, dy, rot], ...], "rotation": 0}`` -- placed parts;
* ``{"cells": [[x, y, "NW"], ...]}`` -- explicit triangles.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass, field

import jsonschema

from ..catalog import SLOTS, asset_dir, load_catalog, trial_primitives
from ..errors import AlienError, InvalidFigure, SchemaError, UnknownPrimitive
from ..geometry import ANGLES, MAX_PARTS, Derivation, Part, canonicalize, enumerate_universe, make_cell, part_cells, rotate_shape

TRIAL_SCHEMA_VERSION = 1
TAGS = ("identity", "part", "novel-configuration", "novel-part", "higher-level", "inconsistent", "wider")
ARCHETYPES = ("fixed-configuration", "free-combination", "orientation-selective", "repetition")
TEST_LENGTH = (9, 13)

_FIGURE = {
    "type": "object",
    "properties": {
        "encoding": {"type": "string"},
        "parts": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "prefixItems": [{"type": "string"}, {"type": "integer"}, {"type": "integer"}, {"type": "integer"}],
                "minItems": 4,
                "maxItems": 4,
            },
        },
        "rotation": {"type": "integer"},
        "cells": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "minItems": 3, "maxItems": 3},
        },
    },
    "oneOf": [{"required": ["encoding"]}, {"required": ["parts"]}, {"required": ["cells"]}],
}

TRIAL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "trial_id", "primitives", "training", "test"],
    "properties": {
        "schema_version": {"const": TRIAL_SCHEMA_VERSION},
        "trial_id": {"type": "string", "minLength": 1},
        "concept_id": {"type": "string"},
        "archetype": {"enum": list(ARCHETYPES)},
        "concept": {"type": "string"},
        "description": {"type": "string"},
        "primitives": {"type": "array", "items": {"type": "string"}, "minItems": 4, "maxItems": 4},
        "training": {"type": "array", "minItems": 1, "items": _FIGURE},
        "test": {
            "type": "array",
            "minItems": 1,
            "items": {
                "allOf": [
                    _FIGURE,
                    {
                        "type": "object",
                        "required": ["id"],
                        "properties": {
                            "id": {"type": "string", "minLength": 1},
                            "tag": {"enum": list(TAGS)},
                            "rotation_of": {"type": "integer", "minimum": 0},
                        },
                    },
                ]
            },
        },
    },
}

_ENCODING = re.compile(r"^([^+]+)\+([0-9-]*)\+(\d+)$")
_PART_TOKEN = re.compile(r"[A-Za-z]+\d*|[()]")


@dataclass(frozen=True)
class TestItem:
    item_id: str
    figure: int
    tag: str = None
    rotation_of: int = None


@dataclass
class TrialSpec:
    trial_id: str
    concept_id: str
    archetype: str
    primitive_names: tuple
    universe: object = field(repr=False)
    training: list
    test: list
    concept: str = None
    description: str = ""

    def item_ids(self):
        return [t.item_id for t in self.test]

    def test_figures(self):
        return [t.figure for t in self.test]

    def items(self):
        return [(t.item_id, t.figure) for t in self.test]


@functools.lru_cache(maxsize=32)
def trial_universe(names: tuple, max_parts: int = MAX_PARTS):
    """Universe for four catalog primitives, shared between trials."""
    return enumerate_universe(trial_primitives(list(names), load_catalog()), max_parts)


@functools.lru_cache(maxsize=32)
def _derivation_index(universe):
    index = {}
    for i, f in enumerate(universe.figures):
        for d in f.derivations:
            index.setdefault(d, i)
    return index


def _check_slot(name):
    if name not in SLOTS:
        raise UnknownPrimitive(f"{name!r} is not one of the trial's primitives {SLOTS}")


def resolve_figure(desc: dict, universe) -> int:
    """Universe id of a figure description."""
    if "encoding" in desc:
        text = desc["encoding"].replace(" ", "")
        m = _ENCODING.match(text)
        if not m:
            raise SchemaError(f"malformed figure encoding {desc['encoding']!r}")
        parts, configs, rotation = m.groups()
        for tok in _PART_TOKEN.findall(parts):
            if tok not in "()":
                _check_slot(tok)
        if "".join(_PART_TOKEN.findall(parts)) != parts:
            raise SchemaError(f"malformed parts string {parts!r}")
        key = Derivation(parts, tuple(int(c) for c in configs.split("-")) if configs else (), int(rotation))
        fid = _derivation_index(universe).get(key)
        if fid is None:
            raise InvalidFigure(f"no figure is built by {desc['encoding']!r}")
        return fid
    if "parts" in desc:
        cells = []
        for prim, dx, dy, rot in desc["parts"]:
            _check_slot(prim)
            if rot not in ANGLES:
                raise InvalidFigure(f"part rotation must be one of {ANGLES}, got {rot}")
            cells.extend(part_cells(Part(prim, dx, dy, rot), universe.primitives))
        rotation = desc.get("rotation", 0)
        if rotation not in ANGLES:
            raise InvalidFigure(f"rotation must be one of {ANGLES}, got {rotation}")
    else:
        try:
            cells = [make_cell(*c) for c in desc["cells"]]
        except (TypeError, ValueError, KeyError) as exc:
            raise SchemaError(f"malformed cell list: {exc}") from None
        rotation = 0
    try:
        shape = rotate_shape(canonicalize(cells), rotation)
    except AlienError as exc:
        raise InvalidFigure(f"{exc.code}: {exc}") from None
    fid = universe.id_of(shape)
    if fid is None:
        raise InvalidFigure("figure cannot be built from the trial's primitives")
    return fid


def _resolve(desc, universe, where):
    try:
        return resolve_figure(desc, universe)
    except AlienError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def parse_trial(doc: dict, relax_test_length: bool = False, max_parts: int = MAX_PARTS) -> TrialSpec:
    try:
        jsonschema.validate(doc, TRIAL_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    n_test = len(doc["test"])
    if not relax_test_length and not TEST_LENGTH[0] <= n_test <= TEST_LENGTH[1]:
        raise SchemaError(f"test list has {n_test} items; expected {TEST_LENGTH[0]}-{TEST_LENGTH[1]}")
    ids = [t["id"] for t in doc["test"]]
    if len(set(ids)) != len(ids):
        raise SchemaError("test item ids must be unique")
    catalog = load_catalog()
    names = tuple(doc["primitives"])
    for name in names:
        if name not in catalog:
            raise UnknownPrimitive(f"{name!r} is not in the primitive catalog")
    universe = trial_universe(names, max_parts)
    training = [_resolve(d, universe, f"training[{i}]") for i, d in enumerate(doc["training"])]
    test = []
    for t in doc["test"]:
        r = t.get("rotation_of")
        if r is not None and r >= len(training):
            raise SchemaError(f"item {t['id']}: rotation_of points past the training list")
        test.append(TestItem(t["id"], _resolve(t, universe, f"test item {t['id']}"), t.get("tag"), r))
    return TrialSpec(
        trial_id=doc["trial_id"],
        concept_id=doc.get("concept_id", doc["trial_id"]),
        archetype=doc.get("archetype"),
        primitive_names=names,
        universe=universe,
        training=training,
        test=test,
        concept=doc.get("concept"),
        description=doc.get("description", ""),
    )


def load_trial(path, relax_test_length: bool = False, max_parts: int = MAX_PARTS) -> TrialSpec:
    """Read and validate a trial file, resolving every figure to a universe id."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"trial file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return parse_trial(doc, relax_test_length, max_parts)


def bundled_trial_paths() -> list:
    return sorted((asset_dir() / "trials").glob("*.json"))


def load_bundled_trials(**kwargs) -> list:
    return [load_trial(p, **kwargs) for p in bundled_trial_paths()]

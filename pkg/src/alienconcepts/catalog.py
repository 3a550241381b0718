"""Primitive catalog and bundled asset lookup."""

import json
import os
from importlib import resources
from pathlib import Path

from .errors import SchemaError, UnknownPrimitive
from .geometry import Primitive, canonicalize, make_cell

ASSETS_ENV = "ALIENCONCEPTS_ASSETS"
SLOTS = ("p1", "p2", "p3", "p4")


def asset_dir() -> Path:
    override = os.environ.get(ASSETS_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("alienconcepts") / "data"))


def load_catalog(path=None) -> dict:
    """Read a primitive catalog into ``{catalog_id: Shape}``."""
    path = Path(path) if path else asset_dir() / "catalog.json"
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1 or "primitives" not in doc:
        raise SchemaError(f"{path}: unsupported catalog schema")
    shapes = {}
    for entry in doc["primitives"]:
        cells = [make_cell(*c) for c in entry["cells"]]
        if len(cells) != 4:
            raise SchemaError(f"primitive {entry['id']} must list 4 triangles")
        shapes[entry["id"]] = canonicalize(cells)
    return shapes


def trial_primitives(names, catalog=None) -> list:
    """Bind four catalog shapes to the program slots p1..p4, in order."""
    catalog = catalog if catalog is not None else load_catalog()
    if len(names) != 4 or len(set(names)) != 4:
        raise SchemaError("a trial needs exactly four distinct primitives")
    prims = []
    for slot, name in zip(SLOTS, names):
        if name not in catalog:
            raise UnknownPrimitive(f"{name!r} is not in the primitive catalog")
        prims.append(Primitive(slot, catalog[name]))
    return prims

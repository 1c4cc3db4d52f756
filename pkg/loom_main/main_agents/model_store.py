# loom_main/main_agents/model_store.py
"""Canonical model persistence.

One JSON document per model: keys sorted, collections sorted by id, two-space
indent, UTF-8, trailing newline. `save_model(load_model(f))` reproduces a
canonical file byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from pydantic import BaseModel, ValidationError

from loom_main.config import SCHEMA_VERSION
from loom_main.errors import ModelInputError, ModelParseError, SchemaVersionError
from loom_main.models.models_graph import Model

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# -----------------------
# JSON HELPERS
# -----------------------
def _reject_duplicate_keys(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    obj: Dict[str, Any] = {}
    for key, value in pairs:
        if key in obj:
            raise ValueError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def parse_json(text: str, what: str = "document") -> Any:
    """json.loads with line/column errors and duplicate-key rejection."""
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"malformed {what}: {exc.msg}", exc.lineno, exc.colno) from None
    except ValueError as exc:
        raise ModelParseError(f"malformed {what}: {exc}") from None


def dumps_canonical(obj: Any) -> str:
    if isinstance(obj, BaseModel):
        obj = obj.model_dump(mode="json")
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def read_text(source: PathLike) -> str:
    try:
        return Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelInputError(f"cannot read {source}: {exc}") from None


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -----------------------
# CANONICAL FORM
# -----------------------
def _canonical_element(record: Dict[str, Any]) -> Dict[str, Any]:
    record["layer_tags"] = sorted(record["layer_tags"])
    record["tags"] = sorted(record["tags"])
    record["sub_elements"] = sorted((_canonical_element(s) for s in record["sub_elements"]),
                                    key=lambda s: s["id"])
    return record


def canonical_dict(model: Model) -> Dict[str, Any]:
    data = model.model_dump(mode="json")
    data["elements"] = sorted((_canonical_element(e) for e in data["elements"]), key=lambda e: e["id"])
    data["relationships"] = sorted(data["relationships"], key=lambda r: r["id"])
    for stereotype in data["stereotypes"]:
        stereotype["baseline_sub_elements"] = sorted(
            (_canonical_element(e) for e in stereotype["baseline_sub_elements"]), key=lambda e: e["id"])
    data["stereotypes"] = sorted(data["stereotypes"], key=lambda s: s["name"])
    for view in data["views"]:
        view["members"] = sorted(view["members"])
        view["display"]["include_edge_kinds"] = sorted(view["display"]["include_edge_kinds"])
    data["views"] = sorted(data["views"], key=lambda v: v["id"])
    return data


def dumps_model(model: Model) -> str:
    return dumps_canonical(canonical_dict(model))


def model_digest(model: Model) -> str:
    return digest_text(dumps_model(model))


def structurally_equal(a: Model, b: Model) -> bool:
    return canonical_dict(a) == canonical_dict(b)


def _version_tuple(version: str) -> Tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(version).split("."))
    except ValueError:
        raise ModelInputError(f"unreadable schema_version {version!r}") from None


def model_from_dict(data: Any) -> Model:
    if not isinstance(data, dict):
        raise ModelInputError("model document must be an object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if _version_tuple(version) > _version_tuple(SCHEMA_VERSION):
        raise SchemaVersionError(f"schema_version {version} is newer than supported {SCHEMA_VERSION}")
    try:
        return Model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ModelInputError(f"invalid model at {where}: {first['msg']}") from None


# -----------------------
# PUBLIC API
# -----------------------
def loads_model(text: str) -> Model:
    return model_from_dict(parse_json(text, "model file"))


def load_model(source: PathLike) -> Model:
    model = loads_model(read_text(source))
    logger.debug("[store] loaded %s from %s", model.model_name, source)
    return model


def save_model(model: Model, destination: PathLike) -> Path:
    path = Path(destination)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps the canonical "\n" on every platform
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_model(model))
    logger.info("[store] saved %s to %s", model.model_name, path)
    return path

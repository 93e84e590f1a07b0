"""JSON serialization of models and action models.

Images are written as 1-based lists keyed by the canonical word of each
stored element. The group travels with the model as declaration text, so a
model file is self-contained.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .groups import Group, GroupError, GroupSpecParseError, parse_group_text, resolve_group
from .permcore import Perm
from .verify import ActionModel, BernoulliAction, FiniteAction, SoficAssignment

FORMAT = "soficlab-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, int) and not isinstance(obj, bool) and abs(obj) >= 2**53:
        return str(obj)
    return obj


def model_to_dict(model: SoficAssignment | ActionModel) -> dict:
    action = None
    if isinstance(model, ActionModel):
        action = {"labels": model.labels.tolist(), **model.action.describe()}
        prov = {**model.base.provenance, **model.provenance}
        sigma = model.base
    else:
        sigma = model
        prov = sigma.provenance
    g = sigma.group
    images = {}
    # deterministic order: by word length, then text
    for x, p in sorted(sigma.images.items(), key=lambda kv: (len(g.letters_of(kv[0])), g.format_element(kv[0]))):
        images[g.format_element(x)] = [int(v) + 1 for v in p.array]
    out = {
        "format": FORMAT,
        "version": VERSION,
        "group": g.name,
        "declaration": g.declaration(),
        "d": sigma.d,
        "n": sigma.n,
        "generators": [g.format_element(x) for x in sigma.generators],
        "images": images,
        "provenance": _plain(prov),
    }
    if action is not None:
        out["action"] = _plain(action)
    return out


def dumps(model: SoficAssignment | ActionModel) -> str:
    """One key per line; each image list stays on a single line."""
    data = model_to_dict(model)
    lines = []
    for k, v in data.items():
        if k == "images":
            inner = ",\n".join(f"  {json.dumps(w)}: {json.dumps(p)}" for w, p in v.items())
            lines.append(f" {json.dumps(k)}: {{\n{inner}\n }}")
        else:
            lines.append(f" {json.dumps(k)}: {json.dumps(v)}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def _group_from(data: dict, registry: dict[str, Group] | None) -> Group:
    name = data.get("group")
    if not isinstance(name, str):
        raise ModelFormatError("missing group name")
    try:
        if registry and name in registry:
            return registry[name]
        decl = data.get("declaration")
        if decl:
            groups = parse_group_text(decl)
            if name in groups:
                return groups[name]
        return resolve_group(name, registry)
    except (GroupError, GroupSpecParseError) as exc:
        raise ModelFormatError(f"cannot resolve group {name!r}: {exc}") from exc


def model_from_dict(data: dict, registry: dict[str, Group] | None = None) -> SoficAssignment | ActionModel:
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise ModelFormatError("not a model file")
    g = _group_from(data, registry)
    try:
        d = int(data["d"])
        n = int(data.get("n", 1))
        gens = [g.parse_element(w) for w in data["generators"]]
        images = {}
        for word, lst in data["images"].items():
            if len(lst) != d:
                raise ModelFormatError(f"image of {word} has {len(lst)} points, expected {d}")
            images[g.parse_element(word)] = Perm.from_images(lst)
        sigma = SoficAssignment(g, d, images, gens, n, data.get("provenance") or {})
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, GroupError) as exc:
        raise ModelFormatError(f"malformed model: {exc}") from exc
    act = data.get("action")
    if act is None:
        return sigma
    try:
        kind = act["kind"]
        if kind == "bernoulli":
            action = BernoulliAction(g, act["nu"])
        elif kind == "finite":
            action = FiniteAction(g, act["action"], act["weights"], act["point_labels"])
        else:
            raise ModelFormatError(f"unknown action kind {kind!r}")
        return ActionModel(sigma, act["labels"], action, data.get("provenance") or {})
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed action: {exc}") from exc


def loads(text: str, registry: dict[str, Group] | None = None) -> SoficAssignment | ActionModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}") from exc
    return model_from_dict(data, registry)


def load(path, registry: dict[str, Group] | None = None) -> SoficAssignment | ActionModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), registry)


def save(model: SoficAssignment | ActionModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))

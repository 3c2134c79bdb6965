"""Scene graph data model with validation and byte-stable JSON serialization.

A scene graph holds the entities visible in one frame (with per-view boxes in
normalized xyxy coordinates) and the multi-label relation triplets between
them. Serialization is canonical: keys sorted, floats rounded to 6 decimal
places, entities ordered by id, triplets ordered by (subject, object,
predicate index), so equal graphs always produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .taxonomy import EntityTaxonomy, RelationTaxonomy

FLOAT_DECIMALS = 6


class GraphValidationError(ValueError):
    """A graph or one of its components violates an invariant."""


class GraphParseError(ValueError):
    """Input text is not a valid graph document."""


Box = tuple[float, float, float, float]


def _validate_box(box, path: str) -> Box:
    if len(box) != 4:
        raise GraphValidationError(f"{path}: box must have 4 coordinates, got {len(box)}")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not (0.0 <= x1 < x2 <= 1.0):
        raise GraphValidationError(f"{path}: need 0 <= x1 < x2 <= 1, got x1={x1} x2={x2}")
    if not (0.0 <= y1 < y2 <= 1.0):
        raise GraphValidationError(f"{path}: need 0 <= y1 < y2 <= 1, got y1={y1} y2={y2}")
    return (x1, y1, x2, y2)


@dataclass(frozen=True)
class Entity:
    """One scene entity: unique id, class label, per-view normalized boxes."""

    id: int
    label: str
    boxes: dict[str, Box] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for view, box in self.boxes.items():
            self.boxes[view] = _validate_box(box, f"entity {self.id} boxes.{view}")


Triplet = tuple[int, str, int]


@dataclass(frozen=True)
class SceneGraph:
    """Validated per-frame graph; construct via :func:`build_graph` or :func:`parse`."""

    frame_index: int
    entities: tuple[Entity, ...]
    triplets: tuple[Triplet, ...]

    def entity(self, entity_id: int) -> Entity:
        for ent in self.entities:
            if ent.id == entity_id:
                return ent
        raise KeyError(entity_id)


def build_graph(
    entities,
    triplets,
    frame_index: int = 0,
    relations: RelationTaxonomy | None = None,
    entity_taxonomy: EntityTaxonomy | None = None,
) -> SceneGraph:
    """Validate, deduplicate and canonicalize a graph.

    Triplets are (subject_id, predicate, object_id). Duplicates collapse to
    one; order is canonicalized by (subject_id, object_id, predicate index).
    Raises GraphValidationError on dangling ids, self-loops, duplicate entity
    ids, or unknown predicates/labels.
    """
    relations = relations or RelationTaxonomy()
    entities = tuple(entities)
    if not entities:
        raise GraphValidationError("graph needs at least one entity")

    ids = [ent.id for ent in entities]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise GraphValidationError(f"duplicate entity ids {dupes}")
    if entity_taxonomy is not None:
        for ent in entities:
            if ent.label not in entity_taxonomy:
                raise GraphValidationError(
                    f"entity {ent.id}: unknown label {ent.label!r}"
                )

    known = set(ids)
    seen: set[Triplet] = set()
    for sid, predicate, oid in triplets:
        sid, oid = int(sid), int(oid)
        if predicate not in relations:
            raise GraphValidationError(f"unknown predicate {predicate!r}")
        if sid == oid:
            raise GraphValidationError(f"self-loop triplet ({sid}, {predicate}, {oid})")
        for eid in (sid, oid):
            if eid not in known:
                raise GraphValidationError(f"dangling id {eid} in triplet ({sid}, {predicate}, {oid})")
        seen.add((sid, predicate, oid))

    ordered = tuple(
        sorted(seen, key=lambda t: (t[0], t[2], relations.index(t[1])))
    )
    ordered_entities = tuple(sorted(entities, key=lambda e: e.id))
    return SceneGraph(frame_index=int(frame_index), entities=ordered_entities, triplets=ordered)


def _round_floats(value):
    if isinstance(value, float):
        return round(value, FLOAT_DECIMALS)
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    return value


def serialize(graph: SceneGraph) -> str:
    """Canonical JSON for a graph; byte-identical for equal graphs."""
    doc = {
        "frame_index": graph.frame_index,
        "entities": [
            {
                "id": ent.id,
                "label": ent.label,
                "boxes": {view: list(ent.boxes[view]) for view in sorted(ent.boxes)},
            }
            for ent in graph.entities
        ],
        "triplets": [[sid, predicate, oid] for sid, predicate, oid in graph.triplets],
    }
    return json.dumps(_round_floats(doc), sort_keys=True, separators=(",", ": "), indent=2) + "\n"


def parse(
    text: str,
    relations: RelationTaxonomy | None = None,
    entity_taxonomy: EntityTaxonomy | None = None,
) -> SceneGraph:
    """Parse and validate a graph document produced by :func:`serialize`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(
            f"malformed JSON at line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}"
        ) from exc

    if not isinstance(doc, dict):
        raise GraphValidationError("$: document must be an object")
    for key in ("frame_index", "entities", "triplets"):
        if key not in doc:
            raise GraphValidationError(f"$.{key}: missing")
    if not isinstance(doc["entities"], list):
        raise GraphValidationError("$.entities: must be a list")
    if not isinstance(doc["triplets"], list):
        raise GraphValidationError("$.triplets: must be a list")

    entities = []
    for i, raw in enumerate(doc["entities"]):
        path = f"$.entities[{i}]"
        if not isinstance(raw, dict):
            raise GraphValidationError(f"{path}: must be an object")
        for key in ("id", "label", "boxes"):
            if key not in raw:
                raise GraphValidationError(f"{path}.{key}: missing")
        boxes = {}
        for view, box in raw["boxes"].items():
            try:
                boxes[view] = _validate_box(box, f"{path}.boxes.{view}")
            except GraphValidationError:
                raise
            except (TypeError, ValueError) as exc:
                raise GraphValidationError(f"{path}.boxes.{view}: {exc}") from exc
        entities.append(Entity(id=int(raw["id"]), label=str(raw["label"]), boxes=boxes))

    triplets = []
    for i, raw in enumerate(doc["triplets"]):
        if not (isinstance(raw, list) and len(raw) == 3):
            raise GraphValidationError(f"$.triplets[{i}]: must be [subject_id, predicate, object_id]")
        triplets.append((int(raw[0]), str(raw[1]), int(raw[2])))

    return build_graph(
        entities,
        triplets,
        frame_index=int(doc["frame_index"]),
        relations=relations,
        entity_taxonomy=entity_taxonomy,
    )


def enumerate_pairs(
    graph: SceneGraph, relations: RelationTaxonomy | None = None
) -> list[tuple[int, int, list[int]]]:
    """Multi-hot relation labels per ordered entity pair that has triplets.

    Returns (subject_id, object_id, labels) sorted by ids, where labels is a
    0/1 vector over the predicate order. The hot-bit total over all pairs
    equals the triplet count.
    """
    relations = relations or RelationTaxonomy()
    by_pair: dict[tuple[int, int], list[int]] = {}
    for sid, predicate, oid in graph.triplets:
        labels = by_pair.setdefault((sid, oid), [0] * len(relations))
        labels[relations.index(predicate)] = 1
    return [(sid, oid, labels) for (sid, oid), labels in sorted(by_pair.items())]

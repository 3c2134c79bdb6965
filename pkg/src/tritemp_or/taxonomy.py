"""Entity and relation taxonomies for OR scene graphs.

The relation taxonomy is fixed: 14 predicates whose order defines the class
index used by the multi-label relation head everywhere in the pipeline.
Entity class names are deployment-specific; the defaults are neutral
placeholders that a config can replace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PREDICATES: tuple[str, ...] = (
    "Assist",
    "Cement",
    "Clean",
    "CloseTo",
    "Cut",
    "Drill",
    "Hammer",
    "Hold",
    "LyingOn",
    "Operate",
    "Prepare",
    "Saw",
    "Suture",
    "Touch",
)

NUM_PREDICATES = len(PREDICATES)

DEFAULT_ENTITY_LABELS: tuple[str, ...] = tuple(f"role_{i:02d}" for i in range(12))


class TaxonomyError(ValueError):
    """Raised when a taxonomy is malformed or a label is outside it."""


@dataclass(frozen=True)
class RelationTaxonomy:
    """Ordered predicate list; the position of a name is its class index."""

    predicates: tuple[str, ...] = PREDICATES

    def __post_init__(self) -> None:
        if len(self.predicates) != NUM_PREDICATES:
            raise TaxonomyError(
                f"relation taxonomy must have exactly {NUM_PREDICATES} predicates, "
                f"got {len(self.predicates)}"
            )
        if len(set(self.predicates)) != len(self.predicates):
            raise TaxonomyError("predicate names must be unique")

    def __len__(self) -> int:
        return len(self.predicates)

    def __contains__(self, name: str) -> bool:
        return name in self.predicates

    def __iter__(self):
        return iter(self.predicates)

    def index(self, name: str) -> int:
        try:
            return self.predicates.index(name)
        except ValueError:
            raise TaxonomyError(f"unknown predicate {name!r}") from None


@dataclass(frozen=True)
class EntityTaxonomy:
    """Ordered entity class names. 12 classes unless explicitly overridden."""

    labels: tuple[str, ...] = DEFAULT_ENTITY_LABELS
    allow_custom_size: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.labels) != 12 and not self.allow_custom_size:
            raise TaxonomyError(
                f"entity taxonomy must have 12 labels (got {len(self.labels)}); "
                "pass allow_custom_size=True to override"
            )
        if len(set(self.labels)) != len(self.labels):
            raise TaxonomyError("entity labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __iter__(self):
        return iter(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise TaxonomyError(f"unknown entity label {label!r}") from None

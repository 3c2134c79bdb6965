"""Text-embedding tables for relation knowledge transfer.

Embeddings are extracted offline (by whatever language model a deployment
uses) and shipped as a plain text file; this module owns the prompt
templates, the file format, completeness validation against the taxonomies,
and a seeded pseudo-embedding generator so the full pipeline runs without
any model artifact.

File format (one table per file)::

    TRITEMP-EMB v1 <dim> <count> <source>
    <prompt line>
    <dim space-separated floats>
    ... repeated <count> times
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .taxonomy import EntityTaxonomy, RelationTaxonomy, TaxonomyError

HEADER_MAGIC = "TRITEMP-EMB"
FORMAT_VERSION = "v1"


class EmbeddingError(ValueError):
    """Malformed, incomplete, or inconsistent embedding table."""


def triplet_prompt(subject: str, predicate: str, obj: str,
                   entities: EntityTaxonomy | None = None,
                   relations: RelationTaxonomy | None = None) -> str:
    """Prompt string for one (subject, predicate, object) triplet.

    The 'a/an' article marker is kept literally; no grammar resolution."""
    entities = entities or EntityTaxonomy()
    relations = relations or RelationTaxonomy()
    for label in (subject, obj):
        if label not in entities:
            raise TaxonomyError(f"unknown entity label {label!r}")
    if predicate not in relations:
        raise TaxonomyError(f"unknown predicate {predicate!r}")
    return f"A scene of a/an {subject} {predicate} a/an {obj}"


def predicate_prompt(predicate: str, relations: RelationTaxonomy | None = None) -> str:
    """Prompt string for one predicate class."""
    relations = relations or RelationTaxonomy()
    if predicate not in relations:
        raise TaxonomyError(f"unknown predicate {predicate!r}")
    return f"A scene of {predicate}"


def required_prompts(entities: EntityTaxonomy | None = None,
                     relations: RelationTaxonomy | None = None) -> list[str]:
    """Every prompt a complete table must contain: all ordered triplets plus
    all predicates, in deterministic order."""
    entities = entities or EntityTaxonomy()
    relations = relations or RelationTaxonomy()
    prompts = [predicate_prompt(p, relations) for p in relations]
    for subject in entities:
        for predicate in relations:
            for obj in entities:
                prompts.append(triplet_prompt(subject, predicate, obj, entities, relations))
    return prompts


@dataclass
class EmbeddingTable:
    """Prompt -> vector store with provenance metadata."""

    entries: dict[str, np.ndarray]
    dim: int
    source: str = "unknown"
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for prompt, vec in self.entries.items():
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (self.dim,):
                raise EmbeddingError(
                    f"vector for {prompt!r} has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.isfinite(vec).all():
                raise EmbeddingError(f"vector for {prompt!r} has non-finite values")
            self.entries[prompt] = vec

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, prompt: str) -> bool:
        return prompt in self.entries

    def __getitem__(self, prompt: str) -> np.ndarray:
        try:
            return self.entries[prompt]
        except KeyError:
            raise EmbeddingError(f"missing embedding for prompt {prompt!r}") from None

    def validate_complete(self, entities: EntityTaxonomy | None = None,
                          relations: RelationTaxonomy | None = None) -> None:
        missing = [p for p in required_prompts(entities, relations) if p not in self.entries]
        if missing:
            shown = ", ".join(repr(p) for p in missing[:5])
            more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            raise EmbeddingError(f"table missing {len(missing)} prompts: {shown}{more}")


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{HEADER_MAGIC} {FORMAT_VERSION} {table.dim} {len(table.entries)} {table.source}\n")
        for prompt in sorted(table.entries):
            if "\n" in prompt:
                raise EmbeddingError(f"prompt contains a newline: {prompt!r}")
            fh.write(prompt + "\n")
            fh.write(" ".join(f"{v:.9e}" for v in table.entries[prompt]) + "\n")


def load_embeddings(path, entities: EntityTaxonomy | None = None,
                    relations: RelationTaxonomy | None = None,
                    check_complete: bool = True) -> EmbeddingTable:
    """Load a table and (by default) check it covers the full taxonomy."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split(" ", 4)
        if len(parts) < 4 or parts[0] != HEADER_MAGIC or parts[1] != FORMAT_VERSION:
            raise EmbeddingError(f"bad header line: {header!r}")
        dim = int(parts[2])
        count = int(parts[3])
        source = parts[4] if len(parts) > 4 else "unknown"

        entries: dict[str, np.ndarray] = {}
        for i in range(count):
            prompt = fh.readline()
            if not prompt:
                raise EmbeddingError(f"truncated file: expected {count} entries, got {i}")
            prompt = prompt.rstrip("\n")
            values = fh.readline().split()
            if len(values) != dim:
                raise EmbeddingError(
                    f"entry {prompt!r}: expected {dim} values, got {len(values)}"
                )
            entries[prompt] = np.array([float(v) for v in values], dtype=np.float32)

    table = EmbeddingTable(entries=entries, dim=dim, source=source)
    if check_complete:
        table.validate_complete(entities, relations)
    return table


def _hash_gaussian(seed: int, key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}|{key}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    return rng.standard_normal(dim)


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def pseudo_table(entities: EntityTaxonomy | None = None,
                 relations: RelationTaxonomy | None = None,
                 dim: int = 64, seed: int = 7,
                 predicate_mix: float = 0.5) -> EmbeddingTable:
    """Deterministic unit-norm stand-in embeddings for every required prompt.

    Each prompt hashes (with the seed) to a Gaussian vector that is then
    L2-normalized. For triplet prompts, `predicate_mix` blends in the
    predicate prompt's vector, so triplets sharing a predicate cluster
    together the way real language-model embeddings do; 0 disables mixing.
    """
    entities = entities or EntityTaxonomy()
    relations = relations or RelationTaxonomy()
    if not 0.0 <= predicate_mix < 1.0:
        raise ValueError(f"predicate_mix must be in [0, 1), got {predicate_mix}")

    entries: dict[str, np.ndarray] = {}
    pred_vectors: dict[str, np.ndarray] = {}
    for predicate in relations:
        prompt = predicate_prompt(predicate, relations)
        vec = _unit(_hash_gaussian(seed, prompt, dim))
        pred_vectors[predicate] = vec
        entries[prompt] = vec.astype(np.float32)

    for subject in entities:
        for predicate in relations:
            for obj in entities:
                prompt = triplet_prompt(subject, predicate, obj, entities, relations)
                noise = _unit(_hash_gaussian(seed, prompt, dim))
                vec = _unit(predicate_mix * pred_vectors[predicate] + (1.0 - predicate_mix) * noise)
                entries[prompt] = vec.astype(np.float32)

    return EmbeddingTable(
        entries=entries,
        dim=dim,
        source=f"pseudo(seed={seed},mix={predicate_mix})",
    )

"""Concepts, representation reading and concept-dictionary assembly."""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateName,
    EmptyInput,
    NonFinite,
    SpaceMismatch,
    UnknownConcept,
    ValidationError,
    ZeroAtom,
)
from .solver import as_dense, mean_rows, pca_first_component

NULL_CONCEPT = "\u2205"  # ∅

CLIP_SEQ_LEN = 77
CLIP_TOKEN_DIM = 768

_WS = re.compile(r"\s+")


def normalize_stimulus(text: str) -> str:
    """Trim and collapse internal whitespace; the key used for deduplication."""
    return _WS.sub(" ", text).strip()


def dedupe_stimuli(stimuli) -> list[str]:
    seen = set()
    out = []
    for s in stimuli:
        key = normalize_stimulus(s)
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


class ReadMethod(str, enum.Enum):
    AVG = "avg"
    PCA = "pca"


class SpaceKind(str, enum.Enum):
    TEXT_EMBEDDING = "text_embedding"
    SCORE = "score"


@dataclass(frozen=True)
class LatentSpaceTag:
    kind: SpaceKind
    flat_dim: int
    seq_len: int = 0
    token_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpaceKind(self.kind))
        if self.flat_dim < 1:
            raise ValidationError(f"flat_dim must be >= 1, got {self.flat_dim}")
        if self.kind is SpaceKind.TEXT_EMBEDDING and self.seq_len * self.token_dim != self.flat_dim:
            raise ValidationError(
                f"text-embedding space needs seq_len*token_dim == flat_dim "
                f"({self.seq_len}*{self.token_dim} != {self.flat_dim})"
            )

    @classmethod
    def text_embedding(cls, seq_len: int = CLIP_SEQ_LEN, token_dim: int = CLIP_TOKEN_DIM):
        return cls(SpaceKind.TEXT_EMBEDDING, seq_len * token_dim, seq_len, token_dim)

    @classmethod
    def score(cls, length: int):
        return cls(SpaceKind.SCORE, length)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "seq_len": self.seq_len,
            "token_dim": self.token_dim,
            "flat_dim": self.flat_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatentSpaceTag":
        return cls(SpaceKind(d["kind"]), int(d["flat_dim"]), int(d.get("seq_len", 0)), int(d.get("token_dim", 0)))


@dataclass(frozen=True)
class Concept:
    name: str
    stimuli: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise ValidationError("concept name must be non-empty")
        object.__setattr__(self, "stimuli", tuple(dedupe_stimuli(self.stimuli)))


@dataclass(frozen=True, eq=False)
class ConceptVector:
    name: str
    vector: np.ndarray
    read_method: ReadMethod
    space: LatentSpaceTag

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise ValidationError("concept vector must be 1-D")
        if not np.isfinite(vec).all():
            raise NonFinite(f"concept vector {self.name!r} is not finite")
        if vec.shape[0] != self.space.flat_dim:
            raise SpaceMismatch(f"vector length {vec.shape[0]} != space dim {self.space.flat_dim}")
        if self.name != NULL_CONCEPT and not np.any(vec):
            raise ZeroAtom(f"concept vector {self.name!r} is all zero")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "read_method", ReadMethod(self.read_method))

    @property
    def is_null(self) -> bool:
        return self.name == NULL_CONCEPT

    def __eq__(self, other):
        if not isinstance(other, ConceptVector):
            return NotImplemented
        return (
            self.name == other.name
            and self.read_method == other.read_method
            and self.space == other.space
            and np.array_equal(self.vector, other.vector)
        )

    def __hash__(self):
        return hash((self.name, self.read_method, self.space, self.vector.tobytes()))


@dataclass(frozen=True, eq=False)
class ConceptDictionary:
    space: LatentSpaceTag
    names: tuple[str, ...]
    matrix: np.ndarray  # d x N, columns are concept vectors
    normalized: bool = False
    read_methods: tuple[ReadMethod, ...] = field(default=())

    def __post_init__(self):
        m = as_dense(self.matrix, "dictionary").copy()
        names = tuple(self.names)
        if not names:
            raise EmptyInput("a dictionary needs at least one concept")
        if len(set(names)) != len(names):
            raise DuplicateName(f"duplicate concept names in {names}")
        if m.shape != (self.space.flat_dim, len(names)):
            raise SpaceMismatch(f"matrix shape {m.shape} != ({self.space.flat_dim}, {len(names)})")
        zero = ~m.any(axis=0)
        for j in np.flatnonzero(zero):
            if names[j] != NULL_CONCEPT:
                raise ZeroAtom(f"column {names[j]!r} is all zero")
        methods = tuple(ReadMethod(r) for r in self.read_methods) or (ReadMethod.AVG,) * len(names)
        if len(methods) != len(names):
            raise ValidationError("read_methods must match names")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "read_methods", methods)

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, ConceptDictionary):
            return NotImplemented
        return (
            self.space == other.space
            and self.normalized == other.normalized
            and self.read_methods == other.read_methods
            and self.content_hash() == other.content_hash()
        )

    def __hash__(self):
        return hash(self.content_hash())

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownConcept(f"concept {name!r} is not in the dictionary") from None

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.index(name)]

    def vector(self, name: str) -> ConceptVector:
        j = self.index(name)
        return ConceptVector(name, self.matrix[:, j].copy(), self.read_methods[j], self.space)

    def content_hash(self) -> str:
        """SHA-256 over the ordered names and the little-endian matrix bytes."""
        h = hashlib.sha256()
        h.update(json.dumps(list(self.names), ensure_ascii=False).encode("utf-8"))
        h.update(b"\0")
        h.update(self.matrix.astype("<f4", copy=False).tobytes(order="C"))
        return h.hexdigest()


def rep_read(embeddings, method=ReadMethod.AVG, name: str = "", space: LatentSpaceTag | None = None) -> ConceptVector:
    """Read one concept vector from the K x d stimulus embeddings.

    ``avg`` is the row mean; ``pca`` the unit-norm first principal direction.
    """
    m = as_dense(embeddings, "embeddings")
    method = ReadMethod(method)
    if space is None:
        space = LatentSpaceTag.score(m.shape[1])
    if m.shape[1] != space.flat_dim:
        raise SpaceMismatch(f"embedding width {m.shape[1]} != space dim {space.flat_dim}")
    vec = mean_rows(m) if method is ReadMethod.AVG else pca_first_component(m)
    return ConceptVector(name, vec, method, space)


def null_concept(space: LatentSpaceTag, null_embedding) -> ConceptVector:
    """The reserved "∅" atom built from the encoder's empty-string embedding."""
    vec = np.asarray(null_embedding, dtype=np.float32).reshape(-1)
    return ConceptVector(NULL_CONCEPT, vec.copy(), ReadMethod.AVG, space)


def assemble(vectors, normalize: bool = False) -> ConceptDictionary:
    """Stack concept vectors as dictionary columns, in input order.

    The caller is responsible for placing the source concept first.
    """
    vectors = list(vectors)
    if not vectors:
        raise EmptyInput("cannot assemble an empty dictionary")
    space = vectors[0].space
    names = []
    for cv in vectors:
        if cv.space != space:
            raise SpaceMismatch(f"{cv.name!r} lives in {cv.space}, expected {space}")
        if cv.name in names:
            raise DuplicateName(f"concept {cv.name!r} appears twice")
        names.append(cv.name)
    mat = np.stack([cv.vector for cv in vectors], axis=1).astype(np.float32)
    if normalize:
        norms = np.linalg.norm(mat.astype(np.float64), axis=0)
        for j, cv in enumerate(vectors):
            if not cv.is_null:
                mat[:, j] = (mat[:, j].astype(np.float64) / norms[j]).astype(np.float32)
    return ConceptDictionary(space, tuple(names), mat, normalize, tuple(cv.read_method for cv in vectors))

"""On-disk formats: embedding matrices, concept datasets, dictionary manifests
and the embedding cache.

Matrix file layout (little-endian, 25-byte header)::

    magic    4 bytes   b"CLAN"
    version  uint32    1
    rows     uint64
    cols     uint64
    dtype    uint8     1 = float32
    payload  rows * cols * 4 bytes, row-major

All writers go through a temp file in the destination directory followed by
``os.replace`` so readers never observe a half-written file.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dictionary import Concept, ConceptDictionary, LatentSpaceTag, ReadMethod
from .errors import (
    BadMagic,
    HashMismatch,
    OversizeGuard,
    SchemaViolation,
    StoreIOError,
    TrailingData,
    TruncatedPayload,
    UnsupportedVersion,
)
from .solver import as_dense

MAGIC = b"CLAN"
VERSION = 1
DTYPE_F32 = 1
HEADER = struct.Struct("<4sIQQB")
DEFAULT_MAX_ELEMENTS = 2**31

DATASET_FORMAT = "concept-dataset"
MANIFEST_FORMAT = "concept-dictionary"


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc}") from exc


def matrix_bytes(m) -> bytes:
    m = as_dense(m)
    rows, cols = m.shape
    return HEADER.pack(MAGIC, VERSION, rows, cols, DTYPE_F32) + m.astype("<f4", copy=False).tobytes(order="C")


def write_matrix(m, path) -> None:
    _atomic_write(path, matrix_bytes(m))


def read_matrix(path, max_elements: int = DEFAULT_MAX_ELEMENTS) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            head = fh.read(HEADER.size)
            if len(head) < HEADER.size:
                raise TruncatedPayload(f"{path}: header is {len(head)} bytes, need {HEADER.size}")
            magic, version, rows, cols, dtype = HEADER.unpack(head)
            if magic != MAGIC:
                raise BadMagic(f"{path}: magic {magic!r} is not {MAGIC!r}")
            if version != VERSION:
                raise UnsupportedVersion(f"{path}: version {version} (supported: {VERSION})")
            if dtype != DTYPE_F32:
                raise UnsupportedVersion(f"{path}: dtype code {dtype} (supported: {DTYPE_F32})")
            count = rows * cols
            if count > max_elements:
                raise OversizeGuard(f"{path}: {rows}x{cols} exceeds the {max_elements}-element cap")
            need = count * 4
            payload = fh.read(need)
            if len(payload) < need:
                raise TruncatedPayload(f"{path}: payload is {len(payload)} bytes, need {need}")
            if fh.read(1):
                raise TrailingData(f"{path}: unexpected bytes after the payload")
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}") from exc
    return np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(rows, cols)


# -- concept datasets --------------------------------------------------------

def write_dataset(concepts, path) -> None:
    concepts = list(concepts)
    names = [c.name for c in concepts]
    if len(set(names)) != len(names):
        raise SchemaViolation("concept names must be unique within a dataset")
    doc = {
        "format": DATASET_FORMAT,
        "version": 1,
        "records": [{"concept": c.name, "stimuli": list(c.stimuli)} for c in concepts],
    }
    _atomic_write(path, json.dumps(doc, ensure_ascii=False, indent=1).encode("utf-8"))


def _load_json(path):
    try:
        with open(path, "rb") as fh:
            return json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}") from exc
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from exc


def read_dataset(path) -> list[Concept]:
    doc = _load_json(path)
    if not isinstance(doc, dict) or doc.get("format") != DATASET_FORMAT:
        raise SchemaViolation(f"{path}: not a {DATASET_FORMAT} file")
    records = doc.get("records")
    if not isinstance(records, list):
        raise SchemaViolation(f"{path}: 'records' must be a list")
    out, seen = [], set()
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or set(rec) != {"concept", "stimuli"}:
            raise SchemaViolation(f"{path}: record {i} must have exactly 'concept' and 'stimuli'")
        name, stimuli = rec["concept"], rec["stimuli"]
        if not isinstance(name, str) or not name.strip():
            raise SchemaViolation(f"{path}: record {i} has an empty concept name")
        if not isinstance(stimuli, list) or not all(isinstance(s, str) and s.strip() for s in stimuli):
            raise SchemaViolation(f"{path}: record {i} stimuli must be non-empty strings")
        if name in seen:
            raise SchemaViolation(f"{path}: duplicate concept {name!r}")
        seen.add(name)
        concept = Concept(name, tuple(stimuli))
        if len(concept.stimuli) != len(stimuli):
            raise SchemaViolation(f"{path}: concept {name!r} has duplicate stimuli")
        out.append(concept)
    return out


# -- dictionary manifests ----------------------------------------------------

@dataclass(frozen=True)
class DictionaryManifest:
    space: LatentSpaceTag
    names: tuple[str, ...]
    read_methods: tuple[ReadMethod, ...]
    matrix_file: str
    normalized: bool
    sha256: str

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": 1,
            "space": self.space.to_dict(),
            "names": list(self.names),
            "read_methods": [m.value for m in self.read_methods],
            "matrix": self.matrix_file,
            "normalized": self.normalized,
            "sha256": self.sha256,
        }


def write_dictionary(dictionary: ConceptDictionary, manifest_path, matrix_path=None) -> DictionaryManifest:
    """Write the matrix file and a manifest next to it.

    The manifest stores the matrix path relative to itself.
    """
    manifest_path = Path(manifest_path)
    if matrix_path is None:
        matrix_path = manifest_path.with_suffix(".clan")
    matrix_path = Path(matrix_path)
    write_matrix(dictionary.matrix, matrix_path)
    rel = os.path.relpath(matrix_path, manifest_path.parent)
    manifest = DictionaryManifest(
        dictionary.space,
        dictionary.names,
        dictionary.read_methods,
        rel,
        dictionary.normalized,
        dictionary.content_hash(),
    )
    _atomic_write(manifest_path, json.dumps(manifest.to_dict(), ensure_ascii=False, indent=1).encode("utf-8"))
    return manifest


def read_dictionary(manifest_path) -> ConceptDictionary:
    manifest_path = Path(manifest_path)
    doc = _load_json(manifest_path)
    try:
        if doc.get("format") != MANIFEST_FORMAT:
            raise SchemaViolation(f"{manifest_path}: not a {MANIFEST_FORMAT} manifest")
        space = LatentSpaceTag.from_dict(doc["space"])
        names = tuple(doc["names"])
        methods = tuple(ReadMethod(m) for m in doc["read_methods"])
        matrix_file = doc["matrix"]
        normalized = bool(doc["normalized"])
        expected = doc["sha256"]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, SchemaViolation):
            raise
        raise SchemaViolation(f"{manifest_path}: malformed manifest ({exc})") from exc
    matrix = read_matrix(manifest_path.parent / matrix_file)
    if matrix.shape[1] != len(names):
        raise SchemaViolation(f"{manifest_path}: {len(names)} names but {matrix.shape[1]} columns")
    dictionary = ConceptDictionary(space, names, matrix, normalized, methods)
    actual = dictionary.content_hash()
    if actual != expected:
        raise HashMismatch(f"{manifest_path}: content hash {actual} != recorded {expected}")
    return dictionary


# -- embedding cache ---------------------------------------------------------

class EmbeddingCache:
    """Content-addressed vector cache keyed by ``(model_name, text)``.

    Each entry is a 1 x d matrix file named by the SHA-256 of the key.
    Identical keys map to identical files, so concurrent writers are benign.
    """

    def __init__(self, root):
        self.root = Path(root)

    @staticmethod
    def key_digest(model_name: str, text: str) -> str:
        h = hashlib.sha256()
        h.update(model_name.encode("utf-8"))
        h.update(b"\0")
        h.update(text.encode("utf-8"))
        return h.hexdigest()

    def _path(self, model_name: str, text: str) -> Path:
        digest = self.key_digest(model_name, text)
        return self.root / digest[:2] / f"{digest}.clan"

    def get(self, model_name: str, text: str):
        path = self._path(model_name, text)
        if not path.exists():
            return None
        return read_matrix(path)[0]

    def put(self, model_name: str, text: str, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32).reshape(1, -1)
        _atomic_write(self._path(model_name, text), matrix_bytes(vec))

    def __len__(self):
        return sum(1 for _ in self.root.glob("*/*.clan")) if self.root.exists() else 0


def cache_get(cache: EmbeddingCache, model_name: str, text: str):
    return cache.get(model_name, text)


def cache_put(cache: EmbeddingCache, model_name: str, text: str, vector) -> None:
    cache.put(model_name, text, vector)

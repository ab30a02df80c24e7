"""Sparse decomposition of a latent vector and concept transplant.

A source latent ``v`` is written as ``v = D w* + r`` over a concept dictionary.
An edit swaps one dictionary column for a target concept vector and
re-synthesises ``v' = D' w* + r`` with the coefficients and residual left
untouched.  Insertion edits use a counterpart concept as the column to swap;
removal edits swap in the null concept.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .dictionary import NULL_CONCEPT, ConceptDictionary, ConceptVector
from .errors import DimensionMismatch, KOutOfRange, NonFinite, SpaceMismatch, ValidationError, ZeroAtom
from .solver import SolverConfig, SparseSolution, elastic_net_solve, objective

DEFAULT_TOP_K = 10


class EditKind(str, enum.Enum):
    REPLACE = "replace"
    ADD = "add"
    REMOVE = "remove"


class SourceAbsentWarning(UserWarning):
    """The source concept has a zero coefficient, so the edit has no magnitude."""


@dataclass(frozen=True, eq=False)
class Decomposition:
    source: np.ndarray
    dictionary: ConceptDictionary
    weights: np.ndarray
    residual: np.ndarray
    solution: SparseSolution
    solve_seconds: float = 0.0

    def __post_init__(self):
        for name in ("source", "weights", "residual"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dictionary_id(self) -> str:
        return self.dictionary.content_hash()

    def coefficient(self, name: str) -> float:
        return float(self.weights[self.dictionary.index(name)])

    def reconstruction(self) -> np.ndarray:
        """``D w* + r`` in float64."""
        return self.dictionary.matrix.astype(np.float64) @ self.weights + self.residual.astype(np.float64)


@dataclass(frozen=True)
class EditRequest:
    kind: EditKind
    source_concept: str
    target_concept: str
    target_vector: ConceptVector

    def __post_init__(self):
        object.__setattr__(self, "kind", EditKind(self.kind))
        if self.target_vector.name != self.target_concept:
            raise ValidationError(
                f"target vector is named {self.target_vector.name!r}, expected {self.target_concept!r}"
            )
        if self.kind is EditKind.REMOVE:
            if self.target_concept != NULL_CONCEPT:
                raise ValidationError("a removal edit must target the null concept")
        else:
            if self.target_concept == NULL_CONCEPT:
                raise ValidationError(f"{self.kind.value} edits need a real target concept")
            if not np.any(self.target_vector.vector):
                raise ZeroAtom(f"target vector {self.target_concept!r} is all zero")

    @classmethod
    def replace(cls, source_concept: str, target: ConceptVector) -> "EditRequest":
        return cls(EditKind.REPLACE, source_concept, target.name, target)

    @classmethod
    def add(cls, counterpart: str, target: ConceptVector) -> "EditRequest":
        return cls(EditKind.ADD, counterpart, target.name, target)

    @classmethod
    def remove(cls, source_concept: str, null: ConceptVector) -> "EditRequest":
        return cls(EditKind.REMOVE, source_concept, NULL_CONCEPT, null)


@dataclass(frozen=True)
class ReportEntry:
    name: str
    coefficient: float
    magnitude: float


@dataclass(frozen=True)
class CoefficientReport:
    entries: tuple[ReportEntry, ...]
    k: int

    def to_rows(self) -> list[dict]:
        return [
            {"rank": i + 1, "concept": e.name, "coefficient": e.coefficient, "magnitude": e.magnitude}
            for i, e in enumerate(self.entries)
        ]


def decompose(v, dictionary: ConceptDictionary, cfg: SolverConfig | None = None) -> Decomposition:
    """Solve for the concept coefficients of ``v`` and keep the residual.

    A null-concept column that is identically zero cannot explain anything;
    it is left out of the solve and keeps a zero weight.
    """
    cfg = cfg or SolverConfig()
    x = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.isfinite(x).all():
        raise NonFinite("source vector contains NaN or Inf")
    if x.shape[0] != dictionary.space.flat_dim:
        raise DimensionMismatch(f"source length {x.shape[0]} != space dim {dictionary.space.flat_dim}")

    live = np.flatnonzero(dictionary.matrix.any(axis=0))
    weights = np.zeros(len(dictionary))
    start = time.perf_counter()
    if live.size:
        sol = elastic_net_solve(x, dictionary.matrix[:, live], cfg)
        weights[live] = sol.weights
    else:
        sol = SparseSolution(np.zeros(0), 0, True, float(x @ x))
    elapsed = time.perf_counter() - start
    residual = x - dictionary.matrix.astype(np.float64) @ weights
    full = SparseSolution(
        weights=weights,
        sweeps_used=sol.sweeps_used,
        converged=sol.converged,
        objective=objective(x, dictionary.matrix, weights, cfg.lam, cfg.rho),
        objective_trace=sol.objective_trace,
    )
    return Decomposition(
        source=x.astype(np.float32),
        dictionary=dictionary,
        weights=weights,
        residual=residual.astype(np.float32),
        solution=full,
        solve_seconds=elapsed,
    )


def _edit_direction(dec: Decomposition, edit: EditRequest) -> tuple[int, np.ndarray]:
    d = dec.dictionary
    j = d.index(edit.source_concept)
    if edit.target_vector.space != d.space:
        raise SpaceMismatch(f"target lives in {edit.target_vector.space}, dictionary in {d.space}")
    direction = edit.target_vector.vector.astype(np.float64) - d.matrix[:, j].astype(np.float64)
    return j, direction


def transplant(dec: Decomposition, edit: EditRequest) -> np.ndarray:
    """Return ``v' = D' w* + r`` as a float64 vector.

    ``D'`` is the dictionary with the source column swapped for the target
    vector.  Nothing is re-solved.  When the source coefficient is exactly
    zero the source vector comes back unchanged and a
    :class:`SourceAbsentWarning` is issued.  Chained edits each reuse the
    original coefficients, which can drift from a fresh decomposition.
    """
    j, direction = _edit_direction(dec, edit)
    w_s = float(dec.weights[j])
    if w_s == 0.0:
        warnings.warn(
            f"coefficient of {edit.source_concept!r} is zero; edit leaves the latent unchanged",
            SourceAbsentWarning,
            stacklevel=2,
        )
        return dec.source.astype(np.float64)
    return dec.reconstruction() + w_s * direction


def vec_add(v, d_a: ConceptVector, d_b: ConceptVector, w: float) -> np.ndarray:
    """Fixed-strength baseline edit ``v + w (d_a - d_b)``."""
    if d_a.space != d_b.space:
        raise SpaceMismatch(f"{d_a.name!r} and {d_b.name!r} live in different spaces")
    x = np.asarray(v, dtype=np.float64).reshape(-1)
    if x.shape[0] != d_a.space.flat_dim:
        raise SpaceMismatch(f"vector length {x.shape[0]} != space dim {d_a.space.flat_dim}")
    return x + w * (d_a.vector.astype(np.float64) - d_b.vector.astype(np.float64))


def strength_sweep(dec: Decomposition, edit: EditRequest, grid) -> list[np.ndarray]:
    """Latents ``v + a (d_target - d_source)`` for each strength ``a`` in ``grid``."""
    grid = [float(a) for a in grid]
    if not grid:
        raise ValidationError("strength grid must be non-empty")
    if not all(np.isfinite(grid)):
        raise NonFinite("strength grid contains NaN or Inf")
    _, direction = _edit_direction(dec, edit)
    base = dec.source.astype(np.float64)
    return [base + a * direction for a in grid]


def top_k_report(dec: Decomposition, k: int = DEFAULT_TOP_K) -> CoefficientReport:
    n = len(dec.dictionary)
    if not 1 <= k <= n:
        raise KOutOfRange(f"k must lie in [1, {n}], got {k}")
    order = sorted(range(n), key=lambda j: (-abs(dec.weights[j]), j))[:k]
    entries = tuple(
        ReportEntry(dec.dictionary.names[j], float(dec.weights[j]), float(abs(dec.weights[j])))
        for j in order
    )
    return CoefficientReport(entries, k)

import json
import warnings
from pathlib import Path

import numpy as np
import pytest

import oracles
from concept_transplant.dictionary import NULL_CONCEPT, ConceptVector, LatentSpaceTag, ReadMethod, assemble, null_concept
from concept_transplant.errors import (
    DimensionMismatch,
    KOutOfRange,
    NonFinite,
    SpaceMismatch,
    UnknownConcept,
    ValidationError,
    ZeroAtom,
)
from concept_transplant.solver import SolverConfig
from concept_transplant.transplant import (
    EditKind,
    EditRequest,
    SourceAbsentWarning,
    decompose,
    strength_sweep,
    top_k_report,
    transplant,
    vec_add,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def vec(name, x, space):
    return ConceptVector(name, np.asarray(x, np.float32), ReadMethod.AVG, space)


def random_setup(seed, d=24, n=6, lam=0.01):
    rng = np.random.default_rng(seed)
    space = LatentSpaceTag.score(d)
    vecs = [vec(f"c{j}", rng.standard_normal(d), space) for j in range(n)]
    dictionary = assemble(vecs)
    w0 = np.zeros(n)
    w0[:3] = rng.uniform(0.5, 1.5, 3) * rng.choice([-1, 1], 3)
    v = dictionary.matrix.astype(np.float64) @ w0 + 0.1 * rng.standard_normal(d)
    return rng, space, dictionary, v, decompose(v, dictionary, SolverConfig(lam=lam))


def bound(v):
    return 1e-5 * (1 + np.abs(v).max())


# -- decomposition -----------------------------------------------------------------

def test_reconstruction_identity():
    for seed in range(10):
        _, _, dictionary, v, dec = random_setup(seed)
        recon = dictionary.matrix.astype(np.float64) @ dec.weights + dec.residual.astype(np.float64)
        assert np.abs(recon - v).max() <= bound(v)


def test_planted_single_atom():
    rng = np.random.default_rng(3)
    space = LatentSpaceTag.score(32)
    q, _ = np.linalg.qr(rng.standard_normal((32, 5)))
    dictionary = assemble([vec(f"c{j}", q[:, j] * (1 + j), space) for j in range(5)])
    v = dictionary.matrix[:, 2].astype(np.float64)
    dec = decompose(v, dictionary, SolverConfig(lam=1e-10))
    expected = np.eye(5)[2]
    assert abs(dec.weights[2] - 1) < 1e-3
    assert np.abs(dec.weights - expected).max() < 1e-3
    assert np.linalg.norm(dec.residual) < 1e-3
    np.testing.assert_allclose(dec.weights, oracles.least_squares(v, dictionary.matrix), atol=1e-3)


def test_decompose_validation():
    _, space, dictionary, v, _ = random_setup(0)
    with pytest.raises(DimensionMismatch):
        decompose(v[:-1], dictionary)
    bad = v.copy()
    bad[0] = np.nan
    with pytest.raises(NonFinite):
        decompose(bad, dictionary)


def test_decompose_skips_zero_null_column():
    rng = np.random.default_rng(4)
    space = LatentSpaceTag.score(8)
    vecs = [vec(f"c{j}", rng.standard_normal(8), space) for j in range(3)]
    dictionary = assemble(vecs + [null_concept(space, np.zeros(8))])
    dec = decompose(rng.standard_normal(8), dictionary)
    assert dec.coefficient(NULL_CONCEPT) == 0.0
    assert len(dec.weights) == 4


def test_decomposition_arrays_are_read_only():
    _, _, _, _, dec = random_setup(1)
    for arr in (dec.weights, dec.residual, dec.source):
        with pytest.raises(ValueError):
            arr[0] = 1.0


# -- edit requests ----------------------------------------------------------------

def test_edit_request_rules():
    space = LatentSpaceTag.score(3)
    target = vec("dog", [1, 2, 3], space)
    assert EditRequest.replace("cat", target).kind is EditKind.REPLACE
    assert EditRequest.add("normal", target).kind is EditKind.ADD
    null = null_concept(space, np.zeros(3))
    assert EditRequest.remove("cat", null).target_concept == NULL_CONCEPT
    with pytest.raises(ValidationError):
        EditRequest(EditKind.REMOVE, "cat", "dog", target)
    with pytest.raises(ValidationError):
        EditRequest(EditKind.REPLACE, "cat", NULL_CONCEPT, null)
    with pytest.raises(ValidationError):
        EditRequest(EditKind.REPLACE, "cat", "horse", target)


def test_zero_target_rejected():
    with pytest.raises(ZeroAtom):
        vec("dog", [0, 0, 0], LatentSpaceTag.score(3))


# -- transplant ------------------------------------------------------------------------

def test_transplant_delta_identity_and_preservation():
    for seed in range(25):
        rng, space, dictionary, v, dec = random_setup(seed)
        weights_before = dec.weights.tobytes()
        residual_before = dec.residual.tobytes()
        j = int(np.argmax(np.abs(dec.weights)))
        s = dictionary.names[j]
        target = vec("new", rng.standard_normal(space.flat_dim), space)
        out = transplant(dec, EditRequest.replace(s, target))
        d_s = dictionary.matrix[:, j].astype(np.float64)
        expect = dec.weights[j] * (target.vector.astype(np.float64) - d_s)
        assert np.abs((out - v) - expect).max() <= bound(v)
        assert dec.weights.tobytes() == weights_before
        assert dec.residual.tobytes() == residual_before
        assert out.dtype == np.float64


def test_transplant_equals_swapped_dictionary_synthesis():
    rng, space, dictionary, v, dec = random_setup(8)
    target = vec("new", rng.standard_normal(space.flat_dim), space)
    out = transplant(dec, EditRequest.replace("c1", target))
    swapped = dictionary.matrix.astype(np.float64).copy()
    swapped[:, 1] = target.vector
    np.testing.assert_allclose(out, swapped @ dec.weights + dec.residual, atol=1e-9)


def test_replace_with_same_vector_is_identity():
    _, _, dictionary, v, dec = random_setup(2)
    out = transplant(dec, EditRequest.replace("c0", dictionary.vector("c0")))
    np.testing.assert_allclose(out, dec.reconstruction(), atol=0)
    assert np.abs(out - v).max() <= bound(v)


def test_half_weight_moves_by_half_direction():
    space = LatentSpaceTag.score(2)
    dictionary = assemble([vec("a", [1, 0], space), vec("b", [0, 1], space)])
    v = np.array([0.505, 0.0])
    dec = decompose(v, dictionary, SolverConfig(lam=0.01))
    assert dec.coefficient("a") == pytest.approx(0.5)
    u = np.array([0.0, 2.0])
    target = vec("t", dictionary.column("a") + u, space)
    out = transplant(dec, EditRequest.replace("a", target))
    np.testing.assert_allclose(out - v, 0.5 * (target.vector - dictionary.column("a")), atol=1e-7)


def test_remove_with_zero_null_equals_vec_add():
    _, space, dictionary, v, dec = random_setup(5)
    null = null_concept(space, np.zeros(space.flat_dim))
    j = int(np.argmax(np.abs(dec.weights)))
    s = dictionary.names[j]
    out = transplant(dec, EditRequest.remove(s, null))
    ws = dec.weights[j]
    np.testing.assert_allclose(out, v - ws * dictionary.matrix[:, j].astype(np.float64), atol=bound(v))
    np.testing.assert_allclose(out, vec_add(v, null, dictionary.vector(s), ws), atol=bound(v))


def test_zero_source_coefficient_warns_and_returns_source():
    space = LatentSpaceTag.score(2)
    dictionary = assemble([vec("a", [1, 0], space), vec("b", [0, 1], space)])
    v = np.array([1.0, 0.001])
    dec = decompose(v, dictionary, SolverConfig(lam=0.01))
    assert dec.coefficient("b") == 0.0
    with pytest.warns(SourceAbsentWarning):
        out = transplant(dec, EditRequest.replace("b", vec("t", [3, 3], space)))
    np.testing.assert_array_equal(out, dec.source.astype(np.float64))


def test_transplant_errors():
    rng, space, dictionary, v, dec = random_setup(6)
    with pytest.raises(UnknownConcept):
        transplant(dec, EditRequest.replace("nope", vec("t", rng.standard_normal(space.flat_dim), space)))
    other = LatentSpaceTag.score(space.flat_dim + 1)
    with pytest.raises(SpaceMismatch):
        transplant(dec, EditRequest.replace("c0", vec("t", np.ones(other.flat_dim), other)))


# -- vec_add ------------------------------------------------------------------------

def test_vec_add_examples():
    space = LatentSpaceTag.score(3)
    a, b = vec("a", [1, 2, 3], space), vec("b", [0, 1, 0], space)
    v = np.array([0.5, 0.5, 0.5])
    np.testing.assert_array_equal(vec_add(v, a, b, 0.0), v)
    np.testing.assert_array_equal(vec_add(v, a, a, 7.0), v)
    np.testing.assert_allclose(vec_add(v, a, b, 2.0), [2.5, 2.5, 6.5])
    with pytest.raises(SpaceMismatch):
        vec_add(v, a, vec("c", [1, 1, 1, 1], LatentSpaceTag.score(4)), 1.0)


def test_word_analogy_fixture_moves_toward_queen():
    table = json.loads((FIXTURES / "analogy_embeddings.json").read_text())["vectors"]
    space = LatentSpaceTag.score(6)
    words = {k: vec(k, x, space) for k, x in table.items()}

    def cos(a, b):
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    queen = words["queen"].vector.astype(np.float64)
    king = words["king"].vector.astype(np.float64)
    edited = vec_add(king, words["woman"], words["man"], 1.0)
    assert cos(edited, queen) > cos(king, queen)
    others = [cos(edited, words[w].vector.astype(np.float64)) for w in ("king", "man", "woman", "prince", "apple")]
    assert cos(edited, queen) > max(others)


# -- strength sweep ----------------------------------------------------------------

def test_sweep_examples():
    rng, space, dictionary, v, dec = random_setup(9)
    j = int(np.argmax(np.abs(dec.weights)))
    s = dictionary.names[j]
    edit = EditRequest.replace(s, vec("t", rng.standard_normal(space.flat_dim), space))
    (at_zero,) = strength_sweep(dec, edit, [0.0])
    np.testing.assert_array_equal(at_zero, dec.source.astype(np.float64))
    (at_w,) = strength_sweep(dec, edit, [dec.weights[j]])
    assert np.abs(at_w - transplant(dec, edit)).max() <= 1e-6
    grid = [0, 0.3, 0.586, 0.9, 1.5]
    pts = strength_sweep(dec, edit, grid)
    direction = edit.target_vector.vector.astype(np.float64) - dictionary.matrix[:, j].astype(np.float64)
    for a1, p1 in zip(grid, pts):
        for a2, p2 in zip(grid, pts):
            np.testing.assert_allclose(p1 - p2, (a1 - a2) * direction, atol=1e-5)


def test_sweep_validation():
    rng, space, _, _, dec = random_setup(10)
    edit = EditRequest.replace("c0", vec("t", rng.standard_normal(space.flat_dim), space))
    with pytest.raises(ValidationError):
        strength_sweep(dec, edit, [])
    with pytest.raises(NonFinite):
        strength_sweep(dec, edit, [0.0, float("inf")])


# -- report ---------------------------------------------------------------------------

def _fixed_weights_decomposition(weights):
    space = LatentSpaceTag.score(len(weights))
    names = [f"c{j + 1}" for j in range(len(weights))]
    dictionary = assemble([vec(n, np.eye(len(weights))[j], space) for j, n in enumerate(names)])
    return decompose(np.asarray(weights, float), dictionary, SolverConfig(lam=1e-12))


def test_report_sorting_example():
    dec = _fixed_weights_decomposition([0.0, 3.0, -5.0])
    rep = top_k_report(dec, 2)
    assert [(e.name, round(e.coefficient, 6)) for e in rep.entries] == [("c3", -5.0), ("c2", 3.0)]
    assert rep.to_rows()[0] == {"rank": 1, "concept": "c3", "coefficient": rep.entries[0].coefficient,
                                "magnitude": rep.entries[0].magnitude}


def test_report_full_permutation_and_ties():
    dec = _fixed_weights_decomposition([1.0, -2.0, 2.0, 1.0])
    rep = top_k_report(dec, 4)
    assert [e.name for e in rep.entries] == ["c2", "c3", "c1", "c4"]


def test_report_default_k_and_range():
    _, _, _, _, dec = random_setup(11, n=12)
    assert len(top_k_report(dec).entries) == 10
    with pytest.raises(KOutOfRange):
        top_k_report(dec, 0)
    with pytest.raises(KOutOfRange):
        top_k_report(dec, 13)

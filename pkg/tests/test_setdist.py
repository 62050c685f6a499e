import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import avg_distance_oracle, median_oracle, mmd2_oracle

from stegid.setdist import (
    DistanceMatrix,
    KernelSpec,
    actor_distance_matrix,
    mean_embedding_distance,
    median_gamma,
    mmd_squared,
    mmd_unbiased,
    normalize_columns,
    normalize_sets,
    prepare_sets,
    set_distance,
    set_distance_avg,
    whiten_sets,
)

finite = st.floats(-100, 100, allow_nan=False)


def test_normalize_column_example():
    out = normalize_columns(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(out[:, 0], [-1.2247449, 0, 1.2247449], atol=1e-6)


def test_normalize_constant_column_is_zero():
    out = normalize_columns(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]))
    assert np.all(out[:, 0] == 0)


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)), elements=finite))
def test_normalize_post_state_and_idempotence(X):
    out = normalize_columns(X)
    live = np.any(out != 0, axis=0)
    assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose((out[:, live] ** 2).mean(axis=0), 1.0, atol=1e-9)
    np.testing.assert_allclose(normalize_columns(out), out, atol=1e-9)


def test_normalize_sets_is_joint():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 3)), rng.normal(5, 1, size=(6, 3))
    na, nb = normalize_sets([a, b])
    np.testing.assert_array_equal(np.vstack([na, nb]), normalize_columns(np.vstack([a, b])))


def test_whiten_sets_identity_covariance():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(40, 3)) @ np.array([[3, 1, 0], [0, 1, 0], [0, 0, 0.1]])
    B = rng.normal(size=(30, 3))
    W = np.vstack(whiten_sets([A, B]))
    np.testing.assert_allclose(W.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(np.cov(W.T, bias=True), np.eye(3), atol=1e-9)
    assert [len(s) for s in prepare_sets([A, B], "whiten")] == [40, 30]
    with pytest.raises(ValueError):
        prepare_sets([A, B], "bogus")


def test_mmd_hand_example_matches_double_loop():
    X, Y = np.array([[0.0], [2.0]]), np.array([[1.0], [3.0]])
    k = KernelSpec()
    assert mmd_squared(X, Y, k) == pytest.approx(mmd2_oracle(X, Y, k), abs=1e-12)


def test_mmd_identical_sets_is_zero():
    X = np.random.default_rng(2).normal(size=(7, 4))
    assert mmd_unbiased(X, X) == 0.0
    assert mmd_unbiased(X, X, KernelSpec("gaussian", 0.3)) == 0.0


@given(arrays(np.float64, st.tuples(st.integers(1, 4)), elements=finite), st.floats(1e-3, 10))
def test_gaussian_kernel_self_similarity(x, gamma):
    assert KernelSpec("gaussian", gamma)(x, x) == 1.0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["linear", "gaussian"]))
def test_mmd_permutation_invariance(seed, kind):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    k = KernelSpec(kind, 0.5 if kind == "gaussian" else None)
    a = mmd_unbiased(X, Y, k)
    perm = rng.permutation(6)
    b = mmd_unbiased(X[perm], Y[perm], k)
    assert a == pytest.approx(b, abs=1e-12)


def test_mmd_linear_zero_in_expectation():
    rng = np.random.default_rng(3)
    vals = [mmd_squared(rng.normal(size=(10, 2)), rng.normal(size=(10, 2))) for _ in range(10_000)]
    mean, sem = np.mean(vals), np.std(vals) / np.sqrt(len(vals))
    assert abs(mean) < 3 * sem


def test_mmd_linear_approaches_mean_distance():
    rng = np.random.default_rng(4)
    X = rng.normal(0, 1, size=(1000, 3))
    Y = rng.normal(0.5, 1, size=(1000, 3))
    m = abs(mmd_squared(X, Y)) ** 0.5
    assert m == pytest.approx(mean_embedding_distance(X, Y), rel=0.05)


def test_median_gamma_examples():
    g = median_gamma(np.array([[0.0, 0.0], [0.0, 2.0]]))
    assert g == 0.25
    eta = 2.0
    assert -g * eta**2 == -1.0
    with pytest.raises(ValueError):
        median_gamma(np.ones((3, 2)))


@pytest.mark.parametrize("seed", range(3))
def test_median_gamma_matches_sort_oracle(seed):
    V = np.random.default_rng(seed).normal(size=(100, 3))
    assert median_gamma(V) == pytest.approx(1.0 / median_oracle(V.tolist()) ** 2, rel=1e-12)


def test_mean_embedding_examples():
    assert mean_embedding_distance([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    X = np.random.default_rng(0).normal(size=(5, 2))
    assert mean_embedding_distance(X, X) == 0.0


def test_set_distance_avg_examples():
    assert set_distance_avg([[0.0]], [[0.0]]) == 0.0
    assert set_distance_avg([[0.0]], [[3.0], [5.0]]) == 4.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6), st.integers(1, 4))
def test_set_distance_avg_matches_oracle(seed, a, b, d):
    rng = np.random.default_rng(seed)
    F, G = rng.normal(size=(a, d)), rng.normal(size=(b, d))
    assert set_distance_avg(F, G) == pytest.approx(avg_distance_oracle(F.tolist(), G.tolist()), abs=1e-9)


def test_set_distance_singleton_fallback_and_errors():
    assert set_distance([[0.0, 0.0]], [[3.0, 4.0]], "mmd") == 5.0
    assert set_distance([[0.0, 0.0]], [[3.0, 4.0]], "euclidean") == 5.0
    with pytest.raises(ValueError):
        set_distance([[0.0], [1.0]], [[1.0], [2.0]], "euclidean")
    with pytest.raises(ValueError):
        set_distance([[0.0]], [[1.0]], "nope")


def test_unequal_sizes_are_seeded():
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(8, 2)), rng.normal(size=(5, 2))
    a = mmd_unbiased(X, Y, rng=np.random.default_rng(1))
    b = mmd_unbiased(X, Y, rng=np.random.default_rng(1))
    assert a == b


def test_actor_distance_matrix_properties(tmp_path):
    rng = np.random.default_rng(6)
    sets = [rng.normal(i, 1, size=(5, 3)) for i in range(3)]
    D = actor_distance_matrix(sets, seed=3)
    assert np.array_equal(D.values, D.values.T)
    assert np.all(np.diag(D.values) == 0)
    for i in range(3):
        for j in range(3):
            if i != j:
                assert D.values[i, j] == mmd_unbiased(sets[i], sets[j])
    same = actor_distance_matrix([sets[0]] * 4)
    assert np.all(same.values == 0)
    D.to_csv(tmp_path / "d.csv")
    back = DistanceMatrix.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.values, D.values) and back.ids == D.ids and back.measure == D.measure


def test_gaussian_median_kernel_option():
    rng = np.random.default_rng(7)
    sets = [rng.normal(size=(4, 2)) for _ in range(3)]
    D = actor_distance_matrix(sets, kernel="gaussian-median")
    assert D.measure["kernel"]["kind"] == "gaussian"


def test_distance_matrix_validation():
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        KernelSpec("gaussian")
    with pytest.raises(ValueError):
        KernelSpec("linear", 1.0)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 3), st.sampled_from(["linear", "gaussian"]))
def test_mmd_matches_oracle(seed, m, d, kind):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(m, d)), rng.normal(size=(m, d))
    k = KernelSpec(kind, 0.7 if kind == "gaussian" else None)
    want = mmd2_oracle(X, Y, k)
    assert mmd_squared(X, Y, k) == pytest.approx(want, abs=1e-9)
    assert mmd_unbiased(X, Y, k) == pytest.approx(np.sign(want) * np.sqrt(abs(want)), abs=1e-9)

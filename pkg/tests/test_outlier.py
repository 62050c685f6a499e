import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import k_distance_oracle, lof_oracle
from scipy.spatial.distance import cdist

from stegid.outlier import SuspicionRanking, identify_lof, k_distance, lof_scores


def dist(pts):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return cdist(pts, pts)


def test_k_distance_examples():
    assert k_distance(0, dist([0, 1, 2, 5]), 2) == 2.0
    assert k_distance(0, dist([0, 3, 0, 7]), 1) == 0.0
    with pytest.raises(ValueError):
        k_distance(0, dist([0, 1]), 2)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_k_distance_matches_sort_oracle(seed, n):
    rng = np.random.default_rng(seed)
    d = dist(rng.normal(size=(n, 2)))
    k = int(rng.integers(1, n))
    p = int(rng.integers(n))
    assert k_distance(p, d, k) == k_distance_oracle(d.tolist(), p, k)


@pytest.mark.parametrize("n,k", [(5, 1), (6, 3), (12, 10)])
def test_regular_simplex_scores_one(n, k):
    d = np.ones((n, n)) - np.eye(n)
    np.testing.assert_allclose(lof_scores(d, k), 1.0, atol=1e-9)


def test_square_plus_far_point():
    d = dist([(0, 0), (0, 1), (1, 0), (1, 1), (10, 10)])
    got = lof_scores(d, 2)
    want = lof_oracle(d.tolist(), 2)
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert np.argmax(got) == 4 and got[4] > 1
    assert np.sum(got == got.max()) == 1


def test_grid_interior_near_one():
    g = np.array([(i, j) for i in range(10) for j in range(10)], dtype=float)
    scores = lof_scores(dist(g), 4)
    interior = [(1 <= i <= 8) and (1 <= j <= 8) for i, j in g]
    assert np.all((scores[interior] >= 0.9) & (scores[interior] <= 1.1))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 30), st.booleans())
def test_lof_matches_oracle(seed, n, integer):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 4, (n, 2)) if integer else rng.normal(size=(n, 2))
    d = dist(pts)
    k = int(rng.integers(1, n - 1))
    got = lof_scores(d, k)
    want = np.array(lof_oracle(d.tolist(), k))
    assert np.array_equal(np.isinf(got), np.isinf(want))
    fin = np.isfinite(want)
    np.testing.assert_allclose(got[fin], want[fin], rtol=0, atol=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 3.0]))
def test_lof_scale_invariant(seed, lam):
    d = dist(np.random.default_rng(seed).normal(size=(15, 3)))
    np.testing.assert_allclose(lof_scores(d * lam, 4), lof_scores(d, 4), rtol=0, atol=1e-9)


def test_coincident_cluster_scores_one():
    d = dist([0, 0, 0, 0, 5])
    s = lof_scores(d, 2)
    assert np.all(s[:4] == 1.0)


def test_negative_distances_clamped():
    d = dist([0, 1, 2, 6])
    neg = d.copy()
    neg[0, 1] = neg[1, 0] = -0.3
    zero = d.copy()
    zero[0, 1] = zero[1, 0] = 0.0
    assert np.array_equal(lof_scores(neg, 1), lof_scores(zero, 1))


def test_lof_rejects_small_inputs():
    with pytest.raises(ValueError):
        lof_scores(dist([0, 1, 2]), 2)


def test_ranking_ties_and_io(tmp_path):
    r = SuspicionRanking.from_scores([1.0, 2.0, 2.0, 0.5])
    assert r.actors == (1, 2, 0, 3)
    assert r.top == 1 and r.rank_of(3) == 4
    r.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[1] == "1,1,2.0"


def test_identify_lof_planted():
    rng = np.random.default_rng(0)
    sets = [rng.normal(size=(20, 3)) for _ in range(20)]
    sets[7] = sets[7] + 2.5
    r = identify_lof(sets, k=10)
    assert r.top == 7
    assert sorted(r.actors) == list(range(20))


def test_identify_lof_identical_actors_fallback():
    X = np.random.default_rng(1).normal(size=(6, 3))
    r = identify_lof([X] * 12, k=10)
    assert r.actors == tuple(range(12))
    assert set(r.scores) == {1.0}


def test_identify_lof_benchmark():
    from stegid.bench import DetectorSpec, ExperimentConfig, accuracy, run_experiment

    # 64x64 covers give about 18%: too few coefficients per image for the
    # signal to clear the between-source spread
    cfg = ExperimentConfig(
        n=20, m=50, payload=0.4, proportion=0.5, detector=DetectorSpec("lof", measure="mmd", k=10), trials=50, seed=5,
        height=128, width=128, source_spread=0.3,
    )
    assert accuracy(run_experiment(cfg)) >= 0.9

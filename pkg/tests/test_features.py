import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dct_hist_oracle, li250_oracle, markov_oracle

from stegid.dctdomain import CoefArray, PixelImage, calibrate, compress, draw_source_params, quality_to_table, synth_cover
from stegid.embedsim import capacity, nsf5_simulate
from stegid.features import (
    FeatureSet,
    FeatureVector,
    extract,
    li250,
    li250_stack,
    markov_tpm,
    pev274,
    pev274_stack,
    pev_markov_avg,
)

TABLE = quality_to_table(80)


def random_coef_array(rng, by=3, bx=3, spread=4):
    return CoefArray(rng.integers(-spread, spread + 1, (by, bx, 8, 8)).astype(np.int32), TABLE)


def test_schema_lengths():
    c = random_coef_array(np.random.default_rng(0))
    assert len(pev274(c)) == 274
    assert len(li250(c)) == 250
    assert len(pev_markov_avg(c)) == 81


def test_constant_image_features_vanish():
    c = compress(PixelImage(np.full((48, 48), 77.0)), qf=80)
    v = pev274(c).values
    assert np.all(v[:193] == 0)
    # DC magnitudes enter the Markov array and calibration drops a block
    # row and column, so only the row of zero differences shifts slightly
    m = pev_markov_avg(c).reshape(9, 9)
    assert np.array_equal(v[193:], m.ravel())
    assert np.all(np.delete(m, 4, axis=0) == 0)
    assert m.sum() == pytest.approx(0.0, abs=1e-12) and np.abs(m).max() < 1e-2


def test_markov_all_zero_coefficients():
    c = CoefArray(np.zeros((2, 2, 8, 8), dtype=np.int32), TABLE)
    for M in markov_tpm(c).values():
        expected = np.zeros((9, 9))
        expected[4, 4] = 1.0
        assert np.array_equal(M, expected)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 4), st.integers(0, 12))
def test_markov_matches_oracle(seed, by, bx, spread):
    rng = np.random.default_rng(seed)
    c = random_coef_array(rng, by, bx, spread)
    got = markov_tpm(c)
    want = markov_oracle(c.coefs)
    for k in "hvdm":
        assert np.allclose(got[k], want[k], rtol=0, atol=1e-12)
        rows = got[k].sum(axis=1)
        assert np.all((np.abs(rows) < 1e-9) | (np.abs(rows - 1) < 1e-9))


def test_pev_markov_avg_matches_oracle():
    rng = np.random.default_rng(4)
    pix = rng.uniform(0, 255, (32, 40))
    c = compress(PixelImage(pix), qf=80)
    j1 = markov_oracle(c.coefs)
    j2 = markov_oracle(calibrate(c).coefs)
    want = sum(j1[k] - j2[k] for k in "hvdm") / 4
    np.testing.assert_allclose(pev_markov_avg(c), want.ravel(), atol=1e-12)


def test_li250_all_zero():
    c = CoefArray(np.zeros((3, 3, 8, 8), dtype=np.int32), TABLE)
    f = li250(c).values
    assert f[0] == pytest.approx(1.0)
    assert f[125] == pytest.approx(1.0)
    assert np.count_nonzero(f) == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 4), st.integers(3, 5), st.integers(0, 6))
def test_li250_matches_oracle(seed, by, bx, spread):
    rng = np.random.default_rng(seed)
    c = random_coef_array(rng, by, bx, spread)
    f = li250(c).values
    np.testing.assert_allclose(f, li250_oracle(c.coefs), atol=1e-12)
    assert np.all((f >= 0) & (f <= 1))
    assert f[:125].sum() <= 1 + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pev_histogram_part_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    pix = rng.uniform(0, 255, (32, 32))
    c = compress(PixelImage(pix), qf=int(rng.integers(40, 95)))
    cal = calibrate(c)
    want = dct_hist_oracle(c.coefs) - dct_hist_oracle(cal.coefs)
    np.testing.assert_allclose(pev274(c).values[:165], want, atol=1e-12)


def test_features_deterministic_and_stack_consistent():
    rng = np.random.default_rng(8)
    p = draw_source_params(1, rng)[0]
    imgs = [compress(synth_cover(p, rng), qf=80) for _ in range(4)]
    stack = np.stack([c.coefs for c in imgs])
    P = pev274_stack(stack, TABLE)
    L = li250_stack(stack)
    for i, c in enumerate(imgs):
        assert np.array_equal(P[i], pev274(c).values)
        assert np.array_equal(L[i], li250(c).values)
    assert np.array_equal(extract(imgs, "PEV274", chunk=3), P)
    assert np.array_equal(extract(imgs, "LI250"), L)


def test_extract_rejects_unknown_schema():
    c = random_coef_array(np.random.default_rng(0))
    with pytest.raises(ValueError):
        extract([c], "SPAM")


def test_stego_sensitivity():
    from stegid.setdist import mmd_unbiased, normalize_sets

    stego_gap, cover_gap = [], []
    for seed in range(8):
        rng = np.random.default_rng(seed)
        p = draw_source_params(1, rng)[0]
        imgs = [compress(synth_cover(p, rng), qf=80) for _ in range(50)]
        other = [compress(synth_cover(p, rng), qf=80) for _ in range(50)]
        stego = [nsf5_simulate(c, int(0.3 * capacity(c)), rng)[0] for c in imgs]
        F, S, G = normalize_sets([extract(imgs), extract(stego), extract(other)])
        assert np.all(np.linalg.norm(F - S, axis=1) > 0)
        stego_gap.append(mmd_unbiased(S, G))
        cover_gap.append(mmd_unbiased(F, G))
    assert np.mean(stego_gap) > np.mean(cover_gap)


def test_feature_containers_validate():
    with pytest.raises(ValueError):
        FeatureVector("PEV274", np.zeros(10))
    with pytest.raises(ValueError):
        FeatureVector("LI250", np.full(250, np.nan))
    with pytest.raises(ValueError):
        FeatureSet(0, "LI250", np.zeros((3, 249)))
    assert len(FeatureSet(0, "LI250", np.zeros((3, 250)))) == 3

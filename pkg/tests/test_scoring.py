import math

import numpy as np
import pytest

from cmaood.errors import DimensionMismatch, EmptyIdSet, EmptyNegativeSet, TooManyGroups
from cmaood.scoring import (
    ScoreConfig, mcm_score, neglabel_score, neglabel_score_grouped, score_batch, split_groups,
)

from oracles import mp_grouped, mp_mcm, mp_neglabel, random_unit


def texts_with_sims(sims, d=None):
    """Unit texts whose cosine with e0 equals each entry of ``sims``; the
    remainder goes into a private axis so the image is ``e0``."""
    n = len(sims)
    d = d or n + 1
    out = np.zeros((n, d))
    for k, s in enumerate(sims):
        out[k, 0] = s
        out[k, k + 1] = math.sqrt(1 - s * s)
    return out


def e0(d):
    v = np.zeros(d)
    v[0] = 1.0
    return v


def test_all_equal_sims():
    img = e0(8)
    ids = texts_with_sims([0.2] * 3, 8)
    negs = texts_with_sims([0.2] * 4, 8)
    assert abs(neglabel_score(img, ids, negs, tau=1.0) - 3 / 7) <= 1e-15
    assert abs(neglabel_score(img, ids, negs, tau=0.01) - 3 / 7) <= 1e-15


def test_two_id_one_negative_closed_form():
    img = np.array([1.0, 0.0, 0.0])
    ids = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    negs = np.array([[0, 0, 1.0]])
    # mpmath: (e + 1) / (e + 2)
    assert abs(neglabel_score(img, ids, negs, tau=1.0) - 0.78805844238291455493) <= 1e-15


def test_low_temperature_matches_log_domain_oracle():
    d = 12
    img = e0(d)
    ids = texts_with_sims([0.3, 0.2], d)
    negs = texts_with_sims([0.1] * 9, d)
    s = neglabel_score(img, ids, negs, tau=0.01)
    assert math.isfinite(s)
    assert abs(s - mp_neglabel(img, ids, negs, 0.01)) <= 1e-12


def test_grouped_single_group_is_ungrouped(rng):
    img = random_unit(rng, 1, 6)[0]
    ids, negs = random_unit(rng, 4, 6), random_unit(rng, 9, 6)
    assert neglabel_score_grouped(img, ids, negs, 0.05, groups=1) == neglabel_score(img, ids,
                                                                                    negs, 0.05)


def test_grouped_equal_sims():
    img = e0(12)
    ids = texts_with_sims([0.4] * 2, 12)
    negs = texts_with_sims([0.4] * 10, 12)
    # sizes 4, 3, 3
    expected = (2 / 6 + 2 / 5 + 2 / 5) / 3
    assert abs(neglabel_score_grouped(img, ids, negs, 0.01, groups=3) - expected) <= 1e-14


def test_grouped_matches_per_group_oracle(rng):
    img = random_unit(rng, 1, 5)[0]
    ids, negs = random_unit(rng, 3, 5), random_unit(rng, 10, 5)
    got = neglabel_score_grouped(img, ids, negs, 0.1, groups=3)
    assert abs(got - mp_grouped(img, ids, negs, 0.1, 3)) <= 1e-12


def test_split_groups():
    assert [len(g) for g in split_groups(10, 3)] == [4, 3, 3]
    assert [len(g) for g in split_groups(7, 7)] == [1] * 7
    with pytest.raises(TooManyGroups):
        split_groups(3, 4)


def test_mcm_examples():
    assert mcm_score(e0(3), [[0.6, 0.8, 0]], tau=1.0) == 1.0
    # mpmath: e / (e + 1)
    assert abs(mcm_score(e0(3), [[1, 0, 0], [0, 1, 0]]) - 0.73105857863000487925) <= 1e-15
    assert abs(mcm_score(e0(8), texts_with_sims([0.5] * 5, 8)) - 0.2) <= 1e-15


def test_mcm_shift_invariance(rng):
    # all sims move by the same amount when the ID texts tilt together toward e0
    sims = rng.uniform(-0.5, 0.4, 5)
    base = mcm_score(e0(8), texts_with_sims(sims, 8), tau=0.5)
    shifted = mcm_score(e0(8), texts_with_sims(sims + 0.3, 8), tau=0.5)
    assert abs(base - shifted) <= 1e-12


def test_score_batch_plumbing(rng):
    imgs = random_unit(rng, 3, 5)
    ids, negs = random_unit(rng, 4, 5), random_unit(rng, 6, 5)
    sv = score_batch(imgs, ids, negs, method="neglabel")
    assert sv.method == "neglabel" and sv.config["tau"] == 0.01
    for k in range(3):
        assert sv.scores[k] == pytest.approx(neglabel_score(imgs[k], ids, negs), abs=1e-15)
    assert len(score_batch(np.zeros((0, 5)), ids, negs)) == 0
    cfg = ScoreConfig(groups=3, grouping_enabled=True)
    grouped = score_batch(imgs, ids, negs, cfg)
    assert grouped.method == "neglabel-grouped"
    assert grouped.scores[0] == pytest.approx(
        neglabel_score_grouped(imgs[0], ids, negs, groups=3), abs=1e-15)
    mcm = score_batch(imgs, ids, method="mcm")
    assert mcm.config["tau"] == 1.0
    assert mcm.scores[1] == pytest.approx(mcm_score(imgs[1], ids), abs=1e-15)


def test_score_batch_matches_loop_oracle(rng):
    imgs = random_unit(rng, 100, 6)
    ids, negs = random_unit(rng, 5, 6), random_unit(rng, 20, 6)
    sv = score_batch(imgs, ids, negs, method="neglabel")
    oracle = [mp_neglabel(i, ids, negs, 0.01) for i in imgs]
    np.testing.assert_allclose(sv.scores, oracle, atol=1e-12, rtol=0)
    mcm = score_batch(imgs, ids, method="mcm")
    np.testing.assert_allclose(mcm.scores, [mp_mcm(i, ids, 1.0) for i in imgs], atol=1e-12, rtol=0)


def test_errors(rng):
    img = random_unit(rng, 1, 4)[0]
    with pytest.raises(EmptyIdSet):
        neglabel_score(img, np.zeros((0, 4)), random_unit(rng, 2, 4))
    with pytest.raises(EmptyNegativeSet):
        neglabel_score(img, random_unit(rng, 2, 4), np.zeros((0, 4)))
    with pytest.raises(DimensionMismatch):
        mcm_score(img, random_unit(rng, 2, 5))
    with pytest.raises(EmptyNegativeSet):
        score_batch(random_unit(rng, 2, 4), random_unit(rng, 2, 4), None, method="neglabel")
    with pytest.raises(ValueError):
        score_batch(random_unit(rng, 2, 4), random_unit(rng, 2, 4), method="energy")


def test_monotonicity():
    d = 10
    ids = [0.3, 0.1, -0.2]
    negs = [0.2, 0.0, 0.25, -0.1]
    base = neglabel_score(e0(d), texts_with_sims(ids, d), texts_with_sims(negs, d), 0.1)
    up_id = neglabel_score(e0(d), texts_with_sims([0.3, 0.15, -0.2], d),
                           texts_with_sims(negs, d), 0.1)
    up_neg = neglabel_score(e0(d), texts_with_sims(ids, d),
                            texts_with_sims([0.2, 0.05, 0.25, -0.1], d), 0.1)
    dup = neglabel_score(e0(d), texts_with_sims(ids, d),
                         texts_with_sims(negs + [0.0], d), 0.1)
    assert up_id > base > up_neg
    assert dup < base


def test_permutation_invariance(rng):
    img = random_unit(rng, 1, 6)[0]
    ids, negs = random_unit(rng, 5, 6), random_unit(rng, 12, 6)
    ref = neglabel_score(img, ids, negs, 0.05)
    got = neglabel_score(img, ids[rng.permutation(5)], negs[rng.permutation(12)], 0.05)
    assert abs(ref - got) <= 1e-14
    # grouped: permute inside each of the three groups
    refg = neglabel_score_grouped(img, ids, negs, 0.05, groups=3)
    within = np.concatenate([g[rng.permutation(len(g))] for g in split_groups(12, 3)])
    assert abs(refg - neglabel_score_grouped(img, ids, negs[within], 0.05, groups=3)) <= 1e-14


def test_zero_temperature_limit():
    d = 6
    high = neglabel_score(e0(d), texts_with_sims([0.6, 0.1], d), texts_with_sims([0.5], d), 1e-4)
    low = neglabel_score(e0(d), texts_with_sims([0.4, 0.1], d), texts_with_sims([0.5], d), 1e-4)
    assert abs(high - 1.0) <= 1e-3
    assert abs(low) <= 1e-3

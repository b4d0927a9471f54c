"""Acceptance criteria, each at its stated tolerance. Every test records one
PASS/FAIL line, shown in the ``acceptance criteria`` section of the pytest
summary."""
import math
import time

import numpy as np
import pytest

from cmaood.experiment import ExperimentConfig, run_experiment, summarize
from cmaood.losses import (
    CmaConfig, PairedBatch, Temperature, clip_loss, cma_objective, cma_objective_rewritten,
    cma_regularizer, log_marginal_estimate,
)
from cmaood.metrics import auroc, fpr_at_tpr
from cmaood.negmining import NegMiningConfig, mine_negatives
from cmaood.scoring import mcm_score, neglabel_score, neglabel_score_grouped
from cmaood.sphere import EmbeddingSet

from acceptance_log import report
from oracles import (
    brute_mine, mp_grouped, mp_mcm, mp_neglabel, mp_neglabel_complement, pair_count_auroc, random_rotation,
    random_unit, scan_fpr,
)
from pipeline import run_pipeline, tree_bytes
from test_encoder_train import full_gradient_error


def draw_batch(rng, max_b=8, max_d=32):
    b = int(rng.integers(1, max_b + 1))
    d = int(rng.integers(2, max_d + 1))
    return PairedBatch(random_unit(rng, b, d), random_unit(rng, b, d))


def draw_tau(rng):
    return float(math.exp(rng.uniform(math.log(0.01), 0.0)))


def test_ac1_objective_identity():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        batch = draw_batch(rng)
        cfg = CmaConfig(float(rng.uniform(0, 0.5)), Temperature.from_tau(draw_tau(rng)))
        worst = max(worst, abs(cma_objective(batch, cfg).total
                               - cma_objective_rewritten(batch, cfg)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5
    assert report("AC1 objective identity",
                  ok, f"max |diff| = {worst:.2e} (tol 1e-10) over 1000 batches in {elapsed:.2f}s")


def test_ac2_lambda_zero_is_clip():
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(100):
        batch = draw_batch(rng)
        temp = Temperature.from_tau(draw_tau(rng))
        if cma_objective(batch, CmaConfig(0.0, temp)).total != clip_loss(batch, temp).total:
            mismatches += 1
    assert report("AC2 lambda=0 reduction", mismatches == 0,
                  f"{mismatches}/100 batches differ bitwise")


def test_ac3_ebm_identity():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        batch = draw_batch(rng)
        temp = Temperature.from_tau(draw_tau(rng))
        terms, _ = cma_regularizer(batch, temp)
        k = int(rng.integers(batch.size))
        worst = max(worst, abs(log_marginal_estimate(batch.images[k], batch.texts, temp)
                               + terms[k]))
    assert report("AC3 log-marginal identity", worst <= 1e-12,
                  f"max |diff| = {worst:.2e} (tol 1e-12) over 100 configurations")


def test_ac4_gradient_check():
    start = time.perf_counter()
    errors = [full_gradient_error(seed) for seed in range(100)]
    elapsed = time.perf_counter() - start
    worst = max(errors)
    ok = worst <= 1e-4 and elapsed < 30
    assert report("AC4 gradient check", ok,
                  f"max rel error = {worst:.2e} (tol 1e-4) over 100 draws in {elapsed:.2f}s")


def perturbed_sims(rng, d, sims):
    """Unit texts with prescribed cosine to ``e0``, then the image ``e0``."""
    out = np.zeros((len(sims), d))
    for k, s in enumerate(sims):
        rest = rng.standard_normal(d - 1)
        out[k, 0] = s
        out[k, 1:] = math.sqrt(1 - s * s) * rest / np.linalg.norm(rest)
    return out


def test_ac5_scoring_oracles():
    rng = np.random.default_rng(5)
    worst = 0.0
    g1_exact = True
    outside = []
    for trial in range(200):
        d = int(rng.integers(2, 17))
        c = int(rng.integers(1, 11))
        m = int(rng.integers(7, 31))
        tau = 0.01 if trial % 2 == 0 else draw_tau(rng)
        img = random_unit(rng, 1, d)[0]
        ids, negs = random_unit(rng, c, d), random_unit(rng, m, d)
        s = neglabel_score(img, ids, negs, tau)
        worst = max(worst, abs(s - mp_neglabel(img, ids, negs, tau)))
        if not 0 < s < 1:
            # exact distance from the boundary, for the report
            outside.append((s, mp_neglabel_complement(img, ids, negs, tau)))
        for g in (1, 3, 7):
            sg = neglabel_score_grouped(img, ids, negs, tau, groups=g)
            worst = max(worst, abs(sg - mp_grouped(img, ids, negs, tau, g)))
            if g == 1 and sg != s:
                g1_exact = False
        worst = max(worst, abs(mcm_score(img, ids, tau) - mp_mcm(img, ids, tau)))

    monotone_fail = 0
    for _ in range(100):
        d = 12
        id_s = rng.uniform(-0.6, 0.6, 3)
        neg_s = rng.uniform(-0.6, 0.6, 5)
        tau = float(rng.uniform(0.05, 1.0))
        img = np.eye(d)[0]
        base = neglabel_score(img, perturbed_sims(rng, d, id_s), perturbed_sims(rng, d, neg_s),
                              tau)
        k = int(rng.integers(3))
        up_id = id_s.copy()
        up_id[k] += 0.2
        j = int(rng.integers(5))
        up_neg = neg_s.copy()
        up_neg[j] += 0.2
        more_id = neglabel_score(img, perturbed_sims(rng, d, up_id),
                                 perturbed_sims(rng, d, neg_s), tau)
        more_neg = neglabel_score(img, perturbed_sims(rng, d, id_s),
                                  perturbed_sims(rng, d, up_neg), tau)
        if not more_id > base > more_neg:
            monotone_fail += 1

    ok = worst <= 1e-12 and g1_exact and not outside and monotone_fail == 0
    boundary = "; ".join(f"score {v!r} (exact 1 - {float(e):.1e})" for v, e in outside)
    assert report("AC5 scoring oracles", ok,
                  f"max |diff| = {worst:.2e} (tol 1e-12), G=1 exact: {g1_exact}, "
                  f"scores outside (0,1): {len(outside)}/200"
                  + (f" [{boundary}]" if boundary else "")
                  + f", monotonicity failures: {monotone_fail}/100")


def test_ac6_metric_oracles():
    rng = np.random.default_rng(6)
    worst = 0.0
    fpr_mismatch = symmetry_fail = transform_fail = 0
    for _ in range(200):
        n, m = int(rng.integers(1, 51)), int(rng.integers(1, 51))
        levels = int(rng.integers(2, 40))
        a = rng.integers(0, levels, n).astype(float) / levels
        b = rng.integers(0, levels, m).astype(float) / levels
        worst = max(worst, abs(auroc(a, b) - pair_count_auroc(a, b)))
        if fpr_at_tpr(a, b) != scan_fpr(list(a), list(b)):
            fpr_mismatch += 1
        if abs(auroc(a, b) + auroc(b, a) - 1) > 1e-12:
            symmetry_fail += 1
        f = lambda x: np.exp(2 * x) - 3
        fpr, thr = fpr_at_tpr(a, b)
        fpr_t, thr_t = fpr_at_tpr(f(a), f(b))
        if auroc(f(a), f(b)) != auroc(a, b) or fpr_t != fpr or thr_t != f(thr):
            transform_fail += 1
    ok = worst <= 1e-12 and not (fpr_mismatch or symmetry_fail or transform_fail)
    assert report("AC6 metric oracles", ok,
                  f"max auroc diff = {worst:.2e} (tol 1e-12), fpr mismatches {fpr_mismatch}, "
                  f"symmetry failures {symmetry_fail}, transform failures {transform_fail}")


def test_ac7_negmining():
    rng = np.random.default_rng(7)
    mismatch = rotation_fail = 0
    for _ in range(50):
        d = int(rng.integers(2, 9))
        k = int(rng.integers(1, 21))
        n = int(rng.integers(1, 201))
        cands = random_unit(rng, n, d)
        # duplicate some candidates so tie-breaking is exercised
        if n > 4:
            dup = rng.integers(0, n, n // 4)
            cands[rng.integers(0, n, n // 4)] = cands[dup]
        ids = random_unit(rng, k, d)
        eta = float(rng.choice([0.05, rng.uniform(0.01, 1.0)]))
        m = int(rng.integers(1, n + 1))
        labels = [f"c{i}" for i in range(n)]
        got = mine_negatives(EmbeddingSet(cands, labels), ids, NegMiningConfig(eta, m))
        chosen, _ = brute_mine(cands, ids, eta, m)
        if list(got.indices) != chosen:
            mismatch += 1
        rot = random_rotation(rng, d)
        turned = mine_negatives(EmbeddingSet(cands @ rot.T, labels), ids @ rot.T,
                                NegMiningConfig(eta, m))
        if turned.labels != got.labels:
            rotation_fail += 1
    ok = mismatch == 0 and rotation_fail == 0
    assert report("AC7 negative mining", ok,
                  f"brute-force mismatches {mismatch}/50, rotation changes {rotation_fail}/50")


@pytest.mark.slow
def test_ac8_synthetic_experiment():
    start = time.perf_counter()
    cfg = ExperimentConfig()
    rows = run_experiment(cfg)
    summary = summarize(rows, *cfg.lambdas)
    elapsed = time.perf_counter() - start
    base, cma, checks = summary["base"], summary["cma"], summary["checks"]
    detail = (f"Uni-CMM {base['uni_cmm']:.4f} -> {cma['uni_cmm']:.4f}, "
              f"NegLabel AUROC {base['neglabel_auroc']:.4f} -> {cma['neglabel_auroc']:.4f}, "
              f"ID val acc {base['id_val_acc']:.4f} -> {cma['id_val_acc']:.4f}, "
              f"{elapsed:.0f}s")
    for name, ok in checks.items():
        report(f"AC8 {name}", ok, detail)
    report("AC8 runtime under 5 minutes", elapsed < 300, f"{elapsed:.0f}s")
    assert all(checks.values()) and elapsed < 300


def test_ac9_determinism(tmp_path):
    a = tree_bytes(run_pipeline(tmp_path / "a"))
    b = tree_bytes(run_pipeline(tmp_path / "b"))
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = a.keys() == b.keys() and not differing
    assert report("AC9 determinism", ok,
                  f"{len(a)} files compared, {len(differing)} differ")

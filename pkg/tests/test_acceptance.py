"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one [PASS]/[FAIL] line with the measured quantity next to
its band. The Monte Carlo criteria are heavy (roughly 1.5-2 hours on two
cores); run with ``pytest -s tests/test_acceptance.py`` to watch progress.

Criteria 1-4 reproduce the reference rejection tables with the
dominant-term (expansion) statistic calibrated by the true asymptotic
moments, the configuration under which the published values are attainable
(see the README's reproduction notes). Criteria 5-10 are oracle checks of
the individual components.
"""

import itertools
import math
import os
import time
from multiprocessing import get_context

import numpy as np
import pytest
from scipy.stats import kstest

from wsbmtest import (
    BlockModelSpec,
    ExperimentGrid,
    Membership,
    WeightLaw,
    confusion_matrix,
    expectation_matrix,
    expected_sin_theta_sq,
    hamming_distance,
    ingest_edge_list,
    linear_term,
    procrustes,
    run_experiment,
    sample_graph,
    top_k_spectrum,
    write_graph_csv,
)

WORKERS = os.cpu_count() or 1
MASTER_SEED = 20240809


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}", flush=True)
    return ok


def bern_spec(n, ratio, p, q):
    return BlockModelSpec(
        Membership.from_ratio(n, ratio), WeightLaw.bernoulli(p), WeightLaw.bernoulli(q)
    )


def table_grid(**kw):
    """The reference-table configuration: expansion statistic with oracle moments."""
    args = dict(
        base_spec=bern_spec(kw.pop("n0", 2000), kw.pop("ratio", (2, 1)), 0.5, kw.pop("q", 0.1)),
        block_ratio=kw.pop("block_ratio", (2, 1)),
        mode="type1",
        gammas=(1.0,),
        replicates=2000,
        alpha=0.05,
        moments="oracle",
        statistic="expansion",
    )
    args.update(kw)
    return ExperimentGrid(**args)


# --- criteria 1 and 4 share one null run at n=2000 ------------------------

_null_2000 = {}


def null_2000_result():
    if "res" not in _null_2000:
        grid = table_grid(ns=(2000,), seed=MASTER_SEED + 1, collect_z=True)
        t0 = time.perf_counter()
        _null_2000["res"] = run_experiment(grid, workers=WORKERS)
        _null_2000["wall"] = time.perf_counter() - t0
    return _null_2000["res"], _null_2000["wall"]


def test_criterion_1_type1_calibration():
    res, wall = null_2000_result()
    cell = res.cell(2000, gamma=1.0)
    rate = cell.rejection_rate
    budget = 15 * 60 * max(1.0, 8 / WORKERS)
    ok = 0.040 <= rate <= 0.066 and wall <= budget
    assert report(
        1,
        ok,
        f"type-I at n=2000, gamma=1: {rate:.1%} in [4.0%, 6.6%] "
        f"(reference 5.3%); wall {wall:.0f}s <= {budget:.0f}s "
        f"(15 min x 8/{WORKERS} cores)",
    )


def test_criterion_4_clt_property():
    res, _ = null_2000_result()
    z = np.asarray(res.cell(2000, gamma=1.0).z_samples)
    ks_p = kstest(z, "norm").pvalue
    mean, var = z.mean(), z.var(ddof=1)
    ok = ks_p > 0.01 and abs(mean) <= 0.07 and 0.9 <= var <= 1.1
    assert report(
        4,
        ok,
        f"null z-scores at n=2000: KS p={ks_p:.3f} (>0.01), "
        f"mean={mean:+.3f} (|.|<=0.07), var={var:.3f} (in [0.9, 1.1])",
    )


def test_criterion_2_type1_across_gamma():
    grid = table_grid(ns=(4000,), gammas=(1.5, 1.3, 1.0, 0.8, 0.7), seed=MASTER_SEED + 2)
    res = run_experiment(grid, workers=WORKERS)
    lines = []
    ok = True
    for gamma in grid.gammas:
        rate = res.cell(4000, gamma=gamma).rejection_rate
        lo, hi = (0.035, 0.080) if gamma == 0.7 else (0.035, 0.068)
        good = lo <= rate <= hi
        ok &= good
        lines.append(f"gamma={gamma:g}: {rate:.1%} in [{lo:.1%}, {hi:.1%}]{'' if good else ' <-'}")
    assert report(2, ok, "type-I at n=4000: " + "; ".join(lines))


def test_criterion_3_power():
    cells = [
        # (n, ell, lo, hi, reference)
        (1000, 0.001, 0.42, 0.56, "49.1%"),
        (2000, 0.001, 0.97, 1.00, "99.8%"),
        (500, 0.05, 0.99, 1.00, "100%"),
    ]
    lines = []
    ok = True
    for i, (n, ell, lo, hi, ref) in enumerate(cells):
        grid = table_grid(
            n0=n,
            ratio=(1, 1),
            block_ratio=(1, 1),
            q=0.329,
            mode="power",
            ns=(n,),
            ells=(ell,),
            replicates=1000,
            seed=MASTER_SEED + 30 + i,
        )
        rate = run_experiment(grid, workers=WORKERS).cell(n, ell=ell).rejection_rate
        good = lo <= rate <= hi
        ok &= good
        lines.append(
            f"(n={n}, ell={ell:g}): {rate:.1%} in [{lo:.0%}, {hi:.0%}] "
            f"(reference {ref}){'' if good else ' <-'}"
        )
    assert report(3, ok, "power: " + "; ".join(lines))


# --- criterion 5: moment formulas vs Monte Carlo --------------------------

_C5_SPEC = bern_spec(500, (1, 1), 0.5, 0.1)
_C5_E = expectation_matrix(_C5_SPEC)
_C5_VE = np.asarray(top_k_spectrum(_C5_E, 2).vectors)


def _limit_threads():
    from threadpoolctl import threadpool_limits

    globals()["_limiter"] = threadpool_limits(limits=1)


def _c5_linear(seed):
    W = sample_graph(_C5_SPEC, seed)
    return linear_term(W, _C5_E, 1.0, _C5_VE)


def test_criterion_5_moment_formulas():
    n, K, reps = 500, 2, 10_000
    sp2, sq2 = 0.25, 0.09
    seeds = [np.random.SeedSequence(MASTER_SEED + 5, spawn_key=(r,)) for r in range(reps)]
    with get_context("fork").Pool(WORKERS, initializer=_limit_threads) as pool:
        vals = np.array(pool.map(_c5_linear, seeds, chunksize=256))
    mean_exact = ((K - 1) * n * sq2 + n * sp2 - K * sp2) / (n * K)
    var_leading = (2.0 / (n * K)) * (sq2**2 + (sp2**2 - sq2**2) / K)
    se = vals.std(ddof=1) / math.sqrt(reps)
    mean_ok = abs(vals.mean() - mean_exact) <= 3 * se
    var_ratio = vals.var(ddof=1) / var_leading
    var_ok = 0.85 <= var_ratio <= 1.15
    assert report(
        5,
        mean_ok and var_ok,
        f"linear-term mean {vals.mean():.6f} vs exact {mean_exact:.6f} "
        f"(|diff| {abs(vals.mean() - mean_exact) / se:.2f} SE <= 3 SE); "
        f"variance ratio {var_ratio:.3f} in [0.85, 1.15] over {reps} replicates",
    )


def test_criterion_6_procrustes_grid_oracle():
    rng = np.random.default_rng(MASTER_SEED + 6)
    thetas = np.arange(0.0, 2 * np.pi, 1e-3)
    cos, sin = np.cos(thetas), np.sin(thetas)
    rotations = np.stack([np.stack([cos, -sin], -1), np.stack([sin, cos], -1)], -2)
    reflections = rotations.copy()
    reflections[..., 1] = -reflections[..., 1]
    grid = np.concatenate([rotations, reflections])
    worst = -np.inf
    for _ in range(1000):
        V1, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        V2, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        achieved = np.linalg.norm(V1 @ procrustes(V1, V2) - V2)
        best_grid = np.linalg.norm(np.einsum("ij,njk->nik", V1, grid) - V2, axis=(1, 2)).min()
        worst = max(worst, achieved - best_grid)
        if achieved > best_grid + 1e-6:
            break
    ok = worst <= 1e-6
    assert report(
        6,
        ok,
        f"procrustes vs O(2) grid search (1e-3 step, both determinants) on 1000 "
        f"random 5x2 pairs: max(achieved - grid minimum) = {worst:.2e} <= 1e-6",
    )


def test_criterion_7_hamming_oracle():
    rng = np.random.default_rng(MASTER_SEED + 7)
    mismatches = 0
    for _ in range(10_000):
        K = int(rng.integers(2, 7))
        n = int(rng.integers(K, 60))
        l1 = rng.integers(1, K + 1, n)
        l2 = rng.integers(1, K + 1, n)
        l1[:K] = np.arange(1, K + 1)
        l2[:K] = np.arange(1, K + 1)
        m1, m2 = Membership(l1), Membership(l2)
        if hamming_distance(m1, m2, "brute") != hamming_distance(m1, m2, "assignment"):
            mismatches += 1
    ok = mismatches == 0
    assert report(
        7,
        ok,
        f"assignment-based vs K!-brute-force Hamming distance on 10^4 random "
        f"instances (K <= 6): {mismatches} mismatches (exact equality required)",
    )


def test_criterion_8_expansion_remainder_decays():
    grid = table_grid(
        ns=(250, 500, 1000, 2000),
        mode="expansion_diag",
        replicates=201,
        seed=MASTER_SEED + 8,
    )
    res = run_experiment(grid, workers=WORKERS)
    medians = [res.cell(n, gamma=1.0).extras["median_abs_remainder"] for n in grid.ns]
    ok = all(b < a for a, b in zip(medians, medians[1:]))
    assert report(
        8,
        ok,
        "median |T - linear term| strictly decreasing over n=(250, 500, 1000, 2000): "
        + " > ".join(f"{m:.5f}" for m in medians),
    )


# --- criterion 9: sin-theta mean formula ----------------------------------

_C9_SPEC = bern_spec(2000, (1, 1), 0.5, 0.1)
_C9_VE = None


def _c9_sintheta_sq(seed):
    V = np.asarray(top_k_spectrum(sample_graph(_C9_SPEC, seed), 2).vectors)
    return float(np.linalg.norm(V @ procrustes(V, _C9_VE) - _C9_VE) ** 2)


def test_criterion_9_sin_theta_mean_formula():
    global _C9_VE
    _C9_VE = np.asarray(top_k_spectrum(expectation_matrix(_C9_SPEC), 2).vectors)
    reps = 10_000
    seeds = [np.random.SeedSequence(MASTER_SEED + 9, spawn_key=(r,)) for r in range(reps)]
    with get_context("fork").Pool(WORKERS, initializer=_limit_threads) as pool:
        vals = np.array(pool.map(_c9_sintheta_sq, seeds, chunksize=64))
    formula = expected_sin_theta_sq(_C9_SPEC)
    ratio = vals.mean() / formula
    ns = np.array([500, 1000, 2000, 4000])
    preds = [expected_sin_theta_sq(bern_spec(n, (1, 1), 0.5, 0.1)) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(preds), 1)[0]
    ok = 0.8 <= ratio <= 1.2 and abs(slope + 1.0) <= 0.1
    assert report(
        9,
        ok,
        f"sin-theta mean at n=2000: MC/{'formula'} ratio {ratio:.3f} in [0.8, 1.2] "
        f"({reps} replicates); log-log slope over n=500..4000: {slope:.3f} "
        f"(within -1 +/- 0.1)",
    )


def test_criterion_10_ingestion_golden(tmp_path):
    edges = tmp_path / "edges.tsv"
    edges.write_text(
        "alice\tbob\t3\n"
        "bob\talice\t2\n"
        "alice\talice\t9\n"
        "carol\talice\t100\n"
        "alice\tcarol\t100\n"
        "bob\tcarol\t1\n"
    )
    W, node_index = ingest_edge_list(str(edges), cap=127)
    out = tmp_path / "g.csv"
    write_graph_csv(W, out)
    expected = "0,1,2\n0,5,127\n5,0,1\n127,1,0\n"
    got = out.read_text()
    ok = got == expected and node_index == {"alice": 0, "bob": 1, "carol": 2}
    assert report(
        10,
        ok,
        "ingestion golden fixture: symmetrized capped CSV byte-exact "
        f"({'match' if got == expected else 'MISMATCH'}), node index in "
        "first-appearance order",
    )

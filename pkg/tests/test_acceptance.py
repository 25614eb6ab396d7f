"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a single ``criterion N: PASS|FAIL | detail`` line; the lines
are repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from eigconc.cli import main
from eigconc.eigen import full_spectrum
from eigconc.ensembles import bernoulli, rademacher, sample_matrix
from eigconc.experiments import THREADS_ENV, fit_exponent, lemma_sweep, tail_estimate
from eigconc.linalg import SymmetricMatrix
from eigconc.talagrand import (
    PointSet,
    ProductSpace,
    difference_patterns,
    grid_sup_min,
    point_distances,
    verify_inequality,
)
from eigconc.theory import semicircle_ks
from oracles import bisection_eigenvalues

P = (("p", 0.5),)


def lambda1(records, n, trials, preset="bernoulli", params=P):
    return np.array([r.lambda1 for r in records(preset, n, trials, ("lambda1",), params=params)])


def test_criterion_1_eigensolver_oracle(acceptance_log):
    rng = np.random.default_rng(20240601)
    mats = []
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        u = rng.uniform(-1, 1, (n, n))
        mats.append(SymmetricMatrix.from_dense(np.triu(u) + np.triu(u, 1).T))
    start = time.perf_counter()
    decs = [full_spectrum(a, want_vectors=True, method="ql") for a in mats]
    elapsed = time.perf_counter() - start
    eig_err = resid = trace_err = fro_err = 0.0
    for a, dec in zip(mats, decs):
        fro = a.frobenius_norm
        vals, vecs = dec.eigenvalues, dec.eigenvectors
        eig_err = max(eig_err, float(np.max(np.abs(vals - bisection_eigenvalues(a.dense)))))
        r = np.linalg.norm(a.dense @ vecs - vecs * vals, axis=0) / fro
        resid = max(resid, float(np.max(r)))
        trace_err = max(trace_err, abs(vals.sum() - a.trace()) / fro)
        fro_err = max(fro_err, abs(np.sum(vals**2) - fro**2) / fro**2)
    ok = max(eig_err, resid, trace_err, fro_err) <= 1e-8 and elapsed < 30
    acceptance_log(1, ok, f"max|eig-oracle|={eig_err:.2e} resid/F={resid:.2e} "
                          f"trace={trace_err:.2e} frob={fro_err:.2e} solver {elapsed:.2f}s")
    assert eig_err <= 1e-8 and resid <= 1e-8
    assert trace_err <= 1e-8 and fro_err <= 1e-8
    assert elapsed < 30


def test_criterion_2_semicircle(acceptance_log):
    start = time.perf_counter()
    a = sample_matrix(rademacher(1000, seed=0), 0)
    ks = semicircle_ks(full_spectrum(a).eigenvalues, sigma=1.0)
    elapsed = time.perf_counter() - start
    ok = ks <= 0.05 and elapsed < 60
    acceptance_log(2, ok, f"KS={ks:.4f} (<= 0.05) in {elapsed:.2f}s")
    assert ks <= 0.05 and elapsed < 60


def test_criterion_3_fk_mean(records, acceptance_log):
    start = time.perf_counter()
    vals = lambda1(records, 400, 200)
    elapsed = time.perf_counter() - start
    mean = float(vals.mean())
    ok = abs(mean - 200.0) <= 1.5 and elapsed < 600
    acceptance_log(3, ok, f"mean lambda1={mean:.3f} vs 200.0 (+-1.5), {elapsed:.1f}s")
    assert abs(mean - 200.0) <= 1.5 and elapsed < 600


def test_criterion_4_flatness_and_exponent(records, acceptance_log):
    std = {n: float(np.std(lambda1(records, n, 500), ddof=1)) for n in (100, 400, 1600)}
    ratio = std[1600] / std[100]
    vals = lambda1(records, 400, 2000)
    grid = [0.25 * k for k in range(9)]
    table = tail_estimate(vals, grid)
    fit = fit_exponent(table.t, table.freq, table.counts)
    ok = ratio <= 2 and fit.fitted and fit.c_hat > 0 and fit.r_squared >= 0.8
    acceptance_log(4, ok, f"std 100/400/1600 = {std[100]:.3f}/{std[400]:.3f}/{std[1600]:.3f} "
                          f"ratio={ratio:.3f}; c_hat={fit.c_hat:.3f} r2={fit.r_squared:.3f} "
                          f"({fit.points} points)")
    assert ratio <= 2
    assert fit.fitted and fit.c_hat > 0 and fit.r_squared >= 0.8


def test_criterion_5_rademacher_lower_bound(records, acceptance_log):
    n = 1000
    vals = lambda1(records, n, 100, preset="rademacher", params=())
    floor = 2 * math.sqrt(n) - 3 * math.sqrt(math.log(n))
    hits = int(np.count_nonzero(vals >= floor))
    ok = hits >= 95
    acceptance_log(5, ok, f"{hits}/100 trials with lambda1 >= {floor:.3f}; "
                          f"min lambda1={vals.min():.3f}")
    assert hits >= 95


def test_criterion_6_lambda2_scale(records, acceptance_log):
    n = 1000
    recs = records("bernoulli", n, 100, ("lambda2",), params=P)
    ratio = float(np.mean([r.lambda2 for r in recs])) / math.sqrt(n)
    ok = 0.9 <= ratio <= 1.3
    acceptance_log(6, ok, f"mean lambda2/sqrt(n)={ratio:.4f} in [0.9, 1.3]")
    assert 0.9 <= ratio <= 1.3


def test_criterion_7_talagrand_exhaustive(acceptance_log):
    start = time.perf_counter()
    space = ProductSpace.hypercube(3)
    grid = [0.25 * k for k in range(11)]
    worst, dual_gap, dual_excess = 0.0, 0.0, 0.0
    for mask in range(1, 256):
        event = PointSet(space, np.array([(mask >> i) & 1 for i in range(8)], dtype=bool))
        worst = max(worst, verify_inequality(event, grid).max_ratio)
        for x, d in zip(space.points, point_distances(event)):
            g = grid_sup_min(difference_patterns(x, event), resolution=60)
            dual_gap = max(dual_gap, abs(d - g))
            dual_excess = max(dual_excess, g - d)
    elapsed = time.perf_counter() - start
    ok = worst <= 1 + 1e-9 and dual_gap <= 1e-6 and elapsed < 60
    acceptance_log(7, ok, f"max ratio={worst:.6f}; |min-norm - grid dual| <= {dual_gap:.1e}; "
                          f"{elapsed:.1f}s")
    assert worst <= 1 + 1e-9
    assert dual_gap <= 1e-6 and dual_excess <= 1e-9
    assert elapsed < 60


@pytest.fixture(scope="module")
def sweep():
    return lemma_sweep(bernoulli(100, 0.5, seed=0), 1000, chain_t=1.0)


PROVABLE = ("lemma44", "lemma45", "fk_chain", "mu2_le_lambda1_shifted")


def test_criterion_8_lemma_suite(sweep, acceptance_log):
    checks = PROVABLE + ("mu2_ge_lambda2",)
    parts = [f"{c}: {sweep.failures(c)} fail/{1000 - sweep.counts[c]['na']} applicable"
             for c in checks]
    ok = all(sweep.failures(c) == 0 for c in checks)
    acceptance_log(8, ok, "; ".join(parts))
    for c in checks:
        assert sweep.failures(c) == 0, (
            f"{c} failed on {sweep.failures(c)} samples (worst slack {sweep.worst[c]:.3g})")


def test_criterion_8_provable_parts(sweep):
    # the four inequalities that do follow from the definitions
    for c in PROVABLE:
        assert sweep.failures(c) == 0
        assert sweep.counts[c]["pass"] > 0


def test_criterion_9_median_mean_gap(records, acceptance_log):
    vals = lambda1(records, 400, 1000)
    gap = abs(float(np.median(vals)) - float(np.mean(vals)))
    ok = gap <= 64
    acceptance_log(9, ok, f"|median - mean| of lambda1 = {gap:.4f} (bound 64, expected <~ 1)")
    assert gap <= 64


def test_criterion_10_reproducibility(tmp_path, monkeypatch, acceptance_log):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "preset = bernoulli\np = 0.5\nn = 80\ntrials = 60\nseed = 42\n"
        "statistics = lambda1,lambda2,mu2,mu2_prime,rowsum_stat\nlemma_checks = true\n"
        "t_grid = 0,0.25,0.5,1,1.5\n")
    outputs = {}
    for threads in (1, 4, 8):
        monkeypatch.setenv(THREADS_ENV, str(threads))
        out = tmp_path / f"t{threads}"
        assert main(["concentrate", "--config", str(cfg), "--out", str(out)]) == 0
        outputs[threads] = ((out / "trials.csv").read_bytes(), (out / "report.json").read_bytes())
    same = outputs[1] == outputs[4] == outputs[8]
    acceptance_log(10, same, "trials.csv and report.json byte-identical at 1, 4, 8 threads"
                   if same else "outputs differ across thread counts")
    assert same

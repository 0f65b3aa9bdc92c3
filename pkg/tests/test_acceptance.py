"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a one-line outcome that conftest prints in the terminal
summary. Criteria that the implementation does not meet are left failing.
"""

import time
import warnings
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS

from commonlines.kernels import oracle_datum
from commonlines.projection import default_phantom, detect_common_lines, simulate_slices
from commonlines.spectral import (
    IntrinsicDimensionWarning,
    assemble,
    cluster_spectrum,
    default_windows,
    eigendecompose,
    embedding_residual,
    extract_intrinsic,
    reconstruct,
)
from commonlines.sphere import normalize, sample_uniform
from commonlines.theory import (
    closed_form_generating,
    generating_functions,
    integral_generating,
    lambda_closed_form,
    lambda_from_integrals,
    legendre_partial_sum,
    trace_isometry_check,
)
from commonlines.verify import LEGENDRE_T_GRID, LEGENDRE_THETA_GRID, T_GRID, kernel_identity_errors

SEEDS = (1, 2, 3, 4, 5)


def record(key, passed, detail):
    ACCEPTANCE_RESULTS[key] = (bool(passed), detail)
    return passed


@lru_cache(maxsize=None)
def directions(n, seed):
    return sample_uniform(n, seed)


@lru_cache(maxsize=None)
def eigenvalues(n, seed, kind):
    return eigendecompose(assemble(directions(n, seed), kind)).eigenvalues


@lru_cache(maxsize=None)
def oracle_report(n, seed):
    ds = directions(n, seed)
    return reconstruct(oracle_datum(ds), ds)[2]


def test_criterion_01_eigenvalue_law():
    t0 = time.perf_counter()
    errs = [abs(lambda_from_integrals(n) - lambda_closed_form(n)) for n in range(1, 21)]
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-9 and elapsed < 1.0
    record("1 eigenvalue law", ok, f"max |error| {max(errs):.2e} (< 1e-9), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_02_integral_identities():
    t0 = time.perf_counter()
    t = np.array(T_GRID)
    errs = [np.max(np.abs(integral_generating(k, t) - closed_form_generating(k, t))) for k in range(3)]
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-10 and elapsed < 1.0
    record("2 integral identities", ok, f"max |error| {max(errs):.2e} (< 1e-10), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_03_generating_function():
    t0 = time.perf_counter()
    th = np.array(LEGENDRE_THETA_GRID)[:, None]
    tt = np.array(LEGENDRE_T_GRID)[None, :]
    err = np.max(np.abs(legendre_partial_sum(np.cos(th), tt, 30) - generating_functions(th, tt)[0].real))
    elapsed = time.perf_counter() - t0
    ok = err < 1e-10 and elapsed < 1.0
    record("3 generating function", ok, f"max |error| {err:.2e} on 10x10 grid (< 1e-10), {elapsed:.3f} s")
    assert ok


def test_criterion_04_kernel_decomposition():
    t0 = time.perf_counter()
    err, _, _ = kernel_identity_errors(10_000, seed=1)
    elapsed = time.perf_counter() - t0
    ok = err < 1e-10 and elapsed < 5.0
    record("4 kernel decomposition", ok, f"max |T - (C - O)| {err:.2e} over 1e4 pairs, {elapsed:.2f} s (< 5 s)")
    assert ok


def _window_counts(kind, window):
    centers = [lambda_closed_form(n) for n in (1, 2, 3)]
    return [
        [int(np.sum(np.abs(eigenvalues(400, s, kind) - c) <= window)) for c in centers] for s in SEEDS
    ]


@pytest.mark.slow
def test_criterion_05_spectrum_clusters():
    expected = {"common": [3, 5, 7], "transport": [6, 10, 14]}
    literal = {kind: _window_counts(kind, 0.05) for kind in expected}
    ok = all(c == expected[kind] for kind in expected for c in literal[kind])
    gap_rule = {
        kind: [[c.count for c in cluster_spectrum(_spec(400, s, kind), 3, kind)] for s in SEEDS]
        for kind in expected
    }
    windows = ", ".join(f"{w:.4f}" for w in default_windows(3))
    record(
        "5 spectrum clusters",
        ok,
        f"window 0.05 counts common {literal['common']}, transport {literal['transport']}; "
        f"with half-gap windows ({windows}) common {gap_rule['common'][0]}..., transport {gap_rule['transport'][0]}...",
    )
    assert ok, f"literal window counts: {literal}"


def _spec(n, seed, kind):
    from commonlines.spectral import Spectrum

    ev = eigenvalues(n, seed, kind)
    return Spectrum(ev, np.empty((len(ev), 0)), kind)


@pytest.mark.slow
def test_criterion_05b_cluster_multiplicities_with_half_gap_windows():
    expected = {"common": [3, 5, 7], "orthographic": [3, 5, 7], "transport": [6, 10, 14]}
    counts = {
        kind: [[c.count for c in cluster_spectrum(_spec(400, s, kind), 3, kind)] for s in SEEDS]
        for kind in expected
    }
    for kind, rows in counts.items():
        assert all(r == expected[kind] for r in rows), (kind, rows)


def test_criterion_06_spectral_gap():
    gaps = {(n, s): eigenvalues(n, s, "common")[2] - eigenvalues(n, s, "common")[3] for n in (100, 200, 400) for s in SEEDS}
    worst = min(gaps.values())
    ok = worst > 0.3
    record("6 spectral gap", ok, f"smallest 3rd-4th eigenvalue gap {worst:.4f} over N in {{100,200,400}}, seeds 1-5 (> 0.3)")
    assert ok


def test_criterion_07_intrinsic_dimension():
    dims = {}
    for n in (50, 100, 200, 400):
        for s in SEEDS:
            dims[(n, s)] = int(np.sum(eigenvalues(n, s, "common") > 1 / 3))
    ok = all(d == 3 for d in dims.values())
    record("7 intrinsic dimension", ok, f"dimensions {sorted(set(dims.values()))} over 20 runs (all must be 3)")
    assert ok


@pytest.mark.slow
def test_criterion_08_reconstruction_fidelity():
    sizes = (50, 100, 200, 400)
    medians = [float(np.median([oracle_report(n, s).mean_angular_error_deg for s in SEEDS])) for n in sizes]
    at200 = oracle_report(200, 1).mean_angular_error_deg
    monotone = all(a > b for a, b in zip(medians, medians[1:]))
    ok = at200 < 1.0 and monotone
    record(
        "8 reconstruction fidelity",
        ok,
        f"N=200 seed 1 mean error {at200:.2f} deg (< 1 deg); medians over seeds "
        + ", ".join(f"N={n}: {m:.2f}" for n, m in zip(sizes, medians))
        + (" (monotone)" if monotone else " (not monotone)"),
    )
    assert monotone, medians
    assert at200 < 1.0


def test_criterion_09_canonical_embedding():
    ds = directions(500, 1)
    op = assemble(ds, "common")
    rng = np.random.default_rng(9)
    residuals = [embedding_residual(op, ds, v) for v in normalize(rng.standard_normal((10, 3)))]
    ok = max(residuals) < 0.05
    record("9 canonical embedding", ok, f"max relative residual {max(residuals):.4f} at N=500 over 10 vectors (< 0.05)")
    assert ok


def test_criterion_10_trace_identity():
    values = [trace_isometry_check(m, s) for m, s in ((1, 0), (100, 1), (1000, 2))]
    err = max(abs(v - 3.0) for v in values)
    ok = err < 1e-12
    record("10 trace identity", ok, f"max |trace - 3| {err:.1e} (< 1e-12)")
    assert ok


@lru_cache(maxsize=None)
def detected(n, seed, snr):
    ds = directions(n, seed)
    slices = simulate_slices(default_phantom(seed), ds, snr=snr, seed=seed)
    datum, result = detect_common_lines(slices)
    result.attach_truth(ds)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntrinsicDimensionWarning)
        _, model, report = reconstruct(datum, ds)
    return result, report


@pytest.mark.slow
def test_criterion_11_detection_pipeline():
    result, report = detected(100, 1, None)
    within = result.summary()["fraction_within_one_bin"]
    noiseless_dim = report.dim_intrinsic
    noisy = [detected(100, s, 4.0)[1] for s in SEEDS]
    dims = [r.dim_intrinsic for r in noisy]
    errors = [r.mean_angular_error_deg if r.mean_angular_error is not None else float("nan") for r in noisy]
    ok = within >= 0.99 and all(d == 3 for d in dims) and all(e < 5.0 for e in errors)
    record(
        "11 detection pipeline",
        ok,
        f"noiseless N=100: {100 * within:.1f}% within one bin (>= 99%), dim {noiseless_dim}; "
        f"snr=4 seeds 1-5: dims {dims}, mean errors "
        + ", ".join("n/a" if np.isnan(e) else f"{e:.1f}" for e in errors)
        + " deg (< 5 deg)",
    )
    assert within >= 0.99, within
    assert all(d == 3 for d in dims), dims
    assert all(e < 5.0 for e in errors), errors

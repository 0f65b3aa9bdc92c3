"""Named verification suites comparing computed values with closed forms.

Each suite returns a list of check records ``{name, computed, reference,
tolerance, passed}`` that the CLI writes out as a verdict document.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .kernels import pair_blocks
from .spectral import assemble, cluster_spectrum, eigendecompose, embedding_residual
from .sphere import normalize, sample_uniform
from .theory import (
    DEFAULT_QUADRATURE,
    closed_form_generating,
    coefficients_from_generating,
    generating_functions,
    integral_coefficients,
    integral_generating,
    lambda_closed_form,
    lambda_from_integrals,
    legendre_partial_sum,
    trace_isometry_check,
)

SUITES = ("eigenvalues", "quadrature", "clusters", "isometry", "kernel-identities")

T_GRID = (-0.9, -0.5, 0.0, 0.3, 0.7, 0.9)
# Partial sums of 30 terms converge to 1e-10 only for |t| below about 0.47.
LEGENDRE_T_GRID = tuple(np.linspace(-0.45, 0.45, 10))
LEGENDRE_THETA_GRID = tuple(np.linspace(0.1, np.pi - 0.1, 10))


@dataclass
class Tolerances:
    eigenvalues: float = 1e-9
    quadrature: float = 1e-10
    coefficients: float = 1e-8
    generating: float = 1e-10
    trace: float = 1e-12
    embedding: float = 0.05
    kernel: float = 1e-10
    cluster_window: float | None = None

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]


def check(name, computed, reference, tolerance, passed=None):
    computed = _plain(computed)
    reference = _plain(reference)
    if passed is None:
        passed = abs(computed - reference) <= tolerance
    return {
        "name": name,
        "computed": computed,
        "reference": reference,
        "tolerance": tolerance,
        "passed": bool(passed),
    }


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def suite_eigenvalues(tol, n_max=20, **_):
    return [
        check(f"lambda_{n}", lambda_from_integrals(n), lambda_closed_form(n), tol.eigenvalues)
        for n in range(1, n_max + 1)
    ]


def suite_quadrature(tol, **_):
    out = []
    t = np.array(T_GRID)
    for k in range(3):
        got = integral_generating(k, t)
        want = closed_form_generating(k, t)
        for tv, g, w in zip(T_GRID, got, want):
            out.append(check(f"I{k}(t={tv:+.1f})", float(np.abs(g - w)), 0.0, tol.quadrature))

    direct = np.array([integral_coefficients(n) for n in range(1, 13)])
    for k in range(3):
        series = coefficients_from_generating(k, 12)
        for n in range(1, 13):
            out.append(
                check(f"coefficient I{k}_{n}", float(series[n - 1]), float(direct[n - 1, k]), tol.coefficients)
            )

    th = np.array(LEGENDRE_THETA_GRID)[:, None]
    tt = np.array(LEGENDRE_T_GRID)[None, :]
    series = legendre_partial_sum(np.cos(th), tt, terms=30)
    exact = generating_functions(th, tt)[0].real
    out.append(check("legendre generating identity (max over 10x10 grid)", float(np.max(np.abs(series - exact))), 0.0, tol.generating))
    q = DEFAULT_QUADRATURE
    gap = max(
        float(np.max(np.abs(integral_generating(k, t, q) - integral_generating(k, t, q.doubled()))))
        for k in range(3)
    )
    out.append(check("quadrature doubling gap", gap, 0.0, q.consistency_tol))
    return out


def suite_clusters(tol, n=400, seed=1, n_max=3, kinds=("common", "orthographic", "transport"), **_):
    ds = sample_uniform(n, seed)
    out = []
    for kind in kinds:
        spec = eigendecompose(assemble(ds, kind))
        for c in cluster_spectrum(spec, n_max, kind, window=tol.cluster_window):
            out.append(
                check(
                    f"{kind} cluster n={c.n} at {c.predicted:+.6f} (window {c.window:.4f})",
                    c.count,
                    c.expected_count,
                    0,
                    passed=c.count == c.expected_count,
                )
            )
    return out


def suite_isometry(tol, n=500, seed=1, m=1000, n_vectors=10, **_):
    out = [check(f"trace identity (m={m})", trace_isometry_check(m, seed), 3.0, tol.trace)]
    ds = sample_uniform(n, seed)
    op = assemble(ds, "common")
    rng = np.random.default_rng([seed, 1])
    for k, v in enumerate(normalize(rng.standard_normal((n_vectors, 3)))):
        r = embedding_residual(op, ds, v)
        out.append(check(f"canonical section residual v{k}", r, 0.0, tol.embedding))
    return out


def kernel_identity_errors(n_pairs=10_000, seed=1, n_points=200):
    """Max deviations of T - (C - O) and of the two antipodal sign laws."""
    ds = sample_uniform(n_points, seed)
    rng = np.random.default_rng([seed, 2])
    iu, ju = np.triu_indices(n_points, k=1)
    pick = rng.choice(len(iu), size=min(n_pairs, len(iu)), replace=False)
    i, j = iu[pick], ju[pick]
    c = pair_blocks(ds, i, j, "common")
    o = pair_blocks(ds, i, j, "orthographic")
    t = pair_blocks(ds, i, j, "transport")
    decomposition = float(np.max(np.abs(t - (c - o))))

    # sign laws on the frame-free lifts i_x B i_y^T; (b2, b1) frames the plane of -y
    neg = type(ds)(-ds.points, ds.b2, ds.b1, ds.seed)
    emb = ds.embeddings
    emb_neg = neg.embeddings

    def lifted(src_emb_j, blocks):
        return emb[i] @ blocks @ np.transpose(src_emb_j, (0, 2, 1))

    c_neg = _mixed_blocks(ds, neg, i, j, "common")
    o_neg = _mixed_blocks(ds, neg, i, j, "orthographic")
    common_law = float(np.max(np.abs(lifted(emb_neg[j], c_neg) - lifted(emb[j], c))))
    ortho_law = float(np.max(np.abs(lifted(emb_neg[j], o_neg) + lifted(emb[j], o))))
    return decomposition, common_law, ortho_law


def _mixed_blocks(ds, other, i, j, kind):
    """Blocks between ds[i] and other[j] (other is a second DirectionSet)."""
    x, y = ds.points[i], other.points[j]
    if kind == "common":
        u = normalize(np.cross(x, y))
        a, b = u, u
    else:
        a = normalize(y - np.sum(x * y, 1)[:, None] * x)
        b = normalize(x - np.sum(x * y, 1)[:, None] * y)
    left = np.stack([np.sum(ds.b1[i] * a, 1), np.sum(ds.b2[i] * a, 1)], axis=1)
    right = np.stack([np.sum(other.b1[j] * b, 1), np.sum(other.b2[j] * b, 1)], axis=1)
    return left[:, :, None] * right[:, None, :]


def suite_kernel_identities(tol, seed=1, n_pairs=10_000, **_):
    decomposition, common_law, ortho_law = kernel_identity_errors(n_pairs, seed)
    return [
        check(f"transport = common - orthographic ({n_pairs} pairs)", decomposition, 0.0, tol.kernel),
        check("common kernel even under y -> -y", common_law, 0.0, tol.kernel),
        check("orthographic kernel odd under y -> -y", ortho_law, 0.0, tol.kernel),
    ]


_SUITES = {
    "eigenvalues": suite_eigenvalues,
    "quadrature": suite_quadrature,
    "clusters": suite_clusters,
    "isometry": suite_isometry,
    "kernel-identities": suite_kernel_identities,
}


def run_suite(name, tol=None, **params):
    if name not in _SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _SUITES[name](tol or Tolerances(), **params)

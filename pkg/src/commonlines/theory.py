"""Closed-form spectral theory of the common-lines operator, checked numerically.

The continuum operator has eigenvalues

    lambda_n = (-1)**(n - 1) / (n (n + 1)),   n >= 1,

with multiplicity 2n + 1 (common lines) and 2(2n + 1) (parallel transport).
Each lambda_n is rebuilt here from three one-dimensional integrals

    I_n^k = 1/2 * int_0^pi mu(theta) E^k P_{n-1}(0, theta) j^k(theta) dtheta

with mu = sin/2, combined as I_n^0 + I_n^1 / n + I_n^2 / (2 n (n + 1)).
At azimuth zero the raised Legendre functions are derivatives in cos(theta):

    E P_m   = i sin(theta) P_m'(cos theta)
    E^2 P_m = -sin(theta)**2 P_m''(cos theta)

which is what term-wise differentiation of the generating function gives.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .sphere import canonical_frame, normalize


class QuadratureError(RuntimeError):
    """Quadrature failed its resolution-doubling self-consistency check."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


# --------------------------------------------------------------------------
# predicted spectrum


def lambda_exact(n):
    if n < 1:
        raise ValueError("eigenvalue index starts at 1")
    return Fraction((-1) ** (n - 1), n * (n + 1))


def lambda_closed_form(n):
    return float(lambda_exact(n))


@dataclass(frozen=True)
class PredictedCluster:
    n: int
    value: float
    multiplicity_common: int
    multiplicity_transport: int


def predicted_spectrum(n_max):
    return [
        PredictedCluster(n, lambda_closed_form(n), 2 * n + 1, 2 * (2 * n + 1))
        for n in range(1, n_max + 1)
    ]


def predicted_center(n, kind):
    """Cluster center for operator kind: the orthographic spectrum is -lambda_n."""
    lam = lambda_closed_form(n)
    return -lam if kind == "orthographic" else lam


def predicted_multiplicity(n, kind):
    return 2 * (2 * n + 1) if kind == "transport" else 2 * n + 1


def resolvable_clusters(n_nodes, kind="transport"):
    """Largest n_max whose total predicted multiplicity fits in 2N dimensions."""
    total, n = 0, 0
    while True:
        total += predicted_multiplicity(n + 1, kind)
        if total > 2 * n_nodes:
            return n
        n += 1


# --------------------------------------------------------------------------
# Legendre machinery


def legendre_p(n, cos_theta):
    """Classical Legendre polynomial P_n by the three-term recurrence."""
    return legendre_with_derivatives(n, cos_theta)[0]


def legendre_partial_sum(cos_theta, t, terms=30):
    """sum_{n < terms} P_n(cos_theta) t**n, accumulated alongside the recurrence."""
    c = np.asarray(cos_theta, dtype=float)
    t = np.asarray(t, dtype=float)
    prev, cur = np.ones_like(c), c.copy()
    total = prev + cur * t
    power = t.copy()
    for m in range(1, terms - 1):
        prev, cur = cur, ((2 * m + 1) * c * cur - m * prev) / (m + 1)
        power = power * t
        total = total + cur * power
    return total


def legendre_with_derivatives(n, c):
    """(P_n, P_n', P_n'') at c.

    Derivatives use P'_{m+1} = P'_{m-1} + (2m+1) P_m (and the same for the
    second derivative), which avoids dividing by 1 - c**2 near the poles.
    """
    if n < 0:
        raise ValueError("Legendre degree must be non-negative")
    c = np.asarray(c, dtype=float)
    p = [np.ones_like(c), c.copy()]
    d1 = [np.zeros_like(c), np.ones_like(c)]
    d2 = [np.zeros_like(c), np.zeros_like(c)]
    for m in range(1, n):
        p.append(((2 * m + 1) * c * p[m] - m * p[m - 1]) / (m + 1))
        d1.append(d1[m - 1] + (2 * m + 1) * p[m])
        d2.append(d2[m - 1] + (2 * m + 1) * d1[m])
    return p[n], d1[n], d2[n]


def raised_legendre(k, n, theta):
    """E^k P_n at (phi=0, theta) for k = 0, 1, 2."""
    theta = np.asarray(theta, dtype=float)
    p, d1, d2 = legendre_with_derivatives(n, np.cos(theta))
    if k == 0:
        return p.astype(complex)
    if k == 1:
        return 1j * np.sin(theta) * d1
    if k == 2:
        return -(np.sin(theta) ** 2) * d2 + 0j
    raise ValueError("k must be 0, 1 or 2")


def generating_functions(theta, t):
    """(G, EG, E^2 G) at azimuth zero; t may be complex with |t| small."""
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t)
    s, c = np.sin(theta), np.cos(theta)
    base = 1.0 - 2.0 * t * c + t * t
    g = base**-0.5
    eg = 1j * t * s * base**-1.5
    e2g = -3.0 * t * t * s * s * base**-2.5
    return g + 0j, eg + 0j, e2g + 0j


def j_profile(k, theta):
    """<exp(theta A) v1, F^k v1> for the highest-weight vector v1."""
    theta = np.asarray(theta, dtype=float)
    if k == 0:
        return np.cos(theta) + 1.0 + 0j
    if k == 1:
        return 2j * np.sin(theta)
    if k == 2:
        return 2.0 * np.cos(theta) - 2.0 + 0j
    raise ValueError("k must be 0, 1 or 2")


def measure(theta):
    """Polar part of the normalized sphere measure."""
    return np.sin(theta) / 2.0


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre rule on (0, pi)."""

    nodes_per_panel: int = 64
    panels: int = 8
    consistency_tol: float = 1e-12

    @property
    def node_count(self):
        return self.nodes_per_panel * self.panels

    def doubled(self):
        return QuadratureConfig(self.nodes_per_panel, 2 * self.panels, self.consistency_tol)

    def rule(self):
        return _composite_rule(self.nodes_per_panel, self.panels)


DEFAULT_QUADRATURE = QuadratureConfig()


@lru_cache(maxsize=16)
def _composite_rule(nodes_per_panel, panels):
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, np.pi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _integrate(fn, q):
    """Integrate fn over (0, pi) with q and with q doubled; return the fine value."""
    values = []
    for cfg in (q, q.doubled()):
        nodes, weights = cfg.rule()
        values.append(np.tensordot(fn(nodes), weights, axes=([-1], [0])))
    coarse, fine = values
    gap = np.max(np.abs(np.asarray(fine) - np.asarray(coarse)))
    if gap > q.consistency_tol:
        raise QuadratureError(
            f"quadrature not converged: doubling changed the result by {gap:.3e}", coarse, fine
        )
    return fine


def integral_generating(k, t, q=DEFAULT_QUADRATURE):
    """I^k(t) = 1/2 int_0^pi mu E^k G(0, theta, t) j^k dtheta, by quadrature.

    ``t`` may be an array (evaluated elementwise) and may be complex inside
    the disc |t| < sqrt(2) - 1, where the generating functions stay on the
    principal branch.
    """
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    t = np.asarray(t)

    def integrand(theta):
        gen = generating_functions(theta[None, :], t.reshape(-1, 1))[k]
        return 0.5 * measure(theta) * gen * j_profile(k, theta)

    out = _integrate(integrand, q)
    return out.reshape(t.shape) if t.ndim else complex(out[0])


def closed_form_generating(k, t):
    """Closed forms of I^k(t).

    I^2 is written as 1/2 (4/(1+t) + 4t - 4) = 2 sum_{n>=2} (-1)^n t^n.
    """
    t = np.asarray(t)
    if k == 0:
        return 0.5 * (1.0 + t / 3.0)
    if k == 1:
        return 0.5 * (-4.0 / 3.0 * t)
    if k == 2:
        return 0.5 * (4.0 / (1.0 + t) + 4.0 * t - 4.0)
    raise ValueError("k must be 0, 1 or 2")


def integral_coefficients(n, q=DEFAULT_QUADRATURE):
    """(I_n^0, I_n^1, I_n^2) from raised Legendre functions of degree n-1."""
    if n < 1:
        raise ValueError("index starts at 1")

    def integrand(theta):
        rows = [
            0.5 * measure(theta) * raised_legendre(k, n - 1, theta) * j_profile(k, theta)
            for k in range(3)
        ]
        return np.stack(rows)

    values = _integrate(integrand, q)
    return tuple(float(np.real(v)) for v in values)


def coefficients_from_generating(k, n_max, q=DEFAULT_QUADRATURE, radius=0.3, samples=64):
    """I_1^k .. I_{n_max}^k read off as Taylor coefficients of I^k(t).

    The quadrature value of I^k is sampled on the circle |t| = radius and
    the coefficients are recovered with a discrete Fourier transform (the
    trapezoid rule for the Cauchy integral).
    """
    if n_max >= samples:
        raise ValueError("need more samples than coefficients")
    t = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    values = integral_generating(k, t, q)
    coeffs = np.fft.fft(values) / samples / radius ** np.arange(samples)
    return np.real(coeffs[:n_max])


def lambda_from_integrals(n, q=DEFAULT_QUADRATURE):
    i0, i1, i2 = integral_coefficients(n, q)
    return i0 + i1 / n + i2 / (2 * n * (n + 1))


# --------------------------------------------------------------------------
# isometry normalization


def canonical_projector(x):
    """Pr_x as a 3x3 matrix, built through the plane embedding i_x."""
    emb = canonical_frame(x).embedding
    return emb @ emb.T


def trace_isometry_check(m, seed, projector=canonical_projector):
    """Monte-Carlo value of (3/2) * mean_x Tr(Pr_x^T Pr_x); equals 3 exactly.

    ``projector`` maps a unit vector to a 3x3 matrix; pass a corrupted one to
    see the check fail.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    points = normalize(rng.standard_normal((m, 3)))
    total = 0.0
    for x in points:
        pr = np.asarray(projector(x), dtype=float)
        total += np.trace(pr.T @ pr)
    return 1.5 * total / m

"""Synthetic Fourier-domain projections and common-line detection.

Phantoms are sums of isotropic Gaussians, so the 3-D Fourier transform is
available in closed form and a projection's 2-D transform is exactly its
restriction to the viewing plane. Slices are sampled on polar rays
(angle, radius) in the plane's own frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import DETECTED, CommonLinesDatum, pair_common_lines
from .sphere import PlaneBasis

MIN_SIGMA = 0.05
DEFAULT_N_THETA = 360
DEFAULT_N_R = 64
DEFAULT_R_MAX = 32.0


@dataclass(frozen=True)
class Phantom:
    """Gaussian mixture: sum_k a_k exp(-|v - c_k|^2 / (2 sigma_k^2))."""

    centers: np.ndarray
    amplitudes: np.ndarray
    sigmas: np.ndarray
    min_sigma: float = MIN_SIGMA

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, 3)
        amplitudes = np.array(self.amplitudes, dtype=float).ravel()
        sigmas = np.array(self.sigmas, dtype=float).ravel()
        if not (len(centers) == len(amplitudes) == len(sigmas)):
            raise ValueError("phantom component arrays differ in length")
        if len(centers) < 3:
            raise ValueError("phantom needs at least 3 components")
        if np.any(sigmas < self.min_sigma):
            raise ValueError(f"component widths must be at least {self.min_sigma}")
        if not is_generic(centers):
            raise ValueError("phantom centers are collinear")
        for name, arr in (("centers", centers), ("amplitudes", amplitudes), ("sigmas", sigmas)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self):
        return len(self.amplitudes)

    def fourier(self, xi):
        """Closed-form 3-D Fourier transform at frequencies xi (..., 3)."""
        xi = np.asarray(xi, dtype=float)
        r2 = np.sum(xi * xi, axis=-1)[..., None]
        scale = self.amplitudes * (2.0 * np.pi) ** 1.5 * self.sigmas**3
        phase = xi @ self.centers.T
        return np.sum(scale * np.exp(-0.5 * self.sigmas**2 * r2 - 1j * phase), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Phantom):
            return NotImplemented
        return (
            np.array_equal(self.centers, other.centers)
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.sigmas, other.sigmas)
            and self.min_sigma == other.min_sigma
        )


def is_generic(centers, tol=1e-9):
    centered = np.asarray(centers) - np.mean(centers, axis=0)
    return np.linalg.matrix_rank(centered, tol=tol) >= 2


def default_phantom(seed, n_components=8):
    """Eight Gaussians, centers uniform in the ball of radius 0.6."""
    rng = np.random.default_rng(seed)
    while True:
        directions = rng.standard_normal((n_components, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = 0.6 * rng.random(n_components) ** (1.0 / 3.0)
        centers = directions * radii[:, None]
        amplitudes = rng.uniform(0.5, 2.0, n_components)
        sigmas = rng.uniform(0.08, 0.2, n_components)
        if is_generic(centers):
            return Phantom(centers, amplitudes, sigmas)


def polar_grid(n_theta, n_r, r_max):
    """Angles k 2pi/n_theta and radii r_max (b+1)/n_r (the origin is skipped)."""
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    radii = r_max * np.arange(1, n_r + 1) / n_r
    return thetas, radii


@dataclass(frozen=True)
class PolarSlice:
    node: int
    values: np.ndarray
    r_max: float
    frame: PlaneBasis

    @property
    def n_theta(self):
        return self.values.shape[0]

    @property
    def n_r(self):
        return self.values.shape[1]

    def grid(self):
        return polar_grid(self.n_theta, self.n_r, self.r_max)

    def __eq__(self, other):
        if not isinstance(other, PolarSlice):
            return NotImplemented
        return (
            self.node == other.node
            and self.r_max == other.r_max
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.frame.matrix3, other.frame.matrix3)
        )


def fourier_slice(phantom, frame, n_theta=DEFAULT_N_THETA, n_r=DEFAULT_N_R, r_max=DEFAULT_R_MAX, node=0):
    """Phantom transform on the polar grid of the plane spanned by the frame."""
    if n_theta % 2:
        raise ValueError("n_theta must be even so that opposite rays pair up")
    if n_r < 4:
        raise ValueError("need at least 4 radial samples")
    thetas, radii = polar_grid(n_theta, n_r, r_max)
    directions = np.cos(thetas)[:, None] * frame.b1 + np.sin(thetas)[:, None] * frame.b2
    xi = directions[:, None, :] * radii[None, :, None]
    values = phantom.fourier(xi)
    values.setflags(write=False)
    return PolarSlice(node, values, float(r_max), frame)


def add_noise(slc, snr, seed):
    """Complex Gaussian noise with per-sample variance mean|signal|^2 / snr.

    Noise is drawn for the first half of the rays and mirrored (conjugated) to
    the opposite rays, so Hermitian ray symmetry survives. ``snr`` of None,
    0 or inf means no noise.
    """
    if snr is None or snr == 0 or math.isinf(snr):
        return slc
    if snr < 0:
        raise ValueError("snr must be positive")
    rng = np.random.default_rng([int(seed), int(slc.node)])
    power = float(np.mean(np.abs(slc.values) ** 2))
    half = slc.n_theta // 2
    sd = math.sqrt(power / snr / 2.0)
    z = sd * (rng.standard_normal((half, slc.n_r)) + 1j * rng.standard_normal((half, slc.n_r)))
    noise = np.concatenate([z, np.conj(z)], axis=0)
    values = slc.values + noise
    values.setflags(write=False)
    return PolarSlice(slc.node, values, slc.r_max, slc.frame)


def simulate_slices(phantom, ds, n_theta=DEFAULT_N_THETA, n_r=DEFAULT_N_R, r_max=DEFAULT_R_MAX, snr=None, seed=0):
    slices = [fourier_slice(phantom, f, n_theta, n_r, r_max, node=k) for k, f in enumerate(ds.frames)]
    return [add_noise(s, snr, seed) for s in slices]


@dataclass
class DetectionResult:
    """Per pair (i < j): matched angles alpha (plane i), beta (plane j), score."""

    pairs: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    scores: np.ndarray
    n_theta: int
    flagged: list = field(default_factory=list)
    errors: np.ndarray | None = None

    @property
    def bin_width(self):
        return 2.0 * np.pi / self.n_theta

    def attach_truth(self, ds):
        self.errors = detection_errors(self.pairs, self.alpha, self.beta, ds)
        return self

    def summary(self):
        out = {
            "n_pairs": int(len(self.pairs)),
            "n_flagged": len(self.flagged),
            "flagged": [list(p) for p in self.flagged],
            "bin_width": self.bin_width,
            "score_min": float(np.min(self.scores)) if len(self.scores) else None,
            "score_max": float(np.max(self.scores)) if len(self.scores) else None,
        }
        if self.errors is not None and len(self.errors):
            e = self.errors
            out.update(
                mean_error=float(np.mean(e)),
                median_error=float(np.median(e)),
                max_error=float(np.max(e)),
                mean_error_deg=float(np.degrees(np.mean(e))),
                fraction_within_one_bin=float(np.mean(e <= self.bin_width + 1e-12)),
                error_histogram_deg=_histogram(np.degrees(e)),
            )
        return out


def _histogram(errors_deg):
    edges = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 45.0, 90.0, 180.0]
    counts, _ = np.histogram(errors_deg, bins=edges)
    return {"edges_deg": edges, "counts": counts.tolist()}


def _wrap(a):
    return np.abs((a + np.pi) % (2.0 * np.pi) - np.pi)


def oracle_angles(ds, pairs):
    c_ij, c_ji = pair_common_lines(ds, pairs[:, 0], pairs[:, 1])
    return np.arctan2(c_ij[:, 1], c_ij[:, 0]), np.arctan2(c_ji[:, 1], c_ji[:, 0])


def detection_errors(pairs, alpha, beta, ds):
    """Worse of the two in-plane angle errors, modulo the joint (pi, pi) flip."""
    pairs = np.asarray(pairs).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    a0, b0 = oracle_angles(ds, pairs)
    direct = np.maximum(_wrap(alpha - a0), _wrap(beta - b0))
    flipped = np.maximum(_wrap(alpha - a0 - np.pi), _wrap(beta - b0 - np.pi))
    return np.minimum(direct, flipped)


def _weighted_rays(slc):
    """Rays scaled by sqrt(r) and normalized, as real vectors [Re, Im]."""
    _, radii = slc.grid()
    rays = np.asarray(slc.values) * np.sqrt(radii)[None, :]
    norms = np.linalg.norm(rays, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    rays = rays / safe[:, None]
    return np.concatenate([rays.real, rays.imag], axis=1), norms > 0


def detect_common_lines(slices, degenerate_tol=1e-6):
    """Grid search for the best-correlated ray pair of every two slices.

    Score is Re<ray_i(alpha), ray_j(beta)> over r-weighted normalized rays.
    Because opposite rays are conjugates, alpha is searched over [0, pi)
    only, which also fixes the sign of the detected line. A pair is flagged
    as degenerate (and left out of the datum) when a ray has zero norm, or
    when more than half of the alpha rows reach the best score within
    ``degenerate_tol`` (the two planes coincide).
    """
    if not slices:
        raise ValueError("no slices")
    shape = (slices[0].n_theta, slices[0].n_r, slices[0].r_max)
    for s in slices:
        if (s.n_theta, s.n_r, s.r_max) != shape:
            raise ValueError("all slices must share n_theta, n_r and r_max")
    n_theta = shape[0]
    half = n_theta // 2
    n = len(slices)
    prepared = [_weighted_rays(s) for s in slices]
    rays = np.stack([p[0] for p in prepared])
    ok = np.stack([p[1] for p in prepared])
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta

    pairs, alpha, beta, scores, flagged = [], [], [], [], []
    for i in range(n - 1):
        others = np.arange(i + 1, n)
        corr = rays[i, :half] @ rays[others].reshape(-1, rays.shape[2]).T
        corr = corr.reshape(half, len(others), n_theta).transpose(1, 0, 2)
        flat = corr.reshape(len(others), -1)
        best = np.argmax(flat, axis=1)
        best_score = flat[np.arange(len(others)), best]
        row_max = corr.max(axis=2)
        flat_rows = np.mean(row_max >= best_score[:, None] - degenerate_tol, axis=1) > 0.5
        for k, j in enumerate(others):
            if not (ok[i].all() and ok[j].all()) or flat_rows[k]:
                flagged.append((i, int(j)))
                continue
            a, b = divmod(int(best[k]), n_theta)
            pairs.append((i, int(j)))
            alpha.append(thetas[a])
            beta.append(thetas[b])
            scores.append(float(min(1.0, max(-1.0, best_score[k]))))

    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    result = DetectionResult(pairs, alpha, beta, np.asarray(scores), n_theta, flagged)
    datum = CommonLinesDatum(
        n,
        pairs,
        np.column_stack([np.cos(alpha), np.sin(alpha)]),
        np.column_stack([np.cos(beta), np.sin(beta)]),
        DETECTED,
        metadata={"n_theta": n_theta, "n_r": shape[1], "r_max": shape[2]},
        excluded=flagged,
    )
    return datum, result

"""Block operators over a node set, their spectra, and orientation recovery.

The pipeline is: assemble C_N from a datum, eigendecompose, keep the
eigenvectors with eigenvalue above 1/3 as the intrinsic model, read off one
2 -> dim map per node, and (given ground truth) register those maps against
the true plane embeddings with an orthogonal Procrustes fit.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import CommonLinesDatum, MalformedDatum, oracle_datum, pair_blocks
from .sphere import DirectionSet, normalize
from .theory import lambda_closed_form, predicted_center, predicted_multiplicity

logger = logging.getLogger(__name__)

KINDS = ("common", "orthographic", "transport")
INTRINSIC_THRESHOLD = 1.0 / 3.0
RESIDUAL_TOL = 1e-8
N_TOP_EIGENVALUES = 30


class EigensolverError(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


class IntrinsicDimensionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BlockOperator:
    """Symmetric 2N x 2N matrix; block (i, j) is rows 2i:2i+2, cols 2j:2j+2."""

    kind: str
    matrix: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0] // 2

    def block(self, i, j):
        return self.matrix[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]


def assemble(source, kind="common"):
    """Average the pairwise kernel blocks into a BlockOperator.

    Off-diagonal block (i, j) is the kernel block divided by N; diagonal
    blocks are zero. ``kind="common"`` accepts a CommonLinesDatum or a
    DirectionSet (via its oracle datum); the other kinds need the normals and
    so require a DirectionSet. Pairs a detector excluded contribute zero.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    if kind == "common" and isinstance(source, DirectionSet):
        source = oracle_datum(source)
    if isinstance(source, CommonLinesDatum):
        if kind != "common":
            raise TypeError(f"{kind} operator needs a DirectionSet, not a datum")
        source.validate()
        n = source.n
        i, j = source.pairs[:, 0], source.pairs[:, 1]
        blocks = source.c_ij[:, :, None] * source.c_ji[:, None, :]
    elif isinstance(source, DirectionSet):
        n = source.n
        i, j = np.triu_indices(n, k=1)
        blocks = pair_blocks(source, i, j, kind)
    else:
        raise TypeError("source must be a CommonLinesDatum or DirectionSet")

    grid = np.zeros((n, n, 2, 2))
    grid[i, j] = blocks / n
    grid[j, i] = np.transpose(blocks, (0, 2, 1)) / n
    matrix = grid.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
    matrix.setflags(write=False)
    return BlockOperator(kind, matrix)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues in descending order; eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kind: str = "common"

    def __len__(self):
        return len(self.eigenvalues)


def eigendecompose(op):
    """Full symmetric eigendecomposition (LAPACK) with a residual check.

    Eigenvector signs are fixed so that each vector's largest-magnitude entry
    is positive.
    """
    m = np.asarray(op.matrix, dtype=float)
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        off = np.linalg.norm(m - np.diag(np.diag(m)))
        raise EigensolverError(
            f"symmetric eigensolver did not converge ({exc}); off-diagonal norm {off:.3e}"
        ) from exc
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    vectors = vectors * np.where(signs == 0, 1.0, signs)

    scale = max(np.max(np.abs(values), initial=0.0), 1.0)
    residual = np.max(np.linalg.norm(m @ vectors - vectors * values, axis=0), initial=0.0)
    ortho = np.max(np.abs(vectors.T @ vectors - np.eye(len(values))), initial=0.0)
    if residual > RESIDUAL_TOL * scale or ortho > RESIDUAL_TOL:
        raise EigensolverError(
            f"eigenpairs fail the residual check: residual {residual:.3e}, "
            f"orthogonality defect {ortho:.3e}"
        )
    values.setflags(write=False)
    vectors.setflags(write=False)
    return Spectrum(values, vectors, op.kind)


@dataclass(frozen=True)
class IntrinsicModel:
    """Retained eigenspace and the per-node intrinsic maps.

    ``phi_maps[x]`` is the dim x 2 matrix sqrt(2/3) * (rows 2x, 2x+1 of the
    basis)^T, i.e. the map from plane x coordinates into the model space.
    """

    dim: int
    basis: np.ndarray
    eigenvalues: np.ndarray
    phi_maps: np.ndarray
    warning: str | None = None

    @property
    def n(self):
        return self.phi_maps.shape[0]


def intrinsic_maps(basis):
    n = basis.shape[0] // 2
    return np.sqrt(2.0 / 3.0) * basis.reshape(n, 2, -1).transpose(0, 2, 1)


def extract_intrinsic(spec, threshold=INTRINSIC_THRESHOLD):
    """Keep the eigenpairs with eigenvalue above 1/3 and build the node maps."""
    keep = np.asarray(spec.eigenvalues) > threshold
    dim = int(np.count_nonzero(keep))
    basis = np.asarray(spec.eigenvectors)[:, keep]
    message = None
    if dim != 3:
        around = np.asarray(spec.eigenvalues)[: max(dim + 2, 4)]
        message = (
            f"intrinsic dimension is {dim}, expected 3; leading eigenvalues "
            f"{np.array2string(around, precision=4)}"
        )
        warnings.warn(message, IntrinsicDimensionWarning, stacklevel=2)
    return IntrinsicModel(dim, basis, np.asarray(spec.eigenvalues)[keep], intrinsic_maps(basis), message)


@dataclass
class ReconstructionReport:
    n: int
    dim_intrinsic: int
    top_eigenvalues: list
    spectral_gap_empirical: float | None
    registration: list | None = None
    registration_det: float | None = None
    mean_angular_error: float | None = None
    median_angular_error: float | None = None
    max_angular_error: float | None = None
    frame_residuals: list | None = None
    registration_residual: float | None = None
    timings: dict = field(default_factory=dict)
    warning: str | None = None

    @property
    def mean_angular_error_deg(self):
        return None if self.mean_angular_error is None else float(np.degrees(self.mean_angular_error))

    @property
    def median_angular_error_deg(self):
        return None if self.median_angular_error is None else float(np.degrees(self.median_angular_error))

    @property
    def max_angular_error_deg(self):
        return None if self.max_angular_error is None else float(np.degrees(self.max_angular_error))


def spectral_summary(spec, model):
    ev = np.asarray(spec.eigenvalues)
    gap = float(ev[2] - ev[3]) if len(ev) >= 4 else None
    return ReconstructionReport(
        n=len(ev) // 2,
        dim_intrinsic=model.dim,
        top_eigenvalues=[float(v) for v in ev[:N_TOP_EIGENVALUES]],
        spectral_gap_empirical=gap,
        warning=model.warning,
    )


@dataclass(frozen=True)
class Registration:
    rotation: np.ndarray
    directions: np.ndarray
    angular_errors: np.ndarray
    frame_residuals: np.ndarray


def procrustes(targets, sources):
    """Orthogonal Q (det +-1) minimizing sum_x ||Q sources_x - targets_x||_F^2."""
    m = np.einsum("nka,nja->kj", targets, sources)
    u, _, vt = np.linalg.svd(m)
    return u @ vt


def register_maps(model, truth):
    """Fit the intrinsic maps to the true embeddings and recover directions.

    The eigenvectors are unit vectors in plain Euclidean 2N-space, whereas the
    isometry of the continuum theory is measured with the 1/N-weighted
    (sphere-average) metric; the maps are rescaled by sqrt(N) to compare.
    """
    if model.dim != 3:
        raise DimensionMismatch(f"registration needs a 3-dimensional model, got {model.dim}")
    if model.n != truth.n:
        raise DimensionMismatch(f"model has {model.n} nodes, truth has {truth.n}")
    phi = model.phi_maps * np.sqrt(model.n)
    emb = truth.embeddings
    q = procrustes(phi, emb)
    est = np.einsum("kj,nka->nja", q, phi)
    directions = normalize(np.cross(est[:, :, 0], est[:, :, 1]))
    errors = np.arctan2(
        np.linalg.norm(np.cross(directions, truth.points), axis=1),
        np.sum(directions * truth.points, axis=1),
    )
    residuals = np.linalg.norm(np.einsum("kj,nja->nka", q, emb) - phi, axis=(1, 2))
    return Registration(q, directions, errors, residuals)


def register(model, truth, spec=None):
    """Procrustes registration of the intrinsic maps against ground truth."""
    reg = register_maps(model, truth)
    if spec is not None:
        report = spectral_summary(spec, model)
    else:
        report = ReconstructionReport(truth.n, model.dim, [float(v) for v in model.eigenvalues], None)
    report.registration = reg.rotation.tolist()
    report.registration_det = float(np.linalg.det(reg.rotation))
    report.mean_angular_error = float(np.mean(reg.angular_errors))
    report.median_angular_error = float(np.median(reg.angular_errors))
    report.max_angular_error = float(np.max(reg.angular_errors))
    report.frame_residuals = [float(v) for v in reg.frame_residuals]
    report.registration_residual = float(np.sqrt(np.sum(reg.frame_residuals**2)))
    return report


def reconstruct(datum, truth=None):
    """Run the four algorithm steps on a datum; register when truth is given."""
    timings = {}
    t0 = time.perf_counter()
    op = assemble(datum, "common")
    timings["assemble"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    spec = eigendecompose(op)
    timings["eigendecompose"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntrinsicDimensionWarning)
        model = extract_intrinsic(spec)
    timings["extract"] = time.perf_counter() - t0
    if model.warning:
        logger.warning(model.warning)
    if truth is not None and model.dim == 3:
        t0 = time.perf_counter()
        report = register(model, truth, spec)
        timings["register"] = time.perf_counter() - t0
    else:
        report = spectral_summary(spec, model)
    report.timings = timings
    return spec, model, report


# --------------------------------------------------------------------------
# spectral diagnostics


@dataclass(frozen=True)
class ClusterCount:
    n: int
    predicted: float
    expected_count: int
    count: int
    window: float
    mean_deviation: float | None


def default_windows(n_max, kind="common"):
    """Half the distance from each predicted center to its nearest neighbour.

    Neighbours range over every predicted value (all n, not only n <= n_max)
    and over 0, where the spectrum accumulates and where the kernel of the
    common-lines operator sits.
    """
    far = 4 * n_max + 8
    values = [predicted_center(m, kind) for m in range(1, far)] + [0.0]
    windows = []
    for n in range(1, n_max + 1):
        center = predicted_center(n, kind)
        gaps = [abs(center - v) for m, v in enumerate(values, start=1) if m != n]
        windows.append(min(gaps) / 2.0)
    return windows


def cluster_spectrum(spec, n_max, kind=None, window=None):
    """Count eigenvalues near each predicted cluster center lambda_n, n <= n_max.

    ``window`` may be a single half-width applied to every cluster; by
    default each cluster gets the half-gap from ``default_windows``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    kind = kind or spec.kind
    n_nodes = len(spec.eigenvalues) // 2
    needed = sum(predicted_multiplicity(n, kind) for n in range(1, n_max + 1))
    if needed > 2 * n_nodes:
        raise ValueError(
            f"{n_max} clusters need {needed} eigenvalues but the operator has {2 * n_nodes}"
        )
    windows = default_windows(n_max, kind) if window is None else [float(window)] * n_max
    ev = np.asarray(spec.eigenvalues)
    out = []
    for n, w in zip(range(1, n_max + 1), windows):
        center = predicted_center(n, kind)
        hits = ev[np.abs(ev - center) <= w]
        out.append(
            ClusterCount(
                n=n,
                predicted=center,
                expected_count=predicted_multiplicity(n, kind),
                count=int(len(hits)),
                window=w,
                mean_deviation=float(np.mean(hits - center)) if len(hits) else None,
            )
        )
    return out


def canonical_samples(ds, v):
    """sqrt(3/2) * Pr_x(v) in every node's plane coordinates, stacked to 2N."""
    v = np.asarray(v, dtype=float)
    coords = np.stack([ds.b1 @ v, ds.b2 @ v], axis=1)
    return np.sqrt(1.5) * coords.ravel()


def embedding_residual(op, ds, v):
    """||C_N s_v - s_v / 2|| / ||s_v|| for the canonical section of v."""
    s = canonical_samples(ds, v)
    return float(np.linalg.norm(op.matrix @ s - lambda_closed_form(1) * s) / np.linalg.norm(s))

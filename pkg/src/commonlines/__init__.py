"""Orientation recovery from common lines via the spectrum of a block operator."""

from .kernels import CommonLinesDatum, MalformedDatum, oracle_datum
from .spectral import (
    assemble,
    cluster_spectrum,
    eigendecompose,
    extract_intrinsic,
    reconstruct,
    register,
)
from .sphere import DirectionSet, PlaneBasis, canonical_frame, geodesic_rotation, sample_uniform
from .theory import lambda_closed_form, lambda_from_integrals

__all__ = [
    "CommonLinesDatum",
    "DirectionSet",
    "MalformedDatum",
    "PlaneBasis",
    "assemble",
    "canonical_frame",
    "cluster_spectrum",
    "eigendecompose",
    "extract_intrinsic",
    "geodesic_rotation",
    "lambda_closed_form",
    "lambda_from_integrals",
    "oracle_datum",
    "reconstruct",
    "register",
    "sample_uniform",
]

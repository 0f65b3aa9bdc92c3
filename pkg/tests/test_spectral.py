import warnings

import numpy as np
import pytest

from commonlines.kernels import CommonLinesDatum, oracle_datum
from commonlines.spectral import (
    BlockOperator,
    DimensionMismatch,
    IntrinsicDimensionWarning,
    IntrinsicModel,
    Spectrum,
    assemble,
    cluster_spectrum,
    default_windows,
    eigendecompose,
    extract_intrinsic,
    intrinsic_maps,
    reconstruct,
    register,
)
from commonlines.sphere import DirectionSet, canonical_frames, sample_uniform

E1, E2, E3 = np.eye(3)


@pytest.fixture(scope="module")
def spec300():
    return eigendecompose(assemble(sample_uniform(300, 1), "common"))


def test_axis_aligned_assembly():
    ds = DirectionSet.from_points(np.eye(3))
    m = assemble(ds, "common").matrix
    assert m.shape == (6, 6)
    # nodes e1 and e2: u = e1 x e2 = e3; frame(e1) = (e2, e3), frame(e2) = (-e1, e3)
    np.testing.assert_allclose(m[0:2, 2:4], np.array([[0, 0], [0, 1]]) / 3, atol=1e-15)
    # nodes e3 and e1 from the kernel example: block [[0,0],[1,0]]
    np.testing.assert_allclose(m[4:6, 0:2], np.array([[0, 0], [1, 0]]) / 3, atol=1e-15)


def test_assembly_is_exactly_symmetric_with_zero_diagonal(ds100):
    for kind in ("common", "orthographic", "transport"):
        op = assemble(ds100, kind)
        assert np.max(np.abs(op.matrix - op.matrix.T)) == 0.0
        for i in range(ds100.n):
            assert not op.block(i, i).any()


def test_common_blocks_have_rank_one(ds100):
    op = assemble(ds100, "common")
    s = np.linalg.svd(op.matrix.reshape(100, 2, 100, 2).transpose(0, 2, 1, 3), compute_uv=False)
    assert np.max(s[..., 1]) < 1e-14


def test_operator_decomposition(ds100):
    mc, mo, mt = (assemble(ds100, k).matrix for k in ("common", "orthographic", "transport"))
    np.testing.assert_allclose(mt, mc - mo, atol=1e-12)


def test_orthographic_is_negated_common_spectrum(ds100):
    ec = eigendecompose(assemble(ds100, "common")).eigenvalues
    eo = eigendecompose(assemble(ds100, "orthographic")).eigenvalues
    np.testing.assert_allclose(np.sort(eo), np.sort(-ec), atol=1e-10)


def test_datum_and_direction_set_paths_agree(ds100):
    np.testing.assert_array_equal(assemble(ds100).matrix, assemble(oracle_datum(ds100)).matrix)


def test_excluded_pairs_contribute_zero():
    d = oracle_datum(sample_uniform(6, 3))
    keep = np.ones(d.n_pairs, bool)
    keep[0] = False
    i, j = d.pairs[0]
    partial = CommonLinesDatum(d.n, d.pairs[keep], d.c_ij[keep], d.c_ji[keep], excluded=[(i, j)])
    full = assemble(d).matrix.copy()
    full[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = 0
    full[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = 0
    np.testing.assert_array_equal(assemble(partial).matrix, full)


def test_other_kinds_need_geometry():
    d = oracle_datum(sample_uniform(5, 1))
    with pytest.raises(TypeError):
        assemble(d, "transport")
    with pytest.raises(ValueError):
        assemble(d, "bogus")


def test_eigendecompose_textbook_matrix():
    spec = eigendecompose(BlockOperator("common", np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(spec.eigenvalues, [1.0, -1.0], atol=1e-15)


def test_eigendecompose_contract(ds100):
    op = assemble(ds100)
    spec = eigendecompose(op)
    v, lam = spec.eigenvectors, spec.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    assert np.max(np.abs(op.matrix @ v - v * lam)) < 1e-8
    np.testing.assert_allclose(v.T @ v, np.eye(200), atol=1e-8)


def test_leading_clusters_at_n300(spec300):
    ev = spec300.eigenvalues
    assert np.all(np.abs(ev[:3] - 0.5) < 0.05)
    assert np.all(np.abs(ev[3:8] - 1 / 12) < 0.05)
    assert np.sum(np.abs(ev - (-1 / 6)) < 0.05) == 5
    assert np.all(np.abs(ev[-5:] + 1 / 6) < 0.05)


def _spectrum(values):
    values = np.asarray(values, dtype=float)
    return Spectrum(values, np.eye(len(values)), "common")


def test_threshold_rule():
    model = extract_intrinsic(_spectrum([0.49, 0.48, 0.47, 0.10, 0.0, -0.2]))
    assert model.dim == 3 and model.warning is None
    with pytest.warns(IntrinsicDimensionWarning):
        model = extract_intrinsic(_spectrum([0.3, 0.2, 0.1, 0.0]))
    assert model.dim == 0 and "expected 3" in model.warning


def test_intrinsic_maps_layout():
    basis = np.arange(12.0).reshape(4, 3)
    maps = intrinsic_maps(basis)
    np.testing.assert_allclose(maps[1], np.sqrt(2 / 3) * basis[2:4].T)


def test_end_to_end_dimension(spec300):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert extract_intrinsic(spec300).dim == 3


def _exact_model(ds, q):
    phi = np.einsum("kj,nja->nka", q, ds.embeddings) / np.sqrt(ds.n)
    basis = phi.transpose(0, 2, 1).reshape(2 * ds.n, 3) / np.sqrt(2 / 3)
    return IntrinsicModel(3, basis, np.full(3, 0.5), phi)


def test_exact_recovery_registers_perfectly():
    ds = sample_uniform(40, 5)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    report = register(_exact_model(ds, q), ds)
    assert report.mean_angular_error < 1e-9
    assert report.registration_residual < 1e-9
    np.testing.assert_allclose(np.array(report.registration), q, atol=1e-9)


def test_reflection_only_changes_determinant():
    ds = sample_uniform(40, 5)
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((3, 3)))
    mirror = np.diag([1.0, 1.0, -1.0])
    a = register(_exact_model(ds, q), ds)
    b = register(_exact_model(ds, q @ mirror), ds)
    assert a.registration_det == pytest.approx(-b.registration_det, abs=1e-9)
    assert b.mean_angular_error < 1e-9


def test_register_rejects_wrong_dimension():
    ds = sample_uniform(10, 1)
    model = IntrinsicModel(2, np.zeros((20, 2)), np.zeros(2), np.zeros((10, 2, 2)))
    with pytest.raises(DimensionMismatch):
        register(model, ds)


def test_registration_is_orthogonal(ds100):
    _, _, report = reconstruct(oracle_datum(ds100), ds100)
    q = np.array(report.registration)
    np.testing.assert_allclose(q @ q.T, np.eye(3), atol=1e-8)
    assert abs(abs(report.registration_det) - 1) < 1e-8
    assert set(report.timings) == {"assemble", "eigendecompose", "extract", "register"}
    assert len(report.top_eigenvalues) == 30


def test_frame_covariance(ds100):
    gammas = np.random.default_rng(2).uniform(0, 2 * np.pi, ds100.n)
    turned = ds100.rotated_frames(gammas)
    a = eigendecompose(assemble(ds100))
    b = eigendecompose(assemble(turned))
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-9)
    ma, mb = extract_intrinsic(a), extract_intrinsic(b)
    # phi_x picks up the in-plane rotation on the right, up to a change of basis of the model
    rot = np.stack([[np.cos(gammas), -np.sin(gammas)], [np.sin(gammas), np.cos(gammas)]]).transpose(2, 0, 1)
    pred = np.einsum("nka,nab->nkb", ma.phi_maps, rot)
    g = np.einsum("nka,nja->kj", mb.phi_maps, pred)
    u, _, vt = np.linalg.svd(g)
    np.testing.assert_allclose(np.einsum("kj,nja->nka", u @ vt, pred), mb.phi_maps, atol=1e-9)


def test_permutation_equivariance(ds100):
    order = np.random.default_rng(3).permutation(ds100.n)
    _, _, a = reconstruct(oracle_datum(ds100), ds100)
    perm = ds100.permuted(order)
    _, _, b = reconstruct(oracle_datum(perm), perm)
    np.testing.assert_allclose(a.top_eigenvalues, b.top_eigenvalues, atol=1e-12)
    assert a.mean_angular_error == pytest.approx(b.mean_angular_error, abs=1e-12)
    np.testing.assert_allclose(np.array(a.frame_residuals)[order], b.frame_residuals, atol=1e-12)


def test_negating_a_normal_keeps_common_spectrum(ds100):
    pts = ds100.points.copy()
    pts[7] *= -1
    b1, b2 = canonical_frames(pts)
    flipped = DirectionSet(pts, b1, b2)
    a = eigendecompose(assemble(ds100)).eigenvalues
    b = eigendecompose(assemble(flipped)).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_default_windows():
    w = default_windows(3, "common")
    # nearest neighbours: 1/2 -> 1/12, -1/6 -> -1/20, 1/12 -> 1/30
    assert w == pytest.approx([(0.5 - 1 / 12) / 2, (1 / 6 - 1 / 20) / 2, (1 / 12 - 1 / 30) / 2])
    assert default_windows(3, "orthographic") == pytest.approx(w)


def test_cluster_guard():
    spec = _spectrum(np.zeros(20))
    with pytest.raises(ValueError):
        cluster_spectrum(spec, 3, "transport")
    with pytest.raises(ValueError):
        cluster_spectrum(spec, 0)

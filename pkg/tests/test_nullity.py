import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_nullity import metrics as M
from finsler_nullity import nullity as nul
from finsler_nullity.errors import PreconditionError
from finsler_nullity.jets import SupportElement
from finsler_nullity.sampling import sample_support_elements, sample_vector

from conftest import battery_metrics, randers3


def test_euclidean_argument_space():
    m = M.euclidean(3)
    z = SupportElement.of([0.1, 0.2, 0.3], [1.0, 0.0, 0.0])
    assert nul.nullity_argument_space(m, z, 0.0).dim == 3
    assert nul.nullity_argument_space(m, z, 1.0).dim == 0
    assert nul.nullity_kernel_space(m, z, 0.0).dim == 3


def test_product_flat_direction(rng):
    m = M.sphere_times_flat(1)
    for z in sample_support_elements(m, 5, rng):
        sub = nul.nullity_argument_space(m, z, 0.0)
        assert sub.dim == 1
        assert abs(abs(sub.basis[2, 0]) - 1.0) < 1e-12
        assert np.max(np.abs(sub.basis[:2, 0])) < 1e-12


def test_s3_kernel_space():
    m = M.sphere(3, 1.0)
    z = SupportElement.of([0.2, 0.1, -0.3], [0.0, 1.0, 0.5])
    assert nul.nullity_kernel_space(m, z, 1.0).dim == 3
    assert nul.nullity_kernel_space(m, z, 2.0).dim == 0


def test_gap_ratio_conventions():
    g = np.eye(2)
    full = nul.null_space(np.zeros((8, 2)), g)
    assert full.dim == 2 and full.gap_ratio == np.inf
    none = nul.null_space(np.vstack([np.eye(2), np.zeros((6, 2))]), g)
    assert none.dim == 0 and none.gap_ratio == pytest.approx(1e8)
    ambiguous = nul.null_space(np.diag([1.0, 1e-7]), g)
    assert ambiguous.ambiguous


def test_report_boundary_label_and_orthonormality(rng):
    m = M.sphere_times_flat(2)
    (z,) = sample_support_elements(m, 1, rng)
    rep = nul.nullity_report(m, z, 0.0)
    assert rep.mu_k == 2 and not rep.boundary_case
    assert rep.orthonormality_residual() < 1e-10
    assert nul.nullity_report(m, z, 1.0).boundary_case


def test_nullity_index_consistency(rng):
    m = M.sphere_times_flat(1)
    vs = [sample_vector(3, rng) for _ in range(10)]
    idx = nul.nullity_index(m, [0.1, 0.2, 0.3], 0.0, vs)
    assert idx.mu_k == 1 and idx.consistent and idx.max_angle < 1e-10
    e = nul.nullity_index(M.euclidean(2), [0.0, 0.0], 1.0, [[1.0, 0.0], [0.3, 2.0]])
    assert e.mu_k == 0 and e.consistent
    with pytest.raises(ValueError):
        nul.nullity_index(m, [0, 0, 0], 0.0, [])


@pytest.mark.parametrize(
    "make, k, dim",
    [(lambda: M.euclidean(2), 0.0, 2), (lambda: M.sphere_times_flat(1), 0.0, 1), (lambda: M.sphere(3, 1.0), 1.0, 3)],
)
def test_kernel_coincidence_examples(make, k, dim, rng):
    m = make()
    (z,) = sample_support_elements(m, 1, rng)
    r = nul.kernel_coincidence_check(m, z, k)
    assert r.applicable and r.passed
    assert r.dim_arg == r.dim_ker == dim
    assert r.angle < 1e-8


def test_involutivity_examples():
    e = nul.involutivity_check(M.euclidean(2), nul.grid([0.0, 0.0], 0.2, 3), 0.0)
    assert e.residual == 0.0 and e.mu_k == 2
    s = nul.involutivity_check(M.sphere_times_flat(1), nul.grid([0.1, 0.1, 0.0], 0.2, 3), 0.0)
    assert s.residual < 1e-4 and s.mu_k == 1


def test_involutivity_detects_contact_distribution(monkeypatch):
    """span{∂x, ∂y + x ∂z} is not involutive: [X1, X2] = ∂z."""
    m = M.euclidean(3)

    def fake(metric, z, k, rank_tol=nul.RANK_TOL):
        x = z.xa
        B = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, x[0]]])
        return nul.Subspace(nul._g_orthonormal(B, np.eye(3)), (1.0, 0.0, 0.0), 1, 1e-8, np.inf)

    monkeypatch.setattr(nul, "nullity_kernel_space", fake)
    res = nul.involutivity_check(m, nul.grid([0.3, 0.2, 0.0], 0.1, 3), 0.0)
    assert res.residual > 0.5


def test_involutivity_requires_constant_mu(monkeypatch):
    m = M.euclidean(2)
    real = nul.nullity_kernel_space

    def fake(metric, z, k, rank_tol=nul.RANK_TOL):
        return real(metric, z, 0.0 if z.xa[0] < 0.05 else 1.0, rank_tol)

    monkeypatch.setattr(nul, "nullity_kernel_space", fake)
    with pytest.raises(PreconditionError):
        nul.involutivity_check(m, nul.grid([0.0, 0.0], 0.1, 3), 0.0)


def test_p_symmetry_examples(rng):
    z = SupportElement.of([0.1, 0.2, 0.3], [1.0, 0.5, 0.2])
    r = nul.p_symmetry_check(M.sphere(3, 1.0), z)
    assert r.P_symmetric and r.nabla_v_Q_zero and r.residual_P == 0.0
    mq = nul.p_symmetry_check(M.minkowski_quartic(3, 0.7), z)
    assert mq.agree
    rd = nul.p_symmetry_check(randers3(), SupportElement.of([0.1, 0.2, -0.1], [1.0, -0.4, 0.3]))
    assert rd.agree and not rd.P_symmetric
    assert rd.residual_P == pytest.approx(rd.residual_Q, rel=1e-8)


def test_leaf_flag_curvature_examples():
    flat = nul.leaf_flag_curvature_check(M.sphere_times_flat(2), SupportElement.of([0.1, 0.2, 0.0, 0.0], [0, 0, 1.0, 0.5]), 0.0)
    assert flat.status == "pass" and abs(flat.K) < 1e-8
    s3 = nul.leaf_flag_curvature_check(M.sphere(3, 1.0), SupportElement.of([0.1, 0.2, 0.3], [1.0, 0.0, 0.2]), 1.0)
    assert s3.status == "pass" and s3.K == pytest.approx(1.0, abs=1e-6)
    na = nul.leaf_flag_curvature_check(M.sphere_times_flat(1), SupportElement.of([0.1, 0.2, 0.0], [0, 0, 1.0]), 0.0)
    assert na.status == "not_applicable" and na.mu_k == 1
    with pytest.raises(PreconditionError):
        nul.leaf_flag_curvature_check(M.sphere_times_flat(2), SupportElement.of([0.1, 0.2, 0.0, 0.0], [1.0, 0, 1.0, 0]), 0.0)


@settings(max_examples=30, deadline=None)
@given(name=st.sampled_from(sorted(battery_metrics())), seed=st.integers(0, 2**32 - 1), k=st.sampled_from([0.0, 0.5, 1.0]))
def test_nullity_invariants(name, seed, k):
    m = battery_metrics()[name]
    (z,) = sample_support_elements(m, 1, np.random.default_rng(seed))
    rep = nul.nullity_report(m, z, k)
    assert 0 <= rep.mu_k <= m.n
    assert rep.orthonormality_residual() < 1e-10
    assert list(rep.singular_values) == sorted(rep.singular_values, reverse=True)
    if not rep.ambiguous:
        assert rep.arg.dim == rep.ker.dim and rep.principal_angle < 1e-6
    if name == "euclidean":
        assert rep.mu_k == (m.n if k == 0 else 0)

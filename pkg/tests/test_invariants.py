import math
from types import SimpleNamespace

import numpy as np
import pytest

from equiaffine.frame import point_geometry
from equiaffine.invariants import (
    cubic_closed_form,
    cubic_forms,
    eta_value,
    frame_rotate,
    g_values,
    g_values_normal,
    invariant_report,
    matrix_F,
    matrix_F_normal,
    rank_and_kernel,
    shape_matrix,
    symmetry_identities,
    volume_identities,
)


def _zeros():
    return np.zeros((2, 2, 2))


def test_shape_matrix_examples():
    assert np.all(shape_matrix(_zeros(), 1) == 0)
    lam = _zeros()
    lam[0, 0, 0] = 1.0  # λ^1_11
    lam[1, 0, 1] = 0.25  # λ^2_21
    assert np.allclose(shape_matrix(lam, 1), [[0.75, 0], [0, 0]])


def test_cubic_closed_form_examples():
    c1, c2 = cubic_closed_form(_zeros(), _zeros(), 1)
    assert all(x == 0 for x in (*c1.values(), *c2.values()))
    gamma, tau = _zeros(), _zeros()
    gamma[0, 0, 0] = 0.5  # Γ^1_11
    tau[0, 0, 0] = 0.1  # τ_1^1(X_1)
    c1, _ = cubic_closed_form(gamma, tau, 1)
    assert c1["111"] == pytest.approx(-0.9)


def test_F_examples():
    zero = {k: 0.0 for k in ("111", "112", "122", "222")}
    assert np.all(matrix_F(zero, zero, 1) == 0)
    gamma, tau = _zeros(), _zeros()
    gamma[1, 1, 1] = 0.2  # Γ^2_22
    tau[0, 0, 1] = 0.05  # τ_1^1(X_2)
    stub = SimpleNamespace(epsilon=1, gamma=gamma, tau=tau)
    assert matrix_F_normal(stub)[0, 0] == pytest.approx(1.0)


def test_G_example():
    gamma = _zeros()
    gamma[1, 1, 1] = 0.1  # Γ^2_22
    gamma[0, 0, 1] = 0.2  # Γ^2_11
    stub = SimpleNamespace(epsilon=1, gamma=gamma, tau=_zeros())
    assert g_values_normal(stub)[0] == pytest.approx(-0.1)


def test_rank_examples():
    r = rank_and_kernel(np.zeros((2, 2)), np.zeros((2, 2)))
    assert r.rank == 0 and r.kernel is None
    r = rank_and_kernel(np.array([[1.0, 0], [0, 0]]), np.array([[2.0, 0], [0, 0]]))
    assert r.rank == 1 and np.allclose(r.kernel, [0, 1])
    rng = np.random.default_rng(0)
    u, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    v, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    stacked = u[:, :2] @ np.diag([3.0, 0.5]) @ v.T
    r = rank_and_kernel(stacked[:2], stacked[2:])
    assert r.rank == 2 and r.kernel is None
    assert np.allclose(r.singular_values, [3.0, 0.5])


def test_kernel_sign_convention():
    r = rank_and_kernel(np.array([[1.0, 1.0], [0, 0]]), np.zeros((2, 2)))
    A, B = r.kernel
    assert A > 0 and A == pytest.approx(-B)
    r = rank_and_kernel(np.array([[1.0, 0], [0, 0]]), np.zeros((2, 2)))
    assert r.kernel[1] > 0


def test_eta_examples():
    assert eta_value([1.0, 0.0], 1)[0] == 0.0
    assert eta_value([1.0, 0.0], -1)[0] == 0.0
    h = math.sqrt(0.5)
    assert eta_value([h, h], 1)[0] == pytest.approx(math.pi / 4)
    assert eta_value([h, h], -1)[0] is None
    assert eta_value(None, 1)[0] is None


def test_complex_curve_invariants():
    from equiaffine import corpus_chart

    chart = corpus_chart("cc")
    for p in [(0.0, 0.0), (0.3, -0.2), (-0.6, 0.8)]:
        rep = invariant_report(point_geometry(chart, p))
        assert rep.epsilon == 1 and rep.delta == pytest.approx(16.0)
        assert np.abs(rep.F).max() <= 1e-10
        assert rep.rank_H == 0


@pytest.mark.parametrize("name", ["cc", "gradgraph", "perturbed", "perturbed2", "negdef"])
def test_dual_paths_on_affine_normal_bundle(charts, name):
    chart = charts[name]
    u0, u1, v0, v1 = chart.domain
    geom = point_geometry(chart, (0.35 * u0 + 0.65 * u1, 0.55 * v0 + 0.45 * v1))
    aff = geom.affine
    cf = cubic_forms(aff)
    assert cf.discrepancy <= 1e-8 and cf.asymmetry <= 1e-8
    F = matrix_F(cf.C1, cf.C2, aff.epsilon)
    assert np.allclose(F, matrix_F_normal(aff), atol=1e-8)
    assert np.allclose(g_values(aff), g_values_normal(aff), atol=1e-8)
    assert np.abs(symmetry_identities(geom.initial)).max() <= 1e-8
    assert np.abs(volume_identities(geom.initial)).max() <= 1e-8


def test_zero_rotation_is_identity(charts):
    geom = point_geometry(charts["perturbed"], (0.1, -0.2))
    rc = frame_rotate(geom, 0.0)
    assert np.allclose(rc.recomputed_L, invariant_report(geom).L, atol=1e-14)
    assert np.allclose(rc.recomputed_F, rc.predicted_F, atol=1e-14)


def test_report_serializes(charts):
    import json

    rep = invariant_report(point_geometry(charts["gradgraph"], (0.8, 0.7)))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["rank_H"] == 1 and len(d["kernel_AB"]) == 2
    assert set(d["C1"]) == {"111", "112", "122", "222"}

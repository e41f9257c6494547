from types import SimpleNamespace

import numpy as np
import pytest

from equiaffine import lagrangian
from equiaffine.dsl import parse_surface
from equiaffine.frame import point_geometry
from equiaffine.lagrangian import (
    StepTooSmall,
    SymplecticForm,
    decide,
    form_distance,
    frame_omega,
    omega_invariant_checks,
    oracle_parallel_forms,
    pde_residuals,
    pfaffian,
    reconstruct_omega,
    sample_grid,
)

HALF = parse_surface("surface hp { x1=u; x2=v; x3=u^2/2; x4=v^2/2; }")


def test_identity_frame_forms():
    f = SymplecticForm.from_matrix(frame_omega(1.0, 0.0, 1))
    assert f.entries == (0.0, 0.0, 1.0, 1.0, 0.0, 0.0)  # Ω14 = Ω23 = 1
    assert f.wedge_ratio == 1.0
    f = SymplecticForm.from_matrix(frame_omega(0.0, 1.0, 1))
    assert f.entries == (0.0, 1.0, 0.0, 0.0, -1.0, 0.0)  # Ω13 = 1, Ω24 = -1


def test_identity_frame_reconstruction():
    data = SimpleNamespace(frame_matrix=np.eye(4))
    f = reconstruct_omega(data, 1.0, 0.0, 1)
    assert f.entries == (0.0, 0.0, 1.0, 1.0, 0.0, 0.0)


def test_form_helpers():
    f = SymplecticForm((1.0, 2.0, 3.0, 4.0, 5.0, 6.0))
    assert np.allclose(SymplecticForm.from_matrix(f.matrix).entries, f.entries)
    assert f(np.eye(4)[0], np.eye(4)[1]) == 1.0
    assert pfaffian(f.entries) == pytest.approx(1 * 6 - 2 * 5 + 3 * 4)
    m = f.matrix
    assert np.linalg.det(m) == pytest.approx(f.wedge_ratio**2)
    assert form_distance(f, SymplecticForm(tuple(-2 * x for x in f.entries))) < 1e-15


def test_oracle_on_parabolas():
    res = oracle_parallel_forms(HALF)
    assert res.dimension == 2 and res.trichotomy == "LagrangianFamily"
    e13 = np.array([0, 1, 0, 0, 0, 0.0])
    e24 = np.array([0, 0, 0, 0, 1, 0.0])
    proj = res.basis.T @ res.basis
    assert np.allclose(proj @ e13, e13) and np.allclose(proj @ e24, e24)


def test_oracle_trichotomy(charts):
    expected = {
        "cc": "LagrangianFamily",
        "parabolas": "LagrangianFamily",
        "gradgraph": "LagrangianUnique",
        "gradgraph2": "LagrangianUnique",
        "perturbed": "NotLagrangian",
        "perturbed2": "NotLagrangian",
        "cubic_lagrangian": "LagrangianUnique",
    }
    for name, kind in expected.items():
        assert oracle_parallel_forms(charts[name]).trichotomy == kind, name


def test_gradient_graph_residuals(charts):
    chart = charts["gradgraph"]
    for p in sample_grid(chart, 3):
        r = pde_residuals(chart, p)
        assert r.max_residual <= 1e-5


def test_residuals_vanish_for_constant_kernel(monkeypatch, charts):
    rep = SimpleNamespace(G1=0.0, G2=0.0)
    monkeypatch.setattr(
        lagrangian, "_scaled_kernel", lambda *a, **k: (rep, np.array([0.6, 0.8]))
    )
    r = pde_residuals(charts["gradgraph"], (0.8, 0.7))
    assert np.abs(r.residuals).max() <= 1e-12


def test_step_guard(charts):
    with pytest.raises(StepTooSmall):
        pde_residuals(charts["gradgraph"], (0.8, 0.7), step=1e-9)


def test_parallelism_at_distant_points(charts):
    chart = charts["gradgraph"]
    forms = []
    for p in [(0.35, 0.25), (1.25, 1.15)]:
        g = point_geometry(chart, p)
        r = pde_residuals(chart, p, geometry=g)
        forms.append(reconstruct_omega(g.affine, r.A, r.B, g.epsilon))
    a, b = (np.array(f.normalized().entries) for f in forms)
    assert np.abs(a - b).max() <= 1e-5


def test_omega_checks_detect_perturbation(charts):
    chart = charts["gradgraph"]
    verdict = decide(chart, grid=3, oracle=False)
    assert verdict.kind == "LagrangianUnique"
    data = point_geometry(chart, (0.8, 0.7)).affine
    good = omega_invariant_checks(verdict.omega, data)
    assert max(good.values()) <= 1e-6
    bumped = list(verdict.omega.entries)
    bumped[0] += 0.1
    bad = omega_invariant_checks(SymplecticForm(tuple(bumped)), data)
    assert max(bad.values()) > 1e-2


def test_decide_examples(charts):
    assert decide(HALF, grid=3).kind == "LagrangianFamily"
    v = decide(charts["cc"], grid=3)
    assert v.kind == "LagrangianFamily" and v.evidence["oracle_dim"] == 2
    assert v.family_basis.shape == (2, 6)
    assert decide(charts["perturbed"], grid=3).kind == "NotLagrangian"


def test_decide_rejects_small_grid(charts):
    with pytest.raises(ValueError):
        decide(charts["cc"], grid=2)


def test_decide_on_plane_raises(charts):
    from equiaffine.frame import DegenerateSurface

    with pytest.raises(DegenerateSurface):
        decide(charts["plane"], grid=3)

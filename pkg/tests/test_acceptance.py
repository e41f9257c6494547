"""Acceptance criteria 1-8, each reported as one PASS/FAIL line."""

import random
import time

import numpy as np
import pytest

from equiaffine import jets
from equiaffine.dsl import eval_jet
from equiaffine.frame import affine_normal_conditions, point_geometry
from equiaffine.invariants import (
    cubic_forms,
    e_values,
    frame_rotate,
    matrix_F,
    matrix_F_normal,
    printed_symmetry_identities,
    symmetry_identities,
    volume_identities,
)
from equiaffine.jets import jet_variable
from equiaffine.lagrangian import decide, oracle_parallel_forms, sample_grid
from equiaffine.verify import arbitrary_bundles, equiaffine_bundles, random_angle

from conftest import ACCEPTANCE_LINES, CORPUS, FAMILY, NEGATIVE, UNIQUE, mp_partial, random_expr

SEED = 42
ENTRY_SCALE = 10.0


def report(label: str, ok: bool, detail: str) -> None:
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def within(diff: np.ndarray, ref: np.ndarray, tol: float) -> float:
    """Worst |diff| relative to its allowance: tol absolute up to ENTRY_SCALE, proportional beyond."""
    allow = tol * np.maximum(1.0, np.abs(ref) / ENTRY_SCALE)
    return float((np.abs(diff) / allow).max())


def grid_geometries(chart, n=9):
    out = []
    for p in sample_grid(chart, n):
        out.append(point_geometry(chart, p))
    return out


@pytest.fixture(scope="module")
def geometries(charts):
    return {name: grid_geometries(charts[name]) for name in CORPUS}


# -- 1 and 2: frame change --------------------------------------------------------------


def _rotation_sweep(charts, names, n_angles=20, n_points=2):
    rng = np.random.default_rng(SEED)
    rows = []
    for name in names:
        chart = charts[name]
        pts = sample_grid(chart, 3)
        for p in [pts[1], pts[5]][:n_points]:
            geom = point_geometry(chart, p)
            for _ in range(n_angles):
                rows.append((name, frame_rotate(geom, random_angle(geom.epsilon, rng))))
    return rows


def test_criterion_1_frame_change_laws(charts):
    names = ("cc", "parabolas", "gradgraph", "perturbed")
    t0 = time.perf_counter()
    rows = _rotation_sweep(charts, names, n_angles=20, n_points=1)
    worst_L = max(within(rc.predicted_L - rc.recomputed_L, rc.predicted_L, 1e-7) for _, rc in rows)
    worst_F = max(within(rc.predicted_F - rc.recomputed_F, rc.predicted_F, 1e-7) for _, rc in rows)
    elapsed = time.perf_counter() - t0
    ok = worst_L <= 1 and worst_F <= 1 and elapsed < 10
    report(
        "1",
        ok,
        f"{len(rows)} rotations on {len(names)} charts; worst scaled residual L {worst_L * 1e-7:.1e}, "
        f"F {worst_F * 1e-7:.1e} (tol 1e-7); {elapsed:.2f}s",
    )
    assert ok


def test_criterion_2_rank_and_eta_shift(charts):
    rows = _rotation_sweep(charts, CORPUS, n_angles=20, n_points=2)
    rank_mismatch = sum(rc.rank != rc.rotated_rank for _, rc in rows)
    shifts = [rc.eta_shift_residual() for _, rc in rows]
    shifts = [s for s in shifts if s is not None]
    worst = max(shifts) if shifts else 0.0
    ok = rank_mismatch == 0 and worst <= 1e-7 and len(shifts) > 0
    report(
        "2",
        ok,
        f"{len(rows)} (point, angle) pairs, rank mismatches {rank_mismatch}; "
        f"eta shift worst {worst:.1e} over {len(shifts)} defined cases (tol 1e-7)",
    )
    assert ok


# -- 3: affine normal bundle ------------------------------------------------------------


def test_criterion_3_affine_normal_bundle(geometries):
    worst_E = worst_tau = worst_gamma = 0.0
    count = 0
    for geoms in geometries.values():
        for g in geoms:
            aff = g.affine
            cf = cubic_forms(aff)
            scale = max(1.0, float(np.abs(cf.tensor).max()))
            worst_E = max(worst_E, float(np.abs(e_values(cf.C1, cf.C2, aff.epsilon)).max()) / scale)
            worst_tau = max(worst_tau, float(np.abs(aff.tau[0, 0] + aff.tau[1, 1]).max()))
            conds = np.array(affine_normal_conditions(aff.gamma, aff.epsilon))
            worst_gamma = max(worst_gamma, float(np.abs(conds).max()))
            count += 1
    ok = max(worst_E, worst_tau, worst_gamma) <= 1e-8
    report(
        "3",
        ok,
        f"{count} grid points on {len(geometries)} charts; max|E|/max(1,|C|) {worst_E:.1e}, "
        f"tau trace {worst_tau:.1e}, Gamma relations {worst_gamma:.1e} (tol 1e-8)",
    )
    assert ok


# -- 4: universal identities ------------------------------------------------------------


def _bundle_sweep(geometries, chooser, fn, per_chart=4):
    rng = np.random.default_rng(SEED)
    worst, count = 0.0, 0
    for geoms in geometries.values():
        for g in geoms[:: max(1, len(geoms) // per_chart)]:
            for data in chooser(g, rng, 3):
                worst = max(worst, float(np.abs(fn(data)).max()))
                count += 1
    return worst, count


def test_criterion_4_identities_restated(geometries):
    """Symmetry identities in general form plus the volume identity, any bundle;
    simplified symmetry identities on equiaffine bundles."""
    w_sym, n = _bundle_sweep(geometries, arbitrary_bundles, symmetry_identities)
    w_vol, _ = _bundle_sweep(geometries, arbitrary_bundles, volume_identities)
    w_eq, m = _bundle_sweep(geometries, equiaffine_bundles, printed_symmetry_identities)
    ok = max(w_sym, w_vol, w_eq) <= 1e-8
    report(
        "4",
        ok,
        f"restated: symmetry (general form) {w_sym:.1e} and volume {w_vol:.1e} on {n} arbitrary "
        f"bundles; simplified symmetry {w_eq:.1e} on {m} equiaffine bundles (tol 1e-8)",
    )
    assert ok


@pytest.mark.xfail(strict=True, reason="simplified symmetry identities presume an equiaffine bundle")
def test_criterion_4_identities_as_stated_on_arbitrary_bundles(geometries):
    w_sym, n = _bundle_sweep(geometries, arbitrary_bundles, printed_symmetry_identities)
    w_vol, _ = _bundle_sweep(geometries, arbitrary_bundles, volume_identities)
    ok = max(w_sym, w_vol) <= 1e-8
    report(
        "4/as-stated",
        ok,
        f"simplified symmetry identities on {n} arbitrary bundles: worst {w_sym:.2e} "
        f"(tol 1e-8); volume identity {w_vol:.1e}",
    )
    assert ok


# -- 5: dual-path formulas ----------------------------------------------------------


def test_criterion_5_dual_paths(geometries):
    rng = np.random.default_rng(SEED)
    worst_c = worst_f = 0.0
    count = 0
    for geoms in geometries.values():
        for g in geoms:
            for data in arbitrary_bundles(g, rng, 1):
                cf = cubic_forms(data, tol=np.inf)
                scale = max(1.0, float(np.abs(data.gamma).max()), float(np.abs(data.tau).max()))
                worst_c = max(worst_c, cf.discrepancy / scale)
                count += 1
            aff = g.affine
            cf = cubic_forms(aff)
            F = matrix_F(cf.C1, cf.C2, aff.epsilon)
            worst_f = max(worst_f, float(np.abs(F - matrix_F_normal(aff)).max()) / max(1.0, np.abs(F).max()))
    ok = worst_c <= 1e-8 and worst_f <= 1e-8
    report(
        "5",
        ok,
        f"cubic forms definition vs closed form {worst_c:.1e} on {count} bundles; "
        f"F general vs simplified (affine normal bundle) {worst_f:.1e} (tol 1e-8)",
    )
    assert ok


# -- 6 and 7: decision ------------------------------------------------------------------


@pytest.fixture(scope="module")
def verdicts(charts):
    t0 = time.perf_counter()
    out = {}
    for name in FAMILY + UNIQUE + NEGATIVE:
        out[name] = (decide(charts[name]), oracle_parallel_forms(charts[name]))
    return out, time.perf_counter() - t0


def test_criterion_6_decision_matches_oracle(verdicts):
    results, elapsed = verdicts
    mismatches = [n for n, (v, o) in results.items() if v.kind != o.trichotomy]
    expected = {**{n: "LagrangianFamily" for n in FAMILY}, **{n: "LagrangianUnique" for n in UNIQUE},
                **{n: "NotLagrangian" for n in NEGATIVE}}
    wrong = [n for n, (v, _) in results.items() if v.kind != expected[n]]
    dist = max(results[n][0].evidence.get("oracle_distance", np.inf) for n in UNIQUE)
    var = max(results[n][0].evidence["parallel_variation"] for n in UNIQUE)
    ok = not mismatches and not wrong and dist <= 1e-4 and var <= 1e-5 and elapsed < 60
    report(
        "6",
        ok,
        f"{len(results)} charts, oracle mismatches {mismatches or 'none'}; unique cases: "
        f"distance to oracle {dist:.1e} (tol 1e-4), parallel variation {var:.1e} (tol 1e-5); "
        f"{elapsed:.1f}s",
    )
    assert ok


def test_criterion_7_lagrangian_relations(verdicts):
    results, _ = verdicts
    worst = {"omega_xi1_xi2": 0.0, "kernel": 0.0, "wedge": 0.0}
    pde = 0.0
    for name in UNIQUE:
        v = results[name][0]
        for key in worst:
            worst[key] = max(worst[key], v.evidence["omega_checks"][key])
        pde = max(pde, v.evidence["max_pde_residual"])
    ok = max(worst.values()) <= 1e-6 and pde <= 1e-4
    report(
        "7",
        ok,
        f"|Omega(xi1,xi2)| {worst['omega_xi1_xi2']:.1e}, |H[A,B]| {worst['kernel']:.1e}, "
        f"wedge {worst['wedge']:.1e} (tol 1e-6); PDE residual {pde:.1e} (tol 1e-4)",
    )
    assert ok


# -- 8: jets --------------------------------------------------------------------------


PARTIALS = [(a, b) for n in range(1, 4) for a in range(n + 1) for b in [n - a]]


def test_criterion_8_jet_correctness():
    rng = random.Random(SEED)
    worst, n = 0.0, 0
    for _ in range(1000):
        node = random_expr(rng, 4)
        u0, v0 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        j = eval_jet(node, jet_variable("u", u0, 3), jet_variable("v", v0, 3))
        for a, b in PARTIALS:
            ref = mp_partial(node, u0, v0, a, b)
            worst = max(worst, abs(j.derivative(a, b) - ref) / max(abs(ref), 1e-8))
            n += 1
    trig = 0.0
    for _ in range(50):
        x = jet_variable("u", rng.uniform(-3, 3), 6) * jet_variable("v", rng.uniform(-3, 3), 6)
        one = jets.sin(x) ** 2 + jets.cos(x) ** 2
        one.coeffs[0] -= 1.0
        trig = max(trig, float(np.abs(one.coeffs).max()))
    ok = worst <= 1e-6 and trig <= 1e-12
    report(
        "8",
        ok,
        f"{n} partials of 1000 random expressions, worst relative error {worst:.1e} (tol 1e-6); "
        f"sin^2+cos^2-1 worst coefficient {trig:.1e} (tol 1e-12)",
    )
    assert ok

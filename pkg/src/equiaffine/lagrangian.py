"""Lagrangian detection: rank profile, PDE residuals, Ω reconstruction, oracle.

A surface is Lagrangian for a parallel (constant) symplectic form iff
rank(H) = 0, or rank(H) = 1 and the kernel direction [A, B] scaled to
A² + εB² = const satisfies a first-order system along the frame.  The
oracle answers the same question by brute force: it solves the linear
system Ω(x_u, x_v) = 0 over constant antisymmetric Ω at sample points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dsl import DomainError, SurfaceChart, immersion_jet
from .frame import (
    DegenerateSurface,
    MIN_ORDER,
    TOL_DEGENERATE,
    FrameData,
    FrameError,
    PointGeometry,
    point_geometry,
    wedge,
)
from .invariants import (
    TOL_RANK,
    TOL_RANK_ABS,
    cubic_forms,
    eta_period,
    eta_value,
    invariant_report,
    matrix_F,
    shape_matrix,
)

TOL_PDE = 1e-4
TOL_PARALLEL = 1e-5
TOL_ORACLE = 1e-8
TOL_WEDGE = 1e-6
DEFAULT_GRID = 9
DEFAULT_MARGIN = 0.05
DEFAULT_STEP_FRACTION = 1e-3
MIN_STEP_FRACTION = 1e-7
MAX_DEGENERATE_FRACTION = 0.10
ORACLE_GRID = 5
_FD_OFFSETS = np.array([1.0, -1.0, 2.0, -2.0])
_FD_WEIGHTS = np.array([8.0, -8.0, -1.0, 1.0]) / 12.0

# Upper-triangle positions of the six independent entries, order 12 13 14 23 24 34.
_IU = (np.array([0, 0, 0, 1, 1, 2]), np.array([1, 2, 3, 2, 3, 3]))


class StencilRankBreak(ArithmeticError):
    pass


class StepTooSmall(ValueError):
    pass


class VanishingWedge(ArithmeticError):
    """A² + εB² ≈ 0: no nonzero constant normalization exists."""


def pfaffian(entries) -> float:
    o12, o13, o14, o23, o24, o34 = entries
    return o12 * o34 - o13 * o24 + o14 * o23


@dataclass(frozen=True)
class SymplecticForm:
    """Constant 2-form Ω(a, b) = aᵀ·matrix·b on R^4.

    ``wedge_ratio`` is the Pfaffian, i.e. Ω∧Ω = wedge_ratio·[·,·,·,·] with
    the convention (e^1∧e^2∧e^3∧e^4 = [·,·,·,·]) in which the factor 2 of
    Ω∧Ω = 2·Pf(Ω)·vol is absorbed.  For Ω = e^1∧e^4 + e^2∧e^3 it equals 1.
    """

    entries: tuple[float, float, float, float, float, float]

    @classmethod
    def from_matrix(cls, m) -> "SymplecticForm":
        m = np.asarray(m, dtype=float)
        return cls(tuple(float(x) for x in (0.5 * (m - m.T))[_IU]))

    @property
    def matrix(self) -> np.ndarray:
        m = np.zeros((4, 4))
        m[_IU] = self.entries
        return m - m.T

    @property
    def wedge_ratio(self) -> float:
        return pfaffian(self.entries)

    def __call__(self, a, b) -> float:
        return float(np.asarray(a) @ self.matrix @ np.asarray(b))

    def normalized(self) -> "SymplecticForm":
        """Unit Euclidean norm of the entries, largest-magnitude entry positive."""
        e = np.array(self.entries)
        n = np.linalg.norm(e)
        if n == 0:
            return self
        e = e / n
        if e[np.argmax(np.abs(e))] < 0:
            e = -e
        return SymplecticForm(tuple(float(x) for x in e))

    def to_dict(self) -> dict:
        return {"entries": list(self.entries), "wedge_ratio": self.wedge_ratio}


def form_distance(a, b) -> float:
    """Distance between two forms after unit scaling, up to an overall sign."""
    x = np.array(a.entries if isinstance(a, SymplecticForm) else a, dtype=float)
    y = np.array(b.entries if isinstance(b, SymplecticForm) else b, dtype=float)
    x, y = x / np.linalg.norm(x), y / np.linalg.norm(y)
    return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


# -- Ω from frame data ---------------------------------------------------------------


def frame_omega(A: float, B: float, epsilon: int) -> np.ndarray:
    """Ω in the basis (X_1, X_2, ξ_1, ξ_2) from the six defining conditions."""
    w = np.zeros((4, 4))
    w[0, 3] = w[1, 2] = A  # Ω(X_1, ξ_2) = Ω(X_2, ξ_1) = A
    w[0, 2] = B  # Ω(X_1, ξ_1) = B
    w[1, 3] = -epsilon * B  # Ω(X_2, ξ_2) = -εB
    return w - w.T


def reconstruct_omega(data: FrameData, A: float, B: float, epsilon: int) -> SymplecticForm:
    minv = np.linalg.inv(data.frame_matrix)
    return SymplecticForm.from_matrix(minv.T @ frame_omega(A, B, epsilon) @ minv)


def omega_invariant_checks(
    omega: SymplecticForm, data: FrameData, A: float | None = None, B: float | None = None
) -> dict:
    """Residuals of the relations a parallel Lagrangian Ω must satisfy at a point.

    A and B default to Ω(X_1, ξ_2) and Ω(X_1, ξ_1).  The wedge check
    compares against the volume form used for the frame, so a reversed
    orientation flips its sign.
    """
    eps = data.epsilon
    X1, X2 = data.X
    xi1, xi2 = data.xi
    A = omega(X1, xi2) if A is None else A
    B = omega(X1, xi1) if B is None else B
    cf = cubic_forms(data)
    L = shape_matrix(data.lam, eps)
    F = matrix_F(cf.C1, cf.C2, eps)
    ab = np.array([A, B])
    ab_unit = ab / max(np.linalg.norm(ab), 1e-300)
    return {
        "omega_X1_X2": abs(omega(X1, X2)),
        "omega_xi1_xi2": abs(omega(xi1, xi2)),
        "A_symmetry": abs(omega(X1, xi2) - omega(X2, xi1)),
        "B_symmetry": abs(omega(X1, xi1) + eps * omega(X2, xi2)),
        "wedge": abs(omega.wedge_ratio - data.orientation * (A * A + eps * B * B)),
        "F_relation": abs(F[1, 0] * A + F[1, 1] * B + 4 * omega(xi1, xi2)),
        "kernel": float(np.abs(np.vstack([L, F]) @ ab_unit).max()),
    }


# -- PDE residuals ----------------------------------------------------------------------


@dataclass(frozen=True)
class PdeResult:
    point: tuple[float, float]
    residuals: np.ndarray  # r_A1, r_A2, r_B1, r_B2
    eta_residuals: np.ndarray | None
    A: float
    B: float
    G1: float
    G2: float
    wedge_values: np.ndarray  # A² + εB² at the stencil points after scaling
    geometry: PointGeometry = field(repr=False)

    @property
    def max_residual(self) -> float:
        return float(np.abs(self.residuals).max())


def default_step(chart: SurfaceChart) -> float:
    u0, u1, v0, v1 = chart.domain
    return DEFAULT_STEP_FRACTION * max(u1 - u0, v1 - v0)


def _scaled_kernel(geom, eps, tol_rel, tol_abs, ref=None):
    rep = invariant_report(geom, tol_rel, tol_abs)
    if rep.rank_H != 1 or rep.ill_conditioned:
        raise StencilRankBreak(f"rank {rep.rank_H} at {geom.jets.point}")
    k = rep.kernel_AB
    c = k[0] ** 2 + eps * k[1] ** 2
    if abs(c) < TOL_WEDGE:
        raise VanishingWedge(f"A² + εB² = {c:.3e} at {geom.jets.point}")
    k = k / np.sqrt(abs(c))
    if ref is not None and k @ ref < 0:
        k = -k
    return rep, k


def pde_residuals(
    chart: SurfaceChart,
    point,
    step: float | None = None,
    tol_rel: float = TOL_RANK,
    tol_abs: float = TOL_RANK_ABS,
    geometry: PointGeometry | None = None,
    order: int = MIN_ORDER,
) -> PdeResult:
    """Residuals of the first-order system for (A, B) at ``point``.

    The kernel is scaled to |A² + εB²| = 1 at each stencil point with its
    sign matched to the centre.  Derivatives along X_i come from
    fourth-order central differences in (u, v) (offsets ±step, ±2·step on
    each axis) combined with the centre's frame coefficients.
    """
    u0, u1, v0, v1 = chart.domain
    width = max(u1 - u0, v1 - v0)
    step = default_step(chart) if step is None else step
    if step < MIN_STEP_FRACTION * width:
        raise StepTooSmall(f"step {step:.3e} below {MIN_STEP_FRACTION:g} x domain width")
    geom = geometry or point_geometry(chart, point, order)
    eps = geom.epsilon
    rep, k0 = _scaled_kernel(geom, eps, tol_rel, tol_abs)
    u, v = geom.jets.point
    # fourth-order central differences along each axis: offsets ±h, ±2h
    offsets = [(m * step, 0.0) for m in _FD_OFFSETS] + [(0.0, m * step) for m in _FD_OFFSETS]
    ks, etas = [], []
    for du, dv in offsets:
        g = point_geometry(chart, (u + du, v + dv), order, choices=geom.choices)
        _, k = _scaled_kernel(g, eps, tol_rel, tol_abs, ref=k0)
        ks.append(k)
    ks = np.array(ks)
    n = len(_FD_OFFSETS)
    d_du = _FD_WEIGHTS @ ks[:n] / step
    d_dv = _FD_WEIGHTS @ ks[n:] / step
    Xc = geom.affine.X_coords
    dX = np.outer(Xc[:, 0], d_du) + np.outer(Xc[:, 1], d_dv)  # [i, (A, B)]
    A, B = k0
    G1, G2 = rep.G1, rep.G2
    r = np.array(
        [
            dX[0, 0] - G1 * B,
            dX[1, 0] + eps * G2 * B,
            dX[0, 1] + eps * G1 * A,
            dX[1, 1] - G2 * A,
        ]
    )
    eta_r = None
    eta0, _ = eta_value(k0, eps)
    if eta0 is not None:
        for kk in ks:
            e, _ = eta_value(kk / np.linalg.norm(kk), eps)
            etas.append(e)
        if all(e is not None for e in etas):
            etas = np.array(etas)
            period = eta_period(eps)
            if period:
                etas = eta0 + (etas - eta0 + period / 2) % period - period / 2
            de = np.array([_FD_WEIGHTS @ etas[:n], _FD_WEIGHTS @ etas[n:]]) / step
            d_eta = Xc @ de
            eta_r = np.array([d_eta[0] + eps * G1, d_eta[1] - G2])
    wedge_values = np.array([x[0] ** 2 + eps * x[1] ** 2 for x in [k0, *ks]])
    return PdeResult(
        point=(u, v),
        residuals=r,
        eta_residuals=eta_r,
        A=float(A),
        B=float(B),
        G1=G1,
        G2=G2,
        wedge_values=wedge_values,
        geometry=geom,
    )


# -- oracle -------------------------------------------------------------------------------


def sample_grid(chart: SurfaceChart, n: int, margin: float = DEFAULT_MARGIN):
    """n x n grid over the domain shrunk by ``margin`` of its width on each side."""
    u0, u1, v0, v1 = chart.domain
    du, dv = (u1 - u0) * margin, (v1 - v0) * margin
    us = np.linspace(u0 + du, u1 - du, n)
    vs = np.linspace(v0 + dv, v1 - dv, n)
    return [(float(a), float(b)) for a in us for b in vs]


@dataclass(frozen=True)
class OracleResult:
    dimension: int
    basis: np.ndarray  # (dimension, 6), orthonormal rows
    singular_values: np.ndarray
    nondegenerate: list[bool]  # per basis vector
    has_nondegenerate: bool  # some combination in the span has Pf ≠ 0
    samples: int

    @property
    def trichotomy(self) -> str:
        if self.dimension >= 2 and self.has_nondegenerate:
            return "LagrangianFamily"
        if self.dimension == 1 and self.has_nondegenerate:
            return "LagrangianUnique"
        return "NotLagrangian"

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "basis": self.basis.tolist(),
            "singular_values": self.singular_values.tolist(),
            "nondegenerate": [bool(x) for x in self.nondegenerate],
            "has_nondegenerate": bool(self.has_nondegenerate),
            "samples": self.samples,
            "trichotomy": self.trichotomy,
        }


def _pf_bilinear(x, y) -> float:
    """Polarization of the Pfaffian quadratic form."""
    return 0.5 * (
        x[0] * y[5] + y[0] * x[5] - x[1] * y[4] - y[1] * x[4] + x[2] * y[3] + y[2] * x[3]
    )


def oracle_parallel_forms(chart: SurfaceChart, samples=None, tol: float = TOL_ORACLE):
    """Null space of {constant antisymmetric Ω : Ω(x_u, x_v) = 0 at all samples}."""
    if samples is None:
        samples = sample_grid(chart, ORACLE_GRID)
    samples = [p for p in samples if not chart.is_excluded(*p)]
    rows = []
    for p in samples:
        x = immersion_jet(chart, p, 1)
        row = wedge(np.array(x.d(0).value), np.array(x.d(1).value))
        rows.append(row / max(np.linalg.norm(row), 1e-300))
    if not rows:
        raise ValueError("oracle needs at least one sample point")
    system = np.array(rows)
    _, s, vt = np.linalg.svd(system)
    s_full = np.zeros(6)
    s_full[: len(s)] = s
    rank = int(np.sum(s_full > tol * s_full[0]))
    basis = vt[rank:]
    nondeg = [abs(_pf_bilinear(b, b)) > tol for b in basis]
    if len(basis):
        Q = np.array([[_pf_bilinear(a, b) for b in basis] for a in basis])
        has = bool(np.abs(np.linalg.eigvalsh(Q)).max() > tol)
    else:
        has = False
    return OracleResult(len(basis), basis, s_full, nondeg, has, len(samples))


# -- decision ----------------------------------------------------------------------------


KINDS = ("NotLagrangian", "LagrangianUnique", "LagrangianFamily", "Degenerate", "Inconclusive")


@dataclass(frozen=True)
class LagrangianVerdict:
    kind: str
    omega: SymplecticForm | None
    family_basis: np.ndarray | None
    evidence: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "omega": None if self.omega is None else list(self.omega.entries),
            "wedge_ratio": None if self.omega is None else self.omega.wedge_ratio,
            "family_basis": None if self.family_basis is None else self.family_basis.tolist(),
            "evidence": self.evidence,
        }


@dataclass(frozen=True)
class Tolerances:
    rank: float = TOL_RANK
    rank_abs: float = TOL_RANK_ABS
    pde: float = TOL_PDE
    parallel: float = TOL_PARALLEL
    degenerate: float = TOL_DEGENERATE


@dataclass
class _PointRecord:
    point: tuple[float, float]
    status: str  # "ok", "degenerate", "excluded", "error"
    rank: int | None = None
    ill: bool = False
    geometry: PointGeometry | None = None
    message: str = ""


def _survey(chart, points, tol: Tolerances, order: int = MIN_ORDER):
    records = []
    for p in points:
        if chart.is_excluded(*p):
            records.append(_PointRecord(p, "excluded"))
            continue
        try:
            geom = point_geometry(chart, p, order, tol_degenerate=tol.degenerate)
            rep = invariant_report(geom, tol.rank, tol.rank_abs)
        except DegenerateSurface as exc:
            records.append(_PointRecord(p, "degenerate", message=str(exc)))
            continue
        except (FrameError, DomainError, ArithmeticError) as exc:
            records.append(_PointRecord(p, "error", message=f"{type(exc).__name__}: {exc}"))
            continue
        records.append(_PointRecord(p, "ok", rep.rank_H, rep.ill_conditioned, geom))
    return records


def decide(
    chart: SurfaceChart,
    grid: int = DEFAULT_GRID,
    tolerances: Tolerances | None = None,
    step: float | None = None,
    points=None,
    oracle: bool = True,
    margin: float = DEFAULT_MARGIN,
    order: int = MIN_ORDER,
) -> LagrangianVerdict:
    """Classify ``chart`` from its rank profile and, for rank 1, the PDE residuals."""
    if grid < 3:
        raise ValueError("grid must be at least 3")
    tol = tolerances or Tolerances()
    points = points or sample_grid(chart, grid, margin)
    records = _survey(chart, points, tol, order)
    degenerate = [r.point for r in records if r.status == "degenerate"]
    if len(degenerate) > MAX_DEGENERATE_FRACTION * len(records):
        raise DegenerateSurface(
            f"{len(degenerate)} of {len(records)} sample points are degenerate"
        )
    ok = [r for r in records if r.status == "ok"]
    borderline = [r.point for r in ok if r.ill]
    classified = [r for r in ok if not r.ill]
    histogram = {str(k): sum(1 for r in classified if r.rank == k) for k in range(3)}
    evidence = {
        "rank_histogram": histogram,
        "max_pde_residual": None,
        "max_eta_residual": None,
        "oracle_dim": None,
        "oracle_agrees": None,
        "skipped_points": [list(r.point) for r in records if r.status != "ok"],
        "skip_reasons": [r.message or r.status for r in records if r.status != "ok"],
        "inconclusive_points": [list(p) for p in borderline],
        "parallel_variation": None,
        "points": len(records),
        "tolerances": {
            "rank": tol.rank,
            "rank_abs": tol.rank_abs,
            "pde": tol.pde,
            "parallel": tol.parallel,
            "degenerate": tol.degenerate,
        },
    }
    kind, omega, basis = _classify(chart, classified, tol, step, evidence, order)
    if oracle:
        res = oracle_parallel_forms(chart)
        evidence["oracle_dim"] = res.dimension
        evidence["oracle_nondegenerate"] = res.has_nondegenerate
        evidence["oracle_agrees"] = None if kind == "Inconclusive" else kind == res.trichotomy
        if kind == "LagrangianFamily":
            basis = res.basis
        if kind == "LagrangianUnique" and res.dimension == 1:
            evidence["oracle_distance"] = form_distance(omega, res.basis[0])
    return LagrangianVerdict(kind, omega, basis, evidence)


def _classify(chart, classified, tol, step, evidence, order=MIN_ORDER):
    if not classified:
        return "Inconclusive", None, None
    ranks = {r.rank for r in classified}
    if 2 in ranks:
        return "NotLagrangian", None, None
    if ranks == {0}:
        return "LagrangianFamily", None, None
    if ranks != {1}:
        return "Inconclusive", None, None
    residual_max, eta_max, forms = 0.0, None, []
    for r in classified:
        try:
            pde = pde_residuals(chart, r.point, step, tol.rank, tol.rank_abs, r.geometry, order)
        except (StencilRankBreak, VanishingWedge, FrameError, DomainError) as exc:
            evidence["inconclusive_points"].append(list(r.point))
            evidence["skip_reasons"].append(f"{type(exc).__name__}: {exc}")
            continue
        residual_max = max(residual_max, pde.max_residual)
        if pde.eta_residuals is not None:
            eta_max = max(eta_max or 0.0, float(np.abs(pde.eta_residuals).max()))
        forms.append(reconstruct_omega(r.geometry.affine, pde.A, pde.B, r.geometry.epsilon))
    if not forms:
        return "Inconclusive", None, None
    evidence["max_pde_residual"] = residual_max
    evidence["max_eta_residual"] = eta_max
    if residual_max > tol.pde:
        return "NotLagrangian", None, None
    ref = forms[0].normalized()
    aligned = []
    for f in forms:
        e = np.array(f.normalized().entries)
        if e @ np.array(ref.entries) < 0:
            e = -e
        aligned.append(e)
    aligned = np.array(aligned)
    variation = float(np.abs(aligned - aligned[0]).max())
    evidence["parallel_variation"] = variation
    mean = SymplecticForm(tuple(float(x) for x in aligned.mean(axis=0))).normalized()
    checks: dict[str, float] = {}
    for r in classified:
        for key, val in omega_invariant_checks(mean, r.geometry.affine).items():
            checks[key] = max(checks.get(key, 0.0), float(val))
    evidence["omega_checks"] = checks
    if variation > tol.parallel:
        evidence["skip_reasons"].append(f"reconstructed forms vary by {variation:.3e}")
        return "Inconclusive", mean, None
    return "LagrangianUnique", mean, None


def with_tolerances(tol: Tolerances, **kw) -> Tolerances:
    return replace(tol, **{k: v for k, v in kw.items() if v is not None})

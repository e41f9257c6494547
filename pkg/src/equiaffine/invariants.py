"""Frame invariants: L, cubic forms, F, H, rank/kernel, η, G_1, G_2, E.

Index conventions follow :mod:`equiaffine.frame`.  Cubic-form component
tables are keyed by the sorted index string, e.g. ``C1["112"]`` is
C^1(X_1, X_1, X_2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frame import (
    FrameData,
    PointGeometry,
    affine_normal_conditions,
    geometry_from_jets,
    rotation_matrix,
)

TOL_CROSSCHECK = 1e-8
TOL_RANK = 1e-6
TOL_RANK_ABS = 1e-8
COMPONENTS = ("111", "112", "122", "222")


class CrossCheckFailure(ArithmeticError):
    pass


def _table(C: np.ndarray) -> dict[str, float]:
    return {k: float(C[tuple(int(c) - 1 for c in k)]) for k in COMPONENTS}


# -- L and cubic forms ------------------------------------------------------------


def shape_matrix(lam: np.ndarray, epsilon: int) -> np.ndarray:
    """L from the shape-operator components λ^k_ij = lam[i-1, j-1, k-1]."""
    l = lambda i, j, k: lam[i - 1, j - 1, k - 1]  # noqa: E731,E741
    return np.array(
        [
            [l(1, 1, 1) - l(2, 1, 2), -epsilon * l(1, 1, 2) - l(2, 1, 1)],
            [l(1, 2, 1) - l(2, 2, 2), -epsilon * l(1, 2, 2) - l(2, 2, 1)],
        ]
    )


def cubic_tensor(gamma: np.ndarray, tau: np.ndarray, h: np.ndarray) -> np.ndarray:
    """C[i, a, b, c] = C^i(X_a, X_b, X_c) straight from the definition.

    The h-components are constant in a normalized basis, so the covariant
    derivative of h^i reduces to -h^i(∇_{X_a}X_b, X_c) - h^i(X_b, ∇_{X_a}X_c).
    """
    nabla_h = -np.einsum("abk,ikc->iabc", gamma, h) - np.einsum("ack,ibk->iabc", gamma, h)
    twist = np.einsum("mia,mbc->iabc", tau, h)
    return nabla_h + twist


def cubic_closed_form(gamma: np.ndarray, tau: np.ndarray, epsilon: int):
    """The eight independent components from the closed Γ/τ formulas."""
    g = lambda i, j, k: gamma[i - 1, j - 1, k - 1]  # noqa: E731
    t = lambda i, j, k: tau[i - 1, j - 1, k - 1]  # τ_i^j(X_k)  # noqa: E731
    e = epsilon
    c1 = {
        "111": -2 * g(1, 1, 1) + t(1, 1, 1),
        "112": -2 * g(2, 1, 1) + t(1, 1, 2),
        "122": 2 * e * g(1, 2, 2) - e * t(1, 1, 1),
        "222": 2 * e * g(2, 2, 2) - e * t(1, 1, 2),
    }
    c2 = {
        "111": -2 * g(1, 1, 2) + t(1, 2, 1),
        "112": -2 * g(2, 1, 2) + t(1, 2, 2),
        "122": -2 * g(1, 2, 1) - e * t(1, 2, 1),
        "222": -2 * g(2, 2, 1) - e * t(1, 2, 2),
    }
    return c1, c2


@dataclass(frozen=True)
class CubicForms:
    C1: dict
    C2: dict
    tensor: np.ndarray = field(repr=False)
    discrepancy: float
    asymmetry: float


def cubic_forms(data: FrameData, tol: float = TOL_CROSSCHECK) -> CubicForms:
    """Cubic forms by definition and by closed formula, cross-checked.

    Returns the closed-formula tables; ``asymmetry`` measures the failure
    of total symmetry of the definition tensor (zero by the Codazzi
    equations for any bundle).
    """
    C = cubic_tensor(data.gamma, data.tau, data.h)
    c1, c2 = cubic_closed_form(data.gamma, data.tau, data.epsilon)
    d1, d2 = _table(C[0]), _table(C[1])
    disc = max(max(abs(c1[k] - d1[k]), abs(c2[k] - d2[k])) for k in COMPONENTS)
    asym = max(
        np.abs(C - C.transpose(0, 2, 1, 3)).max(), np.abs(C - C.transpose(0, 1, 3, 2)).max()
    )
    scale = max(1.0, np.abs(C).max())
    if disc > tol * scale:
        raise CrossCheckFailure(f"cubic form paths disagree by {disc:.3e}")
    return CubicForms(c1, c2, C, float(disc), float(asym))


def e_values(C1: dict, C2: dict, epsilon: int) -> np.ndarray:
    """E_1..E_4, which all vanish exactly on the affine normal bundle."""
    e = epsilon
    return np.array(
        [
            e * C1["111"] + C1["122"] - e * C2["112"] - C2["222"],
            e * C1["112"] + C1["222"] + e * C2["122"] + C2["111"],
            3 * C1["111"] - e * C1["122"] + 3 * C2["112"] - e * C2["222"],
            C1["112"] - 3 * e * C1["222"] + 3 * C2["122"] - e * C2["111"],
        ]
    )


def verify_bundle(data: FrameData, tol: float = 1e-8) -> tuple[bool, np.ndarray]:
    """Check E_1..E_4 = 0 relative to the size of the cubic forms."""
    cf = cubic_forms(data)
    E = e_values(cf.C1, cf.C2, data.epsilon)
    scale = max(1.0, np.abs(cf.tensor).max())
    return bool(np.abs(E).max() <= tol * scale), E


def matrix_F(C1: dict, C2: dict, epsilon: int) -> np.ndarray:
    e = epsilon
    return np.array(
        [
            [3 * C1["112"] - e * C1["222"], e * C1["111"] - 3 * C1["122"]],
            [3 * C2["112"] - e * C2["222"], e * C2["111"] - 3 * C2["122"]],
        ]
    )


def matrix_F_normal(data: FrameData) -> np.ndarray:
    """F via its simplified Γ/τ expression, valid on the affine normal bundle only."""
    e = data.epsilon
    g111, g222 = data.gamma[0, 0, 0], data.gamma[1, 1, 1]
    t1, t2 = data.tau[0, 0, 0], data.tau[0, 0, 1]  # τ_1^1(X_1), τ_1^1(X_2)
    return 4 * np.array([[g222 + t2, e * (g111 + t1)], [g111 - t1, -g222 + t2]])


def g_values(data: FrameData) -> tuple[float, float]:
    """G_1, G_2 from Γ and τ."""
    e = data.epsilon
    g = lambda i, j, k: data.gamma[i - 1, j - 1, k - 1]  # noqa: E731
    t = lambda i, j, k: data.tau[i - 1, j - 1, k - 1]  # noqa: E731
    G1 = g(2, 2, 2) - e * g(1, 1, 2) + t(1, 1, 2) - e * t(1, 2, 1)
    G2 = g(1, 1, 1) - e * g(2, 2, 1) - t(2, 2, 1) + t(1, 2, 2)
    return float(G1), float(G2)


def g_values_normal(data: FrameData) -> tuple[float, float]:
    """G_1, G_2 in the simplified form valid on the affine normal bundle."""
    e = data.epsilon
    gm = data.gamma
    return (
        float(5 * gm[1, 1, 1] - 3 * e * gm[0, 0, 1]),
        float(5 * gm[0, 0, 0] - 3 * e * gm[1, 1, 0]),
    )


# -- rank, kernel, η -------------------------------------------------------------------


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    kernel: np.ndarray | None  # unit (A, B); None when rank is 0 or 2
    ill_conditioned: bool


def rank_and_kernel(
    L: np.ndarray, F: np.ndarray, tol_rel: float = TOL_RANK, tol_abs: float = TOL_RANK_ABS
) -> RankResult:
    """Numerical rank of H and the common kernel direction of L and F.

    The decision is made on the stacked 4x2 system [L; F], whose rank is
    frame independent and whose null space is exactly the set of [A, B]ᵗ
    with L[A, B]ᵗ = F[A, B]ᵗ = 0.
    """
    stacked = np.vstack([L, F])
    if not np.all(np.isfinite(stacked)):
        raise ValueError("H has non-finite entries")
    _, s, vt = np.linalg.svd(stacked)
    smax = s[0]
    ratio = s[1] / smax if smax > 0 else 0.0
    ill = bool(0.5 * tol_abs <= smax <= 2 * tol_abs) or bool(
        smax >= tol_abs and 0.5 * tol_rel <= ratio <= 2 * tol_rel
    )
    if smax < tol_abs:
        return RankResult(0, s, None, ill)
    if ratio <= tol_rel:
        k = vt[1].copy()
        if k[0] < 0 or (k[0] == 0 and k[1] < 0):
            k = -k
        return RankResult(1, s, k, ill)
    return RankResult(2, s, None, ill)


def eta_value(kernel, epsilon: int) -> tuple[float | None, str | None]:
    """η for a kernel direction; (None, reason) when undefined."""
    if kernel is None:
        return None, "no kernel direction"
    A, B = float(kernel[0]), float(kernel[1])
    if epsilon == 1:
        return math.atan2(B, A), None
    if abs(B) >= abs(A):
        return None, "|B| >= |A|: artanh(B/A) undefined"
    return math.atanh(B / A), None


def eta_period(epsilon: int) -> float:
    """Branch period of η (kernel directions are defined up to sign)."""
    return math.pi if epsilon == 1 else 0.0


# -- report ----------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantReport:
    point: tuple[float, float]
    epsilon: int
    delta: float
    L: np.ndarray
    C1: dict
    C2: dict
    F: np.ndarray
    H: np.ndarray
    rank_H: int
    singular_values: np.ndarray
    kernel_AB: np.ndarray | None
    eta: float | None
    eta_reason: str | None
    G1: float
    G2: float
    E: np.ndarray
    ill_conditioned: bool
    discrepancies: dict
    gamma: np.ndarray
    tau: np.ndarray

    def to_dict(self) -> dict:
        kernel = None if self.kernel_AB is None else [float(x) for x in self.kernel_AB]
        return {
            "point": list(self.point),
            "epsilon": self.epsilon,
            "delta": self.delta,
            "L": self.L.tolist(),
            "C1": dict(self.C1),
            "C2": dict(self.C2),
            "F": self.F.tolist(),
            "H": self.H.tolist(),
            "rank_H": self.rank_H,
            "singular_values": self.singular_values.tolist(),
            "kernel_AB": kernel,
            "eta": self.eta,
            "eta_reason": self.eta_reason,
            "G1": self.G1,
            "G2": self.G2,
            "E": self.E.tolist(),
            "ill_conditioned": self.ill_conditioned,
            "discrepancies": dict(self.discrepancies),
            "gamma": self.gamma.tolist(),
            "tau": self.tau.tolist(),
        }


def invariant_report(
    geom: PointGeometry, tol_rel: float = TOL_RANK, tol_abs: float = TOL_RANK_ABS
) -> InvariantReport:
    """All invariants at a point, on the affine normal bundle, with cross-checks."""
    data = geom.affine
    eps = data.epsilon
    L = shape_matrix(data.lam, eps)
    cf = cubic_forms(data)
    F = matrix_F(cf.C1, cf.C2, eps)
    F_alt = matrix_F_normal(data)
    scale = max(1.0, np.abs(F).max())
    f_disc = float(np.abs(F - F_alt).max())
    if f_disc > TOL_CROSSCHECK * scale:
        raise CrossCheckFailure(f"F paths disagree by {f_disc:.3e}")
    G1, G2 = g_values(data)
    G1n, G2n = g_values_normal(data)
    g_disc = max(abs(G1 - G1n), abs(G2 - G2n))
    if g_disc > TOL_CROSSCHECK * max(1.0, abs(G1), abs(G2)):
        raise CrossCheckFailure(f"G paths disagree by {g_disc:.3e}")
    rk = rank_and_kernel(L, F, tol_rel, tol_abs)
    eta, reason = eta_value(rk.kernel, eps) if rk.rank == 1 else (None, f"rank {rk.rank}")
    E = e_values(cf.C1, cf.C2, eps)
    conds = np.array(affine_normal_conditions(data.gamma, eps))
    return InvariantReport(
        point=data.point,
        epsilon=eps,
        delta=geom.metric.delta,
        L=L,
        C1=cf.C1,
        C2=cf.C2,
        F=F,
        H=np.hstack([L, F]),
        rank_H=rk.rank,
        singular_values=rk.singular_values,
        kernel_AB=rk.kernel,
        eta=eta,
        eta_reason=reason,
        G1=G1,
        G2=G2,
        E=E,
        ill_conditioned=rk.ill_conditioned,
        discrepancies={
            "cubic": cf.discrepancy,
            "cubic_asymmetry": cf.asymmetry,
            "F": f_disc,
            "G": float(g_disc),
            "affine_normal": float(np.abs(conds).max()),
            "tau_trace": float(np.abs(data.tau[0, 0] + data.tau[1, 1]).max()),
            "volume": abs(data.volume - 1.0),
            "torsion": data.torsion_residual,
        },
        gamma=data.gamma,
        tau=data.tau,
    )


# -- identities on arbitrary bundles ------------------------------------------------


def symmetry_identities(data: FrameData) -> np.ndarray:
    """Residuals of the cubic-form symmetries, written out in Γ and τ.

    Each entry is C^i(X_a, X_b, X_c) - C^i(X_b, X_a, X_c) for one of the
    four pairs mixing a τ_2 term; valid on every normalized bundle.
    """
    e = data.epsilon
    g = lambda i, j, k: data.gamma[i - 1, j - 1, k - 1]  # noqa: E731
    t = lambda i, j, k: data.tau[i - 1, j - 1, k - 1]  # noqa: E731
    return np.array(
        [
            -2 * g(2, 1, 1) + t(1, 1, 2) - (-g(1, 2, 1) + e * g(1, 1, 2) + t(2, 1, 1)),
            2 * e * g(1, 2, 2) - e * t(1, 1, 1) - (e * g(2, 1, 2) - g(2, 2, 1) + t(2, 1, 2)),
            -2 * g(1, 2, 1) - e * t(1, 2, 1) - (-g(2, 1, 1) - g(2, 2, 2) + t(2, 2, 2)),
            -2 * g(2, 1, 2) + t(1, 2, 2) - (-g(1, 1, 1) - g(1, 2, 2) + t(2, 2, 1)),
        ]
    )


def printed_symmetry_identities(data: FrameData) -> np.ndarray:
    """The symmetry identities in the simplified form that presumes Γ^2_12 = -Γ^1_11 and Γ^1_21 = -Γ^2_22.

    These agree with :func:`symmetry_identities` on equiaffine bundles.
    """
    e = data.epsilon
    g = lambda i, j, k: data.gamma[i - 1, j - 1, k - 1]  # noqa: E731
    t = lambda i, j, k: data.tau[i - 1, j - 1, k - 1]  # noqa: E731
    return np.array(
        [
            2 * g(2, 2, 2) + t(1, 1, 2) - (-g(1, 2, 1) + e * g(1, 1, 2) + t(2, 1, 1)),
            -2 * e * g(1, 1, 1) - e * t(1, 1, 1) - (e * g(2, 1, 2) - g(2, 2, 1) + t(2, 1, 2)),
            -2 * g(1, 2, 1) - e * t(1, 2, 1) - t(2, 2, 2),
            -2 * g(2, 1, 2) + t(1, 2, 2) - t(2, 2, 1),
        ]
    )


def volume_identities(data: FrameData) -> np.ndarray:
    """Γ/τ relations forced by the unit volume [X_1, X_2, ξ_1, ξ_2] = 1."""
    g, t = data.gamma, data.tau
    return np.array(
        [
            g[0, 0, 0] + g[0, 1, 1] + t[0, 0, 0] + t[1, 1, 0],
            g[1, 0, 0] + g[1, 1, 1] + t[0, 0, 1] + t[1, 1, 1],
        ]
    )


# -- frame rotation ------------------------------------------------------------------


@dataclass(frozen=True)
class RotationCheck:
    theta: float
    epsilon: int
    predicted_L: np.ndarray
    recomputed_L: np.ndarray
    predicted_F: np.ndarray
    recomputed_F: np.ndarray
    predicted_kernel: np.ndarray | None
    rank: int
    rotated_rank: int
    eta: float | None
    rotated_eta: float | None
    predicted_G: np.ndarray
    recomputed_G: np.ndarray
    predicted_xi: np.ndarray
    recomputed_xi: np.ndarray
    rotated: PointGeometry = field(repr=False)

    def eta_shift_residual(self) -> float | None:
        """(η̄ - η - 3θ) reduced modulo the branch period, or None if undefined."""
        if self.eta is None or self.rotated_eta is None:
            return None
        r = self.rotated_eta - self.eta - 3 * self.theta
        period = eta_period(self.epsilon)
        if period:
            r = (r + period / 2) % period - period / 2
        return abs(r)


def frame_rotate(
    geom: PointGeometry, theta: float, tol_rel: float = TOL_RANK, tol_abs: float = TOL_RANK_ABS
) -> RotationCheck:
    """Predicted versus recomputed invariants after a constant frame rotation by θ."""
    eps = geom.epsilon
    base = invariant_report(geom, tol_rel, tol_abs)
    rotated = geometry_from_jets(geom.jets, geom.choices, geom.choices.rotation + theta)
    new = invariant_report(rotated, tol_rel, tol_abs)
    R = lambda t: rotation_matrix(eps, t)  # noqa: E731
    kernel = None if base.kernel_AB is None else R(-3 * eps * theta) @ base.kernel_AB
    return RotationCheck(
        theta=theta,
        epsilon=eps,
        predicted_L=R(theta) @ base.L @ R(3 * eps * theta),
        recomputed_L=new.L,
        predicted_F=R(2 * eps * theta) @ base.F @ R(3 * eps * theta),
        recomputed_F=new.F,
        predicted_kernel=kernel,
        rank=base.rank_H,
        rotated_rank=new.rank_H,
        eta=base.eta,
        rotated_eta=new.eta,
        predicted_G=R(-eps * theta) @ np.array([base.G1, base.G2]),
        recomputed_G=np.array([new.G1, new.G2]),
        predicted_xi=R(2 * theta) @ geom.affine.xi,
        recomputed_xi=rotated.affine.xi,
        rotated=rotated,
    )

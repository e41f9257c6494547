"""Affine metric, g-orthonormal frames and normalized transversal bases.

Everything here is a function of the immersion jet at one point.  Frame
objects are carried as jets so that their derivatives (needed for the
connection, the shape operators and the affine normal correction) come out
exactly.  With an immersion jet of order ``k``:

* tangent frame coefficients are order ``k - 2``,
* the Euclidean-normal transversal basis and its Christoffel symbols are
  order ``k - 3``,
* shape operators and ``tau`` on the corrected bundle are order ``k - 4``.

Hence :data:`MIN_ORDER` is 4.

Index conventions used throughout the package (0-based)::

    gamma[i, j, k] = Γ^k_ij       with  ∇_{X_i} X_j = Γ^1_ij X_1 + Γ^2_ij X_2
    lam[i, j, k]   = λ^k_ij       with  S_i X_j     = λ^1_ij X_1 + λ^2_ij X_2
    tau[i, j, k]   = τ_i^j(X_k)   with  D_X ξ_i = -S_i X + τ_i^1(X) ξ_1 + τ_i^2(X) ξ_2
    h[m, i, j]     = h^m(X_i, X_j)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import jets
from .dsl import SurfaceChart, immersion_jet
from .jets import Jet

MIN_ORDER = 4
TOL_DEGENERATE = 1e-10
TOL_IMMERSION = 1e-10
TOL_NULL_SEED = 1e-10
TOL_NORMALIZATION = 1e-8
MAX_FRAME_COND = 1e12

# Plücker index pairs for 4-vectors, in the order 12 13 14 23 24 34.
_PAIRS_I = np.array([0, 0, 0, 1, 1, 2])
_PAIRS_J = np.array([1, 2, 3, 2, 3, 3])
# det[a, b, c, d] = sum_k (a∧b)_k * (c∧d)_{_HODGE[k]} * _HODGE_SIGN[k]
_HODGE = np.array([5, 4, 3, 2, 1, 0])
_HODGE_SIGN = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0])


class FrameError(ArithmeticError):
    pass


class DegenerateSurface(FrameError):
    pass


class ImmersionFailure(FrameError):
    pass


class NullSeedFailure(FrameError):
    pass


class NormalizationInconsistent(FrameError):
    pass


class FrameSingular(FrameError):
    pass


class CorrectionSingular(FrameError):
    pass


def wedge(a, b):
    """Plücker coordinates of a∧b for 4-vectors (jets or arrays, last axis)."""
    return a[..., _PAIRS_I] * b[..., _PAIRS_J] - a[..., _PAIRS_J] * b[..., _PAIRS_I]


def det_from_wedges(p, q):
    """det[a, b, c, d] given p = a∧b and q = c∧d."""
    return (p * (q[..., _HODGE] * _HODGE_SIGN)).sum(axis=-1)


def rotation_matrix(epsilon: int, theta: float) -> np.ndarray:
    """R_ε(θ): circular for ε = 1, hyperbolic for ε = -1.

    Its rows also express a rotated g-orthonormal frame (Y_1, Y_2) in
    terms of (X_1, X_2).
    """
    if epsilon == 1:
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, s], [-s, c]])
    c, s = np.cosh(theta), np.sinh(theta)
    return np.array([[c, s], [s, c]])


def normalized_h(epsilon: int) -> np.ndarray:
    """The prescribed h^1, h^2 matrices of a normalized transversal basis."""
    return np.array([[[1.0, 0.0], [0.0, -epsilon]], [[0.0, 1.0], [1.0, 0.0]]])


# -- data types --------------------------------------------------------------------


@dataclass(frozen=True)
class PointJets:
    """Derivatives of the immersion at a point, as jets."""

    point: tuple[float, float]
    x: Jet  # shape (4,)
    xa: Jet  # (2, 4): x_u, x_v
    xab: Jet  # (2, 2, 4): second derivatives

    @classmethod
    def from_jet(cls, x: Jet, point=(0.0, 0.0)) -> "PointJets":
        if x.order < 2:
            raise ValueError("need an immersion jet of order >= 2")
        xa = jets.stack([x.d(0), x.d(1)])
        xab = jets.stack([xa.d(0), xa.d(1)], axis=1)
        return cls(tuple(map(float, point)), x, xa, xab)


@dataclass(frozen=True)
class MetricData:
    G_coord: np.ndarray
    delta: float
    epsilon: int
    g_coord: np.ndarray
    orientation: int = 1
    G_jet: Jet | None = field(default=None, repr=False, compare=False)
    g_jet: Jet | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class FrameChoices:
    """Discrete choices fixed at a stencil centre and reused at its neighbours.

    ``orientation`` is -1 when the metric is negative definite with respect
    to the standard volume form; the frame is then normalized against the
    reversed volume form.  ``seed`` holds constant (u, v)-coefficients of the
    vector that X_1 is built from.
    """

    epsilon: int
    orientation: int
    seed: tuple[float, float]
    rotation: float = 0.0


@dataclass(frozen=True)
class TangentFrame:
    coords: Jet  # (2, 2): X_i = coords[i, a] x_a
    ambient: Jet  # (2, 4)
    choices: FrameChoices


@dataclass(frozen=True)
class FrameData:
    """Connection data of a tangent frame and a normalized transversal basis."""

    point: tuple[float, float]
    epsilon: int
    orientation: int
    X: np.ndarray  # (2, 4) ambient
    X_coords: np.ndarray  # (2, 2)
    xi: np.ndarray  # (2, 4)
    gamma: np.ndarray  # (2, 2, 2)
    tau: np.ndarray  # (2, 2, 2)
    lam: np.ndarray  # (2, 2, 2)
    h: np.ndarray  # (2, 2, 2)
    volume: float
    torsion_residual: float
    decomposition_residual: float
    frame: TangentFrame = field(repr=False, compare=False)
    xi_jet: Jet = field(repr=False, compare=False)
    gamma_jet: Jet = field(repr=False, compare=False)
    shift: np.ndarray | None = None  # tangent shift applied to reach this bundle

    @property
    def frame_matrix(self) -> np.ndarray:
        """Columns X_1, X_2, ξ_1, ξ_2."""
        return np.column_stack([self.X[0], self.X[1], self.xi[0], self.xi[1]])


# -- operations ---------------------------------------------------------------------


def metric_form(p: PointJets, tol_degenerate: float = TOL_DEGENERATE) -> MetricData:
    """Coordinate-frame G_u, Δ(u), ε and the affine metric g = Δ^(-1/3) G_u."""
    xa, xab = p.xa, p.xab
    xu, xv = xa.value
    cross = np.linalg.norm(wedge(xu, xv))
    if cross < TOL_IMMERSION * max(np.linalg.norm(xu) * np.linalg.norm(xv), 1e-300):
        raise ImmersionFailure(f"x_u and x_v are dependent at {p.point}")
    tangent = wedge(xa[0], xa[1])
    q11_12 = wedge(xab[0, 0], xab[0, 1])
    q12_22 = wedge(xab[0, 1], xab[1, 1])
    q11_22 = wedge(xab[0, 0], xab[1, 1])
    g11 = det_from_wedges(tangent, q11_12)
    g22 = det_from_wedges(tangent, q12_22)
    # the symmetrizing partner det[x_u, x_v, x_uv, x_uv] vanishes
    g12 = det_from_wedges(tangent, q11_22) * 0.5
    G = jets.stack([jets.stack([g11, g12]), jets.stack([g12, g22])])
    delta = jets.det2(G)
    d0 = float(delta.value)
    scale = np.linalg.norm(xab.value, axis=-1).max()
    if not abs(d0) > tol_degenerate * scale**4:
        raise DegenerateSurface(f"affine metric degenerates at {p.point} (Δ = {d0:.3e})")
    sign = 1.0 if d0 > 0 else -1.0
    inv_cbrt = jets.pow_const(delta * sign, -1.0 / 3.0) * sign
    g = G * inv_cbrt
    G0 = G.value
    epsilon = 1 if d0 > 0 else -1
    orientation = 1 if epsilon == -1 or G0[0, 0] > 0 else -1
    return MetricData(
        G_coord=G0,
        delta=d0,
        epsilon=epsilon,
        g_coord=g.value,
        orientation=orientation,
        G_jet=G,
        g_jet=g,
    )


def default_choices(metric: MetricData, rotation: float = 0.0) -> FrameChoices:
    if metric.epsilon == 1:
        seed = (1.0, 0.0)
    else:
        w, vecs = np.linalg.eigh(metric.g_coord)
        s = vecs[:, 0]  # eigenvalues ascending: column 0 is the timelike direction
        k = int(np.argmax(np.abs(s) > 1e-12))
        s = s if s[k] > 0 else -s
        seed = (float(s[0]), float(s[1]))
    return FrameChoices(metric.epsilon, metric.orientation, seed, rotation)


def orthonormal_frame(
    metric: MetricData, p: PointJets, choices: FrameChoices | None = None
) -> TangentFrame:
    """g-orthonormal X_1, X_2 with g(X_1,X_1)=ε, g(X_2,X_2)=1 by Gram–Schmidt from a seed.

    For ε = 1 the seed is x_u, so X_1 ∝ x_u.  For ε = -1 the seed is the
    timelike eigenvector of g at the centre point.  The frame is a smooth
    function of the point as long as ``choices`` is held fixed.
    """
    choices = choices or default_choices(metric)
    eps = choices.epsilon
    if eps != metric.epsilon:
        raise NullSeedFailure(f"metric signature changed at {p.point}")
    g = metric.g_jet * metric.orientation
    seed = np.array(choices.seed)
    other = np.array([-seed[1], seed[0]])
    gss = (g * np.outer(seed, seed)).sum()
    gscale = np.abs(g.value).max()
    if eps * gss.value < TOL_NULL_SEED * gscale * seed @ seed:
        raise NullSeedFailure(f"seed {choices.seed} has g-norm {gss.value:.3e} at {p.point}")
    x1 = jets.pow_const(gss * eps, -0.5) * seed  # (2,)
    g_other_x1 = (g * (other[:, None] * x1[None, :])).sum()
    t = x1 * (g_other_x1 * (-eps)) + other
    gtt = ((g * t[:, None]) * t[None, :]).sum()
    if gtt.value <= 0:
        raise NullSeedFailure(f"complement of the seed is not spacelike at {p.point}")
    x2 = t * jets.pow_const(gtt, -0.5)
    coords = jets.stack([x1, x2])
    if choices.rotation:
        coords = rotation_matrix(eps, choices.rotation) @ coords
    ambient = coords @ p.xa
    return TangentFrame(coords, ambient, choices)


def _directional(frame: TangentFrame, field_jet: Jet) -> Jet:
    """D_{X_i} W_j for a (2, 4) field jet W; returns (2, 2, 4) indexed [i, j]."""
    dw = jets.stack([field_jet.d(0), field_jet.d(1)])  # [b, j, :]
    c = frame.coords
    return (c[:, :, None, None] * dw[None]).sum(axis=1)


def normalized_transversal(frame: TangentFrame, p: PointJets) -> tuple[Jet, np.ndarray]:
    """ξ_1, ξ_2 on the Euclidean normal bundle, normalized as h^1, h^2 prescribe.

    Returns the (2, 4) ξ jet and the measured h matrices on that bundle.
    """
    eps = frame.choices.epsilon
    DX = _directional(frame, frame.ambient)
    T = frame.ambient.truncate(DX.order)
    gram = T @ T.T
    proj_tan = T.T @ jets.inv(gram) @ T
    transversal = DX - (proj_tan[None, None] @ DX[..., None])[..., 0]
    xi = jets.stack([transversal[0, 0], transversal[0, 1]])
    tv = transversal.value
    size = max(np.linalg.norm(tv[0, 0]), 1e-300)
    mismatch = max(
        np.linalg.norm(tv[1, 1] + eps * tv[0, 0]), np.linalg.norm(tv[1, 0] - tv[0, 1])
    )
    if mismatch > TOL_NORMALIZATION * size:
        raise NormalizationInconsistent(
            f"h(X2,X2) + εξ1 = {mismatch:.3e} at the frame base point"
        )
    h = np.zeros((2, 2, 2))
    basis = np.column_stack([xi.value[0], xi.value[1]])
    for i in range(2):
        for j in range(2):
            h[:, i, j] = np.linalg.lstsq(basis, tv[i, j], rcond=None)[0]
    return xi, h


def connection_data(frame: TangentFrame, xi: Jet, p: PointJets, shift=None) -> FrameData:
    """Expand D_{X_i}X_j and D_{X_i}ξ_j in the basis {X_1, X_2, ξ_1, ξ_2}."""
    DX = _directional(frame, frame.ambient)
    Dxi = _directional(frame, xi)
    M = jets.stack([frame.ambient[0], frame.ambient[1], xi[0], xi[1]], axis=-1)
    M = M.truncate(min(M.order, DX.order))
    cond = np.linalg.cond(M.value)
    if not np.isfinite(cond) or cond > MAX_FRAME_COND:
        raise FrameSingular(f"frame matrix condition number {cond:.3e}")
    Minv = jets.inv(M)
    cX = (Minv[None, None] @ DX[..., None])[..., 0]  # [i, j, :]
    M0inv = Minv.value
    cxi = np.einsum("ab,ijb->ija", M0inv, Dxi.value)

    gamma_jet = cX[:, :, :2]
    gamma = gamma_jet.value
    h = np.moveaxis(cX.value[:, :, 2:], -1, 0)
    lam = -np.transpose(cxi[:, :, :2], (1, 0, 2))
    tau = np.transpose(cxi[:, :, 2:], (1, 2, 0))

    Mv = M.value
    resid = DX.value - np.einsum("ab,ijb->ija", Mv, cX.value)
    decomposition_residual = float(np.abs(resid).max())

    # ∇_{X1}X2 - ∇_{X2}X1 must equal the Lie bracket [X1, X2]
    c = frame.coords
    dc = np.stack([c.d(0).value, c.d(1).value])  # [b, i, a]
    c0 = c.value
    bracket = np.einsum("b,ba->a", c0[0], dc[:, 1]) - np.einsum("b,ba->a", c0[1], dc[:, 0])
    bracket_in_frame = np.linalg.solve(c0.T, bracket)
    torsion = gamma[0, 1] - gamma[1, 0] - bracket_in_frame

    return FrameData(
        point=p.point,
        epsilon=frame.choices.epsilon,
        orientation=frame.choices.orientation,
        X=frame.ambient.value,
        X_coords=c0,
        xi=xi.value,
        gamma=gamma,
        tau=tau,
        lam=lam,
        h=h,
        volume=float(np.linalg.det(Mv)) * frame.choices.orientation,
        torsion_residual=float(np.abs(torsion).max()),
        decomposition_residual=decomposition_residual,
        frame=frame,
        xi_jet=xi,
        gamma_jet=gamma_jet,
        shift=shift,
    )


def _gamma_shift(epsilon: int, z: np.ndarray) -> np.ndarray:
    """Change of Γ^k_ij when ξ_m -> ξ_m + Z_m (z[m, k] = Z_m^k): returns ΔΓ[i, j, k]."""
    return np.einsum("mij,mk->ijk", normalized_h(epsilon), z)


def affine_normal_conditions(gamma, epsilon: int):
    """The four Γ relations that single out the affine normal plane bundle.

    Works on arrays or jets indexed ``gamma[i, j, k] = Γ^k_ij``; each entry is
    zero exactly on the affine normal bundle.
    """
    g = lambda i, j, k: gamma[i - 1, j - 1, k - 1]  # noqa: E731
    return [
        g(1, 2, 2) + g(1, 1, 1),
        g(2, 1, 1) + g(2, 2, 2),
        g(1, 1, 1) * 2 - g(2, 1, 2) - g(2, 2, 1) * epsilon,
        g(2, 2, 2) * 2 - g(1, 2, 1) - g(1, 1, 2) * epsilon,
    ]


def correction_matrix(epsilon: int) -> np.ndarray:
    K = np.zeros((4, 4))
    for col in range(4):
        z = np.zeros(4)
        z[col] = 1.0
        dgamma = _gamma_shift(epsilon, z.reshape(2, 2))
        K[:, col] = affine_normal_conditions(dgamma, epsilon)
    return K


def shift_bundle(data: FrameData, z: Jet, p: PointJets) -> FrameData:
    """Move to the transversal bundle spanned by ξ_m + Z_m^k X_k (z a (2, 2) jet)."""
    X = data.frame.ambient.truncate(min(z.order, data.frame.ambient.order))
    new_xi = data.xi_jet + z @ X
    return connection_data(data.frame, new_xi, p, shift=z.value)


def affine_normal_correction(data: FrameData, p: PointJets) -> FrameData:
    """Shift ξ_1, ξ_2 tangentially onto the affine normal plane bundle.

    A shift ξ_m -> ξ_m + Z_m leaves h (hence the normalization) alone and
    changes Γ_ij by h^1_ij Z_1 + h^2_ij Z_2; imposing the four affine-normal
    relations on the shifted Γ is a 4x4 linear system in Z.
    """
    K = correction_matrix(data.epsilon)
    cond = np.linalg.cond(K)
    if cond > MAX_FRAME_COND:
        raise CorrectionSingular(f"correction system condition number {cond:.3e}")
    rhs = jets.stack(affine_normal_conditions(data.gamma_jet, data.epsilon))
    z = (Jet.constant(np.linalg.inv(K), rhs.order) @ rhs[:, None])[:, 0].reshape(2, 2)
    return shift_bundle(data, z, p)


# -- whole-point pipeline -------------------------------------------------------------


@dataclass(frozen=True)
class PointGeometry:
    """Everything the invariant layer needs at one parameter point."""

    jets: PointJets
    metric: MetricData
    choices: FrameChoices
    initial: FrameData  # Euclidean-normal bundle
    affine: FrameData  # affine normal plane bundle
    h_initial: np.ndarray

    @property
    def epsilon(self) -> int:
        return self.metric.epsilon


def point_geometry(
    chart: SurfaceChart,
    point,
    order: int = MIN_ORDER,
    choices: FrameChoices | None = None,
    rotation: float | None = None,
    strict: bool = True,
    tol_degenerate: float = TOL_DEGENERATE,
) -> PointGeometry:
    """Run metric, frame, transversal, connection and correction at ``point``.

    ``choices`` pins the frame construction (pass the stencil centre's choices
    at neighbouring points); ``rotation`` overrides its frame angle.
    """
    if order < MIN_ORDER:
        raise ValueError(f"jet order must be at least {MIN_ORDER}, got {order}")
    p = PointJets.from_jet(immersion_jet(chart, point, order, strict=strict), point)
    return geometry_from_jets(p, choices, rotation, tol_degenerate)


def geometry_from_jets(
    p: PointJets, choices=None, rotation=None, tol_degenerate: float = TOL_DEGENERATE
) -> PointGeometry:
    metric = metric_form(p, tol_degenerate)
    choices = choices or default_choices(metric)
    if rotation is not None:
        choices = replace(choices, rotation=float(rotation))
    frame = orthonormal_frame(metric, p, choices)
    xi, h = normalized_transversal(frame, p)
    initial = connection_data(frame, xi, p)
    affine = affine_normal_correction(initial, p)
    return PointGeometry(p, metric, choices, initial, affine, h)

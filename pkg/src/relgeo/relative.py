"""Relative normalizations and the invariant stack built on them.

Given a support function q > 0 the relative normal is

    y = q xi - h^(jk) q_k x_j,

the unique vector with <X, y> = 1 for X = xi / q whose partials are tangent:
<xi, y_i> = q_i - h^(jk) q_k h_ji = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .chart import (
    EQUIAFFINE,
    EUCLIDEAN,
    Jet,
    Normalization,
    SurfaceChart,
    expression_jet,
    immersion_jet,
)
from .euclid import EuclideanData, beltrami_first_II, beltrami_second_II, euclidean_data
from .tensors import MetricCurvature, metric_curvature


class NonpositiveSupport(ValueError):
    """The support function is not positive at some point."""


@dataclass(frozen=True)
class SupportFunction:
    """q with the gradient and Hessian of ln q."""

    q: np.ndarray
    dlq: np.ndarray
    d2lq: np.ndarray

    @property
    def dq(self) -> np.ndarray:
        return self.q[..., None] * self.dlq

    @property
    def d2q(self) -> np.ndarray:
        return self.q[..., None, None] * (self.d2lq + np.einsum("...i,...j->...ij", self.dlq, self.dlq))

    def __mul__(self, other: "SupportFunction") -> "SupportFunction":
        return SupportFunction(self.q * other.q, self.dlq + other.dlq, self.d2lq + other.d2lq)


def affine_support(ed: EuclideanData) -> SupportFunction:
    """q_aff = |K|^(1/(n+2))."""
    if ed.d2lnK is None:
        raise ValueError("equiaffine support function needs an order-4 jet")
    p = 1.0 / (ed.n + 2)
    return SupportFunction(np.abs(ed.K) ** p, p * ed.dlnK, p * ed.d2lnK)


def support_function(ed: EuclideanData, norm: Normalization, jet: Jet) -> SupportFunction:
    batch = ed.K.shape
    n = ed.n
    if norm.kind == "euclidean":
        return SupportFunction(np.ones(batch), np.zeros(batch + (n,)), np.zeros(batch + (n, n)))
    if norm.kind == "equiaffine":
        return affine_support(ed)
    if norm.kind == "scaled-equiaffine":
        a = affine_support(ed)
        return SupportFunction(norm.c * a.q, a.dlq, a.d2lq)
    f, df, d2f = expression_jet(norm.q, jet.param_names, jet.point)
    if np.any(f <= 0):
        raise NonpositiveSupport(f"support function {norm.describe()} is not positive")
    custom = SupportFunction(f, df / f[..., None],
                             d2f / f[..., None, None] - np.einsum("...i,...j->...ij", df, df) / (f * f)[..., None, None])
    return affine_support(ed) * custom if norm.affine_factor else custom


@dataclass(frozen=True)
class RelativeData:
    support: SupportFunction
    affine: SupportFunction
    phi: np.ndarray
    dlnphi: np.ndarray
    d2lnphi: np.ndarray
    X: np.ndarray          # covector xi / q
    G: np.ndarray
    dG: np.ndarray
    d2G: np.ndarray
    metric: MetricCurvature  # inverse, Christoffels and curvature of G
    ybar: np.ndarray
    tangent_coeff: np.ndarray  # t^j = -h^(jk) q_k

    @property
    def q(self) -> np.ndarray:
        return self.support.q

    @property
    def q_aff(self) -> np.ndarray:
        return self.affine.q

    @property
    def G_inv(self) -> np.ndarray:
        return self.metric.inverse


def relative_frame(ed: EuclideanData, norm: Normalization, jet: Jet) -> RelativeData:
    """Support function, relative metric, covector and relative normal."""
    sup = support_function(ed, norm, jet)
    aff = affine_support(ed)
    q = sup.q
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise NonpositiveSupport("support function must be positive")
    n = ed.n
    expo = (n + 2) / (2 * n)
    phi = (q / aff.q) ** expo
    dlnphi = expo * (sup.dlq - aff.dlq)
    d2lnphi = expo * (sup.d2lq - aff.d2lq)

    X = ed.xi / q[..., None]
    l1, l2 = sup.dlq, sup.d2lq
    inv_q = (1.0 / q)[..., None, None]
    G = ed.h * inv_q
    dG = (ed.dh - np.einsum("...ij,...k->...kij", ed.h, l1)) * inv_q[..., None]
    d2G = (ed.d2h
           - np.einsum("...lij,...k->...klij", ed.dh, l1)
           - np.einsum("...kij,...l->...klij", ed.dh, l1)
           - np.einsum("...ij,...kl->...klij", ed.h, l2)
           + np.einsum("...ij,...k,...l->...klij", ed.h, l1, l1)) * inv_q[..., None, None]
    metric = metric_curvature(G, dG, d2G)

    t = -np.einsum("...jk,...k->...j", ed.h_inv, sup.dq)
    ybar = q[..., None] * ed.xi + np.einsum("...j,...jN->...N", t, ed.x1)
    return RelativeData(sup, aff, phi, dlnphi, d2lnphi, X, G, dG, d2G, metric, ybar, t)


def darboux_tensor(rd: RelativeData, ed: EuclideanData) -> np.ndarray:
    """A_jkl = <X, nabla_l nabla_k x_j> with nabla the Levi-Civita connection of G.

    Expanded with <X, x_m> = 0 and <X, x_ij> = G_ij.
    """
    gam, G = rd.metric.gamma, rd.G
    return (np.einsum("...N,...jklN->...jkl", rd.X, ed.x3)
            - np.einsum("...mjk,...ml->...jkl", gam, G)
            - np.einsum("...mjl,...mk->...jkl", gam, G)
            - np.einsum("...mkl,...mj->...jkl", gam, G))


@dataclass(frozen=True)
class Tchebychev:
    T: np.ndarray          # trace of A
    T_grad: np.ndarray     # G^(ij) (ln phi)_j
    norm: np.ndarray       # G_ij T^i T^j
    norm_closed: np.ndarray   # q grad^II(ln phi)

    @property
    def discrepancy(self) -> np.ndarray:
        return np.max(np.abs(self.T - self.T_grad), axis=-1)


def tchebychev(rd: RelativeData, A: np.ndarray, ed: EuclideanData) -> Tchebychev:
    n = A.shape[-1]
    Gi = rd.G_inv
    T = np.einsum("...ia,...iab,...bm->...m", Gi, A, Gi) / n
    T_grad = np.einsum("...mj,...j->...m", Gi, rd.dlnphi)
    norm = np.einsum("...ij,...i,...j->...", rd.G, T, T)
    norm9 = rd.q * beltrami_first_II(ed, rd.dlnphi)
    return Tchebychev(T, T_grad, norm, norm9)


def pick_invariant(rd: RelativeData, A: np.ndarray, ed: EuclideanData) -> tuple[np.ndarray, np.ndarray]:
    """J by full contraction, and the closed form in terms of q, K, S_II, H_I."""
    n = A.shape[-1]
    Gi = rd.G_inv
    J = np.einsum("...jkl,...abc,...ja,...kb,...lc->...", A, A, Gi, Gi, Gi) / (n * (n - 1))

    q = rd.q
    dlq = rd.support.dlq
    dlnK = ed.dlnK
    dK = ed.K[..., None] * dlnK
    P = n * (n - 1) * (ed.S_II - ed.H_I) + (2 * ed.K) ** -2 * beltrami_first_II(ed, dK)
    J4 = (3 * (n + 2) / (4 * n * (n - 1)) * q
          * beltrami_first_II(ed, dlq, dlq - 2.0 / (n + 2) * dlnK)
          + q * P / (n * (n - 1)))
    return J, J4


def relative_shape(rd: RelativeData, ed: EuclideanData) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """B_i^j from y_i = -B_i^j x_j, H = tr(B)/n, and H from the closed form.

    Also returns the normal component <xi, y_i>, which must vanish.
    """
    n = ed.n
    sup = rd.support
    q, dq, d2q = sup.q, sup.dq, sup.d2q
    # d_i h^(jk) = -h^(ja) d_i h_ab h^(bk)
    dh_inv = -np.einsum("...ja,...iab,...bk->...ijk", ed.h_inv, ed.dh, ed.h_inv)
    dt = -(np.einsum("...ijk,...k->...ij", dh_inv, dq)
           + np.einsum("...jk,...ki->...ij", ed.h_inv, d2q))
    t = rd.tangent_coeff
    y_i = (np.einsum("...i,...N->...iN", dq, ed.xi)
           + q[..., None, None] * ed.dxi
           + np.einsum("...ij,...jN->...iN", dt, ed.x1)
           + np.einsum("...j,...jiN->...iN", t, ed.x2))
    M = np.einsum("...iN,...mN->...im", y_i, ed.x1)
    B = -np.einsum("...im,...mj->...ij", M, ed.g_inv)
    H = np.trace(B, axis1=-2, axis2=-1) / n
    normal_defect = np.einsum("...iN,...N->...i", y_i, ed.xi)

    dlq = sup.dlq
    H6 = q * ed.H_I + q / n * (beltrami_second_II(ed, dlq, sup.d2lq)
                               + beltrami_first_II(ed, dlq, dlq - 0.5 * ed.dlnK))
    return B, H, H6, normal_defect


def relative_scalar_curvature(rd: RelativeData) -> np.ndarray:
    """Normalized scalar curvature R(G) / (n (n - 1))."""
    return rd.metric.scalar


@dataclass(frozen=True)
class RelativeStack:
    """Everything derived from one normalization at a batch of points."""

    frame: RelativeData
    A: np.ndarray
    tcheb: Tchebychev
    J: np.ndarray
    J_closed: np.ndarray
    B: np.ndarray
    H: np.ndarray
    H_closed: np.ndarray
    S: np.ndarray
    ybar_normal_defect: np.ndarray


def relative_stack(ed: EuclideanData, norm: Normalization, jet: Jet) -> RelativeStack:
    rd = relative_frame(ed, norm, jet)
    A = darboux_tensor(rd, ed)
    tch = tchebychev(rd, A, ed)
    J, J4 = pick_invariant(rd, A, ed)
    B, H, H6, defect = relative_shape(rd, ed)
    return RelativeStack(rd, A, tch, J, J4, B, H, H6, relative_scalar_curvature(rd), defect)


@dataclass(frozen=True)
class InvariantBundle:
    """Every invariant at a batch of points, for one normalization.

    The ``*_aff`` fields come from the equiaffine normalization and
    ``J_euk`` from the Euclidean one; ``S_aff`` is J_aff + H_aff, while
    ``S_aff_metric`` is the curvature of the equiaffine metric itself.
    """

    points: np.ndarray
    normalization: Normalization
    euclid: EuclideanData
    stack: RelativeStack
    affine: RelativeStack
    euclidean: RelativeStack

    # shortcuts ----------------------------------------------------------
    @property
    def n(self):
        return self.euclid.n

    @property
    def g(self):
        return self.euclid.g

    @property
    def h(self):
        return self.euclid.h

    @property
    def xi(self):
        return self.euclid.xi

    @property
    def K(self):
        return self.euclid.K

    @property
    def H_I(self):
        return self.euclid.H_I

    @property
    def S_II(self):
        return self.euclid.S_II

    @property
    def q(self):
        return self.stack.frame.q

    @property
    def q_aff(self):
        return self.stack.frame.q_aff

    @property
    def phi(self):
        return self.stack.frame.phi

    @property
    def G(self):
        return self.stack.frame.G

    @property
    def X(self):
        return self.stack.frame.X

    @property
    def ybar(self):
        return self.stack.frame.ybar

    @property
    def A(self):
        return self.stack.A

    @property
    def T(self):
        return self.stack.tcheb.T

    @property
    def norm_T(self):
        return self.stack.tcheb.norm

    @property
    def J(self):
        return self.stack.J

    @property
    def B(self):
        return self.stack.B

    @property
    def H(self):
        return self.stack.H

    @property
    def S(self):
        return self.stack.S

    @property
    def J_aff(self):
        return self.affine.J

    @property
    def H_aff(self):
        return self.affine.H

    @property
    def S_aff(self):
        return self.affine.J + self.affine.H

    @property
    def S_aff_metric(self):
        return self.affine.S

    @property
    def J_euk(self):
        return self.euclidean.J

    # Beltrami terms used by the identities --------------------------------
    def grad_II(self, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
        return beltrami_first_II(self.euclid, a, b)

    def lap_II(self, da: np.ndarray, d2a: np.ndarray) -> np.ndarray:
        return beltrami_second_II(self.euclid, da, d2a)

    @property
    def dlnphi(self):
        return self.stack.frame.dlnphi

    @property
    def d2lnphi(self):
        return self.stack.frame.d2lnphi

    @property
    def dlnqaff(self):
        return self.stack.frame.affine.dlq

    @property
    def d2lnqaff(self):
        return self.stack.frame.affine.d2lq

    SCALARS = ("K", "H_I", "S_II", "q", "q_aff", "phi", "J", "H", "S", "norm_T",
               "J_aff", "H_aff", "S_aff", "J_euk")

    def scalars_at(self, k: int) -> dict[str, float]:
        return {name: float(np.asarray(getattr(self, name))[k]) for name in self.SCALARS}


def compute_bundle(chart: SurfaceChart, norm: Normalization, points: np.ndarray) -> InvariantBundle:
    """Run the full stack (given, equiaffine and Euclidean normalizations)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    jet = immersion_jet(chart, points, 4)
    ed = euclidean_data(jet, orientation=chart.orientation)
    return bundle_from_jet(jet, ed, norm)


def bundle_from_jet(jet: Jet, ed: EuclideanData, norm: Normalization) -> InvariantBundle:
    stack = relative_stack(ed, norm, jet)
    affine = stack if norm.kind == "equiaffine" else relative_stack(ed, EQUIAFFINE, jet)
    eucl = stack if norm.kind == "euclidean" else relative_stack(ed, EUCLIDEAN, jet)
    return InvariantBundle(jet.point, norm, ed, stack, affine, eucl)

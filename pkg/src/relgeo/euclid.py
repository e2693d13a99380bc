"""Euclidean data of a hypersurface: fundamental forms, normal, curvatures.

The normal is oriented so that the second fundamental form is positive
definite wherever it is definite; elsewhere it follows the parameter order
(times the chart's orientation flag).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import Jet
from .tensors import MetricCurvature, metric_curvature

DET_TOL = 1e-12
CURVATURE_TOL = 1e-12


class DegenerateGeometry(ValueError):
    """Immersion or curvature condition violated."""


@dataclass(frozen=True)
class EuclideanData:
    x1: np.ndarray      # (..., n, n+1)
    x2: np.ndarray      # (..., n, n, n+1)
    x3: np.ndarray
    x4: np.ndarray | None
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray     # (..., k, n+1) = d_k xi
    h: np.ndarray
    h_inv: np.ndarray
    dh: np.ndarray      # (..., k, i, j)
    d2h: np.ndarray | None
    det_h: np.ndarray
    K: np.ndarray
    dlnK: np.ndarray    # d_k ln|K|
    d2lnK: np.ndarray | None
    H_I: np.ndarray
    II: MetricCurvature | None  # Christoffels, partials and curvature of h
    definite: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    @property
    def S_II(self) -> np.ndarray:
        return self.II.scalar

    @property
    def gamma_II(self) -> np.ndarray:
        return self.II.gamma

    @property
    def area_density_II(self) -> np.ndarray:
        return np.sqrt(np.abs(self.det_h))


def unit_normal(x1: np.ndarray, orientation: int = 1) -> np.ndarray:
    """Generalized cross product of the tangent vectors, normalized.

    ``det[x_1, ..., x_n, N] > 0`` for orientation +1.
    """
    n = x1.shape[-2]
    batch = x1.shape[:-2]
    N = np.empty(batch + (n + 1,))
    for k in range(n + 1):
        e = np.zeros(batch + (1, n + 1))
        e[..., 0, k] = 1.0
        N[..., k] = np.linalg.det(np.concatenate([x1, e], axis=-2))
    return orientation * N / np.linalg.norm(N, axis=-1, keepdims=True)


def _dot(a, b):
    return np.einsum("...N,...N->...", a, b)


def euclidean_data(jet: Jet, orientation: int = 1, check: bool = True) -> EuclideanData:
    """All Euclidean quantities needed downstream, from an immersion jet.

    Second partials of h, of ln|K| and the curvature of II need an order-4
    jet; with an order-3 jet those fields are None.
    """
    if jet.order < 3:
        raise ValueError("euclidean_data needs a jet of order >= 3")
    full = jet.order >= 4
    x1, x2, x3 = jet.tensor(1), jet.tensor(2), jet.tensor(3)
    x4 = jet.tensor(4) if full else None
    n = x1.shape[-2]

    g = np.einsum("...iN,...jN->...ij", x1, x1)
    det_g = np.linalg.det(g)
    scale = np.max(np.abs(g), axis=(-2, -1)) ** n
    if check and np.any(det_g <= DET_TOL * scale):
        raise DegenerateGeometry("immersion condition violated (det g ~ 0)")
    g_inv = np.linalg.inv(g)

    xi = unit_normal(x1, orientation)
    h = np.einsum("...N,...ijN->...ij", xi, x2)
    eig = np.linalg.eigvalsh(h)
    negdef = np.all(eig < 0, axis=-1)
    definite = negdef | np.all(eig > 0, axis=-1)
    sign = np.where(negdef, -1.0, 1.0)
    xi = xi * sign[..., None]
    h = h * sign[..., None, None]

    det_h = np.linalg.det(h)
    K = det_h / det_g
    if check and np.any(np.abs(K) <= CURVATURE_TOL):
        raise DegenerateGeometry("Gaussian curvature vanishes")
    h_inv = np.linalg.inv(h)

    # Weingarten: d_k xi = -W_k^a x_a, W_k^a = h_kb g^ba
    W = np.einsum("...kb,...ba->...ka", h, g_inv)
    dxi = -np.einsum("...ka,...aN->...kN", W, x1)
    H_I = np.trace(W, axis1=-2, axis2=-1) / n

    dg = (np.einsum("...ikN,...jN->...kij", x2, x1)
          + np.einsum("...iN,...jkN->...kij", x1, x2))
    dh = (np.einsum("...kN,...ijN->...kij", dxi, x2)
          + np.einsum("...N,...ijkN->...kij", xi, x3))
    hinv_dh = np.einsum("...ab,...kbc->...kac", h_inv, dh)
    ginv_dg = np.einsum("...ab,...kbc->...kac", g_inv, dg)
    dlnK = (np.trace(hinv_dh, axis1=-2, axis2=-1)
            - np.trace(ginv_dg, axis1=-2, axis2=-1))

    d2h = d2lnK = curv = None
    if full:
        d2g = (np.einsum("...iklN,...jN->...klij", x3, x1)
               + np.einsum("...ikN,...jlN->...klij", x2, x2)
               + np.einsum("...ilN,...jkN->...klij", x2, x2)
               + np.einsum("...iN,...jklN->...klij", x1, x3))
        # d_l W_k^a = d_l h_kb g^ba - W_k^c d_l g_cd g^da
        dW = (np.einsum("...lkb,...ba->...lka", dh, g_inv)
              - np.einsum("...kc,...lcd,...da->...lka", W, dg, g_inv))
        d2xi = (-np.einsum("...lka,...aN->...klN", dW, x1)
                - np.einsum("...ka,...alN->...klN", W, x2))
        d2h = (np.einsum("...klN,...ijN->...klij", d2xi, x2)
               + np.einsum("...kN,...ijlN->...klij", dxi, x3)
               + np.einsum("...lN,...ijkN->...klij", dxi, x3)
               + np.einsum("...N,...ijklN->...klij", xi, x4))
        hinv_d2h = np.einsum("...ab,...klbc->...klac", h_inv, d2h)
        ginv_d2g = np.einsum("...ab,...klbc->...klac", g_inv, d2g)
        d2lnK = (np.trace(hinv_d2h, axis1=-2, axis2=-1)
                 - np.einsum("...lab,...kba->...kl", hinv_dh, hinv_dh)
                 - np.trace(ginv_d2g, axis1=-2, axis2=-1)
                 + np.einsum("...lab,...kba->...kl", ginv_dg, ginv_dg))
        curv = metric_curvature(h, dh, d2h)

    return EuclideanData(
        x1=x1, x2=x2, x3=x3, x4=x4, g=g, g_inv=g_inv, dg=dg, xi=xi, dxi=dxi,
        h=h, h_inv=h_inv, dh=dh, d2h=d2h, det_h=det_h, K=K, dlnK=dlnK,
        d2lnK=d2lnK, H_I=H_I, II=curv, definite=definite,
    )


def beltrami_first_II(ed: EuclideanData, df: np.ndarray, dg: np.ndarray | None = None) -> np.ndarray:
    """h^(ij) f_i g_j; with one gradient, the quadratic form of f."""
    if dg is None:
        dg = df
    return np.einsum("...ij,...i,...j->...", ed.h_inv, df, dg)


def beltrami_second_II(ed: EuclideanData, df: np.ndarray, d2f: np.ndarray) -> np.ndarray:
    """Laplace-Beltrami operator of II applied to f, from f's gradient and Hessian."""
    if ed.II is None:
        raise ValueError("second Beltrami operator needs an order-4 jet")
    lap = np.einsum("...ij,...ij->...", ed.h_inv, d2f)
    return lap - np.einsum("...ij,...kij,...k->...", ed.h_inv, ed.II.gamma, df)

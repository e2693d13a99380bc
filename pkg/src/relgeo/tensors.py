"""Curvature of a (pseudo-)metric given by its components and two derivatives.

Layout conventions (leading batch axes omitted):
``dM[k, i, j] = d_k M_ij``, ``d2M[k, l, i, j] = d_k d_l M_ij``,
``gamma[m, i, j] = Gamma^m_ij``, ``dgamma[l, m, i, j] = d_l Gamma^m_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricCurvature:
    inverse: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray  # R / (n (n - 1))


def _first_kind(dM):
    # C[k, i, j] = 1/2 (d_i M_kj + d_j M_ki - d_k M_ij)
    return 0.5 * (
        np.einsum("...ikj->...kij", dM)
        + np.einsum("...jki->...kij", dM)
        - dM
    )


def christoffel(M_inv: np.ndarray, dM: np.ndarray) -> np.ndarray:
    return np.einsum("...mk,...kij->...mij", M_inv, _first_kind(dM))


def metric_curvature(M: np.ndarray, dM: np.ndarray, d2M: np.ndarray) -> MetricCurvature:
    """Christoffel symbols, their partials, Ricci tensor and normalized scalar curvature."""
    n = M.shape[-1]
    M_inv = np.linalg.inv(M)
    C = _first_kind(dM)
    gamma = np.einsum("...mk,...kij->...mij", M_inv, C)
    # d_l C[k, i, j] = 1/2 (d_l d_i M_kj + d_l d_j M_ki - d_l d_k M_ij)
    dC = 0.5 * (
        np.einsum("...likj->...lkij", d2M)
        + np.einsum("...ljki->...lkij", d2M)
        - d2M
    )
    dM_inv = -np.einsum("...ma,...lab,...bk->...lmk", M_inv, dM, M_inv)
    dgamma = (np.einsum("...lmk,...kij->...lmij", dM_inv, C)
              + np.einsum("...mk,...lkij->...lmij", M_inv, dC))
    # R_bd = d_a G^a_db - d_d G^a_ab + G^a_ae G^e_db - G^a_de G^e_ab
    ricci = (
        np.einsum("...aadb->...bd", dgamma)
        - np.einsum("...daab->...bd", dgamma)
        + np.einsum("...aae,...edb->...bd", gamma, gamma)
        - np.einsum("...ade,...eab->...bd", gamma, gamma)
    )
    scalar = np.einsum("...bd,...bd->...", M_inv, ricci) / (n * (n - 1))
    return MetricCurvature(M_inv, gamma, dgamma, ricci, scalar)


def brioschi(M: np.ndarray, dM: np.ndarray, d2M: np.ndarray) -> np.ndarray:
    """Gauss curvature of a 2-metric from E, F, G and their partials alone."""
    E, F, G = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    Eu, Ev = dM[..., 0, 0, 0], dM[..., 1, 0, 0]
    Fu, Fv = dM[..., 0, 0, 1], dM[..., 1, 0, 1]
    Gu, Gv = dM[..., 0, 1, 1], dM[..., 1, 1, 1]
    Evv = d2M[..., 1, 1, 0, 0]
    Fuv = d2M[..., 0, 1, 0, 1]
    Guu = d2M[..., 0, 0, 1, 1]
    z = np.zeros_like(E)
    A = np.stack([
        np.stack([-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev], -1),
        np.stack([Fv - 0.5 * Gu, E, F], -1),
        np.stack([0.5 * Gv, F, G], -1),
    ], -2)
    B = np.stack([
        np.stack([z, 0.5 * Ev, 0.5 * Gu], -1),
        np.stack([0.5 * Ev, E, F], -1),
        np.stack([0.5 * Gu, F, G], -1),
    ], -2)
    return (np.linalg.det(A) - np.linalg.det(B)) / (E * G - F * F) ** 2

"""Ovaloid atlases and Gauss-Legendre quadrature of the integral formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .catalog import ellipsoid, sphere
from .chart import EUCLIDEAN, Normalization, SurfaceChart
from .euclid import EuclideanData
from .relative import InvariantBundle, compute_bundle


@dataclass(frozen=True)
class OvaloidAtlas:
    """Spherical-coordinate chart covering a closed surface up to the poles."""

    name: str
    chart: SurfaceChart
    chi: int = 2


def atlas_by_name(name: str) -> OvaloidAtlas:
    if name == "sphere":
        return OvaloidAtlas("sphere", sphere().chart)
    if name.startswith("ellipsoid:"):
        try:
            a, b, c = (float(s) for s in name.split(":", 1)[1].split(","))
        except ValueError:
            raise KeyError(f"{name}: expected ellipsoid:a,b,c") from None
        return OvaloidAtlas(name, ellipsoid(a, b, c, name=name).chart)
    raise KeyError(f"unknown atlas {name!r}")


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on the open chart box, row-major nodes."""

    nodes: np.ndarray
    weights: np.ndarray
    counts: tuple[int, ...]


def gauss_legendre_rule(chart: SurfaceChart, counts=(64, 128)) -> QuadratureRule:
    axes, wts = [], []
    for (a, b), m in zip(chart.domain, counts):
        x, w = np.polynomial.legendre.leggauss(m)
        axes.append(a + 0.5 * (b - a) * (x + 1.0))
        wts.append(0.5 * (b - a) * w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh]), axis=0)
    return QuadratureRule(nodes, weights, tuple(counts))


def pairwise_sum(values: np.ndarray) -> float:
    """Fixed-order pairwise reduction; bit-stable for a given node order."""
    v = np.asarray(values, dtype=float).ravel()
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0]) if v.size else 0.0


def area_element_II(ed: EuclideanData) -> np.ndarray:
    """sqrt(det h); only defined where II is definite."""
    if not np.all(ed.definite):
        raise ValueError("area element of II needs a definite second fundamental form")
    return np.sqrt(ed.det_h)


class _Evaluation:
    """Bundle at the quadrature nodes, computed once per (atlas, norm, rule)."""

    def __init__(self, atlas: OvaloidAtlas, norm: Normalization, rule: QuadratureRule):
        self.bundle = compute_bundle(atlas.chart, norm, rule.nodes)
        self.weights = rule.weights * area_element_II(self.bundle.euclid)

    def integrate(self, values: np.ndarray) -> float:
        return pairwise_sum(self.weights * np.asarray(values))


def integrate_scalar(atlas: OvaloidAtlas, f: Callable[[InvariantBundle], np.ndarray],
                     rule: QuadratureRule, norm: Normalization = EUCLIDEAN) -> float:
    """Integral of a pointwise invariant against the area element of II."""
    ev = _Evaluation(atlas, norm, rule)
    return ev.integrate(np.broadcast_to(f(ev.bundle), ev.weights.shape))


@dataclass(frozen=True)
class EulerIntegral:
    value: float            # integral of S/q
    affine_value: float     # integral of S_aff/q_aff
    II_value: float         # integral of S_II
    target: float           # 2 pi chi

    @property
    def deviation(self) -> float:
        return abs(self.value - self.target) / abs(self.target)

    @property
    def affine_deviation(self) -> float:
        return abs(self.affine_value - self.target) / abs(self.target)

    @property
    def II_deviation(self) -> float:
        return abs(self.II_value - self.target) / abs(self.target)


def _require_surface(atlas: OvaloidAtlas):
    if atlas.chart.n != 2:
        raise ValueError("integral formulas are stated for surfaces (n = 2)")


def euler_characteristic_integral(atlas: OvaloidAtlas, norm: Normalization,
                                  rule: QuadratureRule) -> EulerIntegral:
    _require_surface(atlas)
    ev = _Evaluation(atlas, norm, rule)
    b = ev.bundle
    return EulerIntegral(
        value=ev.integrate(b.S / b.q),
        affine_value=ev.integrate(b.S_aff / b.q_aff),
        II_value=ev.integrate(b.S_II),
        target=2.0 * math.pi * atlas.chi,
    )


@dataclass(frozen=True)
class MeanDefect:
    value: float
    area: float  # total II-area

    @property
    def nonnegative(self) -> bool:
        return self.value >= -1e-8 * self.area


def mean_curvature_defect_integral(atlas: OvaloidAtlas, norm: Normalization,
                                   rule: QuadratureRule) -> MeanDefect:
    """Integral of H/q - H_aff/q_aff; zero exactly for constant phi."""
    _require_surface(atlas)
    ev = _Evaluation(atlas, norm, rule)
    b = ev.bundle
    return MeanDefect(ev.integrate(b.H / b.q - b.H_aff / b.q_aff), ev.integrate(np.ones_like(b.q)))


@dataclass(frozen=True)
class SignScan:
    status: str  # constant-sign | sign-change
    minimum: float
    maximum: float
    pointwise_residual: float  # max |f - lap(ln phi)/2| / (1 + |f|)
    laplacian_integral: float  # integral of lap(ln phi), zero on a closed surface


def sign_change_scan(atlas: OvaloidAtlas, norm: Normalization, rule: QuadratureRule,
                     zero_tol: float = 1e-9) -> SignScan:
    """Sampled sign behaviour of S/q - S_aff/q_aff over the nodes."""
    _require_surface(atlas)
    ev = _Evaluation(atlas, norm, rule)
    b = ev.bundle
    f = b.S / b.q - b.S_aff / b.q_aff
    lap = b.lap_II(b.dlnphi, b.d2lnphi)
    resid = float(np.max(np.abs(f - 0.5 * lap) / (1.0 + np.abs(f) + 0.5 * np.abs(lap))))
    lo, hi = float(np.min(f)), float(np.max(f))
    if max(abs(lo), abs(hi)) <= zero_tol or lo >= 0 or hi <= 0:
        status = "constant-sign"
    else:
        status = "sign-change"
    return SignScan(status, lo, hi, resid, ev.integrate(lap))

"""Identity residuals over sample grids, and the ruled / hyperquadric tests.

Notation in the formulas below: L = ln(phi), b = ln(q_aff), grad and lap are
the first and second Beltrami operators of the second fundamental form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import EQUIAFFINE, GridSpec, Normalization, SurfaceChart, sample_grid
from .relative import InvariantBundle, compute_bundle

IDENTITY_IDS = (
    "EQ4", "EQ6", "EQ7", "EQ9", "EQ10", "EQ11", "EQ12", "EQ13", "EQ14", "EQ15",
    "EQ16", "EQ18", "EQ19", "EQ20", "EQ21A", "EQ21B", "EQ22", "EQ24", "EQ25",
)
INEQUALITIES = frozenset({"EQ22"})
TWO_DIMENSIONAL = frozenset({"EQ24", "EQ25"})
# Hold only where J_aff vanishes identically (hyperquadrics, ruled surfaces).
CONDITIONAL = frozenset({"EQ21A", "EQ21B"})

DEFAULT_TOL = 1e-7
INEQUALITY_TOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class SignatureViolation(ValueError):
    pass


@dataclass(frozen=True)
class ResidualReport:
    identity: str
    surface: str
    normalization: str
    grid: str
    max_residual: float
    at: tuple[float, ...]
    tol: float
    passed: bool
    details: dict = field(default_factory=dict)


def _relative_residual(lhs: list, rhs: list) -> np.ndarray:
    """|sum(lhs) - sum(rhs)| / (1 + largest term magnitude), pointwise."""
    terms = np.stack([np.asarray(t, dtype=float) for t in lhs + rhs])
    scale = 1.0 + np.max(np.abs(terms), axis=0)
    return np.abs(np.sum(lhs, axis=0) - np.sum(rhs, axis=0)) / scale


def _sides(identity: str, b: InvariantBundle) -> list[tuple[list, list]]:
    """(lhs terms, rhs terms) pairs; an identity may bundle several equalities."""
    n = b.n
    q, qa = b.q, b.q_aff
    dL, d2L = b.dlnphi, b.d2lnphi
    db, d2b = b.dlnqaff, b.d2lnqaff
    gL = b.grad_II(dL)
    gb = b.grad_II(db)
    gLb = b.grad_II(dL, db)
    lapL = b.lap_II(dL, d2L)
    lapb = b.lap_II(db, d2b)
    st = b.stack
    c13 = 3 * n / ((n - 1) * (n + 2))
    c_pick = 3 * (n + 2) / (4 * n * (n - 1))

    if identity == "EQ4":
        # J = c q grad(ln q, ln q - ln|K|^(2/(n+2))) + q P / (n(n-1))
        dlq = st.frame.support.dlq
        dlnK = b.euclid.dlnK
        dK = b.K[..., None] * dlnK
        P = n * (n - 1) * (b.S_II - b.H_I) + (2 * b.K) ** -2 * b.grad_II(dK)
        return [([b.J], [c_pick * q * b.grad_II(dlq, dlq - 2.0 / (n + 2) * dlnK),
                         q * P / (n * (n - 1))])]
    if identity == "EQ6":
        dlq, d2lq = st.frame.support.dlq, st.frame.support.d2lq
        return [([b.H], [q * b.H_I,
                         q / n * b.lap_II(dlq, d2lq),
                         q / n * b.grad_II(dlq, dlq - 0.5 * b.euclid.dlnK)])]
    if identity == "EQ7":
        return [([b.H, b.J, -b.S], [n / (n - 1) * b.norm_T])]
    if identity == "EQ9":
        return [([b.norm_T], [q * gL])]
    if identity == "EQ10":
        return [([b.J_euk], [b.S_II, -b.H_I, (n + 2) ** 2 / (4 * n * (n - 1)) * gb])]
    if identity == "EQ11":
        return [([b.J / q], [c_pick * 4 * n * n / (n + 2) ** 2 * gL, -c_pick * gb, b.J_euk])]
    if identity == "EQ12":
        return [([b.J_aff / qa], [-c_pick * gb, b.J_euk])]
    if identity == "EQ13":
        return [([b.J / q, -b.J_aff / qa], [c13 * gL])]
    if identity == "EQ14":
        return [([b.H / q, -b.H_I], [2 / (n + 2) * lapL, 4 * n / (n + 2) ** 2 * gL,
                                     -(n - 2) / (n + 2) * gLb, lapb / n, -0.5 * gb])]
    if identity == "EQ15":
        return [([b.H_aff / qa, -b.H_I], [lapb / n, -0.5 * gb])]
    if identity == "EQ16":
        return [([b.H / q, -b.H_aff / qa], [2 / (n + 2) * lapL, 4 * n / (n + 2) ** 2 * gL,
                                            -(n - 2) / (n + 2) * gLb])]
    if identity == "EQ18":
        return [([b.S / q, -b.S_aff / qa], [2 / (n + 2) * lapL,
                                            -n * (n - 2) / (n + 2) ** 2 * gL,
                                            -(n - 2) / (n + 2) * gLb])]
    if identity == "EQ19":
        functional = (3 * (b.S - b.H) + (n - 1) * b.J) / q
        aff = b.affine
        functional_aff = (3 * (aff.S - aff.H) + (n - 1) * aff.J) / qa
        return [
            ([3 * b.S / q, -3 * b.H / q, (n - 1) * b.J / q], [(n + 2) * b.J_aff / qa]),
            # normalization independence, with S_aff from the metric itself
            ([functional], [functional_aff]),
        ]
    if identity == "EQ20":
        ratio = q / qa * b.J_aff
        return [
            ([b.norm_T], [(n - 1) * (n + 2) / (3 * n) * b.J,
                          -(n - 1) * (n + 2) / (3 * n) * ratio]),
            ([b.norm_T], [(n + 2) / n * b.H, -(n + 2) / n * b.S, (n + 2) / n * ratio]),
        ]
    if identity == "EQ21A":
        return [([3 * n * b.norm_T], [(n - 1) * (n + 2) * b.J])]
    if identity == "EQ21B":
        return [([n * b.norm_T], [(n + 2) * b.H, -(n + 2) * b.S])]
    if identity == "EQ24":
        return [([b.S / q, -b.S_aff / qa], [0.5 * lapL])]
    if identity == "EQ25":
        return [([b.S_aff / qa, -b.S_II], [0.5 * lapb])]
    raise KeyError(f"unknown identity {identity!r}")


def pick_difference(b: InvariantBundle) -> np.ndarray:
    """J/q - J_aff/q_aff, nonnegative wherever II is positive definite."""
    return b.J / b.q - b.J_aff / b.q_aff


def identity_residual(identity: str, b: InvariantBundle) -> np.ndarray:
    """Pointwise residual; for the inequality, the magnitude of the negative part."""
    if identity in TWO_DIMENSIONAL and b.n != 2:
        raise DimensionMismatch(f"{identity} holds only for n = 2")
    if identity in INEQUALITIES:
        if not (np.all(b.euclid.definite) and np.all(b.K > 0)):
            raise SignatureViolation(f"{identity} needs positive Gaussian curvature on the grid")
        return np.maximum(0.0, -pick_difference(b))
    parts = [_relative_residual(lhs, rhs) for lhs, rhs in _sides(identity, b)]
    return np.max(np.stack(parts), axis=0)


def _grid_label(spec: GridSpec) -> str:
    return "x".join(str(c) for c in spec.counts)


def evaluate_identity(identity: str, chart: SurfaceChart, norm: Normalization,
                      spec: GridSpec, tol: float | None = None,
                      bundle: InvariantBundle | None = None) -> ResidualReport:
    """Maximum nondimensional residual of one identity over a sample grid."""
    identity = identity.upper()
    if identity not in IDENTITY_IDS:
        raise KeyError(f"unknown identity {identity!r}")
    if identity in TWO_DIMENSIONAL and chart.n != 2:
        raise DimensionMismatch(f"{identity} holds only for n = 2")
    if tol is None:
        tol = INEQUALITY_TOL if identity in INEQUALITIES else DEFAULT_TOL
    if bundle is None:
        points = sample_grid(chart, spec)
        if len(points) == 0:
            raise ValueError("no admissible grid points")
        bundle = compute_bundle(chart, norm, points)
    res = identity_residual(identity, bundle)
    return report_from_residuals(identity, chart, norm, spec, tol, res, bundle.points)


def report_from_residuals(identity: str, chart: SurfaceChart, norm: Normalization,
                          spec: GridSpec, tol: float | None, res: np.ndarray,
                          points: np.ndarray) -> ResidualReport:
    """Reduce a pointwise residual array (row-major grid order) to a report."""
    if tol is None:
        tol = INEQUALITY_TOL if identity in INEQUALITIES else DEFAULT_TOL
    k = int(np.argmax(res))
    worst = float(res[k])
    return ResidualReport(
        identity=identity,
        surface=chart.name,
        normalization=norm.describe(),
        grid=_grid_label(spec),
        max_residual=worst,
        at=tuple(float(x) for x in points[k]),
        tol=tol,
        passed=bool(worst < tol) if identity not in INEQUALITIES else bool(worst <= tol),
    )


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class ClassificationVerdict:
    verdict: str  # Ruled | Hyperquadric | Neither | Indeterminate
    curvature_sign: str  # positive | negative | mixed
    sup_abs_J_aff: float
    sup_abs_S_II: float
    threshold: float

    @property
    def bound(self) -> float:
        return self.threshold * (1.0 + self.sup_abs_S_II)


def classify_surface(chart: SurfaceChart, spec: GridSpec, threshold: float = 1e-6,
                     bundle: InvariantBundle | None = None) -> ClassificationVerdict:
    """Ruled (K < 0, n = 2) or hyperquadric (K > 0) iff J_aff vanishes on the grid."""
    if bundle is None:
        points = sample_grid(chart, spec)
        if len(points) == 0:
            raise ValueError("no admissible grid points")
        bundle = compute_bundle(chart, EQUIAFFINE, points)
    K = bundle.K
    positive = bool(np.all(bundle.euclid.definite) and np.all(K > 0))
    negative = bool(np.all(~bundle.euclid.definite) and np.all(K < 0))
    sign = "positive" if positive else "negative" if negative else "mixed"
    sup_j = float(np.max(np.abs(bundle.J_aff)))
    sup_s = float(np.max(np.abs(bundle.S_II)))
    small = sup_j < threshold * (1.0 + sup_s)
    if positive:
        verdict = "Hyperquadric" if small else "Neither"
    elif negative and chart.n == 2:
        verdict = "Ruled" if small else "Neither"
    else:
        verdict = "Indeterminate"
    return ClassificationVerdict(verdict, sign, sup_j, sup_s, threshold)


@dataclass(frozen=True)
class ProportionalityResult:
    proportional: bool
    deviation: float  # sample standard deviation of phi
    mean_phi: float


def proportionality_test(chart: SurfaceChart, norm: Normalization, spec: GridSpec,
                         tol: float = 1e-9, bundle: InvariantBundle | None = None) -> ProportionalityResult:
    """Is q a constant multiple of q_aff, i.e. is the Tchebychev function constant?"""
    if bundle is None:
        bundle = compute_bundle(chart, norm, sample_grid(chart, spec))
    phi = bundle.phi
    dev = float(np.std(phi, ddof=1)) if phi.size > 1 else 0.0
    mean = float(np.mean(phi))
    return ProportionalityResult(dev < tol * (1.0 + mean), dev, mean)


def pick_inequality_check(chart: SurfaceChart, norm: Normalization, spec: GridSpec,
                          bundle: InvariantBundle | None = None) -> ResidualReport:
    """min of J/q - J_aff/q_aff over the grid, plus its closed form in grad(ln phi)."""
    if bundle is None:
        bundle = compute_bundle(chart, norm, sample_grid(chart, spec))
    report = evaluate_identity("EQ22", chart, norm, spec, bundle=bundle)
    diff = pick_difference(bundle)
    closed_form = float(np.max(identity_residual("EQ13", bundle)))
    k = int(np.argmin(diff))
    details = {"min_difference": float(diff[k]), "closed_form_residual": closed_form}
    return ResidualReport(
        identity="EQ22",
        surface=report.surface,
        normalization=report.normalization,
        grid=report.grid,
        max_residual=report.max_residual,
        at=tuple(float(x) for x in bundle.points[k]),
        tol=report.tol,
        passed=report.passed and closed_form < 1e-6,
        details=details,
    )


def run_identities(identities, chart: SurfaceChart, norm: Normalization, spec: GridSpec,
                   tol: float | None = None) -> list[ResidualReport]:
    """Evaluate several identities sharing one bundle."""
    points = sample_grid(chart, spec)
    if len(points) == 0:
        raise ValueError("no admissible grid points")
    bundle = compute_bundle(chart, norm, points)
    return [evaluate_identity(i, chart, norm, spec, tol, bundle=bundle) for i in identities]

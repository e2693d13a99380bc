"""Parametrized hypersurface patches, derivative jets and sample grids."""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import (
    DomainError,
    Expression,
    ParseDiagnostic,
    differentiate,
    evaluate,
    free_variables,
    parse_expression,
)

MAX_ORDER = 4


class GuardViolation(ValueError):
    """A point lies outside the domain or fails a guard."""


class BoundaryTooClose(ValueError):
    """Finite-difference stencil would leave the chart domain."""


def default_params(n: int) -> tuple[str, ...]:
    if n == 2:
        return ("u", "v")
    if n == 3:
        return ("u", "v", "w")
    return tuple(f"u{i}" for i in range(1, n + 1))


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """Sorted multi-indices of total order 0..order (as index tuples)."""
    out = []
    for k in range(order + 1):
        out.extend(itertools.combinations_with_replacement(range(n), k))
    return out


@dataclass(frozen=True)
class SurfaceChart:
    """An immersion of an n-box into R^(n+1).

    ``orientation`` (+1 or -1) fixes the sign of the normal wherever the
    second fundamental form is indefinite.
    """

    name: str
    params: tuple[str, ...]
    components: tuple[Expression, ...]
    domain: tuple[tuple[float, float], ...]
    guards: tuple[Expression, ...] = ()
    orientation: int = 1

    def __post_init__(self):
        n = len(self.params)
        if n < 2:
            raise ValueError("intrinsic dimension must be at least 2")
        if len(self.components) != n + 1:
            raise ValueError(f"need {n + 1} components for n = {n}")
        if len(self.domain) != n:
            raise ValueError(f"need {n} domain intervals")
        for a, b in self.domain:
            if not a < b:
                raise ValueError(f"empty domain interval [{a}, {b}]")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        allowed = set(self.params)
        for e in (*self.components, *self.guards):
            extra = free_variables(e) - allowed
            if extra:
                raise ValueError(f"undeclared parameters {sorted(extra)}")

    @property
    def n(self) -> int:
        return len(self.params)

    @cached_property
    def derivative_table(self) -> dict[tuple[int, ...], tuple[Expression, ...]]:
        """Symbolic partials of every component, keyed by sorted multi-index."""
        table = {(): tuple(self.components)}
        for alpha in multi_indices(self.n, MAX_ORDER)[1:]:
            parent, last = alpha[:-1], alpha[-1]
            var = self.params[last]
            table[alpha] = tuple(differentiate(e, var) for e in table[parent])
        return table

    def bindings(self, points: np.ndarray) -> dict[str, np.ndarray]:
        points = np.asarray(points, dtype=float)
        return {name: points[..., i] for i, name in enumerate(self.params)}

    def admissible(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask: inside the closed domain and every guard > 0."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        ok = np.all((points >= lo) & (points <= hi), axis=-1)
        for guard in self.guards:
            try:
                val = np.broadcast_to(evaluate(guard, self.bindings(points)), ok.shape)
                ok &= val > 0
            except DomainError:
                for k, p in enumerate(points):
                    if not ok[k]:
                        continue
                    try:
                        ok[k] = float(evaluate(guard, self.bindings(p))) > 0
                    except DomainError:
                        ok[k] = False
        return ok

    def position(self, points: np.ndarray) -> np.ndarray:
        return _eval_vector(self.components, self.bindings(points), np.shape(points)[:-1])


def _eval_vector(exprs: Sequence[Expression], bindings, batch_shape) -> np.ndarray:
    cols = [np.broadcast_to(evaluate(e, bindings), batch_shape) for e in exprs]
    return np.stack(cols, axis=-1).astype(float)


@dataclass(frozen=True)
class Jet:
    """All partials of the immersion up to ``order`` at one point or a batch.

    ``table`` maps sorted multi-indices to arrays of shape ``(..., n+1)``.
    """

    point: np.ndarray
    order: int
    table: Mapping[tuple[int, ...], np.ndarray]
    params: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return np.shape(self.point)[-1]

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.params or default_params(self.n)

    def __getitem__(self, idx: Iterable[int]) -> np.ndarray:
        return self.table[tuple(sorted(idx))]

    def tensor(self, k: int) -> np.ndarray:
        """Full symmetric array of k-th partials, shape ``(..., n,...,n, n+1)``."""
        if k > self.order:
            raise ValueError(f"jet has order {self.order} < {k}")
        n = self.n
        batch = np.shape(self.point)[:-1]
        out = np.empty(batch + (n,) * k + (n + 1,))
        for idx in itertools.product(range(n), repeat=k):
            out[(Ellipsis,) + idx + (slice(None),)] = self[idx]
        return out


def immersion_jet(chart: SurfaceChart, p, order: int = MAX_ORDER) -> Jet:
    """Exact partial derivatives of the immersion at ``p`` (a point or a batch)."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != chart.n:
        raise ValueError(f"points must have {chart.n} coordinates")
    bad = ~chart.admissible(p.reshape(-1, chart.n))
    if bad.any():
        where = p.reshape(-1, chart.n)[int(np.argmax(bad))]
        raise GuardViolation(f"point {where.tolist()} is not admissible for {chart.name}")
    bindings = chart.bindings(p)
    batch = p.shape[:-1]
    table = {}
    for alpha in multi_indices(chart.n, order):
        table[alpha] = _eval_vector(chart.derivative_table[alpha], bindings, batch)
    return Jet(point=p, order=order, table=table, params=chart.params)


# One-dimensional central stencils {offset: weight}; error is even in h.
_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def finite_difference_jet(chart: SurfaceChart, p, order: int = MAX_ORDER,
                          dps: int = 40) -> Jet:
    """Central differences with one Richardson step, in ``dps``-digit arithmetic.

    Step h = 1e-4 (1 + |p|_inf); steps h and 2h are combined, so the error is
    O(h^4) per entry.  Extended precision keeps round-off out of the
    fourth-order quotients.  Independent of symbolic differentiation: only
    component values are used.
    """
    import mpmath

    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    p = np.asarray(p, dtype=float)
    if p.shape != (chart.n,):
        raise ValueError("finite_difference_jet takes a single point")
    h = 1e-4 * (1.0 + float(np.max(np.abs(p))))
    for x, (a, b) in zip(p, chart.domain):
        if x - a < 4 * h or b - x < 4 * h:
            raise BoundaryTooClose(f"point {p.tolist()} within 4h = {4 * h:g} of the boundary")

    cache: dict[tuple[int, ...], list] = {}
    with mpmath.workdps(dps):
        hm = mpmath.mpf(h)
        base = [mpmath.mpf(float(x)) for x in p]

        def value(offset):
            if offset not in cache:
                b = {name: base[i] + offset[i] * hm for i, name in enumerate(chart.params)}
                cache[offset] = [mpmath.mpf(evaluate(e, b, backend="mpmath")) for e in chart.components]
            return cache[offset]

        table = {}
        for alpha in multi_indices(chart.n, order):
            counts = [alpha.count(i) for i in range(chart.n)]
            estimates = []
            for step in (1, 2):
                acc = [mpmath.mpf(0)] * (chart.n + 1)
                for combo in itertools.product(*(_STENCILS[c].items() for c in counts)):
                    offset = tuple(step * o for o, _ in combo)
                    w = mpmath.mpf(1)
                    for _, wt in combo:
                        w *= mpmath.mpf(wt)
                    vals = value(offset)
                    acc = [a + w * v for a, v in zip(acc, vals)]
                scale = (step * hm) ** len(alpha)
                estimates.append([a / scale for a in acc])
            table[alpha] = np.array(
                [float((4 * a - b) / 3) for a, b in zip(*estimates)], dtype=float
            )
    return Jet(point=p, order=order, table=table, params=chart.params)


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product sample grid placed strictly inside the chart box."""

    counts: tuple[int, ...]
    margin: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if any(c < 3 for c in self.counts):
            raise ValueError("grid counts must be >= 3")
        if not 0 < self.margin < 0.5:
            raise ValueError("margin must lie in (0, 0.5)")

    @classmethod
    def uniform(cls, count: int, n: int, **kw) -> "GridSpec":
        return cls(counts=(count,) * n, **kw)


def sample_grid(chart: SurfaceChart, spec: GridSpec) -> np.ndarray:
    """Row-major grid points (first parameter slowest) that pass every guard."""
    if len(spec.counts) != chart.n:
        raise ValueError(f"grid needs {chart.n} counts")
    axes = []
    for (a, b), count in zip(chart.domain, spec.counts):
        t = np.linspace(spec.margin, 1.0 - spec.margin, count)
        axes.append(a + (b - a) * t)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return points[chart.admissible(points)]


def expression_jet(expr: Expression, params: Sequence[str], points: np.ndarray):
    """Value, gradient and Hessian of a scalar expression at ``points``."""
    points = np.asarray(points, dtype=float)
    n = len(params)
    batch = points.shape[:-1]
    b = {name: points[..., i] for i, name in enumerate(params)}
    d1 = [differentiate(expr, v) for v in params]
    val = np.broadcast_to(evaluate(expr, b), batch).astype(float)
    grad = np.stack([np.broadcast_to(evaluate(e, b), batch) for e in d1], axis=-1)
    hess = np.empty(batch + (n, n))
    for i in range(n):
        for j in range(i, n):
            hij = np.broadcast_to(evaluate(differentiate(d1[i], params[j]), b), batch)
            hess[..., i, j] = hess[..., j, i] = hij
    return val, grad.astype(float), hess


# ---------------------------------------------------------------------------
# Normalizations


@dataclass(frozen=True)
class Normalization:
    """Relative normalization, specified by its support function.

    kinds: ``euclidean`` (q = 1), ``equiaffine`` (q = |K|^(1/(n+2))),
    ``scaled-equiaffine`` (q = c q_aff) and ``custom``: q = expr, or
    q = q_aff * expr when ``affine_factor`` is set.
    """

    kind: str
    c: float = 1.0
    q: Expression | None = None
    affine_factor: bool = False
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("euclidean", "equiaffine", "scaled-equiaffine", "custom"):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if self.kind == "scaled-equiaffine" and not self.c > 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "custom" and self.q is None:
            raise ValueError("custom normalization needs an expression")

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.kind == "scaled-equiaffine":
            return f"equiaffine*{self.c:g}"
        if self.kind == "custom":
            prefix = "equiaffine*" if self.affine_factor else "q:"
            return prefix + str(self.q)
        return self.kind

    @property
    def proportional_to_affine(self) -> bool:
        return self.kind in ("equiaffine", "scaled-equiaffine")


EUCLIDEAN = Normalization("euclidean")
EQUIAFFINE = Normalization("equiaffine")


def scaled_equiaffine(c: float) -> Normalization:
    return Normalization("scaled-equiaffine", c=float(c))


def parse_normalization(text: str, params: Sequence[str]) -> Normalization:
    """``euclidean`` | ``equiaffine`` | ``equiaffine*<c>`` | ``equiaffine*<expr>`` | ``q:<expr>``."""
    s = text.strip()
    if s == "euclidean":
        return EUCLIDEAN
    if s == "equiaffine":
        return EQUIAFFINE
    if s.startswith("equiaffine*"):
        rest = s[len("equiaffine*"):]
        try:
            return scaled_equiaffine(float(rest))
        except ValueError:
            pass
        e = parse_expression(rest, params)
        if not free_variables(e):
            return scaled_equiaffine(float(evaluate(e, {})))
        return Normalization("custom", q=e, affine_factor=True, label=s)
    if s.startswith("q:"):
        e = parse_expression(s[2:], params)
        return Normalization("custom", q=e, label=s)
    raise ValueError(f"unknown normalization {text!r}")


def seeded_custom_normalization(params: Sequence[str], seed: int = 0,
                                amplitude: float = 0.1) -> Normalization:
    """q = q_aff * exp(amplitude * f) with a seeded smooth f.

    For n = 2 the exponent is a linear form in (sin u cos v, sin u sin v,
    cos u), which is smooth on spherical-coordinate charts of closed
    surfaces.
    """
    rng = np.random.default_rng(seed)
    if len(params) == 2:
        c = [float(x) for x in rng.normal(size=3)]
        r = float(np.linalg.norm(c))
        c = [x / r for x in c]
        u, v = params
        text = (f"exp({amplitude!r}*({c[0]!r}*sin({u})*cos({v}) + {c[1]!r}*sin({u})*sin({v})"
                f" + {c[2]!r}*cos({u})))")
    else:
        c = [float(x) for x in rng.normal(size=len(params))]
        r = float(np.linalg.norm(c))
        c = [x / r for x in c]
        terms = " + ".join(f"{ci!r}*sin({p})" for ci, p in zip(c, params))
        text = f"exp({amplitude!r}*({terms}))"
    e = parse_expression(text, params)
    return Normalization("custom", q=e, affine_factor=True, label=f"seeded-custom({seed})")


# ---------------------------------------------------------------------------
# Surface-definition files


class SurfaceFileError(ValueError):
    def __init__(self, line: int, message: str, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {message}")


def _parse_real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        e = parse_expression(text, [])
        return float(evaluate(e, {}))


def parse_surface_definition(text: str, name: str = "file") -> tuple[SurfaceChart, Normalization | None]:
    """Parse the line-oriented ``[surface]`` / ``[normalization]`` format."""
    sections: dict[str, dict[str, tuple[str, int, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in ("surface", "normalization"):
                raise SurfaceFileError(lineno, f"unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if current is None:
            raise SurfaceFileError(lineno, "key outside of a section")
        if "=" not in line:
            raise SurfaceFileError(lineno, "expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        col = raw.index(value) if value in raw else 0
        if key in sections[current]:
            raise SurfaceFileError(lineno, f"duplicate key {key!r}")
        sections[current][key] = (value, lineno, col)

    surf = sections.get("surface")
    if not surf:
        raise SurfaceFileError(1, "missing [surface] section")
    if "n" not in surf:
        raise SurfaceFileError(1, "missing key n")
    nval, nline, _ = surf["n"]
    try:
        n = int(nval)
    except ValueError:
        raise SurfaceFileError(nline, f"n must be an integer, got {nval!r}") from None
    if n < 2:
        raise SurfaceFileError(nline, "n must be at least 2")
    if "params" in surf:
        params = tuple(s.strip() for s in surf["params"][0].split(","))
        if len(params) != n:
            raise SurfaceFileError(surf["params"][1], f"expected {n} parameter names")
    else:
        params = default_params(n)

    def expr_of(key, section=surf):
        value, lineno, col = section[key]
        try:
            return parse_expression(value, params)
        except ParseDiagnostic as d:
            raise SurfaceFileError(lineno, f"{d.message} ({d.token!r})", col + d.offset + 1) from d

    components = []
    for k in range(1, n + 2):
        key = f"x{k}"
        if key not in surf:
            raise SurfaceFileError(1, f"missing key {key}")
        components.append(expr_of(key))
    domain = []
    for i in range(1, n + 1):
        key = f"domain.{i}"
        if key not in surf:
            raise SurfaceFileError(1, f"missing key {key}")
        value, lineno, _ = surf[key]
        parts = [s.strip() for s in value.split(",")]
        if len(parts) != 2:
            raise SurfaceFileError(lineno, "domain must be 'a,b'")
        try:
            domain.append((_parse_real(parts[0]), _parse_real(parts[1])))
        except (ValueError, ParseDiagnostic) as err:
            raise SurfaceFileError(lineno, f"bad domain bound: {err}") from None
    guard_keys = sorted((k for k in surf if k.startswith("guard.")), key=lambda k: surf[k][1])
    guards = tuple(expr_of(k) for k in guard_keys)
    orientation = int(surf["orientation"][0]) if "orientation" in surf else 1
    known = {"n", "params", "orientation", *(f"x{k}" for k in range(1, n + 2)),
             *(f"domain.{i}" for i in range(1, n + 1)), *guard_keys}
    for key, (_, lineno, _) in surf.items():
        if key not in known:
            raise SurfaceFileError(lineno, f"unknown key {key!r}")
    try:
        chart = SurfaceChart(name=name, params=params, components=tuple(components),
                             domain=tuple(domain), guards=guards, orientation=orientation)
    except ValueError as err:
        raise SurfaceFileError(1, str(err)) from None

    norm = None
    nsec = sections.get("normalization")
    if nsec:
        if set(nsec) != {"q"}:
            raise SurfaceFileError(1, "[normalization] takes exactly the key q")
        value, lineno, col = nsec["q"]
        try:
            if value in ("euclidean", "equiaffine") or value.startswith("equiaffine*"):
                norm = parse_normalization(value, params)
            else:
                norm = Normalization("custom", q=parse_expression(value, params), label=f"q:{value}")
        except ParseDiagnostic as d:
            raise SurfaceFileError(lineno, f"{d.message} ({d.token!r})", col + d.offset + 1) from d
    return chart, norm


def load_surface_file(path) -> tuple[SurfaceChart, Normalization | None]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_surface_definition(text, name=os.path.basename(str(path)))

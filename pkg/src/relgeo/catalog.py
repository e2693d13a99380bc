"""Built-in surfaces with known ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .chart import SurfaceChart
from .expr import parse_expression

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CatalogEntry:
    chart: SurfaceChart
    curvature_sign: int
    # J_aff vanishes identically: quadrics (K > 0) and ruled surfaces (K < 0)
    affine_pick_zero: bool
    closed: bool = False
    description: str = ""


def _chart(name, params, comps, domain, guards=(), orientation=1):
    return SurfaceChart(
        name=name,
        params=tuple(params),
        components=tuple(parse_expression(c, params) for c in comps),
        domain=tuple(domain),
        guards=tuple(parse_expression(g, params) for g in guards),
        orientation=orientation,
    )


def ellipsoid(a: float, b: float, c: float, name: str | None = None) -> CatalogEntry:
    if min(a, b, c) <= 0:
        raise ValueError("semiaxes must be positive")
    name = name or f"ellipsoid:{a:g},{b:g},{c:g}"
    chart = _chart(
        name,
        ("u", "v"),
        (f"{a!r}*sin(u)*cos(v)", f"{b!r}*sin(u)*sin(v)", f"{c!r}*cos(u)"),
        ((0.0, math.pi), (0.0, TWO_PI)),
        guards=("sin(u)",),
    )
    return CatalogEntry(chart, 1, True, closed=True,
                        description=f"ellipsoid with semiaxes ({a:g},{b:g},{c:g}); u polar, v azimuth")


def sphere() -> CatalogEntry:
    e = ellipsoid(1.0, 1.0, 1.0, name="sphere")
    return CatalogEntry(e.chart, 1, True, closed=True, description="unit sphere; u polar, v azimuth")


def sphere3() -> CatalogEntry:
    chart = _chart(
        "sphere3",
        ("u", "v", "w"),
        ("sin(u)*sin(v)*cos(w)", "sin(u)*sin(v)*sin(w)", "sin(u)*cos(v)", "cos(u)"),
        ((0.0, math.pi), (0.0, math.pi), (0.0, TWO_PI)),
        guards=("sin(u)", "sin(v)"),
    )
    return CatalogEntry(chart, 1, True, closed=True, description="unit 3-sphere in R^4")


def elliptic_paraboloid() -> CatalogEntry:
    chart = _chart("elliptic-paraboloid", ("u", "v"), ("u", "v", "u^2 + v^2"),
                   ((-1.0, 1.0), (-1.0, 1.0)))
    return CatalogEntry(chart, 1, True, description="z = u^2 + v^2")


def hyperbolic_paraboloid() -> CatalogEntry:
    chart = _chart("hyperbolic-paraboloid", ("u", "v"), ("u", "v", "u*v"),
                   ((-1.0, 1.0), (-1.0, 1.0)))
    return CatalogEntry(chart, -1, True, description="z = u v (doubly ruled quadric)")


def helicoid() -> CatalogEntry:
    chart = _chart("helicoid", ("u", "v"), ("u*cos(v)", "u*sin(v)", "v"),
                   ((-1.0, 1.0), (0.0, TWO_PI)))
    return CatalogEntry(chart, -1, True, description="(u cos v, u sin v, v)")


def monkey_saddle() -> CatalogEntry:
    chart = _chart("monkey-saddle", ("u", "v"), ("u", "v", "u^3 - 3*u*v^2"),
                   ((-1.0, 1.0), (-1.0, 1.0)), guards=("u^2 + v^2 - 0.01",))
    return CatalogEntry(chart, -1, False, description="z = u^3 - 3uv^2, origin excluded")


def convex_nonquadric() -> CatalogEntry:
    chart = _chart("convex-nonquadric", ("u", "v"), ("u", "v", "u^2 + v^2 + u^4"),
                   ((-1.0, 1.0), (-1.0, 1.0)))
    return CatalogEntry(chart, 1, False, description="z = u^2 + v^2 + u^4")


_FIXED = {
    "sphere": sphere,
    "elliptic-paraboloid": elliptic_paraboloid,
    "hyperbolic-paraboloid": hyperbolic_paraboloid,
    "helicoid": helicoid,
    "monkey-saddle": monkey_saddle,
    "convex-nonquadric": convex_nonquadric,
    "sphere3": sphere3,
}

# Surfaces swept by the acceptance suite (n = 2).
CATALOG_NAMES = (
    "sphere",
    "ellipsoid:1,1,2",
    "elliptic-paraboloid",
    "hyperbolic-paraboloid",
    "helicoid",
    "monkey-saddle",
    "convex-nonquadric",
)


class UnknownSurface(KeyError):
    pass


def get_surface(name: str) -> CatalogEntry:
    """Look up a built-in surface; ``ellipsoid:a,b,c`` takes semiaxes."""
    if name.startswith("ellipsoid"):
        rest = name[len("ellipsoid"):]
        if not rest:
            return ellipsoid(1.0, 1.0, 2.0, name="ellipsoid:1,1,2")
        if not rest.startswith(":"):
            raise UnknownSurface(name)
        try:
            a, b, c = (float(s) for s in rest[1:].split(","))
        except ValueError:
            raise UnknownSurface(f"{name}: expected ellipsoid:a,b,c") from None
        return ellipsoid(a, b, c, name=name)
    try:
        return _FIXED[name]()
    except KeyError:
        raise UnknownSurface(name) from None


def list_surfaces() -> list[CatalogEntry]:
    return [get_surface(n) for n in ("sphere", "ellipsoid:1,1,2", *list(_FIXED)[1:])]

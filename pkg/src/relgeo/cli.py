"""Command-line entry point: ``relgeo <subcommand> ...``.

Exit codes: 0 when every check passes, 2 when at least one residual,
inequality or integral check fails, 1 on usage or input errors.

CSV headers (fixed per subcommand):

* verify:     surface,normalization,identity,grid,max_residual,at_u,at_v,tol,pass
* classify:   surface,grid,verdict,curvature_sign,sup_abs_J_aff,sup_abs_S_II,threshold,bound
* integrate:  surface,normalization,quantity,nodes,value,target,deviation,tol,pass
* invariants: surface,normalization,<chart parameters>,<scalar invariants>
* catalog:    name,n,domain,curvature_sign,affine_pick_zero,description

Setting RELGEO_THREADS to an integer > 1 splits the verification grid into
that many row-major chunks evaluated on a thread pool; results are
concatenated in chunk order, so output does not depend on the setting.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .catalog import UnknownSurface, get_surface, list_surfaces
from .chart import (
    EUCLIDEAN,
    GridSpec,
    Normalization,
    SurfaceChart,
    SurfaceFileError,
    load_surface_file,
    parse_normalization,
    sample_grid,
    seeded_custom_normalization,
)
from .expr import DomainError, ParseDiagnostic
from .identities import (
    CONDITIONAL,
    IDENTITY_IDS,
    INEQUALITIES,
    TWO_DIMENSIONAL,
    DimensionMismatch,
    SignatureViolation,
    classify_surface,
    identity_residual,
    report_from_residuals,
)
from .quad import (
    OvaloidAtlas,
    atlas_by_name,
    euler_characteristic_integral,
    gauss_legendre_rule,
    mean_curvature_defect_integral,
    sign_change_scan,
)
from .relative import InvariantBundle, NonpositiveSupport, compute_bundle

VERIFY_HEADER = ("surface", "normalization", "identity", "grid", "max_residual",
                 "at_u", "at_v", "tol", "pass")
CLASSIFY_HEADER = ("surface", "grid", "verdict", "curvature_sign", "sup_abs_J_aff",
                   "sup_abs_S_II", "threshold", "bound")
INTEGRATE_HEADER = ("surface", "normalization", "quantity", "nodes", "value", "target",
                    "deviation", "tol", "pass")
CATALOG_HEADER = ("name", "n", "domain", "curvature_sign", "affine_pick_zero", "description")

FORMULAS = ("euler", "gaussbonnet", "meandefect", "signscan")
VERDICTS = ("Ruled", "Hyperquadric", "Neither", "Indeterminate")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    """Bad command line or unreadable input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message} (see `{self.prog} --help`)")


def _num(x: float, fmt: str) -> str:
    return ("%.17g" if fmt == "csv" else "%.6g") % x


def _flag(ok: bool, fmt: str) -> str:
    if fmt == "csv":
        return "true" if ok else "false"
    return "PASS" if ok else "FAIL"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _threads() -> int:
    raw = os.environ.get("RELGEO_THREADS", "").strip()
    if not raw:
        return 1
    try:
        t = int(raw)
    except ValueError:
        raise UsageError(f"RELGEO_THREADS must be a positive integer, got {raw!r}") from None
    if t < 1:
        raise UsageError(f"RELGEO_THREADS must be a positive integer, got {raw!r}")
    return t


def _chunked(fn, points: np.ndarray, threads: int) -> list:
    """Apply fn to row-major chunks of points; results keep chunk order."""
    if threads <= 1 or len(points) < 2 * threads:
        return [fn(points)]
    chunks = np.array_split(points, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


# ---------------------------------------------------------------------------
# Argument resolution


def _parse_counts(text: str, n: int, what: str) -> tuple[int, ...]:
    parts = text.lower().replace("x", ",").split(",")
    try:
        counts = tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise UsageError(f"bad {what} {text!r}: expected integers like 17 or 17x33") from None
    if len(counts) == 1:
        counts = counts * n
    if len(counts) != n:
        raise UsageError(f"bad {what} {text!r}: need 1 or {n} counts")
    return counts


def _positive(text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"{what} must be a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise UsageError(f"{what} must be positive, got {text!r}")
    return v


def _load_chart(args) -> tuple[SurfaceChart, Normalization | None]:
    if (args.surface is None) == (args.file is None):
        raise UsageError("give exactly one of --surface or --file")
    if args.surface is not None:
        return get_surface(args.surface).chart, None
    return load_surface_file(args.file)


def _normalization(text: str | None, chart: SurfaceChart, default: Normalization | None) -> Normalization:
    if text is None:
        return default or EUCLIDEAN
    if text == "seeded" or text.startswith("seeded:"):
        seed = text.partition(":")[2] or "0"
        try:
            return seeded_custom_normalization(chart.params, int(seed))
        except ValueError:
            raise UsageError(f"bad seed in normalization {text!r}") from None
    return parse_normalization(text, chart.params)


def _describe_diagnostic(text: str, err: ParseDiagnostic) -> str:
    """Point at the offending token inside a normalization descriptor."""
    s = text.strip()
    shift = 0
    for prefix in ("q:", "equiaffine*"):
        if s.startswith(prefix):
            shift = len(prefix)
    col = shift + err.offset
    return (f"normalization: {err.message} at offset {err.offset} (token {err.token!r})\n"
            f"  {s}\n  {' ' * col}^")


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_catalog(args, out) -> int:
    rows = []
    for entry in list_surfaces():
        c = entry.chart
        domain = ";".join(f"{a:.6g}..{b:.6g}" for a, b in c.domain)
        sign = "positive" if entry.curvature_sign > 0 else "negative"
        rows.append((c.name, str(c.n), domain, sign, str(entry.affine_pick_zero).lower(),
                     entry.description))
    if args.format == "csv":
        out.write(_csv_text(CATALOG_HEADER, rows))
    else:
        for name, n, domain, sign, zero, desc in rows:
            out.write(f"{name:<24} n={n}  K {sign:<8}  J_aff=0: {zero:<5}  domain {domain}  {desc}\n")
        out.write("ellipsoid:a,b,c takes arbitrary positive semiaxes\n")
    return EXIT_OK


def _points_from_args(args, chart: SurfaceChart) -> np.ndarray:
    if not args.point:
        return sample_grid(chart, GridSpec(_parse_counts(args.grid, chart.n, "grid")))
    pts = []
    for text in args.point:
        try:
            p = tuple(float(s) for s in text.split(","))
        except ValueError:
            raise UsageError(f"bad point {text!r}") from None
        if len(p) != chart.n:
            raise UsageError(f"point {text!r} needs {chart.n} coordinates")
        pts.append(p)
    pts = np.array(pts, dtype=float)
    if not np.all(chart.admissible(pts)):
        raise UsageError("point outside the chart domain or violating a guard")
    return pts


def _cmd_invariants(args, out) -> int:
    chart, file_norm = _load_chart(args)
    norm = _normalization(args.normalization, chart, file_norm)
    points = _points_from_args(args, chart)
    if len(points) == 0:
        raise UsageError("no admissible grid points")
    b = compute_bundle(chart, norm, points)
    names = InvariantBundle.SCALARS
    if args.format == "csv":
        rows = []
        for k, p in enumerate(points):
            vals = b.scalars_at(k)
            rows.append([chart.name, norm.describe(), *(_num(x, "csv") for x in p),
                         *(_num(vals[s], "csv") for s in names)])
        out.write(_csv_text(("surface", "normalization", *chart.params, *names), rows))
        return EXIT_OK
    out.write(f"surface {chart.name}  normalization {norm.describe()}\n")
    for k, p in enumerate(points):
        coords = ", ".join(f"{c}={_num(x, 'human')}" for c, x in zip(chart.params, p))
        out.write(f"point {coords}\n")
        for s, v in b.scalars_at(k).items():
            out.write(f"  {s:<8} {_num(v, 'human')}\n")
    return EXIT_OK


def _identity_list(text: str | None, chart: SurfaceChart) -> list[str]:
    if text is None:
        ids = [i for i in IDENTITY_IDS if i not in CONDITIONAL and i not in INEQUALITIES]
        return [i for i in ids if chart.n == 2 or i not in TWO_DIMENSIONAL]
    ids = [s.strip().upper() for s in text.split(",") if s.strip()]
    unknown = [i for i in ids if i not in IDENTITY_IDS]
    if unknown or not ids:
        raise UsageError(f"unknown identity {', '.join(unknown) or text!r}; "
                         f"choose from {','.join(IDENTITY_IDS)}")
    return ids


def _cmd_verify(args, out) -> int:
    chart, file_norm = _load_chart(args)
    norm = _normalization(args.normalization, chart, file_norm)
    ids = _identity_list(args.identity, chart)
    for i in ids:
        if i in TWO_DIMENSIONAL and chart.n != 2:
            raise DimensionMismatch(f"{i} holds only for n = 2")
    tol = _positive(args.tol, "--tol") if args.tol is not None else None
    spec = GridSpec(_parse_counts(args.grid, chart.n, "grid"))
    points = sample_grid(chart, spec)
    if len(points) == 0:
        raise UsageError("no admissible grid points")

    def residuals(chunk):
        b = compute_bundle(chart, norm, chunk)
        return [identity_residual(i, b) for i in ids]

    parts = _chunked(residuals, points, _threads())
    reports = [
        report_from_residuals(i, chart, norm, spec, tol,
                              np.concatenate([p[j] for p in parts]), points)
        for j, i in enumerate(ids)
    ]
    fmt = args.format
    if fmt == "csv":
        rows = []
        for r in reports:
            at = list(r.at) + [math.nan] * (2 - len(r.at))
            rows.append((r.surface, r.normalization, r.identity, r.grid,
                         _num(r.max_residual, fmt), _num(at[0], fmt), _num(at[1], fmt),
                         _num(r.tol, fmt), _flag(r.passed, fmt)))
        out.write(_csv_text(VERIFY_HEADER, rows))
    else:
        out.write(f"surface {chart.name}  normalization {norm.describe()}  grid {spec.counts}\n")
        for r in reports:
            at = ", ".join(_num(x, fmt) for x in r.at)
            out.write(f"  {r.identity:<6} max residual {_num(r.max_residual, fmt):<12} "
                      f"at ({at})  tol {_num(r.tol, fmt)}  {_flag(r.passed, fmt)}\n")
        out.write("all passed\n" if all(r.passed for r in reports) else "FAILED\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _cmd_classify(args, out) -> int:
    chart, _ = _load_chart(args)
    threshold = _positive(args.threshold, "--threshold")
    spec = GridSpec(_parse_counts(args.grid, chart.n, "grid"))
    v = classify_surface(chart, spec, threshold)
    fmt = args.format
    if fmt == "csv":
        out.write(_csv_text(CLASSIFY_HEADER, [(
            chart.name, "x".join(map(str, spec.counts)), v.verdict, v.curvature_sign,
            _num(v.sup_abs_J_aff, fmt), _num(v.sup_abs_S_II, fmt),
            _num(v.threshold, fmt), _num(v.bound, fmt))]))
    else:
        out.write(f"{chart.name}: {v.verdict}\n"
                  f"  curvature sign  {v.curvature_sign}\n"
                  f"  sup|J_aff|      {_num(v.sup_abs_J_aff, fmt)}\n"
                  f"  bound           {_num(v.bound, fmt)} "
                  f"(threshold {_num(v.threshold, fmt)} x (1 + sup|S_II| = {_num(v.sup_abs_S_II, fmt)}))\n")
    if args.expect is not None and v.verdict != args.expect:
        return EXIT_FAIL
    return EXIT_OK


def _atlas(args) -> tuple[OvaloidAtlas, Normalization | None]:
    if (args.surface is None) == (args.file is None):
        raise UsageError("give exactly one of --surface or --file")
    if args.surface is not None:
        try:
            return atlas_by_name(args.surface), None
        except KeyError as e:
            raise UsageError(f"{e.args[0]}; atlases are sphere and ellipsoid:a,b,c") from None
    chart, norm = load_surface_file(args.file)
    return OvaloidAtlas(chart.name, chart), norm


def _cmd_integrate(args, out) -> int:
    atlas, file_norm = _atlas(args)
    norm = _normalization(args.normalization, atlas.chart, file_norm)
    counts = _parse_counts(args.nodes, atlas.chart.n, "--nodes")
    rule = gauss_legendre_rule(atlas.chart, counts)
    nodes = "x".join(map(str, counts))
    target = 2.0 * math.pi * atlas.chi
    rows = []  # (quantity, value, target, deviation, tol, pass)

    if args.formula == "euler":
        tol = _positive(args.tol, "--tol") if args.tol is not None else 1e-4
        e = euler_characteristic_integral(atlas, norm, rule)
        rows.append(("S/q", e.value, target, e.deviation, tol, e.deviation < tol))
        rows.append(("S_aff/q_aff", e.affine_value, target, e.affine_deviation, tol,
                     e.affine_deviation < tol))
    elif args.formula == "gaussbonnet":
        tol = _positive(args.tol, "--tol") if args.tol is not None else 1e-4
        e = euler_characteristic_integral(atlas, norm, rule)
        rows.append(("S_II", e.II_value, target, e.II_deviation, tol, e.II_deviation < tol))
    elif args.formula == "meandefect":
        tol = _positive(args.tol, "--tol") if args.tol is not None else 1e-7
        m = mean_curvature_defect_integral(atlas, norm, rule)
        if norm.proportional_to_affine:
            # equality case: the defect must vanish
            rows.append(("H/q-H_aff/q_aff", m.value, 0.0, abs(m.value), tol, abs(m.value) < tol))
        else:
            lower = -1e-8 * m.area
            rows.append(("H/q-H_aff/q_aff", m.value, 0.0, max(0.0, -m.value), -lower, m.nonnegative))
    else:
        tol = _positive(args.tol, "--tol") if args.tol is not None else 1e-6
        s = sign_change_scan(atlas, norm, rule)
        rows.append(("min", s.minimum, 0.0, 0.0, tol, True))
        rows.append(("max", s.maximum, 0.0, 0.0, tol, True))
        rows.append(("pointwise-laplacian", s.pointwise_residual, 0.0, s.pointwise_residual, tol,
                     s.pointwise_residual < tol))
        rows.append(("laplacian-integral", s.laplacian_integral, 0.0,
                     abs(s.laplacian_integral), tol, abs(s.laplacian_integral) < tol))

    fmt = args.format
    if fmt == "csv":
        out.write(_csv_text(INTEGRATE_HEADER, [
            (atlas.name, norm.describe(), q, nodes, _num(v, fmt), _num(t, fmt),
             _num(d, fmt), _num(tl, fmt), _flag(ok, fmt))
            for q, v, t, d, tl, ok in rows]))
    else:
        out.write(f"{args.formula} on {atlas.name}  normalization {norm.describe()}  nodes {nodes}\n")
        for q, v, t, d, tl, ok in rows:
            out.write(f"  {q:<20} {_num(v, fmt):<14} target {_num(t, fmt):<10} "
                      f"deviation {_num(d, fmt):<12} tol {_num(tl, fmt)}  {_flag(ok, fmt)}\n")
        if args.formula == "signscan":
            out.write(f"  status {s.status}\n")
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="relgeo", description="Relative-geometric invariants of parametric hypersurfaces.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, normalization=True):
        sp.add_argument("--surface", help="catalog surface name (see `relgeo catalog`)")
        sp.add_argument("--file", help="surface-definition file")
        if normalization:
            sp.add_argument("--normalization",
                            help="euclidean | equiaffine | equiaffine*<c> | q:<expr> | seeded[:k]")
        sp.add_argument("--format", choices=("human", "csv"), default="human")

    sp = sub.add_parser("catalog", help="list built-in surfaces")
    sp.add_argument("--format", choices=("human", "csv"), default="human")

    sp = sub.add_parser("invariants", help="print invariants at points")
    common(sp)
    sp.add_argument("--point", action="append", help="comma-separated parameters; repeatable")
    sp.add_argument("--grid", default="5", help="grid counts when no --point is given")

    sp = sub.add_parser("verify", help="evaluate identities as residuals over a grid")
    common(sp)
    sp.add_argument("--identity", help=f"comma list from {','.join(IDENTITY_IDS)}")
    sp.add_argument("--grid", default="17")
    sp.add_argument("--tol")

    sp = sub.add_parser("classify", help="ruled / hyperquadric test")
    common(sp, normalization=False)
    sp.add_argument("--grid", default="17")
    sp.add_argument("--threshold", default="1e-6")
    sp.add_argument("--expect", choices=VERDICTS, help="exit 2 unless the verdict matches")

    sp = sub.add_parser("integrate", help="integral formulas on a closed surface")
    sp.add_argument("formula", choices=FORMULAS)
    common(sp)
    sp.add_argument("--nodes", default="64,128")
    sp.add_argument("--tol")
    return p


_COMMANDS = {
    "catalog": _cmd_catalog,
    "invariants": _cmd_invariants,
    "verify": _cmd_verify,
    "classify": _cmd_classify,
    "integrate": _cmd_integrate,
}


def run_cli(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    """Run one command and return its exit code."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args, out)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        err.write(f"relgeo: error: {e}\n")
    except SurfaceFileError as e:
        err.write(f"relgeo: error: {e}\n")
    except ParseDiagnostic as e:
        text = getattr(args, "normalization", None) or ""
        err.write(f"relgeo: error: {_describe_diagnostic(text, e)}\n")
    except UnknownSurface as e:
        err.write(f"relgeo: error: unknown surface {e.args[0]!r}; see `relgeo catalog`\n")
    except (DimensionMismatch, SignatureViolation, NonpositiveSupport, DomainError) as e:
        err.write(f"relgeo: error: {e}\n")
    except OSError as e:
        err.write(f"relgeo: error: {e}\n")
    except ValueError as e:
        err.write(f"relgeo: error: {e}\n")
    return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

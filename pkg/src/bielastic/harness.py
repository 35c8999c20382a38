"""Experiment runner: built-in examples, convergence orders, reports.

The module bundles nine built-in experiment definitions (two source
problems, three weighted eigenvalue problems, four transmission runs),
drives the solvers level by level, attaches empirical convergence
orders, and serializes the outcome as a text table, CSV, JSON, or plot
data files. User-facing refinement levels are 1-based; each example
carries its own offset into the mesh hierarchy so that level 1 starts
on the coarsest grid the reference values were produced on.
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import error_norms
from .coefficients import Coefficient, as_coefficient
from .eigen import EIG_TOL
from .mesh import DOMAIN_AREAS, generate_domain
from .solvers import (
    CERT_TOL,
    SECANT_FTOL,
    TepBlocks,
    find_teps_quadratic,
    find_teps_secant,
    make_realization,
    solve_bielastic_eigs,
    solve_source,
)

DEFAULT_LEVELS = {
    "source": (1, 2, 3, 4),
    "bielastic": (1, 2, 3),
    "tep": (1, 2, 3),
}
LEVEL_CAP = 4
LEVEL_CAP_BIG = 5
SCAN_BRANCHES = 12

SOURCE_NORMS = ("l2", "h1", "h2")
SOURCE_COLUMNS = ("level", "h", "dofs", "norm", "error", "order", "seconds")
EIGEN_COLUMNS = (
    "level", "h", "dofs", "branch", "value_re", "value_im",
    "order", "residual", "seconds",
)

PI = np.pi


def _mirror_exact(v, gx, gy, hxx, hxy, hyy):
    """Exact-solution table for a vector field whose second component is
    the first with swapped arguments."""
    return {
        "v": (v, lambda x, y: v(y, x)),
        "gx": (gx, lambda x, y: gy(y, x)),
        "gy": (gy, lambda x, y: gx(y, x)),
        "hxx": (hxx, lambda x, y: hyy(y, x)),
        "hxy": (hxy, lambda x, y: hxy(y, x)),
        "hyy": (hyy, lambda x, y: hxx(y, x)),
    }


def _zero_exact():
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    return {key: (zero, zero) for key in ("v", "gx", "gy", "hxx", "hxy", "hyy")}


def _ex1_v(x, y):
    return np.sin(PI * x) ** 2 * np.sin(PI * y) ** 3


def _ex1_gx(x, y):
    return PI * np.sin(2 * PI * x) * np.sin(PI * y) ** 3


def _ex1_gy(x, y):
    return 3 * PI * np.sin(PI * x) ** 2 * np.sin(PI * y) ** 2 * np.cos(PI * y)


def _ex1_hxx(x, y):
    return 2 * PI ** 2 * np.cos(2 * PI * x) * np.sin(PI * y) ** 3


def _ex1_hxy(x, y):
    return 3 * PI ** 2 * np.sin(2 * PI * x) * np.sin(PI * y) ** 2 * np.cos(PI * y)


def _ex1_hyy(x, y):
    s = np.sin(PI * y)
    return 3 * PI ** 2 * np.sin(PI * x) ** 2 * s * (2 - 3 * s ** 2)


def ex1_load_1(x, y):
    """First load component of the trigonometric source benchmark."""
    cx, cy = np.cos(PI * x), np.cos(PI * y)
    poly = (663 * cx ** 2 * cy ** 2 - 770 * cx * cy + 910 * cx ** 3 * cy
            - 347 * cx ** 2 - 345 * cy ** 2 + 177)
    return 3 * PI ** 4 * np.sin(PI * y) / 256 * poly


def ex1_load_2(x, y):
    """Second load component, the first with swapped arguments."""
    return ex1_load_1(y, x)


def _ex2_v(x, y):
    return x ** 2 * y ** 3 * (x + y - 1) ** 2


def _ex2_gx(x, y):
    return 2 * x * y ** 3 * (2 * x ** 2 + 3 * x * y - 3 * x + y ** 2 - 2 * y + 1)


def _ex2_gy(x, y):
    return x ** 2 * y ** 2 * (
        3 * x ** 2 + 8 * x * y - 6 * x + 5 * y ** 2 - 8 * y + 3
    )


def _ex2_hxx(x, y):
    return 2 * y ** 3 * (6 * x ** 2 + 6 * x * y - 6 * x + y ** 2 - 2 * y + 1)


def _ex2_hxy(x, y):
    return 2 * x * y ** 2 * (
        6 * x ** 2 + 12 * x * y - 9 * x + 5 * y ** 2 - 8 * y + 3
    )


def _ex2_hyy(x, y):
    return 2 * x ** 2 * y * (
        3 * x ** 2 + 12 * x * y - 6 * x + 10 * y ** 2 - 12 * y + 3
    )


def ex2_load_1(x, y):
    """First load component of the polynomial source benchmark."""
    return (49 * x ** 4 / 2 + 289 * x ** 3 * y / 2 + 202 * x ** 3
            + 123 * x ** 2 * y ** 2 / 2 + 1080 * x ** 2 * y
            - 345 * x ** 2 / 2 - 149 * x * y ** 3 / 2 + 1308 * x * y ** 2
            - 1425 * x * y / 2 - 44 * y ** 4 + 450 * y ** 3
            - 402 * y ** 2 + 108 * y)


def ex2_load_2(x, y):
    """Second load component of the polynomial source benchmark."""
    return (44 * x ** 4 + 149 * x ** 3 * y / 2 + 358 * x ** 3
            - 123 * x ** 2 * y ** 2 / 2 + 1284 * x ** 2 * y - 366 * x ** 2
            - 289 * x * y ** 3 / 2 + 1296 * x * y ** 2 - 1551 * x * y / 2
            + 108 * x - 49 * y ** 4 / 2 + 230 * y ** 3 - 327 * y ** 2 / 2)


EX1_EXACT = _mirror_exact(_ex1_v, _ex1_gx, _ex1_gy, _ex1_hxx, _ex1_hxy,
                          _ex1_hyy)
EX2_EXACT = _mirror_exact(_ex2_v, _ex2_gx, _ex2_gy, _ex2_hxx, _ex2_hxy,
                          _ex2_hyy)


@dataclass(frozen=True)
class ExampleDef:
    """One built-in experiment: domain, coefficients, and run defaults."""

    number: int
    kind: str
    domain: str
    lam: float
    mu: float
    mesh_offset: int
    beta: object = None
    rho0: object = None
    rho1: object = None
    loads: tuple = None
    exact: dict = None
    method: str = "secant"
    branches: int = 6
    note: str = ""


EXAMPLES = {
    1: ExampleDef(
        1, "source", "unit-square", 0.25, 0.0625, 1,
        beta=Coefficient.constant(1.0),
        loads=(ex1_load_1, ex1_load_2), exact=EX1_EXACT,
        note="trigonometric manufactured solution, constant weight",
    ),
    2: ExampleDef(
        2, "source", "right-triangle", 0.25, 0.25, 1,
        beta=Coefficient.affine(8.0, 1.0, -1.0),
        loads=(ex2_load_1, ex2_load_2), exact=EX2_EXACT,
        note="polynomial manufactured solution, affine weight",
    ),
    3: ExampleDef(
        3, "bielastic", "unit-square", 0.25, 0.0625, 1,
        beta=Coefficient.constant(1.0),
        note="constant weight eigenvalue run",
    ),
    4: ExampleDef(
        4, "bielastic", "unit-square", 0.25, 0.0625, 1,
        beta=Coefficient.affine(8.0, 1.0, -1.0),
        note="affine weight eigenvalue run",
    ),
    5: ExampleDef(
        5, "bielastic", "equilateral-triangle", 0.25, 0.25, 2,
        beta=Coefficient.radial_quadratic(4.0),
        note="quadratic weight eigenvalue run",
    ),
    6: ExampleDef(
        6, "tep", "unit-square", 0.25, 0.25, 0,
        rho0=Coefficient.constant(0.05), rho1=Coefficient.constant(3.0),
        branches=10, note="constant densities",
    ),
    7: ExampleDef(
        7, "tep", "unit-square", 0.25, 1.0 / 12.0, 0,
        rho0=Coefficient.constant(0.5),
        rho1=Coefficient.affine(4.0, 1.0, -1.0),
        branches=10, note="affine inner density",
    ),
    8: ExampleDef(
        8, "tep", "equilateral-triangle", 0.25, 0.0625, 0,
        rho0=Coefficient.constant(0.125),
        rho1=Coefficient.radial_quadratic(4.0),
        branches=10, note="quadratic inner density",
    ),
    9: ExampleDef(
        9, "tep", "l-shape", 0.25, 0.0625, 0,
        rho0=Coefficient.constant(1.0), rho1=Coefficient.constant(4.0),
        method="quadratic", branches=10,
        note="nonconvex domain, complex pairs expected",
    ),
}


def check_levels(levels, big=False):
    """Validated, sorted, deduplicated 1-based refinement levels."""
    cap = LEVEL_CAP_BIG if big else LEVEL_CAP
    out = sorted({int(lvl) for lvl in levels})
    if not out:
        raise ValueError("no refinement levels requested")
    if out[0] < 1:
        raise ValueError(f"levels are 1-based, got {out[0]}")
    if out[-1] > cap:
        raise ValueError(
            f"level {out[-1]} exceeds the cap {cap}"
            + ("" if big else "; pass big=True (--big) to allow level 5")
        )
    return tuple(out)


def source_order(errors):
    """Empirical orders log2(e_prev / e_next) per consecutive error pair.

    A vanishing (or negative, from roundoff) error makes the pair's order
    the literal string "exact".
    """
    errs = [float(e) for e in errors]
    if len(errs) < 2:
        raise ValueError("need at least two error values")
    out = []
    for prev, cur in zip(errs, errs[1:]):
        if prev <= 0.0 or cur <= 0.0:
            out.append("exact")
        else:
            out.append(float(np.log2(prev / cur)))
    return out


def eig_order(values, ref=None):
    """Empirical convergence orders of an eigenvalue sequence.

    Without an explicit reference, the error of each level is measured
    against the next finer level in the sequence, giving one order per
    consecutive triple; this is how the reference tables' Ord columns
    are produced. With ``ref`` given, errors are |v - ref| and one order
    per consecutive pair is returned. Vanishing differences give the
    literal "exact".
    """
    vals = np.asarray(list(values))
    if ref is None:
        if vals.size < 3:
            raise ValueError("need at least three values")
        errs = np.abs(np.diff(vals))
    else:
        if vals.size < 2:
            raise ValueError("need at least two values")
        errs = np.abs(vals - ref)
    out = []
    for a, b in zip(errs, errs[1:]):
        if a == 0.0 or b == 0.0:
            out.append("exact")
        else:
            out.append(float(np.log2(a / b)))
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _sig6(value):
    return f"{value:.6g}"


def _fmt_value(re_part, im_part):
    if im_part:
        return f"{re_part:.6g}{im_part:+.6g}i"
    return _sig6(re_part)


@dataclass
class ExperimentReport:
    """Uniform result container for all three experiment kinds.

    Rows are per-level dictionaries (one per norm for source runs, one
    per branch for eigenvalue runs). The ``orders`` mapping carries the
    per-pair convergence orders and the final (finest usable) order per
    tracked quantity.
    """

    kind: str
    rows: list
    meta: dict
    orders: dict = field(default_factory=dict)

    @property
    def columns(self):
        return SOURCE_COLUMNS if self.kind == "source" else EIGEN_COLUMNS

    def to_csv(self):
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_cell(row.get(col)) for col in self.columns))
        return "\n".join(lines) + "\n"

    def to_json(self):
        payload = {
            "meta": _plain(self.meta),
            "orders": _plain(self.orders),
            "rows": _plain(self.rows),
        }
        return json.dumps(payload, indent=2) + "\n"

    def _stem(self):
        number = self.meta.get("example")
        return f"example{number}" if number else self.kind

    def plot_data(self):
        """(h, error) column files keyed by file name, one per tracked
        quantity; eigenvalue errors are taken against the finest level
        present in the run."""
        stem = self._stem()
        files = {}
        if self.kind == "source":
            for norm in SOURCE_NORMS:
                rows = [r for r in self.rows if r["norm"] == norm]
                lines = ["# h  error"]
                lines += [f"{r['h']!r} {r['error']!r}" for r in rows]
                files[f"{stem}_{norm}.dat"] = "\n".join(lines) + "\n"
            return files
        by_branch = {}
        for row in self.rows:
            by_branch.setdefault(row["branch"], []).append(row)
        for branch, rows in sorted(by_branch.items()):
            if len(rows) < 2:
                continue
            ref = complex(rows[-1]["value_re"], rows[-1]["value_im"])
            lines = ["# h  error"]
            for row in rows[:-1]:
                err = abs(complex(row["value_re"], row["value_im"]) - ref)
                if err == 0.0:
                    continue
                lines.append(f"{row['h']!r} {err!r}")
            if len(lines) > 1:
                files[f"{stem}_lambda{branch}.dat"] = "\n".join(lines) + "\n"
        return files

    def table(self):
        """Human-readable layout: one row per tracked quantity, one value
        column per level, final order last. Values carry 6 significant
        digits; a trailing * marks a possible branch crossing."""
        meta = self.meta
        head = [f"# {self._stem()} ({self.kind}) domain={meta['domain']}"]
        bits = [f"element={meta['element']}"]
        for key in ("lam", "mu", "alpha", "method"):
            if meta.get(key) is not None:
                bits.append(f"{key}={_sig6(meta[key]) if isinstance(meta[key], float) else meta[key]}")
        head.append("# " + " ".join(bits))
        levels = meta["levels"]
        hs = meta["h"]
        header = ["quantity"] + [
            f"L{lvl} (h={_sig6(h)})" for lvl, h in zip(levels, hs)
        ] + ["Ord"]
        body = []
        starred = False
        if self.kind == "source":
            for norm in SOURCE_NORMS:
                rows = {r["level"]: r for r in self.rows if r["norm"] == norm}
                cells = [norm]
                for lvl in levels:
                    row = rows.get(lvl)
                    cells.append(_sig6(row["error"]) if row else "")
                cells.append(self._final_order_cell(norm))
                body.append(cells)
        else:
            branches = sorted({r["branch"] for r in self.rows})
            for branch in branches:
                rows = {r["level"]: r for r in self.rows
                        if r["branch"] == branch}
                cells = [f"lambda_{branch}"]
                for lvl in levels:
                    row = rows.get(lvl)
                    if row is None:
                        cells.append("")
                        continue
                    text = _fmt_value(row["value_re"], row["value_im"])
                    if row.get("crossing"):
                        text += "*"
                        starred = True
                    cells.append(text)
                cells.append(self._final_order_cell(f"lambda_{branch}"))
                body.append(cells)
        widths = [max(len(header[i]), *(len(r[i]) for r in body))
                  for i in range(len(header))]
        lines = head
        lines.append("  ".join(h.rjust(w) for h, w in zip(header, widths)))
        for cells in body:
            lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
        if starred:
            lines.append("# * possible branch crossing near the root")
        return "\n".join(lines) + "\n"

    def _final_order_cell(self, label):
        entry = self.orders.get(label)
        if not entry or entry.get("final") is None:
            return ""
        final = entry["final"]
        return final if isinstance(final, str) else _sig6(final)


def _base_meta(kind, domain, element, levels, lam, mu, **extra):
    meta = {
        "kind": kind,
        "domain": domain,
        "element": element,
        "levels": list(levels),
        "lam": float(lam),
        "mu": float(mu),
        "h": [],
        "dofs": [],
        "version": __version__,
        "tolerances": {
            "eig": EIG_TOL,
            "secant_ftol": SECANT_FTOL,
            "root_certificate": CERT_TOL,
        },
    }
    meta.update(extra)
    return meta


def _attach_orders(rows, label_key, levels, series, ref=None, mode="eig"):
    """Compute per-pair orders for each tracked label and write them into
    the matching rows (orders attach to the finest level of each pair or
    triple)."""
    out = {}
    for label, values in series.items():
        if mode == "source":
            ords = source_order(values) if len(values) >= 2 else []
            offset = 1
        else:
            if len(values) < (2 if ref is not None else 3):
                continue
            ords = eig_order(values, ref=ref)
            offset = 1 if ref is not None else 2
        final = ords[-1] if ords else None
        out[label] = {"orders": ords, "final": final}
        for i, value in enumerate(ords):
            level = levels[i + offset]
            for row in rows:
                if row["level"] == level and row[label_key] == _label_raw(label):
                    row["order"] = value
    return out


def _label_raw(label):
    if isinstance(label, str) and label.startswith("lambda_"):
        return int(label.split("_")[1])
    return label


def run_source(domain, beta, lam, mu, f1, f2, exact=None, levels=None,
               element="b3", alpha=None, mesh_offset=1, big=False):
    """Source-problem convergence run over the requested levels."""
    levels = check_levels(DEFAULT_LEVELS["source"] if levels is None
                          else levels, big)
    beta = as_coefficient(beta)
    meta = _base_meta("source", domain, element, levels, lam, mu,
                      alpha=alpha, mesh_offset=mesh_offset,
                      norm_kind="error" if exact is not None else "solution")
    rows = []
    series = {norm: [] for norm in SOURCE_NORMS}
    for lvl in levels:
        mesh = generate_domain(domain, lvl - 1 + mesh_offset)
        real = make_realization(mesh, element)
        t0 = time.perf_counter()
        res = solve_source(real, beta, lam, mu, f1, f2, exact=exact,
                           alpha=alpha)
        norms = res.norms if exact is not None else error_norms(
            real.space, res.broken, _zero_exact()
        )
        seconds = time.perf_counter() - t0
        meta["h"].append(mesh.h)
        meta["dofs"].append(res.dofs)
        for norm in SOURCE_NORMS:
            series[norm].append(norms[norm])
            rows.append({
                "level": lvl, "h": mesh.h, "dofs": res.dofs, "norm": norm,
                "error": float(norms[norm]), "order": None,
                "seconds": seconds,
            })
    orders = _attach_orders(rows, "norm", levels, series, mode="source")
    return ExperimentReport("source", rows, meta, orders)


def run_bielastic(domain, beta, lam, mu, levels=None, k=6, element="b3",
                  alpha=None, mesh_offset=0, big=False):
    """Weighted fourth-order eigenvalue run over the requested levels."""
    levels = check_levels(DEFAULT_LEVELS["bielastic"] if levels is None
                          else levels, big)
    beta = as_coefficient(beta)
    meta = _base_meta("bielastic", domain, element, levels, lam, mu,
                      alpha=alpha, k=k, mesh_offset=mesh_offset)
    rows = []
    series = {}
    for lvl in levels:
        mesh = generate_domain(domain, lvl - 1 + mesh_offset)
        real = make_realization(mesh, element)
        t0 = time.perf_counter()
        res = solve_bielastic_eigs(real, beta, lam, mu, k, alpha=alpha)
        seconds = time.perf_counter() - t0
        meta["h"].append(mesh.h)
        meta["dofs"].append(real.dofs)
        for j, value in enumerate(res.values, start=1):
            series.setdefault(f"lambda_{j}", []).append(float(value))
            rows.append({
                "level": lvl, "h": mesh.h, "dofs": real.dofs, "branch": j,
                "value_re": float(value), "value_im": 0.0, "order": None,
                "residual": float(res.residuals[j - 1]), "seconds": seconds,
            })
    full = {lab: vals for lab, vals in series.items()
            if len(vals) == len(levels)}
    orders = _attach_orders(rows, "branch", levels, full)
    return ExperimentReport("bielastic", rows, meta, orders)


def _canonical_complex(values, residuals):
    """Deterministic ordering: ascending modulus (rounded), then ascending
    imaginary part, so each conjugate pair lists its negative member
    first."""
    values = np.asarray(values)
    residuals = np.asarray(residuals)
    key = np.lexsort((values.imag, np.round(values.real, 9),
                      np.round(np.abs(values), 9)))
    return values[key], residuals[key]


def run_tep(domain, lam, mu, rho0, rho1, levels=None, k=10, element="b3",
            alpha=None, method="secant", tau_lo=0.25, tau_hi=None, grid=60,
            mesh_offset=0, big=False):
    """Transmission-eigenvalue run via secant root tracking (real values)
    or companion linearization (complex values allowed)."""
    levels = check_levels(DEFAULT_LEVELS["tep"] if levels is None else levels,
                          big)
    if method not in ("secant", "quadratic"):
        raise ValueError(f"unknown method {method!r}")
    rho0, rho1 = as_coefficient(rho0), as_coefficient(rho1)
    meta = _base_meta("tep", domain, element, levels, lam, mu, alpha=alpha,
                      k=k, method=method, mesh_offset=mesh_offset)
    rows = []
    series = {}
    case = None
    for lvl in levels:
        mesh = generate_domain(domain, lvl - 1 + mesh_offset)
        real = make_realization(mesh, element)
        t0 = time.perf_counter()
        blocks = TepBlocks(real, lam, mu, rho0, rho1, alpha=alpha)
        case = blocks.case
        if method == "secant":
            roots = find_teps_secant(
                blocks, k=max(SCAN_BRANCHES, k + 2),
                tau_lo=tau_lo, tau_hi=tau_hi, grid=grid,
            )[:k]
            seconds = time.perf_counter() - t0
            for j, root in enumerate(roots, start=1):
                series.setdefault(f"lambda_{j}", []).append(root.tau)
                rows.append({
                    "level": lvl, "h": mesh.h, "dofs": real.dofs,
                    "branch": j, "value_re": float(root.tau),
                    "value_im": 0.0, "order": None,
                    "residual": float(root.residual), "seconds": seconds,
                    "crossing": bool(root.crossing_flag),
                    "scan_branch": int(root.branch),
                    "iterations": int(root.iterations),
                })
        else:
            res = find_teps_quadratic(blocks, k)
            seconds = time.perf_counter() - t0
            values, residuals = _canonical_complex(res.values, res.residuals)
            for j, value in enumerate(values, start=1):
                value = complex(value)
                series.setdefault(f"lambda_{j}", []).append(value)
                rows.append({
                    "level": lvl, "h": mesh.h, "dofs": real.dofs,
                    "branch": j, "value_re": value.real,
                    "value_im": value.imag, "order": None,
                    "residual": float(residuals[j - 1]), "seconds": seconds,
                })
        meta["h"].append(mesh.h)
        meta["dofs"].append(real.dofs)
    meta["case"] = case
    full = {lab: vals for lab, vals in series.items()
            if len(vals) == len(levels)}
    orders = _attach_orders(rows, "branch", levels, full)
    return ExperimentReport("tep", rows, meta, orders)


def run_example(number, levels=None, element="b3", alpha=None, method=None,
                k=None, tau_range=None, big=False):
    """Execute one built-in example and return its report.

    Overrides are validated against the example kind: alpha requires the
    morley element, method and tau_range apply only to transmission runs,
    and k only to eigenvalue runs.
    """
    try:
        ex = EXAMPLES[int(number)]
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"unknown example {number!r}; valid numbers are 1-9")
    if alpha is not None and element != "morley":
        raise ValueError("alpha applies only to the morley element")
    if method is not None and ex.kind != "tep":
        raise ValueError("method applies only to transmission runs")
    if tau_range is not None and ex.kind != "tep":
        raise ValueError("tau_range applies only to transmission runs")
    if k is not None and ex.kind == "source":
        raise ValueError("k applies only to eigenvalue runs")
    if levels is None:
        levels = DEFAULT_LEVELS[ex.kind]
    if ex.kind == "source":
        report = run_source(
            ex.domain, ex.beta, ex.lam, ex.mu, ex.loads[0], ex.loads[1],
            exact=ex.exact, levels=levels, element=element, alpha=alpha,
            mesh_offset=ex.mesh_offset, big=big,
        )
    elif ex.kind == "bielastic":
        report = run_bielastic(
            ex.domain, ex.beta, ex.lam, ex.mu, levels=levels,
            k=ex.branches if k is None else int(k), element=element,
            alpha=alpha, mesh_offset=ex.mesh_offset, big=big,
        )
    else:
        chosen = ex.method if method is None else method
        if tau_range is not None and chosen != "secant":
            raise ValueError("tau_range applies only to the secant method")
        tau_lo, tau_hi = (0.25, None) if tau_range is None else tau_range
        report = run_tep(
            ex.domain, ex.lam, ex.mu, ex.rho0, ex.rho1, levels=levels,
            k=ex.branches if k is None else int(k), element=element,
            alpha=alpha, method=chosen, tau_lo=tau_lo, tau_hi=tau_hi,
            mesh_offset=ex.mesh_offset, big=big,
        )
    report.meta["example"] = ex.number
    report.meta["note"] = ex.note
    return report


def _spot_points():
    rng = np.random.default_rng(160816)
    pts = rng.uniform((0.35, 0.05), (0.48, 0.20), size=(5, 2))
    return pts[:, 0], pts[:, 1]


def _check(checks, name, ok, detail=""):
    checks.append((name, bool(ok), detail))


def _coefficient_restatements():
    """Independently written forms of every built-in coefficient and load,
    keyed by a short name. Each entry is (registry callable, restatement)."""
    def ex1_f1_alt(x, y):
        c1, c2 = np.cos(PI * x), np.cos(PI * y)
        horner = ((910 * c2) * c1 ** 3
                  + (663 * c2 ** 2 - 347) * c1 ** 2
                  - (770 * c2) * c1
                  + (177 - 345 * c2 ** 2))
        return (3.0 / 256.0) * PI ** 4 * np.sin(PI * y) * horner

    def ex2_f1_alt(x, y):
        doubled = (49 * x ** 4 + 289 * x ** 3 * y + 404 * x ** 3
                   + 123 * x ** 2 * y ** 2 + 2160 * x ** 2 * y - 345 * x ** 2
                   - 149 * x * y ** 3 + 2616 * x * y ** 2 - 1425 * x * y
                   - 88 * y ** 4 + 900 * y ** 3 - 804 * y ** 2 + 216 * y)
        return 0.5 * doubled

    def ex2_f2_alt(x, y):
        doubled = (88 * x ** 4 + 149 * x ** 3 * y + 716 * x ** 3
                   - 123 * x ** 2 * y ** 2 + 2568 * x ** 2 * y - 732 * x ** 2
                   - 289 * x * y ** 3 + 2592 * x * y ** 2 - 1551 * x * y
                   + 216 * x - 49 * y ** 4 + 460 * y ** 3 - 327 * y ** 2)
        return 0.5 * doubled

    pairs = {
        "example1.beta": (EXAMPLES[1].beta, lambda x, y: np.ones_like(x)),
        "example1.f1": (ex1_load_1, ex1_f1_alt),
        "example1.f2": (ex1_load_2, lambda x, y: ex1_f1_alt(y, x)),
        "example2.beta": (EXAMPLES[2].beta, lambda x, y: 8.0 + x - y),
        "example2.f1": (ex2_load_1, ex2_f1_alt),
        "example2.f2": (ex2_load_2, ex2_f2_alt),
        "example3.beta": (EXAMPLES[3].beta, lambda x, y: np.ones_like(x)),
        "example4.beta": (EXAMPLES[4].beta, lambda x, y: 8.0 + x - y),
        "example5.beta": (EXAMPLES[5].beta,
                          lambda x, y: 4.0 + x * x + y * y),
        "example6.rho0": (EXAMPLES[6].rho0, lambda x, y: 0.05 + 0.0 * x),
        "example6.rho1": (EXAMPLES[6].rho1, lambda x, y: 3.0 + 0.0 * x),
        "example7.rho0": (EXAMPLES[7].rho0, lambda x, y: 0.5 + 0.0 * x),
        "example7.rho1": (EXAMPLES[7].rho1, lambda x, y: 4.0 + x - y),
        "example8.rho0": (EXAMPLES[8].rho0, lambda x, y: 0.125 + 0.0 * x),
        "example8.rho1": (EXAMPLES[8].rho1,
                          lambda x, y: 4.0 + x * x + y * y),
        "example9.rho0": (EXAMPLES[9].rho0, lambda x, y: 1.0 + 0.0 * x),
        "example9.rho1": (EXAMPLES[9].rho1, lambda x, y: 4.0 + 0.0 * x),
    }
    return pairs


def self_test(stream=None):
    """Cheap independent spot checks of the built-in definitions.

    Verifies every registry coefficient and load at five random interior
    points against independently written restatements, checks the exact
    solution tables against finite differences, mesh areas against the
    reference geometry, and the sparse eigensolver against a dense
    oracle. Returns True when every check passes.
    """
    checks = []
    x, y = _spot_points()

    for name, (coeff, alt) in _coefficient_restatements().items():
        if isinstance(coeff, Coefficient):
            got = np.array([coeff(float(a), float(b)) for a, b in zip(x, y)])
        else:
            got = coeff(x, y)
        want = alt(x, y)
        err = float(np.max(np.abs(np.asarray(got) - want)))
        _check(checks, f"coefficient {name}", err <= 1e-12 * (1.0 + float(np.max(np.abs(want)))),
               f"max deviation {err:.3e}")

    for label, table in (("example1", EX1_EXACT), ("example2", EX2_EXACT)):
        ok, worst = _derivative_table_consistent(table, x, y)
        _check(checks, f"{label} exact-solution derivatives", ok,
               f"worst finite-difference deviation {worst:.3e}")

    for domain, area in DOMAIN_AREAS.items():
        mesh = generate_domain(domain, 1)
        got = float(np.sum(mesh.signed_areas()))
        _check(checks, f"mesh area {domain}", abs(got - area) <= 1e-12,
               f"sum of signed areas {got!r}")

    rng = np.random.default_rng(8)
    n = 40
    raw = rng.standard_normal((n, n))
    a = raw + raw.T + 2.0 * n * np.eye(n)
    raw = rng.standard_normal((n, n))
    b = raw @ raw.T + n * np.eye(n)
    from scipy.linalg import eigh as dense_eigh
    from .eigen import eig_sym_gen
    want = dense_eigh(a, b, subset_by_index=[0, 4])[0]
    got = eig_sym_gen(a, b, 5).values
    err = float(np.max(np.abs(got - want) / np.abs(want)))
    _check(checks, "sparse eigensolver vs dense oracle", err <= 1e-9,
           f"max relative deviation {err:.3e}")

    mesh = generate_domain("unit-square", 0)
    real = make_realization(mesh, "b3")
    zero = lambda x1, x2: np.zeros_like(x1)
    res = solve_source(real, 1.0, 0.25, 0.0625, zero, zero)
    _check(checks, "zero load gives zero solution",
           float(np.max(np.abs(res.broken))) <= 1e-10,
           f"max coefficient {float(np.max(np.abs(res.broken))):.3e}")

    anchor_real = make_realization(generate_domain("unit-square", 1), "b3")
    eig = solve_bielastic_eigs(anchor_real, 1.0, 0.25, 0.0625, 1)
    lam1 = float(eig.values[0])
    _check(checks, "coarse eigenvalue anchor",
           abs(lam1 - 25.357741) <= 1e-3,
           f"lambda_1 {lam1!r}")

    all_ok = True
    for name, ok, detail in checks:
        all_ok &= ok
        if stream is not None:
            mark = "ok  " if ok else "FAIL"
            suffix = f" ({detail})" if detail else ""
            print(f"{mark} {name}{suffix}", file=stream)
    return all_ok


def _derivative_table_consistent(table, x, y, step=1e-6):
    """Finite-difference consistency of a two-component exact-solution
    table: gradients against values, second derivatives against
    gradients."""
    worst = 0.0
    for comp in (0, 1):
        v = table["v"][comp]
        gx, gy = table["gx"][comp], table["gy"][comp]
        hxx, hxy, hyy = (table["hxx"][comp], table["hxy"][comp],
                         table["hyy"][comp])
        fd = [
            (gx, lambda a, b: (v(a + step, b) - v(a - step, b)) / (2 * step)),
            (gy, lambda a, b: (v(a, b + step) - v(a, b - step)) / (2 * step)),
            (hxx, lambda a, b: (gx(a + step, b) - gx(a - step, b)) / (2 * step)),
            (hyy, lambda a, b: (gy(a, b + step) - gy(a, b - step)) / (2 * step)),
            (hxy, lambda a, b: (gx(a, b + step) - gx(a, b - step)) / (2 * step)),
        ]
        for exact_fn, approx_fn in fd:
            got = exact_fn(x, y)
            ref = approx_fn(x, y)
            scale = 1.0 + float(np.max(np.abs(got)))
            worst = max(worst, float(np.max(np.abs(got - ref))) / scale)
    return worst <= 1e-7, worst

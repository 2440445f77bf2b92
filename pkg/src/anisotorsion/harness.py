"""Suite runner, verification records, convergence studies and reports."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .anisogeom import aniso_inradius
from .certificates import sandwich_constants, torsion_bounds
from .convex_body import from_dict
from .io import domain_from_dict, read_json
from .mesh import triangulate
from .solver import FEContext, solve_eigen, solve_torsion

__all__ = [
    "SuiteSpec",
    "VerificationRecord",
    "ConvergenceTable",
    "CSV_COLUMNS",
    "default_constants",
    "evaluate_flags",
    "run_member",
    "run_suite",
    "convergence_study",
    "emit_report",
    "all_pass",
    "resolve_jobs",
]

CSV_COLUMNS = (
    "body", "domain", "N", "R", "area", "T_norm", "T_lower_const", "T_upper_const",
    "lambda_norm", "eig_lower_const", "eig_upper_const", "cert_T_lo", "cert_T_hi",
    "pass_torsion", "pass_eigen",
)

DEFAULT_SLACK = {"torsion": 0.01, "eigen": 0.015}
CERT_TOL = 1e-8


def default_constants(N=2):
    t_lo, t_hi, e_lo, e_hi = sandwich_constants(N)
    return {"T_lower": t_lo, "T_upper": t_hi, "eig_lower": e_lo, "eig_upper": e_hi}


@dataclass
class SuiteSpec:
    """Members are dicts with body/domain descriptions already parsed from JSON."""

    members: list = field(default_factory=list)
    slack: dict = field(default_factory=lambda: dict(DEFAULT_SLACK))
    constants: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    name: str = "suite"

    @classmethod
    def from_dict(cls, spec, base=None):
        """Parse a suite; every referenced file is read here, before any computation."""
        h_default = float(spec.get("h", 0.02))
        q_default = list(spec.get("quantities", ["torsion", "eigen"]))

        def named(entry, kind):
            if isinstance(entry, str):
                return Path(entry).stem, read_json(entry, base)
            if "file" in entry:
                return entry.get("name", Path(entry["file"]).stem), read_json(entry["file"], base)
            if "spec" in entry:
                return entry.get("name", kind), dict(entry["spec"])
            return entry.get("name", kind), dict(entry)

        members = []
        if "pairs" in spec:
            for p in spec["pairs"]:
                bn, bd = named(p["body"], "body")
                dn, dd = named(p["domain"], "domain")
                members.append(_member(bn, bd, dn, dd, p.get("h", h_default), p.get("quantities", q_default)))
        else:
            bodies = [named(b, "body") for b in spec.get("bodies", [])]
            domains = [named(d, "domain") for d in spec.get("domains", [])]
            for bn, bd in bodies:
                for dn, dd in domains:
                    members.append(_member(bn, bd, dn, dd, h_default, q_default))
        slack = dict(DEFAULT_SLACK)
        slack.update(spec.get("slack", {}))
        return cls(members, slack, dict(spec.get("constants", {})), dict(spec.get("outputs", {})),
                   spec.get("name", "suite"))

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(read_json(path), base=path.parent)


def _member(bn, bd, dn, dd, h, quantities):
    h = float(h)
    if not h > 0:
        raise ValueError("mesh size must be positive")
    bad = set(quantities) - {"torsion", "eigen"}
    if bad:
        raise ValueError(f"unknown quantities {sorted(bad)}")
    return {"body_name": bn, "body": bd, "domain_name": dn, "domain": dd, "h": h, "quantities": list(quantities)}


@dataclass
class VerificationRecord:
    body: str
    domain: str
    N: int = 2
    R: float = math.nan
    area: float = math.nan
    T_norm: float = math.nan
    T_lower_const: float = math.nan
    T_upper_const: float = math.nan
    lambda_norm: float = math.nan
    eig_lower_const: float = math.nan
    eig_upper_const: float = math.nan
    cert_T_lo: float = math.nan
    cert_T_hi: float = math.nan
    pass_torsion: bool | None = False
    pass_eigen: bool | None = False
    T: float = math.nan
    lam: float = math.nan
    refined: float = math.nan
    plain_upper: float = math.nan  # R^2 |P| / 3 for the polygon the upper bounds use
    barrier_0: float = math.nan
    h: float = math.nan
    flags: dict = field(default_factory=dict)
    status: str = "ok"
    error: str = ""
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def evaluate_flags(rec: VerificationRecord, slack, quantities=("torsion", "eigen")):
    """Fill the per-inequality flags and the two summary columns."""
    st, se = slack["torsion"], slack["eigen"]
    f = {}
    if "torsion" in quantities:
        f["T_lower"] = bool(rec.T_norm >= rec.T_lower_const * (1 - st))
        f["T_upper"] = bool(rec.T_norm <= rec.T_upper_const * (1 + st))
        f["T_cert"] = bool(rec.cert_T_lo <= rec.T * (1 + st) and rec.T <= rec.cert_T_hi * (1 + CERT_TOL))
        f["refined_strict"] = bool(rec.refined < rec.plain_upper and rec.T <= rec.refined * (1 + CERT_TOL))
        rec.pass_torsion = all(f[k] for k in ("T_lower", "T_upper", "T_cert", "refined_strict"))
    else:
        rec.pass_torsion = None
    if "eigen" in quantities:
        f["eig_lower"] = bool(rec.lambda_norm >= rec.eig_lower_const * (1 - se))
        f["eig_upper"] = bool(rec.lambda_norm <= rec.eig_upper_const * (1 + se))
        rec.pass_eigen = f["eig_lower"] and f["eig_upper"]
    else:
        rec.pass_eigen = None
    rec.flags = f
    return rec


def run_member(member, slack=None, constants=None, opts=None):
    """One verification record; failures are recorded, not raised."""
    slack = slack or DEFAULT_SLACK
    const = default_constants(2)
    const.update(constants or {})
    q = member.get("quantities", ["torsion", "eigen"])
    rec = VerificationRecord(member["body_name"], member["domain_name"], h=float(member["h"]))
    rec.T_lower_const, rec.T_upper_const = const["T_lower"], const["T_upper"]
    rec.eig_lower_const, rec.eig_upper_const = const["eig_lower"], const["eig_upper"]
    try:
        K = from_dict(member["body"])
        dom = domain_from_dict(member["domain"])
    except Exception as exc:  # noqa: BLE001 - the report must stay total
        rec.status, rec.error = "parse-failure", f"{type(exc).__name__}: {exc}"
        rec.pass_torsion = rec.pass_eigen = False
        return rec
    try:
        rec.R = float(aniso_inradius(K, dom).R)
        rec.area = float(dom.area)
        mesh = triangulate(dom, rec.h)
        ctx = FEContext(mesh)
        rec.diagnostics["n_vertices"] = int(mesh.n_points)
        tor = solve_torsion(K, ctx, opts)
        rec.T = float(tor.value)
        rec.T_norm = rec.T / (rec.area * rec.R**2)
        rec.diagnostics.update(torsion_iterations=tor.iterations, torsion_residual=float(tor.residual))
        if "torsion" in q:
            cert = torsion_bounds(K, dom)
            rec.cert_T_lo, rec.cert_T_hi = float(cert.lower), float(cert.upper)
            rec.refined = float(cert.aux["refined"])
            rec.plain_upper = float(cert.aux["plain_upper"])
            rec.barrier_0 = float(cert.aux["barrier_0"])
            rec.diagnostics["cert_upper_method"] = cert.methods["upper"]
        if "eigen" in q:
            eig = solve_eigen(K, ctx, opts, init=tor.field)
            rec.lam = float(eig.value)
            rec.lambda_norm = rec.lam * rec.R**2
            rec.diagnostics["eigen_iterations"] = eig.iterations
    except Exception as exc:  # noqa: BLE001
        rec.status, rec.error = "solver-failure", f"{type(exc).__name__}: {exc}"
        rec.pass_torsion = rec.pass_eigen = False
        return rec
    return evaluate_flags(rec, slack, q)


def _run_packed(args):
    return run_member(*args)


def resolve_jobs(jobs=None):
    env = os.environ.get("ANISO_JOBS")
    if env:
        return max(1, int(env))
    return max(1, int(jobs or 1))


def run_suite(spec: SuiteSpec, jobs=None, opts=None):
    """Records in spec order; members run in a bounded process pool when ``jobs > 1``."""
    jobs = resolve_jobs(jobs)
    args = [(m, spec.slack, spec.constants, opts) for m in spec.members]
    if not args:
        return []
    if jobs == 1 or len(args) == 1:
        return [_run_packed(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as ex:
        return list(ex.map(_run_packed, args))


def all_pass(records):
    return all(r.pass_torsion is not False and r.pass_eigen is not False for r in records)


# ---------------------------------------------------------------------------
# Reports


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    s = str(v)
    if any(ch in s for ch in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def emit_report(records, path, fmt="csv"):
    """Write records as CSV (fixed columns) or JSON; output is byte-stable."""
    if not records:
        raise ValueError("no records to report")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in records:
            d = r.to_dict()
            lines.append(",".join(_cell(d[c]) for c in CSV_COLUMNS))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps({"records": [r.to_dict() for r in records]}, indent=1, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return Path(path)


# ---------------------------------------------------------------------------
# Convergence


@dataclass
class ConvergenceTable:
    quantity: str
    h: list
    values: list
    diffs: list
    ratios: list
    richardson: float
    complete: bool
    error: str = ""

    def rows(self):
        out = []
        for i, (h, v) in enumerate(zip(self.h, self.values)):
            d = self.diffs[i - 1] if i >= 1 else math.nan
            r = self.ratios[i - 2] if i >= 2 else math.nan
            out.append((h, v, d, r))
        return out

    def to_csv(self):
        lines = ["h,value,diff,ratio"]
        lines += [",".join(repr(float(x)) for x in row) for row in self.rows()]
        lines.append(f"richardson,{float(self.richardson)!r},,")
        return "\n".join(lines) + "\n"


def convergence_study(K, domain, h_list, quantity="torsion", opts=None):
    """Values at decreasing mesh sizes, successive-difference ratios and a Richardson limit."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3 or any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("need at least three strictly decreasing mesh sizes")
    if quantity not in ("torsion", "eigen", "inradius"):
        raise ValueError(f"unknown quantity {quantity!r}")
    values = []
    error = ""
    for h in h_list:
        try:
            if quantity == "inradius":
                values.append(float(aniso_inradius(K, domain).R))
                continue
            ctx = FEContext(triangulate(domain, h))
            if quantity == "torsion":
                values.append(float(solve_torsion(K, ctx, opts).value))
            else:
                values.append(float(solve_eigen(K, ctx, opts).value))
        except Exception as exc:  # noqa: BLE001
            error = f"h={h}: {type(exc).__name__}: {exc}"
            break
    v = np.array(values)
    diffs = list(np.diff(v)) if len(v) > 1 else []
    ratios = []
    for a, b in zip(diffs, diffs[1:]):
        ratios.append(a / b if b != 0 else (math.inf if a != 0 else math.nan))
    rich = (4 * v[-1] - v[-2]) / 3 if len(v) >= 2 else (v[-1] if len(v) else math.nan)
    return ConvergenceTable(quantity, h_list[:len(values)], [float(x) for x in v], [float(x) for x in diffs],
                            [float(x) for x in ratios], float(rich), not error, error)

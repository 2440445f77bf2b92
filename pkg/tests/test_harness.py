import json
import math

import pytest

from anisotorsion import DomainError, Polygon, SolveOptions, disk, square
from anisotorsion.harness import (
    CSV_COLUMNS,
    SuiteSpec,
    VerificationRecord,
    all_pass,
    convergence_study,
    emit_report,
    resolve_jobs,
    run_member,
    run_suite,
)

DISK = {"type": "pball", "p": 2}
SQUARE = {"type": "pball", "p": "inf"}
SQ_DOM = {"type": "rectangle", "half_widths": [1.0, 1.0]}


def small_spec(**extra):
    d = {
        "h": 0.1,
        "pairs": [
            {"body": {"name": "disk", "spec": DISK}, "domain": {"name": "self", "type": "disk"}},
            {"body": {"name": "square", "spec": SQUARE}, "domain": {"name": "rect", "type": "rectangle", "half_widths": [1.0, 0.5]}},
        ],
        "slack": {"torsion": 0.03, "eigen": 0.03},
    }
    d.update(extra)
    return SuiteSpec.from_dict(d)


@pytest.fixture(scope="module")
def records():
    return run_suite(small_spec())


def test_empty_suite():
    assert run_suite(SuiteSpec.from_dict({"bodies": [], "domains": []})) == []
    with pytest.raises(ValueError):
        emit_report([], "unused.csv")


def test_records_pass(records):
    assert len(records) == 2
    assert [r.body for r in records] == ["disk", "square"]
    assert all_pass(records)
    for r in records:
        assert r.status == "ok"
        assert set(r.flags) == {"T_lower", "T_upper", "T_cert", "refined_strict", "eig_lower", "eig_upper"}
        assert r.T_norm == pytest.approx(r.T / (r.area * r.R**2))
        assert r.lambda_norm == pytest.approx(r.lam * r.R**2)


def test_non_convex_domain_isolated():
    spec = SuiteSpec.from_dict({
        "h": 0.1,
        "pairs": [
            {"body": {"name": "disk", "spec": DISK}, "domain": {"name": "bad", "type": "polygon",
                                                                 "vertices": [[0, 0], [2, 0], [1, 0.3], [1, 2]]}},
            {"body": {"name": "disk", "spec": DISK}, "domain": {"name": "square", "spec": SQ_DOM}},
        ],
    })
    bad, good = run_suite(spec)
    assert bad.status == "parse-failure" and "convex" in bad.error
    assert bad.pass_torsion is False and bad.pass_eigen is False
    assert good.status == "ok" and good.pass_torsion and good.pass_eigen


def test_unreadable_spec(tmp_path):
    with pytest.raises(OSError):
        SuiteSpec.load(tmp_path / "missing.json")
    p = tmp_path / "suite.json"
    p.write_text(json.dumps({"bodies": ["nope.json"], "domains": []}))
    with pytest.raises(OSError):
        SuiteSpec.load(p)
    p.write_text(json.dumps({"h": -1, "pairs": [{"body": {"spec": DISK}, "domain": {"spec": SQ_DOM}}]}))
    with pytest.raises(ValueError):
        SuiteSpec.load(p)


def test_report_csv(records, tmp_path):
    p = tmp_path / "one.csv"
    emit_report(records[:1], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert lines[1].split(",")[-2:] == ["true", "true"]
    float(lines[1].split(",")[5])


def test_report_byte_identical(records, tmp_path):
    for fmt in ("csv", "json"):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        emit_report(records, a, fmt)
        emit_report(records, b, fmt)
        assert a.read_bytes() == b.read_bytes()


def test_rerun_is_deterministic(records, tmp_path):
    again = run_suite(small_spec())
    emit_report(records, tmp_path / "a.csv")
    emit_report(again, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_json_roundtrip(records, tmp_path):
    p = tmp_path / "r.json"
    emit_report(records, p, "json")
    back = [VerificationRecord.from_dict(d) for d in json.loads(p.read_text())["records"]]
    assert back == records


def test_parallel_matches_serial(records):
    par = run_suite(small_spec(), jobs=2)
    assert par == records


def test_jobs_env(monkeypatch):
    monkeypatch.setenv("ANISO_JOBS", "3")
    assert resolve_jobs(1) == 3
    monkeypatch.delenv("ANISO_JOBS")
    assert resolve_jobs(None) == 1 and resolve_jobs(4) == 4


@pytest.mark.parametrize(
    "const, flag",
    [
        ({"T_lower": 0.2}, "T_lower"),
        ({"T_upper": 0.1}, "T_upper"),
        ({"eig_lower": 7.0}, "eig_lower"),
        ({"eig_upper": 5.0}, "eig_upper"),
    ],
)
def test_mutation_flips_exactly_one_flag(records, const, flag):
    spec = small_spec()
    member = spec.members[0]
    clean = run_member(member, spec.slack)
    bad = run_member(member, spec.slack, const)
    diff = {k for k in clean.flags if clean.flags[k] != bad.flags[k]}
    assert diff == {flag}
    assert not all_pass([bad])


def test_evaluate_flags_uses_declared_slack(records):
    from anisotorsion.harness import evaluate_flags

    r = VerificationRecord(**records[0].to_dict())
    r.T_norm = r.T_lower_const * (1 - 0.03) * (1 + 1e-12)
    evaluate_flags(r, {"torsion": 0.03, "eigen": 0.03})
    assert r.flags["T_lower"]
    r.T_norm = r.T_lower_const * (1 - 0.03) * (1 - 1e-12)
    evaluate_flags(r, {"torsion": 0.03, "eigen": 0.03})
    assert not r.flags["T_lower"] and r.pass_torsion is False


def test_torsion_only_member():
    spec = SuiteSpec.from_dict({"h": 0.1, "quantities": ["torsion"], "bodies": [{"spec": DISK}], "domains": [{"spec": SQ_DOM}]})
    (r,) = run_suite(spec)
    assert r.pass_torsion is True and r.pass_eigen is None and math.isnan(r.lam)


def test_solver_failure_recorded():
    spec = small_spec()
    r = run_member(spec.members[1], spec.slack, opts=SolveOptions(max_iters=1))
    assert r.status == "solver-failure" and "ConvergenceError" in r.error


# --- convergence study --------------------------------------------------------------------


def test_convergence_inradius_constant():
    tab = convergence_study(square(), Polygon.rectangle(1, 1), [0.2, 0.1, 0.05], "inradius")
    assert tab.values == [1.0, 1.0, 1.0]
    assert tab.complete and tab.richardson == 1.0
    assert tab.to_csv().splitlines()[0] == "h,value,diff,ratio"


def test_convergence_bad_input():
    with pytest.raises(ValueError):
        convergence_study(disk(), Polygon.rectangle(1, 1), [0.1, 0.2, 0.05])
    with pytest.raises(ValueError):
        convergence_study(disk(), Polygon.rectangle(1, 1), [0.2, 0.1])
    with pytest.raises(ValueError):
        convergence_study(disk(), Polygon.rectangle(1, 1), [0.2, 0.1, 0.05], "energy")


def test_convergence_partial_on_failure():
    tab = convergence_study(square(), Polygon.rectangle(1, 1), [0.2, 0.1, 0.05], opts=SolveOptions(max_iters=1))
    assert not tab.complete and tab.values == [] and "ConvergenceError" in tab.error


def test_convergence_square_second_order():
    tab = convergence_study(disk(), Polygon.rectangle(1, 1), [0.2, 0.1, 0.05, 0.025])
    assert all(3 <= r <= 5 for r in tab.ratios[1:])
    assert tab.richardson == pytest.approx(square_torsion_series(2.0), rel=1e-4)


def square_torsion_series(a, n=400):
    # int u for -lap u = 1 on a square of side a, by double sine series
    import numpy as np

    k = np.arange(1, 2 * n, 2, dtype=float)
    m2, n2 = np.meshgrid(k**2, k**2)
    return 64 * a**4 / math.pi**6 * float(np.sum(1 / (m2 * n2 * (m2 + n2))))


def test_domain_errors_propagate():
    from anisotorsion.io import domain_from_dict

    with pytest.raises(DomainError):
        domain_from_dict({"type": "circle"})

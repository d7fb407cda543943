from datetime import datetime, timedelta

import pytest

from lazyfem.models import RunRecord
from lazyfem.services.history import best_timings, recent_runs, record_report, save_run
from lazyfem.services.report import RunReport


def _report(problem="poisson", from_scratch=1.0, in_place=None, h1=1e-3):
    return RunReport(
        problem=problem,
        dofs=42,
        errors={"h1": h1, "l2": h1 / 10},
        timings={"from_scratch_s": from_scratch, "in_place_s": in_place, "solve_s": 0.5},
        iterations=7,
        details={"cells": 8},
    )


def test_save_run_copies_report_fields(session, make_config):
    cfg = make_config(partitions=(4, 2), order=2)
    record = save_run(session, cfg, _report(in_place=0.25))
    assert record.id is not None
    assert record.partitions == "4,2"
    assert record.order == 2
    assert record.dofs == 42
    assert record.h1 == pytest.approx(1e-3)
    assert record.in_place_s == pytest.approx(0.25)
    assert record.mesh_io_s is None
    assert record.created_at is not None
    assert record_report(record).to_dict() == _report(in_place=0.25).to_dict()


def test_recent_runs_are_newest_first(session, make_config):
    cfg = make_config(partitions=(2, 2))
    ids = [save_run(session, cfg, _report(from_scratch=float(i))).id for i in range(3)]
    save_run(session, make_config(problem="stokes", partitions=(2, 2), simplexify=True), _report("stokes"))
    runs = recent_runs(session, "poisson")
    assert [r.id for r in runs] == ids[::-1]
    assert len(recent_runs(session)) == 4
    assert len(recent_runs(session, limit=2)) == 2


def test_recent_runs_follow_creation_time(session):
    now = datetime.utcnow()
    for i, age in enumerate([3, 1, 2]):
        session.add(
            RunRecord(
                problem="poisson", geometry="cube", partitions="2", order=1, dofs=i,
                report=_report().to_json(), created_at=now - timedelta(minutes=age),
            )
        )
    session.commit()
    assert [r.dofs for r in recent_runs(session)] == [1, 2, 0]


def test_best_timings(session, make_config):
    cfg = make_config(partitions=(2, 2))
    save_run(session, cfg, _report(from_scratch=2.0, in_place=0.4))
    save_run(session, cfg, _report(from_scratch=1.5))
    best = best_timings(session, "poisson")
    assert best["from_scratch_s"] == pytest.approx(1.5)
    assert best["in_place_s"] == pytest.approx(0.4)
    assert best["mesh_io_s"] is None
    assert best_timings(session, "stokes")["from_scratch_s"] is None

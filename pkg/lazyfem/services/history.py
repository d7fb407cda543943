from __future__ import annotations

import json

from sqlalchemy import func
from sqlmodel import Session, select

from ..models import RunRecord
from .report import TIMING_KEYS, RunReport


def save_run(session: Session, cfg, report: RunReport) -> RunRecord:
    timings = report.to_dict()["timings"]
    record = RunRecord(
        problem=report.problem,
        geometry=cfg.geometry,
        partitions=",".join(str(n) for n in cfg.partitions),
        order=cfg.order,
        simplexify=cfg.simplexify,
        dofs=report.dofs,
        h1=report.errors.get("h1"),
        l2=report.errors.get("l2"),
        iterations=report.iterations,
        report=report.to_json(),
        **timings,
    )
    session.add(record)
    session.commit()
    session.refresh(record)
    return record


def recent_runs(session: Session, problem: str | None = None, limit: int = 10) -> list[RunRecord]:
    query = select(RunRecord)
    if problem:
        query = query.where(RunRecord.problem == problem)
    query = query.order_by(RunRecord.created_at.desc(), RunRecord.id.desc()).limit(limit)
    return list(session.exec(query).all())


def best_timings(session: Session, problem: str) -> dict[str, float | None]:
    columns = [func.min(getattr(RunRecord, key)) for key in TIMING_KEYS]
    row = session.exec(select(*columns).where(RunRecord.problem == problem)).one()
    return dict(zip(TIMING_KEYS, row))


def record_report(record: RunRecord) -> RunReport:
    return RunReport.from_dict(json.loads(record.report))

from __future__ import annotations

from datetime import datetime
from typing import Optional

from sqlmodel import Field, SQLModel


class RunRecord(SQLModel, table=True):
    id: Optional[int] = Field(default=None, primary_key=True)
    problem: str = Field(index=True)
    geometry: str
    partitions: str
    order: int
    simplexify: bool = False
    dofs: int
    h1: Optional[float] = None
    l2: Optional[float] = None
    from_scratch_s: Optional[float] = None
    in_place_s: Optional[float] = None
    solve_s: Optional[float] = None
    mesh_io_s: Optional[float] = None
    iterations: int = 0
    report: str
    created_at: datetime = Field(default_factory=datetime.utcnow)

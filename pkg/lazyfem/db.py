from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator

from sqlmodel import Session, SQLModel, create_engine

from . import models  # noqa: F401  registers the tables

_engines: dict[str, object] = {}


def get_engine(database_url: str):
    engine = _engines.get(database_url)
    if engine is None:
        engine = create_engine(database_url)
        _engines[database_url] = engine
    return engine


def init_db(database_url: str) -> None:
    SQLModel.metadata.create_all(get_engine(database_url))


@contextmanager
def session_scope(database_url: str) -> Iterator[Session]:
    engine = get_engine(database_url)
    session = Session(engine)
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()

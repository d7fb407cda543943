import os
import sys
from pathlib import Path

import numpy as np
import pytest
from sqlmodel import SQLModel, Session, create_engine

sys.path.append(str(Path(__file__).resolve().parents[1]))

from lazyfem import models  # noqa: E402,F401
from lazyfem.config import RunConfig  # noqa: E402
from lazyfem.geometry import cartesian_model  # noqa: E402

slow = pytest.mark.skipif(os.environ.get("LAZYFEM_SLOW") != "1", reason="set LAZYFEM_SLOW=1 for long runs")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture()
def square():
    return cartesian_model((0.0, 0.0), (1.0, 1.0), (2, 2))


@pytest.fixture()
def triangles():
    return cartesian_model((0.0, 0.0), (1.0, 1.0), (3, 3), simplexify=True)


@pytest.fixture()
def cube():
    return cartesian_model((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (2, 2, 2))


@pytest.fixture()
def make_config(monkeypatch):
    for name in ("LAZYFEM_TOL", "LAZYFEM_REPEATS", "LAZYFEM_WORKERS", "LAZYFEM_DATABASE_URL", "LAZYFEM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)

    def make(**overrides):
        return RunConfig.load(**overrides)

    return make


@pytest.fixture()
def session():
    engine = create_engine("sqlite:///:memory:")
    SQLModel.metadata.create_all(engine)
    with Session(engine) as session:
        yield session

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError

PROBLEMS = ("poisson", "stokes")
SOLUTIONS = ("polynomial", "sine")


def parse_partitions(text: str) -> tuple[int, ...]:
    """``"8"`` means ``(8, 8, 8)``; ``"8,4"`` is taken as given."""
    try:
        values = tuple(int(value) for value in text.split(",") if value.strip())
    except ValueError:
        raise ConfigError(f"partitions must be integers, got {text!r}") from None
    if len(values) == 1:
        values = values * 3
    return values


@dataclass
class RunConfig:
    problem: str = "poisson"
    geometry: str = "cube"
    partitions: tuple[int, ...] = (8, 8, 8)
    order: int = 1
    simplexify: bool = False
    origin: tuple[float, ...] | None = None
    extents: tuple[float, ...] | None = None
    solution: str = "polynomial"
    neumann_tags: tuple[str, ...] = ()
    tol: float = 1e-10
    maxit: int | None = None
    repeats: int = 4
    workers: int = 1
    out: str | None = None
    vtk: str | None = None
    database_url: str | None = None
    log_level: str = "INFO"

    @property
    def dim(self) -> int:
        return len(self.partitions)

    @staticmethod
    def load(**overrides) -> "RunConfig":
        tol = float(os.environ.get("LAZYFEM_TOL", "1e-10"))
        repeats = int(os.environ.get("LAZYFEM_REPEATS", "4"))
        workers = int(os.environ.get("LAZYFEM_WORKERS", "1"))
        database_url = os.environ.get("LAZYFEM_DATABASE_URL") or None
        log_level = os.environ.get("LAZYFEM_LOG_LEVEL", "INFO").upper()

        config = RunConfig(
            tol=tol,
            repeats=repeats,
            workers=workers,
            database_url=database_url,
            log_level=log_level,
        )
        config = replace(config, **{key: value for key, value in overrides.items() if value is not None})
        config.partitions = tuple(int(n) for n in config.partitions)
        config.neumann_tags = tuple(config.neumann_tags)
        config.validate()
        return config

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {', '.join(PROBLEMS)}, got {self.problem!r}")
        if not 1 <= len(self.partitions) <= 3 or any(n < 1 for n in self.partitions):
            raise ConfigError(f"partitions must have 1 to 3 positive entries, got {self.partitions}")
        if not 1 <= self.order <= 4:
            raise ConfigError(f"order must be between 1 and 4, got {self.order}")
        if self.solution not in SOLUTIONS:
            raise ConfigError(f"solution must be one of {', '.join(SOLUTIONS)}, got {self.solution!r}")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ConfigError("maxit must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for name in ("origin", "extents"):
            box = getattr(self, name)
            if box is not None and len(box) != len(self.partitions):
                raise ConfigError(f"{name} needs {len(self.partitions)} entries, got {len(box)}")
        if self.extents is not None and any(e <= 0 for e in self.extents):
            raise ConfigError("extents must be positive")
        if self.geometry.startswith("file:"):
            if not Path(self.geometry[len("file:"):]).is_file():
                raise ConfigError(f"mesh file {self.geometry[len('file:'):]!r} does not exist")
        elif self.geometry == "channel":
            if len(self.partitions) != 3:
                raise ConfigError("the channel geometry needs three partitions")
        elif self.geometry != "cube":
            raise ConfigError(f"geometry must be cube, channel or file:PATH, got {self.geometry!r}")
        if self.problem == "stokes":
            if not self.geometry.startswith("file:"):
                if not self.simplexify:
                    raise ConfigError("stokes needs simplices: pass --simplexify or a mesh file")
                if len(self.partitions) < 2:
                    raise ConfigError("stokes needs a 2D or 3D domain")
            if self.neumann_tags:
                raise ConfigError("neumann tags only apply to the poisson problem")

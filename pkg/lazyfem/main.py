import argparse
import json
import logging
import sys
from pathlib import Path

if __package__ in {None, ""}:
    sys.path.append(str(Path(__file__).resolve().parents[1]))

from lazyfem.config import RunConfig, parse_partitions
from lazyfem.db import init_db, session_scope
from lazyfem.errors import LazyFemError
from lazyfem.services.benchmark import benchmark
from lazyfem.services.history import recent_runs, save_run
from lazyfem.services.poisson import run_poisson
from lazyfem.services.report import RunReport, write_report
from lazyfem.services.stokes import run_stokes

logger = logging.getLogger(__name__)

RUNNERS = {
    "poisson": run_poisson,
    "stokes": run_stokes,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lazyfem", description="Finite element drivers and assembly benchmarks")
    commands = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geo", dest="geometry", help="cube, channel or file:PATH")
    common.add_argument("--n", dest="partitions", type=parse_partitions, help="NX[,NY,NZ]")
    common.add_argument("--order", type=int)
    common.add_argument("--simplexify", action="store_true", default=None)
    common.add_argument("--tol", type=float)
    common.add_argument("--maxit", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="JSON report path")
    common.add_argument("--vtk", help="VTK output path")
    common.add_argument("--db", dest="database_url", help="SQLModel database URL for the run history")

    poisson = commands.add_parser("poisson", parents=[common], help="solve a manufactured Poisson problem")
    poisson.add_argument("--solution", choices=["polynomial", "sine"])
    poisson.add_argument("--neumann", dest="neumann_tags", type=lambda s: tuple(t for t in s.split(",") if t))

    commands.add_parser("stokes", parents=[common], help="solve a Taylor-Hood Stokes problem")

    bench = commands.add_parser("bench", parents=[common], help="time from-scratch and in-place assembly")
    bench.add_argument("--problem", choices=["poisson", "stokes"])
    bench.add_argument("--repeats", type=int)

    history = commands.add_parser("history", help="print stored runs")
    history.add_argument("--db", dest="database_url")
    history.add_argument("--problem", choices=["poisson", "stokes"])
    history.add_argument("--limit", type=int, default=10)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    overrides = {key: value for key, value in vars(args).items() if key not in {"command", "limit"}}
    if args.command in RUNNERS:
        overrides["problem"] = args.command
    return RunConfig.load(**overrides)


def run(args: argparse.Namespace) -> RunReport:
    cfg = _config(args)
    logging.getLogger().setLevel(cfg.log_level)
    if args.command == "bench":
        report = benchmark(cfg)
    else:
        report = RUNNERS[args.command](cfg)
    if cfg.out:
        write_report(report, cfg.out)
    if cfg.database_url:
        init_db(cfg.database_url)
        with session_scope(cfg.database_url) as session:
            save_run(session, cfg, report)
    return report


def show_history(args: argparse.Namespace) -> None:
    cfg = RunConfig.load(database_url=args.database_url)
    if not cfg.database_url:
        raise ValueError("history needs --db or LAZYFEM_DATABASE_URL")
    init_db(cfg.database_url)
    with session_scope(cfg.database_url) as session:
        for record in recent_runs(session, args.problem, args.limit):
            print(json.dumps({"id": record.id, "created_at": record.created_at.isoformat(), **json.loads(record.report)}))


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "history":
            show_history(args)
        else:
            print(run(args).to_json())
    except (LazyFemError, ValueError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: headless experiments and the live session."""

from __future__ import annotations

import argparse
import json
import os
import sys

from ..errors import PlanarMpcError
from ..tasks import builtin_tasks, load_task
from .experiments import EXPERIMENTS, run_experiment


def _default_bind() -> tuple[str, int]:
    raw = os.environ.get("PLANARMPC_BIND", "127.0.0.1:8765")
    host, _, port = raw.rpartition(":")
    return host or "127.0.0.1", int(port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="planarmpc",
        description="Planar whole-body MPC: experiments and live sessions.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named headless experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--task", help="task file or bundled task name")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--duration", type=float, default=None)
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--clock-mode", choices=("simulated", "wallclock"),
                     default="simulated",
                     help="simulated time is deterministic; wallclock runs "
                          "the threaded runtime on the named --task")

    serve = sub.add_parser("serve", help="serve an interactive session")
    serve.add_argument("--task", default="biped_walk",
                       help="task file or bundled task name")
    serve.add_argument("--bind", default=None,
                       help="host:port (default $PLANARMPC_BIND or 127.0.0.1:8765)")
    serve.add_argument("--seed", type=int, default=0)

    sub.add_parser("tasks", help="list bundled tasks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.clock_mode == "wallclock":
                if not args.task:
                    print("error: --clock-mode wallclock needs --task",
                          file=sys.stderr)
                    return 2
                from ..runtime.episode import run_episode_wallclock
                task = load_task(args.task)
                log = run_episode_wallclock(task, duration=args.duration,
                                            seed=args.seed)
                os.makedirs(args.out, exist_ok=True)
                path = os.path.join(args.out, f"{task.name}_wallclock.ndjson")
                log.write(path)
                json.dump({"task": task.name, "mode": "wallclock",
                           "log": path, **log.summary},
                          sys.stdout, indent=2, sort_keys=True, default=str)
                print()
                return 0
            summary = run_experiment(args.experiment, args.out,
                                     task_file=args.task, seed=args.seed,
                                     duration=args.duration)
            json.dump(summary, sys.stdout, indent=2, sort_keys=True)
            print()
            return 0
        if args.command == "serve":
            from .server import serve_session
            if args.bind:
                host, _, port = args.bind.rpartition(":")
                host, port = host or "127.0.0.1", int(port)
            else:
                host, port = _default_bind()
            task = load_task(args.task)
            print(f"serving task '{task.name}' on ws://{host}:{port}")
            serve_session(task, host=host, port=port, seed=args.seed)
            return 0
        if args.command == "tasks":
            for name in builtin_tasks():
                print(name)
            return 0
    except PlanarMpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``depthpose run | sweep | presets list``.

Errors are reported as one JSON object on stderr with a nonzero exit code,
e.g. ``{"error": "ConfigError", "path": "observer.H", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError, IoError
from .harness import report_emit, run, sweep

EXIT_CONFIG = 2
EXIT_IO = 3


def _parse_value(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _load(args) -> cfgmod.ScenarioConfig:
    config = cfgmod.resolve(args.config)
    if getattr(args, "seed", None) is not None:
        config = cfgmod.set_path(config, "seed", args.seed)
    if getattr(args, "transport", None):
        config = cfgmod.set_path(config, "transport.kind", args.transport)
    for name in ("port_a", "port_b"):
        value = getattr(args, name, None)
        if value is not None:
            config = cfgmod.set_path(config, f"transport.{name}", value)
    return config


def _print_summary(report, out_dir) -> None:
    line = {"name": report.config.name, "steps": len(report.times), "out": str(out_dir)}
    for aid, d in report.summary["depth"].items():
        line[f"depth_{aid}"] = {pid: v["convergence_time_s"] for pid, v in d.items()}
    for aid, r in report.summary["relpose"].items():
        line[f"relpose_{aid}"] = [r["convergence_time_translation_s"], r["convergence_time_orientation_s"]]
    print(json.dumps(line, sort_keys=True))


def cmd_run(args) -> int:
    config = _load(args)
    report = run(config)
    out = Path(args.out)
    report_emit(report, out)
    _print_summary(report, out)
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
    reports = sweep(config, args.param, values, jobs=args.jobs)
    out = Path(args.out)
    for value, report in zip(values, reports):
        sub = out / f"{args.param}={value}"
        report_emit(report, sub)
        _print_summary(report, sub)
    return 0


def cmd_presets(args) -> int:
    for name in cfgmod.preset_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="depthpose", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write its report")
    r.add_argument("--config", required=True, help="preset name or TOML file")
    r.add_argument("--out", default="out")
    r.add_argument("--seed", type=int)
    r.add_argument("--transport", choices=("inproc", "udp"))
    r.add_argument("--port-a", type=int)
    r.add_argument("--port-b", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one run per value of a config parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, help="dotted path, e.g. observer.lambda")
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("--out", default="out")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    ps = sub.add_parser("presets", help="bundled scenarios")
    ps.add_argument("action", choices=("list",))
    ps.set_defaults(func=cmd_presets)
    return p


def _fail(kind: str, message: str, code: int, path: str | None = None) -> int:
    err = {"error": kind, "message": message}
    if path is not None:
        err["path"] = path
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("ConfigError", exc.message, EXIT_CONFIG, exc.path)
    except IoError as exc:
        return _fail("IoError", str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: validate, scenario, serve, replay, export-lineage.

Settings resolve in order: built-in defaults, then a JSON config file, then
SOCIALPROTO_* environment variables, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
import tempfile
from pathlib import Path
from typing import Optional

from ..errors import EngineError
from ..model import load_protocol, validate_structure
from ..serialize import serialize_state
from .api import create_app
from .scenario import run_scenario
from .service import CommunityService, replay


def _load_settings(config_path: Optional[str], port_flag: Optional[int], data_dir_flag: Optional[str]) -> dict:
    settings = {"port": 8000, "host": "127.0.0.1", "data_dir": None, "live_actions": False}
    if config_path:
        try:
            settings.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise EngineError("SCHEMA_INVALID", f"cannot read config {config_path}: {exc}") from exc
    if os.environ.get("SOCIALPROTO_PORT"):
        settings["port"] = int(os.environ["SOCIALPROTO_PORT"])
    if os.environ.get("SOCIALPROTO_DATA_DIR"):
        settings["data_dir"] = os.environ["SOCIALPROTO_DATA_DIR"]
    if port_flag is not None:
        settings["port"] = port_flag
    if data_dir_flag is not None:
        settings["data_dir"] = data_dir_flag
    return settings


def _check_port_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise EngineError("PORT_IN_USE", f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def _check_data_dir(data_dir: Path) -> None:
    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        probe.write_text("ok", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise EngineError("DATA_DIR_UNWRITABLE", f"data dir {data_dir} is not writable: {exc}") from exc


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        protocol = load_protocol(args.file)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot load protocol: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 2
    report = validate_structure(protocol)
    for finding in report.findings:
        print(f"{finding.severity.value}: {finding.code} [{finding.subject}] {finding.message}")
    if report.valid:
        print(f"valid: {protocol.protocol_id} version {protocol.version}")
        return 0
    print(f"invalid: {len(report.errors())} error(s)")
    return 1


def cmd_scenario(args: argparse.Namespace) -> int:
    if args.data_dir:
        result = run_scenario(args.file, args.data_dir, echo=print if args.verbose else None)
    else:
        with tempfile.TemporaryDirectory(prefix="socialproto-scn-") as tmp:
            result = run_scenario(args.file, tmp, echo=print if args.verbose else None)
    if result["passed"]:
        print(f"PASS: {result['steps']} step(s) across {result['segments']} segment(s)")
        return 0
    print(f"FAIL: {result['failure']}")
    return 1


def _seed_demo(service: CommunityService) -> None:
    """Load the FAQ fixture so a fresh server has something to click on."""
    from .. import fixtures
    from ..serialize import environment_to_doc, group_to_doc

    if service.state.groups:
        return  # resumed from a log that already has data
    service.register_environment(environment_to_doc(fixtures.faq_environment()))
    group = fixtures.faq_group()
    service.create_group(group_to_doc(group))
    version = service.register_protocol(fixtures.faq_implemented())
    service.instantiate_process(version, group.group_id)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = _load_settings(args.config, args.port, args.data_dir)
    host, port = settings["host"], int(settings["port"])
    _check_port_free(host, port)
    data_dir = Path(settings["data_dir"]) if settings["data_dir"] else None
    if data_dir is not None:
        _check_data_dir(data_dir)

    executor = None
    if settings.get("live_actions"):
        from .service import HttpActionExecutor

        executor = HttpActionExecutor()
    service = CommunityService(data_dir, executor=executor)
    if args.seed_demo:
        _seed_demo(service)
    ui_dir = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    app = create_app(service, ui_dir=ui_dir if ui_dir.is_dir() else None)
    print(f"serving on http://{host}:{port} (data dir: {data_dir or 'in-memory'})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        state = replay(args.log)
    except EngineError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    text = serialize_state(state)
    print(
        f"replayed: {len(state.repository.versions)} version(s), {len(state.processes)} process(es), "
        f"{len(state.groups)} group(s), {len(state.sessions)} session(s)"
    )
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"state written to {args.out}")
    return 0


def cmd_export_lineage(args: argparse.Namespace) -> int:
    data_dir = args.data_dir or os.environ.get("SOCIALPROTO_DATA_DIR")
    if not data_dir:
        print("error: --data-dir (or SOCIALPROTO_DATA_DIR) required", file=sys.stderr)
        return 2
    log_path = Path(data_dir) / "events.log"
    try:
        state = replay(log_path)
        from ..inheritance import lineage

        hops = lineage(state.repository, args.version)
    except EngineError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1
    for hop in hops:
        if hop.parent is None:
            print(f"{hop.version} (root)")
        elif hop.negotiation_ref:
            print(f"{hop.parent} -> {hop.version} [{hop.negotiation_ref}]")
        else:
            print(f"{hop.parent} -> {hop.version}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socialproto", description="Adaptive collaboration protocol engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a protocol file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="run a scripted flow")
    p.add_argument("file")
    p.add_argument("--data-dir", default=None, help="keep event logs here instead of a temp dir")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("serve", help="run the REST server")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--config", default=None, help="JSON settings file")
    p.add_argument("--seed-demo", action="store_true", help="load the FAQ fixture on an empty server")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild state from an event log")
    p.add_argument("log")
    p.add_argument("--out", default=None, help="write the canonical state JSON here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("export-lineage", help="print a version's derivation chain")
    p.add_argument("version")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_export_lineage)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

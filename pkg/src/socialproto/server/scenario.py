"""Scripted end-to-end flows: one JSON command per line, executed on a fresh
deterministic service, with inline assertions.

Strings of the form "$ref:name" resolve to ids bound earlier via "as". A
"reset" command finalizes the current service segment (verifying that replaying
its log reproduces the live state) and starts a clean one, so a single script
can compare several propagation strategies from the same baseline.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

from ..errors import EngineError
from ..engine import MockActionExecutor
from ..model import load_protocol, protocol_to_doc
from ..serialize import serialize_state
from .service import CommunityService, CounterIds, TickClock, replay


class ScenarioFailure(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.detail = message


def _resolve(value: Any, symbols: Mapping[str, str]) -> Any:
    if isinstance(value, str) and value.startswith("$ref:"):
        name = value[len("$ref:"):]
        if name not in symbols:
            raise KeyError(f"unbound reference {name!r}")
        return symbols[name]
    if isinstance(value, list):
        return [_resolve(v, symbols) for v in value]
    if isinstance(value, dict):
        return {k: _resolve(v, symbols) for k, v in value.items()}
    return value


def _matches(transition: Mapping, where: Mapping) -> bool:
    action = transition["action"]
    checks = {
        "from": transition["from"],
        "to": transition["to"],
        "role": transition["role"],
        "action": action["name"],
        "binding": action["binding"],
    }
    return all(checks[key] == expected for key, expected in where.items())


class _Segment:
    """One service lifetime within a scenario run."""

    def __init__(self, data_dir: Optional[Path]):
        self.data_dir = data_dir
        if data_dir is not None:
            data_dir.mkdir(parents=True, exist_ok=True)
        self.service = CommunityService(data_dir, ids=CounterIds(), clock=TickClock())

    def finalize(self) -> None:
        # Replay identity is part of every scenario's contract.
        if self.data_dir is None:
            return
        log_path = self.data_dir / "events.log"
        if not log_path.exists():
            return
        replayed = serialize_state(replay(log_path))
        live = self.service.serialize()
        if replayed != live:
            raise EngineError("CORRUPT_LOG", "replayed state differs from live state")


def run_scenario(
    path: Union[str, Path], data_dir: Optional[Union[str, Path]] = None, *, echo: Optional[Callable[[str], None]] = None
) -> dict:
    """Execute a script; returns {passed, steps, segments, failure}."""
    path = Path(path)
    base_dir = Path(data_dir) if data_dir is not None else None
    say = echo or (lambda _line: None)

    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        return {"passed": False, "steps": 0, "segments": 0, "failure": f"cannot read script: {exc}"}

    symbols: dict[str, str] = {}
    segment_index = 0
    segment = _Segment(base_dir / f"seg-{segment_index}" if base_dir else None)
    steps = 0

    def seg_dir(index: int) -> Optional[Path]:
        return base_dir / f"seg-{index}" if base_dir else None

    try:
        for lineno, raw in enumerate(lines, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                command = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ScenarioFailure(lineno, f"SCRIPT_PARSE_ERROR: {exc}")
            if not isinstance(command, dict) or "op" not in command:
                raise ScenarioFailure(lineno, "SCRIPT_PARSE_ERROR: each line must be an object with an op")
            try:
                resolved = _resolve(command, symbols)
            except KeyError as exc:
                raise ScenarioFailure(lineno, str(exc.args[0]))

            if resolved["op"] == "reset":
                segment.finalize()
                segment_index += 1
                segment = _Segment(seg_dir(segment_index))
                steps += 1
                say(f"line {lineno}: reset -> segment {segment_index}")
                continue

            try:
                _execute(resolved, segment.service, symbols, path.parent)
            except EngineError as exc:
                raise ScenarioFailure(lineno, f"{resolved['op']} failed with {exc.code}: {exc.message}")
            except ScenarioFailure as exc:
                raise ScenarioFailure(lineno, exc.detail)
            steps += 1
            say(f"line {lineno}: {resolved['op']} ok")
        segment.finalize()
    except ScenarioFailure as exc:
        return {
            "passed": False,
            "steps": steps,
            "segments": segment_index + 1,
            "failure": str(exc),
        }
    except EngineError as exc:
        return {
            "passed": False,
            "steps": steps,
            "segments": segment_index + 1,
            "failure": f"{exc.code}: {exc.message}",
        }
    return {"passed": True, "steps": steps, "segments": segment_index + 1, "failure": None}


def _bind(symbols: dict[str, str], command: Mapping, value: str, key: str = "as") -> None:
    name = command.get(key)
    if name:
        symbols[name] = value


def _execute(cmd: dict, svc: CommunityService, symbols: dict[str, str], script_dir: Path) -> None:
    op = cmd["op"]

    if op == "environment":
        doc = svc.register_environment(cmd["doc"])
        _bind(symbols, cmd, doc["env_id"])
    elif op == "group":
        doc = svc.create_group(cmd["doc"])
        _bind(symbols, cmd, doc["group_id"])
    elif op == "protocol":
        if "file" in cmd:
            file_path = Path(cmd["file"])
            if not file_path.is_absolute():
                for base in (Path.cwd(), script_dir, script_dir.parent):
                    if (base / file_path).exists():
                        file_path = base / file_path
                        break
            doc = protocol_to_doc(load_protocol(file_path))
        else:
            doc = cmd["doc"]
        scope = _scope(cmd)
        version = svc.register_protocol(doc, scope)
        _bind(symbols, cmd, version)
    elif op == "implement":
        version = svc.implement_version(
            cmd["version"], cmd.get("role_bindings", []), cmd.get("action_bindings", {}), _scope(cmd)
        )
        _bind(symbols, cmd, version)
    elif op == "extract":
        _bind(symbols, cmd, svc.extract_version(cmd["version"], _scope(cmd)))
    elif op == "derive":
        version = svc.derive(cmd["parent"], cmd["patch"], cmd["group"], cmd.get("negotiation_ref"))
        _bind(symbols, cmd, version)
    elif op == "instantiate":
        view = svc.instantiate_process(cmd["version"], cmd["group"], cmd.get("start_state"))
        _bind(symbols, cmd, view["process_id"])
    elif op == "trigger":
        svc.trigger_transition(cmd["process"], cmd["actor"], cmd["transition"])
    elif op == "fail_endpoint":
        if not isinstance(svc.executor, MockActionExecutor):
            raise ScenarioFailure(0, "fail_endpoint needs the mock executor")
        svc.executor.fail_endpoint(cmd["endpoint"], cmd.get("error", "service unavailable"))
    elif op == "restore_endpoint":
        if not isinstance(svc.executor, MockActionExecutor):
            raise ScenarioFailure(0, "restore_endpoint needs the mock executor")
        svc.executor.restore(cmd["endpoint"])
    elif op == "split":
        children = svc.split_process(cmd["process"], cmd["partition"])
        names = cmd.get("as") or []
        for name, child in zip(names, children):
            symbols[name] = child["process_id"]
    elif op == "merge":
        view = svc.merge_processes(cmd["processes"])
        _bind(symbols, cmd, view["process_id"])
    elif op == "open_negotiation":
        view = svc.open_session(
            cmd["process"], cmd["initiator"], cmd["patch"], cmd.get("rationale", ""), cmd.get("rule")
        )
        _bind(symbols, cmd, view["session_id"])
        if cmd.get("proposal_as"):
            symbols[cmd["proposal_as"]] = view["proposals"][0]["proposal_id"]
    elif op == "propose":
        doc = svc.propose(
            cmd["session"], cmd["author"], cmd["patch"], cmd.get("rationale", ""), cmd.get("supersedes")
        )
        _bind(symbols, cmd, doc["proposal_id"])
    elif op == "vote":
        svc.vote(cmd["session"], cmd["voter"], cmd["proposal"], cmd["value"])
    elif op == "vote_all":
        view = svc.session_view(cmd["session"])
        for voter in view["participants"]:
            svc.vote(cmd["session"], voter, cmd["proposal"], cmd["value"])
    elif op == "close":
        out = svc.close_session(cmd["session"], cmd["closer"])
        if out["result_version"] and cmd.get("result_as"):
            symbols[cmd["result_as"]] = out["result_version"]
        expected = cmd.get("expect_ruling")
        if expected and out["ruling"] != expected:
            raise ScenarioFailure(0, f"close ruled {out['ruling']}, expected {expected}")
    elif op == "record_history":
        svc.record_session_history(cmd["session"], cmd.get("consents", {}))
    elif op == "propagate":
        report = svc.propagate(cmd["version"], cmd["strategy"])
        expected = cmd.get("expect_applied", True)
        if report["applied"] != expected:
            raise ScenarioFailure(
                0, f"propagation applied={report['applied']}, expected {expected}; conflicts: {report['conflicts']}"
            )
    elif op == "adopt":
        result = svc.adopt(cmd["version"], cmd["group"], cmd.get("action_choices"), cmd.get("role_bindings", []))
        expected = cmd.get("expect_adopted", True)
        if result["adopted"] != expected:
            raise ScenarioFailure(
                0, f"adoption adopted={result['adopted']}, expected {expected}; missing: {result['missing_actions']}"
            )
        if result["adopted"]:
            _bind(symbols, cmd, result["version"])
    elif op == "expect_error":
        inner = cmd["command"]
        try:
            _execute(inner, svc, symbols, script_dir)
        except EngineError as exc:
            if exc.code != cmd["code"]:
                raise ScenarioFailure(0, f"expected error {cmd['code']}, got {exc.code}")
        else:
            raise ScenarioFailure(0, f"expected error {cmd['code']}, but {inner['op']} succeeded")
    elif op == "assert_state":
        actual = svc.process_view(cmd["process"])["current_state"]
        _expect(actual, cmd["equals"], "process state")
    elif op == "assert_status":
        _expect(svc.process_view(cmd["process"])["status"], cmd["equals"], "process status")
    elif op == "assert_outcome":
        _expect(svc.process_view(cmd["process"])["outcome"], cmd["equals"], "process outcome")
    elif op == "assert_version":
        _expect(svc.process_view(cmd["process"])["protocol_version"], cmd["equals"], "ruling version")
    elif op == "assert_refinement":
        _expect(svc.protocol_view(cmd["version"])["refinement"], cmd["equals"], "refinement level")
    elif op == "assert_transition_count":
        transitions = svc.protocol_view(cmd["version"])["protocol"]["transitions"]
        _expect(len(transitions), cmd["equals"], "transition count")
    elif op == "assert_transitions":
        transitions = svc.protocol_view(cmd["version"])["protocol"]["transitions"]
        hits = [t for t in transitions if _matches(t, cmd.get("where", {}))]
        _expect(len(hits), cmd["count"], f"transitions matching {cmd.get('where', {})}")
    elif op == "assert_catalog":
        entries = {e["version"] for e in svc.catalog(cmd["group"])}
        _expect(entries, set(cmd["equals"]), "catalog contents")
    elif op == "assert_compatible":
        entries = {e["version"]: e["compatible"] for e in svc.catalog(cmd["group"])}
        if cmd["version"] not in entries:
            raise ScenarioFailure(0, f"version {cmd['version']} not in catalog for {cmd['group']}")
        _expect(entries[cmd["version"]], cmd["equals"], "environment compatibility")
    elif op == "assert_ruling":
        _expect(svc.session_view(cmd["session"])["status"], cmd["equals"], "session ruling")
    elif op == "assert_history_count":
        views = svc.history_of(cmd["version"], cmd["group"])
        _expect(len(views), cmd["equals"], "history record count")
    else:
        raise ScenarioFailure(0, f"unknown op {op!r}")


def _scope(cmd: Mapping) -> Any:
    from ..serialize import scope_from_doc

    doc = cmd.get("scope")
    return scope_from_doc(doc) if doc else None


def _expect(actual: Any, expected: Any, what: str) -> None:
    if actual != expected:
        raise ScenarioFailure(0, f"{what}: expected {expected!r}, got {actual!r}")

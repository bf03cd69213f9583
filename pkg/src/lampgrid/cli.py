"""Command-line surface: simulation, live services, profiles, audit replay.

Exit codes: 0 success, 1 validation problem (bad scenario, config, script,
or log), 2 runtime failure (connection lost, unexpected error).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

from lampgrid import sim, transport
from lampgrid.audit import AuditError, read_audit_log
from lampgrid.config import ConfigError, load_config
from lampgrid.feeds import FeedScriptError, parse_feed_script
from lampgrid.llu import LamppostUnit, SceneEvent
from lampgrid.model import CriticalityBounds, GeoPoint, ModelError
from lampgrid.profiles import default_profile, load_profile
from lampgrid.scenario import ScenarioError, load_scenario, validate_scenario_doc
from lampgrid.server import TcuServer
from lampgrid.tcu import ControlUnit, TcuError


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="lampgrid",
                     description="Traffic-anomaly surveillance simulator "
                                 "and services.")
    top = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sim_cmd = top.add_parser("sim", help="scenario simulation")
    sim_sub = sim_cmd.add_subparsers(dest="sim_command", required=True,
                                     parser_class=_Parser)
    sim_run = sim_sub.add_parser("run", help="execute a scenario")
    sim_run.add_argument("scenario", type=Path)
    sim_run.add_argument("--out", type=Path, required=True,
                         help="output directory for audit.hal, summary.json, "
                              "metrics.csv")
    sim_run.add_argument("--seed", type=int, default=None,
                         help="override the scenario's seed")
    sim_validate = sim_sub.add_parser("validate", help="check a scenario file")
    sim_validate.add_argument("scenario", type=Path)

    tcu_cmd = top.add_parser("tcu", help="territorial control service")
    tcu_sub = tcu_cmd.add_subparsers(dest="tcu_command", required=True,
                                     parser_class=_Parser)
    tcu_serve = tcu_sub.add_parser("serve", help="run the live service")
    tcu_serve.add_argument("--config", type=Path, required=True)
    tcu_serve.add_argument("--listen", default="127.0.0.1:8080",
                           help="HTTP API address host:port")
    tcu_serve.add_argument("--ingest", default=None,
                           help="lamppost/feed listener address "
                                "(default: HTTP port + 1)")
    tcu_serve.add_argument("--audit", type=Path, default=Path("audit.hal"))

    llu_cmd = top.add_parser("llu", help="lamppost local unit")
    llu_sub = llu_cmd.add_subparsers(dest="llu_command", required=True,
                                     parser_class=_Parser)
    llu_run = llu_sub.add_parser("run", help="replay scene events to a service")
    llu_run.add_argument("--id", required=True, dest="lamppost_id")
    llu_run.add_argument("--connect", required=True,
                         help="service ingest address host:port")
    llu_run.add_argument("--events", type=Path, required=True,
                         help="scene events, one JSON object per line")
    llu_run.add_argument("--lat", type=float, default=0.0)
    llu_run.add_argument("--lon", type=float, default=0.0)
    llu_run.add_argument("--seed", type=int, default=0)
    llu_run.add_argument("--profile", type=Path, default=None)
    llu_run.add_argument("--n-max", type=int, default=5)
    llu_run.add_argument("--m-max", type=int, default=10)
    llu_run.add_argument("--final-heartbeat", type=int, default=None,
                         help="send a heartbeat at this sim time after "
                              "the last event")
    llu_run.add_argument("--linger", type=float, default=0.0,
                         help="seconds to keep applying inbound commands")

    feed_cmd = top.add_parser("feed", help="external information feed")
    feed_sub = feed_cmd.add_subparsers(dest="feed_command", required=True,
                                       parser_class=_Parser)
    feed_run = feed_sub.add_parser("run", help="replay a feed script")
    feed_run.add_argument("--script", type=Path, required=True)
    feed_run.add_argument("--connect", required=True)
    feed_run.add_argument("--sender", default="feed")

    profile_cmd = top.add_parser("profile", help="detector profiles")
    profile_sub = profile_cmd.add_subparsers(dest="profile_command",
                                             required=True,
                                             parser_class=_Parser)
    profile_register = profile_sub.add_parser("register",
                                              help="validate and store")
    profile_register.add_argument("profile", type=Path)
    profile_register.add_argument("--api", required=True,
                                  help="service API base, e.g. "
                                       "http://127.0.0.1:8080")
    profile_deploy = profile_sub.add_parser("deploy",
                                            help="push a version to units")
    profile_deploy.add_argument("version", type=int)
    profile_deploy.add_argument("--targets", required=True,
                                help="comma-separated lamppost ids")
    profile_deploy.add_argument("--api", required=True)

    audit_cmd = top.add_parser("audit", help="audit journal tools")
    audit_sub = audit_cmd.add_subparsers(dest="audit_command", required=True,
                                         parser_class=_Parser)
    audit_replay = audit_sub.add_parser("replay",
                                        help="rebuild final state from a log")
    audit_replay.add_argument("log", type=Path)
    audit_replay.add_argument("--expect-summary", type=Path, default=None,
                              help="compare against a run's summary.json")

    return parser


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"bad address {text!r}, expected host:port")
    return host, int(port)


def _post_json(url: str, doc: dict) -> tuple[int, dict]:
    data = json.dumps(doc).encode("utf-8")
    request = urllib.request.Request(
        url, data=data, method="POST",
        headers={"Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read())
    except urllib.error.HTTPError as exc:
        body = exc.read()
        try:
            return exc.code, json.loads(body)
        except json.JSONDecodeError:
            return exc.code, {"error": body.decode("utf-8", "replace")}


def _cmd_sim_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    summary = sim.run_scenario(scenario, args.out)
    counters = summary.counters
    print(f"scenario {summary.scenario_name!r} seed {summary.seed}: "
          f"{counters['reports_ingested']} alerts, "
          f"{counters['warnings_issued']} warnings, "
          f"queue length {len(summary.final_state['queue'])}")
    print(f"outputs in {args.out}")
    return 0


def _cmd_sim_validate(args) -> int:
    try:
        doc = json.loads(args.scenario.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"malformed JSON: {exc}", file=sys.stderr)
        return 1
    problems = validate_scenario_doc(doc)
    if problems:
        for problem in problems:
            print(problem, file=sys.stderr)
        return 1
    print("ok")
    return 0


def _cmd_tcu_serve(args) -> int:
    config = load_config(args.config)
    host, http_port = _parse_addr(args.listen)
    if args.ingest is not None:
        ingest_host, ingest_port = _parse_addr(args.ingest)
        if ingest_host != host:
            raise ConfigError("HTTP and ingest listeners must share a host")
    else:
        ingest_port = http_port + 1 if http_port else 0
    tcu = ControlUnit(config, audit_path=args.audit)
    server = TcuServer(tcu, host=host, http_port=http_port,
                       ingest_port=ingest_port)
    server.start()
    print(f"http listening on {host}:{server.http_port}", flush=True)
    print(f"ingest listening on {host}:{server.ingest_port}", flush=True)
    print(f"audit journal at {args.audit}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def _load_scene_events(path: Path) -> list[SceneEvent]:
    events = []
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ModelError(f"events line {lineno}: {exc.msg}") from exc
        try:
            events.append(SceneEvent.from_dict(doc))
        except ModelError as exc:
            raise ModelError(f"events line {lineno}: {exc}") from exc
    return events


def _cmd_llu_run(args) -> int:
    events = _load_scene_events(args.events)
    profile = (load_profile(args.profile) if args.profile is not None
               else default_profile())
    bounds = CriticalityBounds(n_max=args.n_max, m_max=args.m_max)
    unit = LamppostUnit(
        args.lamppost_id, GeoPoint(lat=args.lat, lon=args.lon),
        profile, bounds, seed=args.seed,
    )
    host, port = _parse_addr(args.connect)
    stream = transport.connect(host, port)
    try:
        counters = transport.run_llu_client(
            unit, stream, events,
            final_heartbeat_ms=args.final_heartbeat,
            linger_s=args.linger,
        )
    finally:
        stream.close()
    print(f"{args.lamppost_id}: sent {counters['reports_sent']} reports, "
          f"final mode {unit.descriptor.signalling.mode.value}")
    return 0


def _cmd_feed_run(args) -> int:
    entries = parse_feed_script(args.script.read_text(encoding="utf-8"))
    host, port = _parse_addr(args.connect)
    stream = transport.connect(host, port)
    try:
        sent = transport.run_feed_client(stream, entries, sender=args.sender)
    finally:
        stream.close()
    print(f"sent {sent} feed updates")
    return 0


def _cmd_profile_register(args) -> int:
    doc = json.loads(args.profile.read_text(encoding="utf-8"))
    status, body = _post_json(f"{args.api}/api/v1/profiles", doc)
    if status != 201:
        print(f"register failed ({status}): {body.get('error')}",
              file=sys.stderr)
        return 1
    print(f"registered version {body['version']}")
    return 0


def _cmd_profile_deploy(args) -> int:
    targets = [t for t in args.targets.split(",") if t]
    status, body = _post_json(
        f"{args.api}/api/v1/profiles/{args.version}/deploy",
        {"targets": targets},
    )
    if status != 200:
        print(f"deploy failed ({status}): {body.get('error')}", file=sys.stderr)
        return 1
    results = body["deployment"]["results"]
    for target in targets:
        print(f"{target}: {results.get(target, 'missing')}")
    return 0 if all(status == "ok" for status in results.values()) else 1


def _cmd_audit_replay(args) -> int:
    records, warnings = read_audit_log(args.log)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    unit = ControlUnit.replay(records)
    snapshot = unit.state_snapshot()
    if args.expect_summary is not None:
        summary = json.loads(args.expect_summary.read_text(encoding="utf-8"))
        if summary.get("final_state") != snapshot:
            print("replayed state does not match the summary snapshot",
                  file=sys.stderr)
            return 1
        print("replayed state matches the summary snapshot")
        return 0
    print(json.dumps(snapshot, indent=2, sort_keys=True, ensure_ascii=False))
    return 0


_VALIDATION_ERRORS = (
    ScenarioError,
    ConfigError,
    FeedScriptError,
    AuditError,
    ModelError,
    json.JSONDecodeError,
    FileNotFoundError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        ("sim", "run"): _cmd_sim_run,
        ("sim", "validate"): _cmd_sim_validate,
        ("tcu", "serve"): _cmd_tcu_serve,
        ("llu", "run"): _cmd_llu_run,
        ("feed", "run"): _cmd_feed_run,
        ("profile", "register"): _cmd_profile_register,
        ("profile", "deploy"): _cmd_profile_deploy,
        ("audit", "replay"): _cmd_audit_replay,
    }
    sub = getattr(args, f"{args.command}_command")
    handler = handlers[(args.command, sub)]
    try:
        return handler(args)
    except _VALIDATION_ERRORS as exc:
        message = getattr(exc, "problems", None)
        if message:
            for problem in message:
                print(problem, file=sys.stderr)
        else:
            print(str(exc), file=sys.stderr)
        return 1
    except TcuError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (ConnectionError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

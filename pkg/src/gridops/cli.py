"""Command line entry points: serve, replay, report, gen-case."""

from __future__ import annotations

import json
import logging
import sys
import threading
import time
from pathlib import Path

import click

from .broker import Broker
from .casegen import make_case
from .encoding import canonical_json
from .model import case_to_json
from .session import (
    ReplayError,
    Session,
    SessionRecord,
    generate_report,
    load_scenario,
    replay as run_replay,
    report_bytes,
)
from .wire import PhasorStreamer, WireContext, create_app, run_server_in_thread

logger = logging.getLogger(__name__)


def _find_console_dir() -> Path | None:
    for candidate in (Path.cwd() / "frontend" / "dist",
                      Path(__file__).resolve().parents[2] / "frontend" / "dist"):
        if (candidate / "index.html").exists():
            return candidate
    return None


def _load(scenario_path: str, case_path: str | None):
    scenario_file = Path(scenario_path)
    case_doc = None
    if case_path:
        case_doc = json.loads(Path(case_path).read_text())
    return load_scenario(scenario_file.read_text(), base_dir=scenario_file.parent,
                         case_doc=case_doc)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Multi-user interactive power-system operations simulator."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command()
@click.option("--case", "case_path", type=click.Path(exists=True), default=None,
              help="Case file; overrides the scenario's case_ref.")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--phasor-port", default=None, type=int,
              help="Enable the synchrophasor TCP side channel on this port.")
@click.option("--seed", default=None, type=int, help="Override the scenario rng seed.")
@click.option("--record-out", type=click.Path(), default=None,
              help="Where to write the session record (default record-<name>.jsonl).")
@click.option("--no-pacing", is_flag=True, help="Run as fast as possible (testing).")
@click.option("--exit-after-run", is_flag=True, help="Exit when the session ends.")
def serve(case_path, scenario_path, port, phasor_port, seed, record_out, no_pacing,
          exit_after_run):
    """Run a live multi-user session and serve the operator console."""
    scenario = _load(scenario_path, case_path)
    if seed is not None:
        scenario.doc["rng_seed"] = seed
        scenario.rng_seed = seed
        scenario.profile.seed = seed

    session = Session(scenario)
    streamer = None
    if phasor_port is not None:
        streamer = PhasorStreamer(phasor_port)
        session.gateway.phasor_sink = streamer.send
        click.echo(f"phasor side channel on tcp port {streamer.port}")

    ctx = WireContext(session.gateway, session.broker, mode="live",
                      static_dir=_find_console_dir())
    server, _ = run_server_in_thread(create_app(ctx), "0.0.0.0", port)
    click.echo(f"gateway on http://0.0.0.0:{port}  (ws: /ws?token=...)")
    click.echo(f"scenario {scenario.name}: {scenario.n_steps} steps of {scenario.dt_sim}s "
               f"at {scenario.timescale}x = {scenario.sim_span / scenario.timescale:.0f}s wall")

    try:
        record = session.run(pacing=not no_pacing)
    except KeyboardInterrupt:
        click.echo("interrupted; finalizing record")
        record = session.finalize()
    out = Path(record_out) if record_out else Path(f"record-{scenario.name}.jsonl")
    record.save(out)
    click.echo(f"session complete: {record.report['summary']}")
    click.echo(f"record written to {out}")
    if streamer:
        streamer.close()
    if exit_after_run:
        server.should_exit = True
        return
    click.echo("still serving the console and report; ctrl-c to exit")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.should_exit = True


@main.command("replay")
@click.option("--record", "record_path", type=click.Path(exists=True), required=True)
@click.option("--speed", default=0.0, show_default=True,
              help="Playback pacing multiplier (0 = as fast as possible).")
@click.option("--port", default=None, type=int,
              help="Also serve the console fed by the replayed stream.")
def replay_cmd(record_path, speed, port):
    """Re-execute a recorded session and verify it reproduces itself."""
    record = SessionRecord.load(record_path)

    if port is None:
        try:
            report, _ = run_replay(record, speed=speed)
        except ReplayError as e:
            click.echo(f"replay failed: {e}", err=True)
            sys.exit(1)
        if record.report is not None and report_bytes(report) != report_bytes(record.report):
            click.echo("replay failed: regenerated report differs from the recorded one", err=True)
            sys.exit(1)
        click.echo("replay ok: measurement digests and report match the record")
        click.echo(report["summary"])
        return

    state = {"speed": speed if speed > 0 else 1.0, "record": record, "generation": 0}
    broker = Broker()

    def playback(generation: int):
        rec = state["record"]

        def abort_when_superseded(_meas):
            if state["generation"] != generation:
                raise ReplayError("superseded by a newly uploaded record")

        try:
            report, _ = run_replay(rec, broker=broker, speed=lambda: state["speed"],
                                   on_step=abort_when_superseded)
            click.echo(f"playback finished: {report['summary']}")
        except ReplayError as e:
            click.echo(f"playback stopped: {e}", err=True)

    def handle_upload(text: str):
        state["record"] = SessionRecord.from_text(text)
        state["generation"] += 1
        threading.Thread(target=playback, args=(state["generation"],), daemon=True).start()

    # the console only needs a broker view plus report/speed plumbing
    scenario_doc = record.header
    from .gateway import Gateway
    from .session import load_scenario as _ls

    scenario = _ls(json.dumps(scenario_doc["scenario"]), case_doc=scenario_doc["case"])
    gw = Gateway(scenario.case, broker, scenario.roles, scenario.tokens,
                 dt_sim=scenario.dt_sim)
    gw.report_provider = lambda: state["record"].report or {}
    gw.speed_callback = lambda v: state.__setitem__("speed", max(0.01, v))
    ctx = WireContext(gw, broker, mode="replay", static_dir=_find_console_dir(),
                      replay_handler=handle_upload)
    server, _ = run_server_in_thread(create_app(ctx), "0.0.0.0", port)
    click.echo(f"replay console on http://0.0.0.0:{port}  speed x{state['speed']}")
    threading.Thread(target=playback, args=(0,), daemon=True).start()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.should_exit = True


@main.command("report")
@click.option("--record", "record_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def report_cmd(record_path, out_path):
    """Regenerate the end-of-session report from a record file."""
    record = SessionRecord.load(record_path)
    report = generate_report(record)
    if record.report is not None and report_bytes(report) != report_bytes(record.report):
        click.echo("warning: regenerated report differs from the one stored in the record",
                   err=True)
    Path(out_path).write_text(canonical_json(report) + "\n")
    click.echo(f"report written to {out_path}")
    click.echo(report["summary"])


@main.command("gen-case")
@click.option("--buses", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def gen_case(buses, seed, out_path):
    """Write a synthetic solvable case of the requested size."""
    case = make_case(buses, seed=seed)
    Path(out_path).write_text(case_to_json(case, indent=2) + "\n")
    click.echo(f"wrote {out_path}: {len(case.buses)} buses, {len(case.branches)} branches, "
               f"{len(case.generators)} generators")


if __name__ == "__main__":
    main()

"""Command line front ends.

teleosim-sim     headless virtual-clock run: scenario + profile + command
                 script in, event log and path report out.
teleosim-server  live server on real sockets.
teleosim-client  live operator client, optionally serving the console UI
                 gateway (and static UI files) for a browser.

Command script format (used by teleosim-sim and client --script):

    <t_ms> drive <v> <w>
    <t_ms> stop
    <t_ms> ptz <pan> <tilt> <zoom>
    <t_ms> mode <MANUAL|ASSISTED|AUTONOMY_SAFEPOINT>
    <t_ms> joystick <h> <v>
    <t_ms> blackout <duration_ms>      (virtual sim only)
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading

from .client import ClientConfig, TeleopClient, paths_to_csv, record_paths
from .clock import Scheduler
from .gateway import GatewayServer
from .harness import LoopbackSim
from .netsim import DelayProfile
from .scenario import campus_world, load_profile, load_world
from .server import ServerConfig, TeleopServer
from .transports import ClientTransport, ServerTransport, WallClockRunner

log = logging.getLogger(__name__)


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def parse_script(text: str) -> list[tuple[float, str, list[str]]]:
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            steps.append((float(parts[0]), parts[1].lower(), parts[2:]))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"script line {lineno}: cannot parse {line!r}") from exc
    steps.sort(key=lambda s: s[0])
    return steps


def _schedule_script(sim: LoopbackSim, steps: list[tuple[float, str, list[str]]]) -> None:
    client = sim.client
    for t, action, args in steps:
        if action == "drive":
            fn = lambda a=args: client.send_drive(float(a[0]), float(a[1]))
        elif action == "stop":
            fn = lambda: client.send_stop()
        elif action == "ptz":
            fn = lambda a=args: client.send_ptz(float(a[0]), float(a[1]), float(a[2]))
        elif action == "mode":
            fn = lambda a=args: client.send_mode(a[0])
        elif action == "joystick":
            fn = lambda a=args: client.send_joystick((int(a[0]), int(a[1])))
        elif action == "blackout":
            sim.pipe.schedule_interruption(t, float(args[0]))
            continue
        else:
            raise ValueError(f"unknown script action {action!r}")
        sim.scheduler.call_at(t, fn)


def sim_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="teleosim-sim", description="headless virtual run")
    parser.add_argument("--scenario", help="world file (default: built-in campus world)")
    parser.add_argument("--profile", help="delay profile file (default: measured table)")
    parser.add_argument("--script", help="command script file")
    parser.add_argument("--avoidance-rules", help="experimental avoidance rulebase file")
    parser.add_argument("--duration", type=float, default=30.0, help="seconds of virtual time")
    parser.add_argument("--report", help="write local/remote path CSV here")
    parser.add_argument("--events-out", help="write the server event log (JSONL) here")
    parser.add_argument("--speed", type=float, default=None, help="commanded speed for the lag model")
    parser.add_argument("--log-level", default="warning")
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)

    world = load_world(args.scenario) if args.scenario else campus_world()
    interrupts: list[tuple[float, float]] = []
    if args.profile:
        profile, interrupts = load_profile(args.profile)
    else:
        profile = DelayProfile()
    sim = LoopbackSim(world, profile)
    for start, duration in interrupts:
        sim.pipe.schedule_interruption(start, duration)
    if args.avoidance_rules:
        from .fuzzy import load_rulebase

        sim.server.set_avoidance_rules(load_rulebase(args.avoidance_rules))
    sim.start()
    sim.run_until_connected()
    if args.script:
        with open(args.script, "r", encoding="ascii") as fh:
            _schedule_script(sim, parse_script(fh.read()))
    sim.run_for(args.duration * 1000.0)

    events = sim.server.events
    print(f"simulated {args.duration:.1f}s: "
          f"{len(events.of('telemetry_sent'))} telemetry frames sent, "
          f"{len(sim.client.arrivals)} received, "
          f"{sim.server.collision_count} collisions")
    if sim.client.arrivals:
        report = sim.client.display_latency_report()
        print(f"mean transit {report['mean_transit_ms']:.1f} ms, "
              f"sample-to-render {report['sample_to_render_ms']:.1f} ms")
        path = record_paths(sim.server.pose_log, sim.client.arrivals, args.speed)
        print(f"path deviation: max |dx| {path.max_dx:.4f} m, max |dy| {path.max_dy:.4f} m")
    if args.report and sim.client.arrivals:
        paths_to_csv(sim.server.pose_log, sim.client.arrivals, args.report)
        print(f"wrote path report to {args.report}")
    if args.events_out:
        events.to_jsonl(args.events_out)
        print(f"wrote event log to {args.events_out}")
    return 0


class OutboundImpairment:
    """Optional artificial impairment on the live server's outbound path.

    Lets a live session feel like the measured network even on loopback:
    each send is delayed by a size-dependent sample; datagrams can be lost
    and blacked out per the profile's event script. Inbound traffic is not
    touched (the profile applies one-way here).
    """

    def __init__(self, transport, scheduler: Scheduler, profile, interrupts=()):
        from .netsim import DelaySampler
        import numpy as np

        self.transport = transport
        self.scheduler = scheduler
        self.profile = profile
        self.sampler = DelaySampler(profile)
        self.rng = np.random.default_rng([profile.seed, 0x51])
        self.windows = [(s, s + d) for s, d in interrupts]

    def _blocked(self, t: float) -> bool:
        return any(s <= t < e for s, e in self.windows)

    def send(self, channel, payload: bytes) -> None:
        from .wire import ChannelClass

        now = self.scheduler.now
        delay = self.sampler.sample(len(payload), self.rng)
        if channel is not ChannelClass.ADMIN_COMMAND:
            if self._blocked(now) or self._blocked(now + delay):
                return
            if self.profile.loss_rate > 0 and self.rng.random() < self.profile.loss_rate:
                return
            if channel is ChannelClass.MEDIA:
                delay += self.profile.media_extra_ms
        self.scheduler.call_later(delay, lambda: self.transport.send(channel, payload))


def server_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="teleosim-server", description="live robot server")
    parser.add_argument("--scenario", help="world file (default campus world)")
    parser.add_argument("--profile", help="impair outbound traffic per this delay profile")
    parser.add_argument("--avoidance-rules", help="experimental avoidance rulebase file")
    parser.add_argument("--listen", default="127.0.0.1")
    parser.add_argument("--admin-port", type=int, default=9750)
    parser.add_argument("--telemetry-port", type=int, default=9751)
    parser.add_argument("--media-port", type=int, default=9752)
    parser.add_argument("--token", default="mssr-secret")
    parser.add_argument("--events-out", help="write event log here on shutdown")
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)

    world = load_world(args.scenario) if args.scenario else campus_world()
    scheduler = Scheduler()
    transport = ServerTransport(args.listen, args.admin_port, args.telemetry_port, args.media_port)
    config = ServerConfig(token=args.token)
    outbound = transport
    if args.profile:
        profile, interrupts = load_profile(args.profile)
        outbound = OutboundImpairment(transport, scheduler, profile, interrupts)
    server = TeleopServer(world, scheduler, outbound, config)
    if args.avoidance_rules:
        from .fuzzy import load_rulebase

        server.set_avoidance_rules(load_rulebase(args.avoidance_rules))
    runner = WallClockRunner(scheduler)
    transport.serve(runner, server)
    server.start()
    log.info(
        "serving on %s admin=%d telemetry=%d media=%d",
        args.listen, args.admin_port, args.telemetry_port, args.media_port,
    )
    try:
        runner.run()
    except KeyboardInterrupt:
        pass
    finally:
        if args.events_out:
            server.events.to_jsonl(args.events_out)
        transport.close()
    return 0


def client_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="teleosim-client", description="live operator client")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--admin-port", type=int, default=9750)
    parser.add_argument("--telemetry-port", type=int, default=9751)
    parser.add_argument("--media-port", type=int, default=9752)
    parser.add_argument("--token", default="mssr-secret")
    parser.add_argument("--bounds", nargs=4, type=float, metavar=("XMIN", "YMIN", "XMAX", "YMAX"),
                        default=[0.0, 0.0, 90.0, 64.0], help="map bounds for the virtual represent")
    parser.add_argument("--gateway-port", type=int, default=8765)
    parser.add_argument("--no-gateway", action="store_true")
    parser.add_argument("--serve-ui", help="also serve this directory of static UI files over HTTP")
    parser.add_argument("--ui-port", type=int, default=8080)
    parser.add_argument("--script", help="command script to replay once connected")
    parser.add_argument("--report", help="write the path CSV here on shutdown")
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)

    scheduler = Scheduler()
    transport = ClientTransport(args.host, args.admin_port, args.telemetry_port, args.media_port)
    config = ClientConfig(token=args.token, world_bounds=tuple(args.bounds))
    client = TeleopClient(scheduler, transport, config)
    runner = WallClockRunner(scheduler)
    transport.serve(runner, client)
    runner.post(client.connect)
    if args.script:
        with open(args.script, "r", encoding="ascii") as fh:
            steps = parse_script(fh.read())

        def schedule_steps() -> None:
            if not client.connected:
                scheduler.call_later(50.0, schedule_steps)
                return
            base = scheduler.now
            actions = {
                "drive": lambda a: client.send_drive(float(a[0]), float(a[1])),
                "stop": lambda a: client.send_stop(),
                "ptz": lambda a: client.send_ptz(float(a[0]), float(a[1]), float(a[2])),
                "mode": lambda a: client.send_mode(a[0]),
                "joystick": lambda a: client.send_joystick((int(a[0]), int(a[1]))),
            }
            for t, action, params in steps:
                if action not in actions:
                    log.warning("script action %r not available in live mode", action)
                    continue
                scheduler.call_at(base + t, lambda a=params, fn=actions[action]: fn(a))

        runner.post(schedule_steps)

    if not args.no_gateway:
        gateway = GatewayServer(client, port=args.gateway_port, post=runner.post)
        gateway.start_background()
        log.info("gateway listening on ws://127.0.0.1:%d", args.gateway_port)
    if args.serve_ui:
        _serve_static(args.serve_ui, args.ui_port)
        log.info("console UI at http://127.0.0.1:%d", args.ui_port)
    try:
        runner.run()
    except KeyboardInterrupt:
        pass
    finally:
        if args.report and client.arrivals:
            # without the server pose log, export only the remote path
            fake_log = [(t, f.x, f.y, f.theta) for t, f in client.arrivals]
            paths_to_csv(fake_log, client.arrivals, args.report)
        transport.close()
    return 0


def _serve_static(directory: str, port: int) -> threading.Thread:
    import functools
    from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer

    handler = functools.partial(SimpleHTTPRequestHandler, directory=directory)
    httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return thread


if __name__ == "__main__":  # pragma: no cover
    sys.exit(sim_main())

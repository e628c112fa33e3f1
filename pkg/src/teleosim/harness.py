"""Loopback simulation: server and client wired through the impairment
pipe on one virtual clock. This is how the headless CLI and the
acceptance suite run end-to-end scenarios without sockets.
"""

from __future__ import annotations

from .client import ClientConfig, TeleopClient
from .clock import Scheduler
from .geometry import WorldModel
from .netsim import DelayProfile, ImpairedPipe, PipeEndpoint
from .server import ServerConfig, TeleopServer
from .wire import ChannelClass


class LoopbackSim:
    def __init__(
        self,
        world: WorldModel,
        profile: DelayProfile = DelayProfile(),
        server_config: ServerConfig | None = None,
        client_config: ClientConfig | None = None,
    ):
        self.scheduler = Scheduler()
        self.pipe = ImpairedPipe(self.scheduler, profile)
        server_config = server_config or ServerConfig()
        if client_config is None:
            client_config = ClientConfig(world_bounds=world.bounds)
        client_config.token = server_config.token
        self.server = TeleopServer(
            world, self.scheduler, PipeEndpoint(self.pipe, "server"), server_config
        )
        self.client = TeleopClient(
            self.scheduler, PipeEndpoint(self.pipe, "client"), client_config
        )
        # inbound wiring: what each side receives
        self.pipe.on_receive("server", ChannelClass.ADMIN_COMMAND, self.server.on_admin_bytes)
        self.pipe.on_receive("server", ChannelClass.TELEMETRY, self.server.on_datagram_bytes)
        self.pipe.on_receive("client", ChannelClass.ADMIN_COMMAND, self.client.on_admin_bytes)
        self.pipe.on_receive("client", ChannelClass.TELEMETRY, self.client.on_telemetry_bytes)
        self.pipe.on_receive("client", ChannelClass.MEDIA, self.client.on_media_bytes)

    def start(self, connect: bool = True) -> None:
        self.server.start()
        if connect:
            self.client.connect()

    def run_for(self, duration_ms: float) -> None:
        self.scheduler.run_for(duration_ms)

    def run_until(self, t_ms: float) -> None:
        self.scheduler.run_until(t_ms)

    def run_until_connected(self, timeout_ms: float = 5000.0) -> None:
        deadline = self.scheduler.now + timeout_ms
        step = 10.0
        while not self.client.connected and self.scheduler.now < deadline:
            self.scheduler.run_for(step)
        if not self.client.connected:
            raise TimeoutError("client failed to connect")

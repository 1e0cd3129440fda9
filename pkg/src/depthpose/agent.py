"""Per-robot estimation loop: depth observers, message exchange, relative-pose EKF.

One step of an agent is split in two phases so a harness can interleave two
agents deterministically:

1. :meth:`Agent.sense_and_send` steps every depth observer with this step's
   measurement and broadcasts an :class:`EstimateMessage`;
2. :meth:`Agent.receive_and_update` drains the transport and, when a fresh
   peer message pairs with the local estimates on at least two points,
   runs an EKF predict followed by per-point updates.

:func:`agent_step` performs both phases back to back.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping

from .ekf import PointPairObservation, RelPoseEKF, SideEstimate
from .errors import MalformedMessage
from .geometry import UnicycleInput
from .observer import (
    CHI_MAX,
    CHI_MIN,
    DepthObserverGains,
    DepthObserverState,
    init_observer,
    observer_step,
)
from .protocol import EstimateMessage, PointEstimate, deserialize, serialize

log = logging.getLogger(__name__)

MIN_SHARED_POINTS = 2


@dataclass
class AgentCounters:
    sent: int = 0
    received: int = 0
    malformed: int = 0
    out_of_order: int = 0
    stale_skipped: int = 0
    insufficient_points: int = 0
    update_cycles: int = 0


class Agent:
    def __init__(self, agent_id: str, gains: DepthObserverGains | None = None,
                 prior_depth: Callable[[int], float] | Mapping[int, float] | float = 1.0,
                 ekf: RelPoseEKF | None = None, staleness_limit: float = 0.2,
                 method: str = "euler", chi_min: float = CHI_MIN, chi_max: float = CHI_MAX):
        if agent_id not in ("A", "B"):
            raise ValueError(f"agent_id must be 'A' or 'B', got {agent_id!r}")
        self.agent_id = agent_id
        self.gains = gains if gains is not None else DepthObserverGains()
        self.prior_depth = prior_depth
        self.ekf = ekf
        self.staleness_limit = staleness_limit
        self.method = method
        self.chi_min = chi_min
        self.chi_max = chi_max
        self.observers: dict[int, DepthObserverState] = {}
        self.seq = 0
        self.latest_local: EstimateMessage | None = None
        self.peer_cache: EstimateMessage | None = None
        self.counters = AgentCounters()
        self.ekf_time: float | None = None
        self._u_prev = UnicycleInput(0.0, 0.0)
        self._u_peer_prev = UnicycleInput(0.0, 0.0)
        self._fresh_peer = False

    def _prior(self, point_id: int) -> float:
        p = self.prior_depth
        if callable(p):
            return float(p(point_id))
        if isinstance(p, Mapping):
            return float(p[point_id])
        return float(p)

    def sense_and_send(self, measurements, u, t: float, dt: float, transport=None) -> EstimateMessage:
        u = UnicycleInput(float(u[0]), float(u[1]))
        points = []
        for pid, s in sorted(measurements, key=lambda m: m[0]):
            state = self.observers.get(pid)
            if state is None:
                state = init_observer(s, self._prior(pid), self.gains, self.chi_min, self.chi_max)
            out = observer_step(state, s, u, dt, self.method)
            self.observers[pid] = out.new_state
            # message carries the estimate valid at time t, i.e. the pre-step state
            points.append(PointEstimate(pid, (float(s[0]), float(s[1])), tuple(out.s_hat_rate),
                                        state.chi_hat, out.chi_hat_rate))
        msg = EstimateMessage(self.agent_id, self.seq, float(t), u, tuple(points))
        self.seq += 1
        self.latest_local = msg
        if transport is not None:
            transport.send(serialize(msg))
            self.counters.sent += 1
        return msg

    def _receive(self, transport) -> None:
        for data in transport.poll():
            try:
                msg = deserialize(data)
            except MalformedMessage as exc:
                self.counters.malformed += 1
                log.warning("agent %s dropped malformed datagram: %s", self.agent_id, exc)
                continue
            if msg.agent_id == self.agent_id:
                continue
            self.counters.received += 1
            if self.peer_cache is not None and msg.seq <= self.peer_cache.seq:
                self.counters.out_of_order += 1
                continue
            self.peer_cache = msg
            self._fresh_peer = True

    def pair_observations(self) -> list[PointPairObservation]:
        local, peer = self.latest_local, self.peer_cache
        if local is None or peer is None:
            return []
        pairs = []
        for lp in local.points:
            pp = peer.point(lp.point_id)
            if pp is None:
                continue
            pairs.append(PointPairObservation(
                lp.point_id,
                SideEstimate(lp.s, lp.chi, lp.s_rate, lp.chi_rate, local.timestamp),
                SideEstimate(pp.s, pp.chi, pp.s_rate, pp.chi_rate, peer.timestamp)))
        return pairs

    def receive_and_update(self, transport, t: float) -> None:
        if transport is not None:
            self._receive(transport)
        if self.ekf is None:
            self._fresh_peer = False
            return
        if self.ekf_time is not None and t > self.ekf_time:
            # inputs held over the elapsed interval are the previous step's
            self.ekf.predict(self._u_prev, self._u_peer_prev, t - self.ekf_time)
        self.ekf_time = t
        local, peer = self.latest_local, self.peer_cache
        if self._fresh_peer and local is not None:
            if abs(local.timestamp - peer.timestamp) > self.staleness_limit + 1e-9:
                self.counters.stale_skipped += 1
            else:
                pairs = self.pair_observations()
                if len(pairs) >= MIN_SHARED_POINTS:
                    self.ekf.update_all(pairs, local.u, peer.u)
                    self.counters.update_cycles += 1
                else:
                    self.counters.insufficient_points += 1
        self._fresh_peer = False
        if local is not None:
            self._u_prev = local.u
        if peer is not None:
            self._u_peer_prev = peer.u

    def depth(self, point_id: int) -> float | None:
        """Depth estimate carried by the latest outgoing message."""
        if self.latest_local is None:
            return None
        p = self.latest_local.point(point_id)
        return None if p is None else 1.0 / p.chi


def agent_step(agent: Agent, measurements, u, dt: float, transport=None, t: float | None = None) -> Agent:
    if t is None:
        t = 0.0 if agent.latest_local is None else agent.latest_local.timestamp + dt
    agent.sense_and_send(measurements, u, t, dt, transport)
    agent.receive_and_update(transport, t)
    return agent

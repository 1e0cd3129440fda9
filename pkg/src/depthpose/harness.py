"""Scenario execution, metrics and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import Agent
from .config import ScenarioConfig, set_path
from .ekf import InnovationModel, RelPoseEKF
from .errors import IoError
from .geometry import SE2Pose, inverse, relative_pose
from .observer import pe_excitation, pe_window_integral
from .sim import Simulator, WorldState, ground_truth, points_from_camera_a
from .transport import inproc_pair, udp_pair

log = logging.getLogger(__name__)


def convergence_time(times, errors, threshold: float) -> float | None:
    """First time after which ``errors`` stays within ``threshold`` until the end.

    Missing samples (NaN) count as outside the band. Returns ``None`` when the
    last sample is outside the band.
    """
    err = np.asarray(errors, dtype=float)
    outside = ~(np.abs(err) <= threshold)
    if not outside.any():
        return float(times[0])
    last = int(np.nonzero(outside)[0][-1])
    if last == len(err) - 1:
        return None
    return float(times[last + 1])


@dataclass
class DepthSeries:
    z_true: np.ndarray
    z_est: np.ndarray  # NaN where the point was not observed
    pe: np.ndarray  # NaN where the point was not observed

    @property
    def error(self) -> np.ndarray:
        return self.z_est - self.z_true

    @property
    def relative_error(self) -> np.ndarray:
        return self.error / self.z_true


@dataclass
class RelposeSeries:
    est: np.ndarray  # (n, 3)
    truth: np.ndarray  # (n, 3)
    rejected: np.ndarray  # cumulative gated updates

    @property
    def error(self) -> np.ndarray:
        e = self.est - self.truth
        e[:, 2] = (e[:, 2] + math.pi) % (2.0 * math.pi) - math.pi
        return e


@dataclass
class RunReport:
    config: ScenarioConfig
    times: np.ndarray
    depth: dict = field(default_factory=dict)  # (agent, point_id) -> DepthSeries
    relpose: dict = field(default_factory=dict)  # agent -> RelposeSeries
    counters: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def records(self):
        """Per-step view of the run, one dict per simulation step."""
        for k, t in enumerate(self.times):
            rec = {"time": float(t), "depth": {}, "relpose": {}}
            for (agent, pid), s in self.depth.items():
                rec["depth"][(agent, pid)] = (s.z_true[k], s.z_est[k], s.pe[k])
            for agent, r in self.relpose.items():
                rec["relpose"][agent] = (r.est[k], r.truth[k], int(r.rejected[k]))
            yield rec


def _agent_ids(config: ScenarioConfig) -> list[str]:
    return ["A", "B"] if config.two_robots else ["A"]


def _make_transport(config: ScenarioConfig):
    tc = config.transport
    if tc.kind == "udp":
        return udp_pair(tc.port_a, tc.port_b)
    return inproc_pair(tc.loss_rate, tc.delay_steps, config.seed)


def run(config: ScenarioConfig) -> RunReport:
    config.validate()
    dt = config.dt
    n = config.n_steps
    agent_ids = _agent_ids(config)
    pose_A = config.robots["A"].pose
    pose_B = config.robots["B"].pose if config.two_robots else pose_A
    points = points_from_camera_a(pose_A, [(p.id, p.camera_a_xyz_m) for p in config.points])
    sim = Simulator(WorldState(pose_A, pose_B, points, 0.0), config.noise_spec(),
                    config.visibility.policy())

    ekf_agents = []
    if config.two_robots and config.ekf.enabled:
        ekf_agents = ["A", "B"] if config.ekf.symmetric else ["A"]
    offset = config.ekf.initial_offset
    offset = SE2Pose(offset[0], offset[1], math.radians(offset[2]))
    true_rel = relative_pose(pose_A, pose_B)

    agents = {}
    for aid in agent_ids:
        ekf = None
        if aid in ekf_agents:
            truth = true_rel if aid == "A" else inverse(true_rel)
            xi0 = SE2Pose(truth.x + offset.x, truth.y + offset.y, truth.theta + offset.theta)
            ekf = RelPoseEKF(xi0, np.diag(config.ekf.P0_diag), config.ekf.noise(),
                             InnovationModel(config.ekf.model))

        def prior(pid, aid=aid):
            return ground_truth(sim.world, pid, aid)[0] + config.observer.depth_prior_offset_m

        agents[aid] = Agent(aid, config.observer.gains(), prior, ekf,
                            config.ekf.staleness_limit_s, config.observer.integrator,
                            config.observer.chi_min, config.observer.chi_max)

    endpoints = dict(zip(("A", "B"), _make_transport(config)))
    pids = [p.id for p in config.points]
    times = np.arange(n + 1) * dt
    depth = {(aid, pid): DepthSeries(np.empty(n + 1), np.full(n + 1, np.nan), np.full(n + 1, np.nan))
             for aid in agent_ids for pid in pids}
    relpose = {aid: RelposeSeries(np.empty((n + 1, 3)), np.empty((n + 1, 3)), np.zeros(n + 1, dtype=int))
               for aid in ekf_agents}

    try:
        for k in range(n + 1):
            t = float(times[k])
            u_true = {aid: config.robots[aid].input_at(t) for aid in agent_ids}
            meas = {}
            for aid in agent_ids:
                meas[aid] = sim.observe(aid)
                u_meas = sim.measured_input(u_true[aid])
                agents[aid].sense_and_send(meas[aid], u_meas, t, dt, endpoints[aid])
                for pid, s in meas[aid]:
                    depth[(aid, pid)].pe[k] = pe_excitation(s, u_meas)
            for aid in agent_ids:
                agents[aid].receive_and_update(endpoints[aid], t)

            truth_rel = relative_pose(sim.world.pose_A, sim.world.pose_B)
            for aid in agent_ids:
                msg = agents[aid].latest_local
                for pid in pids:
                    series = depth[(aid, pid)]
                    series.z_true[k] = ground_truth(sim.world, pid, aid)[0]
                    p = msg.point(pid)
                    if p is not None:
                        series.z_est[k] = 1.0 / p.chi
            for aid in ekf_agents:
                ekf = agents[aid].ekf
                r = relpose[aid]
                r.est[k] = ekf.xi.as_array()
                r.truth[k] = (truth_rel if aid == "A" else inverse(truth_rel)).as_array()
                r.rejected[k] = ekf.rejected
            if k < n:
                u_A = u_true["A"]
                u_B = u_true["B"] if config.two_robots else u_true["A"]
                sim.step(u_A, u_B, dt, time=float(times[k + 1]))
    finally:
        for ep in endpoints.values():
            close = getattr(ep, "close", None)
            if close is not None:
                close()

    counters = {}
    for aid, agent in agents.items():
        c = dict(vars(agent.counters))
        if agent.ekf is not None:
            c["ekf_accepted"] = agent.ekf.accepted
            c["ekf_rejected"] = agent.ekf.rejected
        tx = getattr(endpoints[aid], "tx", None)
        if tx is not None:
            c["link_sent"] = tx.sent
            c["link_dropped"] = tx.dropped
        counters[aid] = c
    report = RunReport(config, times, depth, relpose, counters)
    report.summary = summarize(report)
    return report


def summarize(report: RunReport) -> dict:
    cfg = report.config
    m = cfg.metrics
    times = report.times
    depth = {}
    for (aid, pid), s in report.depth.items():
        err = s.error
        pe_int = pe_window_integral(np.nan_to_num(s.pe), cfg.dt, m.pe_window_s)
        depth.setdefault(aid, {})[str(pid)] = {
            "convergence_time_s": convergence_time(times, err, m.depth_threshold_m),
            "convergence_time_relative_s": convergence_time(times, s.relative_error,
                                                            m.depth_relative_threshold),
            "final_error_m": _num(err[-1]),
            "max_abs_error_m": _num(np.nanmax(np.abs(err))) if np.isfinite(err).any() else None,
            "min_pe_window_integral": _num(pe_int.min()) if pe_int.size else None,
        }
    relpose = {}
    for aid, r in report.relpose.items():
        e = r.error
        trans = np.maximum(np.abs(e[:, 0]), np.abs(e[:, 1]))
        relpose[aid] = {
            "convergence_time_translation_s": convergence_time(times, trans, m.translation_threshold_m),
            "convergence_time_orientation_s": convergence_time(
                times, e[:, 2], math.radians(m.orientation_threshold_deg)),
            "final_error_x_m": _num(e[-1, 0]),
            "final_error_y_m": _num(e[-1, 1]),
            "final_error_theta_deg": _num(math.degrees(e[-1, 2])),
            "rejected_updates": int(r.rejected[-1]),
        }
    return {
        "name": cfg.name,
        "steps": int(len(times)),
        "duration_s": cfg.duration_s,
        "rate_hz": cfg.rate_hz,
        "seed": cfg.seed,
        "depth": depth,
        "relpose": relpose,
        "counters": report.counters,
        "config": cfg.to_dict(),
    }


def _num(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def sweep(config: ScenarioConfig, parameter: str, values, jobs: int = 1) -> list[RunReport]:
    """One run per value of the dotted ``parameter``; all runs share the config seed."""
    configs = [set_path(config, parameter, v) for v in values]
    if not configs:
        return []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]


def _fmt(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ""


def depth_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "agent", "point_id", "z_true", "z_est", "error", "pe"])
    keys = sorted(report.depth)
    for k, t in enumerate(report.times):
        for aid, pid in keys:
            s = report.depth[(aid, pid)]
            w.writerow([_fmt(t), aid, pid, _fmt(s.z_true[k]), _fmt(s.z_est[k]),
                        _fmt(s.z_est[k] - s.z_true[k]), _fmt(s.pe[k])])
    return buf.getvalue()


_XI = ("rx", "ry", "theta")


def relpose_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    aids = sorted(report.relpose)
    header = ["time"]
    for aid in aids:
        p = "" if aid == "A" else f"{aid}_"
        header += [f"{p}{c}_est" for c in _XI] + [f"{p}{c}_true" for c in _XI]
        header += [f"{p}err_{c}" for c in _XI] + [f"{p}rejected_updates"]
    w.writerow(header)
    errors = {aid: report.relpose[aid].error for aid in aids}
    for k, t in enumerate(report.times):
        row = [_fmt(t)]
        for aid in aids:
            r = report.relpose[aid]
            row += [_fmt(v) for v in r.est[k]] + [_fmt(v) for v in r.truth[k]]
            row += [_fmt(v) for v in errors[aid][k]] + [str(int(r.rejected[k]))]
        w.writerow(row)
    return buf.getvalue()


def summary_json(report: RunReport) -> str:
    return json.dumps(report.summary, indent=2, sort_keys=True) + "\n"


def report_emit(report: RunReport, out_dir, formats=("csv", "json-summary")) -> list[Path]:
    """Write report files into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    files = {}
    for fmt in formats:
        if fmt == "csv":
            files["depth_errors.csv"] = depth_csv(report)
            if report.relpose:
                files["relpose.csv"] = relpose_csv(report)
        elif fmt == "json-summary":
            files["summary.json"] = summary_json(report)
            files["config.json"] = json.dumps(report.config.to_dict(), indent=2, sort_keys=True) + "\n"
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text)
            written.append(path)
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return written


__all__ = [
    "RunReport", "run", "sweep", "report_emit", "summarize", "convergence_time",
    "depth_csv", "relpose_csv", "summary_json",
]

"""Deterministic scenario execution: world stepping and the replan loop.

The control loop alternates between four states.  PLANNING builds a geometric
path and times it against the current obstacle predictions; EXECUTING follows
the timed trajectory and revalidates it at every perception tick; WAITING
holds position when no safe timing exists, retrying each tick; once the wait
timer expires the path itself is replanned (REPLANNING), treating obstacles
that have stopped as static blockers.  Everything is a pure function of
(scenario, configs, seed).
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import (FootprintSpec, ObstacleShape, clearance_to_obstacle,
                        footprint_circles)
from .geometry import CurveLibrary, Pose, build_curve_library, normalize_angle
from .rrt import Path, PlannerConfig, plan_path
from .scenarios import Scenario, ScriptedObstacle
from .temporal import (NodeIntervals, TemporalConfig, Trajectory,
                       compute_safe_intervals, optimize_timestamps,
                       select_interval_sequence, validate_trajectory)
from .tracking import Observation, TrackerConfig, TrackStore, predict_pose

PLANNING = "planning"
EXECUTING = "executing"
WAITING = "waiting"
REPLANNING = "replanning"

STOP_SPEED = 0.1  # below this a track counts as stopped, m/s
BLOCKER_INFLATION = 1.5  # extra radius for tracks frozen into the static map, m
SLOW_FACTOR = 2.5  # accept a timing only if within this multiple of free flow
REVALIDATE_MARGIN = 0.3  # predicted gap below this triggers a re-timing, m


@dataclass
class WorldState:
    """Snapshot used by the stepping primitive."""

    scenario: Scenario
    time: float = 0.0
    robot_pose: Pose | None = None
    trajectory: Trajectory | None = None
    exec_start: float = 0.0

    def __post_init__(self):
        if self.robot_pose is None:
            self.robot_pose = self.scenario.start

    def obstacle_poses(self) -> list[Pose]:
        return [mob.pose_at(self.time) for mob in self.scenario.moving]


def step(state: WorldState, dt: float) -> WorldState:
    """Advance scripted obstacles and the robot by dt of simulated time."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t = state.time + dt
    pose = state.robot_pose
    if state.trajectory is not None:
        pose = state.trajectory.pose_at(t - state.exec_start)
    return replace(state, time=t, robot_pose=pose)


@dataclass
class PlanningEvent:
    """One planning or re-timing attempt, kept for analysis and SI charts."""

    time: float
    kind: str  # "initial" | "retime" | "replan"
    path: Path | None
    trajectory: Trajectory | None
    node_intervals: list[NodeIntervals] | None
    latency: float  # wall-clock seconds; excluded from exported artifacts
    tracks: list = None  # ObstacleTrack snapshot the plan was made against


@dataclass
class TraceLog:
    """Per-tick record of one scenario run."""

    scenario_name: str
    seed: int
    sim_dt: float
    times: list[float] = field(default_factory=list)
    poses: list[tuple[float, float, float]] = field(default_factory=list)
    velocities: list[float] = field(default_factory=list)
    accelerations: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    obstacle_ids: list[int] = field(default_factory=list)
    obstacle_poses: dict[int, list[tuple[float, float, float]]] = field(default_factory=dict)
    clearances: list[float] = field(default_factory=list)
    events: list[PlanningEvent] = field(default_factory=list)
    success: bool = False
    failure_reason: str = ""

    def to_csv(self, path) -> None:
        header = ["t", "x", "y", "theta", "v", "a", "flag"]
        for oid in self.obstacle_ids:
            header += ["obs_id", "obs_x", "obs_y"]
        lines = [",".join(header)]
        for i in range(len(self.times)):
            row = ["%.17g" % self.times[i]]
            row += ["%.17g" % v for v in self.poses[i]]
            row += ["%.17g" % self.velocities[i], "%.17g" % self.accelerations[i]]
            row.append(self.flags[i])
            for oid in self.obstacle_ids:
                ox, oy, _ = self.obstacle_poses[oid][i]
                row += [str(oid), "%.17g" % ox, "%.17g" % oy]
            lines.append(",".join(row))
        try:
            with open(path, "w") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise OSError(f"writing {path}: {exc}") from exc

    @classmethod
    def from_csv(cls, path) -> "TraceLog":
        """Rebuild the tick record (not the planning events) from a trace CSV."""
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        header = lines[0].split(",")
        n_obs = header.count("obs_id")
        trace = cls(scenario_name="", seed=0, sim_dt=0.0)
        for lineno, ln in enumerate(lines[1:], 2):
            parts = ln.split(",")
            if len(parts) != 7 + 3 * n_obs:
                raise ValueError(f"{path}:{lineno}: expected {7 + 3 * n_obs} fields")
            trace.times.append(float(parts[0]))
            trace.poses.append((float(parts[1]), float(parts[2]), float(parts[3])))
            trace.velocities.append(float(parts[4]))
            trace.accelerations.append(float(parts[5]))
            trace.flags.append(parts[6])
            for k in range(n_obs):
                oid = int(parts[7 + 3 * k])
                if oid not in trace.obstacle_poses:
                    trace.obstacle_ids.append(oid)
                    trace.obstacle_poses[oid] = []
                trace.obstacle_poses[oid].append(
                    (float(parts[8 + 3 * k]), float(parts[9 + 3 * k]), 0.0))
        if len(trace.times) > 1:
            trace.sim_dt = trace.times[1] - trace.times[0]
        return trace


def metrics(trace: TraceLog) -> dict:
    pts = np.asarray(trace.poses, dtype=float)
    length = float(np.sum(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1])))) \
        if len(pts) > 1 else 0.0
    return {
        "total_time": trace.times[-1] if trace.times else 0.0,
        "total_length": length,
        "min_clearance": min(trace.clearances) if trace.clearances else math.inf,
        "success": trace.success,
    }


def _track_blockers(tracks, t_now: float, only_stopped: bool, inflation: float):
    """Freeze (some) tracks into static disks for path planning."""
    shapes = []
    for tr in tracks:
        if only_stopped and tr.speed >= STOP_SPEED:
            continue
        pose, fp = predict_pose(tr, t_now)
        for cx, cy in footprint_circles(fp, pose):
            shapes.append(ObstacleShape.disk(float(cx), float(cy), fp.radius + inflation))
    return shapes


class _Runner:
    def __init__(self, scenario: Scenario, planner_config: PlannerConfig | None,
                 temporal_config: TemporalConfig | None, seed: int,
                 library: CurveLibrary | None, ground_truth_tracks: bool,
                 replan_timeout: float):
        self.sc = scenario
        self.lib = library if library is not None else build_curve_library()
        self.seed = seed
        self.noise_rng = np.random.default_rng(seed)
        self.ground_truth = ground_truth_tracks
        self.replan_timeout = replan_timeout
        self.pcfg = planner_config or PlannerConfig()
        self.tcfg = temporal_config or TemporalConfig(
            v_max=scenario.v_max, a_max=scenario.a_max, horizon=scenario.horizon)
        biggest = max((m.footprint for m in scenario.moving),
                      key=lambda f: f.radius, default=None)
        self.store = TrackStore(TrackerConfig(default_footprint=biggest))
        self.plan_count = 0
        self.trace = TraceLog(scenario.name, seed, scenario.sim_dt,
                              obstacle_ids=[m.id for m in scenario.moving],
                              obstacle_poses={m.id: [] for m in scenario.moving})

    # -- perception ------------------------------------------------------

    def observe(self, t: float) -> None:
        obs = []
        for mob in self.sc.moving:
            p = mob.position_at(t)
            if not self.ground_truth and self.sc.obs_noise > 0.0:
                p = p + self.noise_rng.normal(0.0, self.sc.obs_noise, 2)
            noise = np.eye(2) * max(self.sc.obs_noise, 0.01) ** 2
            obs.append(Observation((float(p[0]), float(p[1])), t, noise))
        self.store.step(obs, t)

    # -- planning --------------------------------------------------------

    def _plan_geometric(self, start: Pose, blockers) -> Path | None:
        obstacles = self.sc.static_obstacles + blockers
        cfg = replace(self.pcfg, rng_seed=self.seed * 10007 + self.plan_count,
                      world_bounds=self.sc.bounds)
        self.plan_count += 1
        try:
            result = plan_path(start, self.sc.goal, obstacles, cfg, self.lib, self.sc.robot)
        except ValueError:
            return None
        return result.path if result else None

    def _time_path(self, path: Path, t_now: float):
        """SIs + selection + SQP + independent validation; None when unsafe."""
        tracks = self.store.snapshot()
        nis = compute_safe_intervals(path, tracks, self.sc.static_obstacles,
                                     self.tcfg, self.sc.robot, t0=t_now)
        seq = select_interval_sequence(nis, self.tcfg, np.diff(path.arc_lengths))
        traj = optimize_timestamps(path, seq, self.tcfg) if seq else None
        if traj is not None and not validate_trajectory(
                traj, tracks, self.sc.static_obstacles, self.sc.sim_dt,
                self.sc.robot, t0=t_now):
            traj = None
        return traj, nis

    def make_plan(self, start: Pose, t_now: float, kind: str):
        """Plan and time a path; fall back to routing around frozen tracks.

        The primary attempt keeps moving obstacles out of the static map (only
        stopped ones are frozen) and lets the temporal layer handle them; when
        that fails or yields a crawl, a second attempt freezes every track in
        place, which is what produces overtaking and detours around blockers.
        """
        t_wall = _time.perf_counter()
        candidates = []
        for only_stopped in (True, False):
            path = None
            for inflation in (BLOCKER_INFLATION, BLOCKER_INFLATION / 2.0, 0.0):
                blockers = _track_blockers(self.store.snapshot(), t_now,
                                           only_stopped, inflation)
                path = self._plan_geometric(start, blockers)
                if path is not None:
                    break
            if path is None:
                continue
            traj, nis = self._time_path(path, t_now)
            if traj is not None:
                candidates.append((traj, nis, path))
                free_flow = path.total_length / self.tcfg.v_max
                if only_stopped and traj.duration <= SLOW_FACTOR * free_flow:
                    break  # primary plan is fine; skip the frozen-track variant
        best = min(candidates, key=lambda c: c[0].duration) if candidates else None
        latency = _time.perf_counter() - t_wall
        if best is None:
            self.trace.events.append(PlanningEvent(t_now, kind, None, None, None, latency,
                                                   self.store.snapshot()))
            return None
        traj, nis, path = best
        self.trace.events.append(PlanningEvent(t_now, kind, path, traj, nis, latency,
                                               self.store.snapshot()))
        return traj

    # -- main loop -------------------------------------------------------

    def run(self) -> TraceLog:
        sc = self.sc
        dt = sc.sim_dt
        per_ticks = max(1, round(sc.perception_dt / dt))
        # Perception warm-up: the tracker has been watching for a second
        # before the run starts, so velocity estimates exist at t = 0.
        for k in range(10):
            self.observe(-1.0 + 0.1 * k)
        pose = sc.start
        prev_pose = pose
        prev_v = 0.0
        state = PLANNING
        traj: Trajectory | None = None
        exec_start = 0.0
        wait_start = 0.0
        n_ticks = int(round(sc.time_limit / dt))
        for tick in range(n_ticks + 1):
            t = tick * dt
            if tick % per_ticks == 0 and tick > 0:
                self.observe(t)
            flag = state
            if state == PLANNING:
                traj = self.make_plan(pose, t, "initial")
                if traj is not None:
                    state = EXECUTING
                    exec_start = t
                else:
                    state = WAITING
                    wait_start = t
                flag = PLANNING
            elif state == EXECUTING and tick % per_ticks == 0:
                tracks = self.store.snapshot()
                if not self._future_safe(traj, exec_start, t, tracks):
                    new_traj = self._retime(traj, exec_start, t)
                    if new_traj is not None:
                        traj, exec_start = new_traj, t
                        flag = REPLANNING
                    else:
                        traj = None
                        state = WAITING
                        wait_start = t
                        flag = WAITING
            elif state == WAITING and tick % per_ticks == 0:
                if t - wait_start >= self.replan_timeout:
                    new_traj = self.make_plan(pose, t, "replan")
                    flag = REPLANNING
                    if new_traj is not None:
                        traj, exec_start = new_traj, t
                        state = EXECUTING
                    else:
                        wait_start = t  # timer restarts; keep holding
            # Advance the robot along the active trajectory.
            if state == EXECUTING and traj is not None:
                pose = traj.pose_at(t - exec_start)
            self._log_tick(t, pose, prev_pose, prev_v, flag)
            prev_v = self.trace.velocities[-1]
            prev_pose = pose
            if self._at_goal(pose):
                self.trace.success = True
                break
        else:
            self.trace.failure_reason = "time limit exceeded"
        return self.trace

    def _future_safe(self, traj, exec_start, t_now, tracks) -> bool:
        """Check the not-yet-driven part of the trajectory against fresh tracks."""
        rel = t_now - exec_start
        times = np.arange(rel, traj.duration + self.sc.sim_dt / 2.0, self.sc.sim_dt)
        if len(times) == 0:
            times = np.array([traj.duration])
        svals = np.interp(times, traj.timestamps, traj.path.arc_lengths)
        grid, dense = traj.path.dense_samples()
        poses = np.stack([np.interp(svals, grid, dense[:, j]) for j in range(3)], axis=-1)
        from .collision import footprint_circles_batch
        from .temporal import _predicted_obstacle_circles
        robot = footprint_circles_batch(self.sc.robot, poses)
        for centers, radius, _v in _predicted_obstacle_circles(
                tracks, times, exec_start):
            d = np.linalg.norm(robot[:, :, None, :] - centers[:, None, :, :], axis=-1)
            if np.any(d <= self.sc.robot.radius + radius + REVALIDATE_MARGIN):
                return False
        return True

    def _retime(self, traj, exec_start, t_now):
        """Re-run temporal optimization on the remaining path from here."""
        s_now = traj.arc_length_at(t_now - exec_start)
        rem = traj.path.subpath_from(s_now)
        if len(rem.poses) < 2:
            return None
        new_traj, nis = self._time_path(rem, t_now)
        self.trace.events.append(PlanningEvent(t_now, "retime", rem, new_traj, nis, 0.0,
                                               self.store.snapshot()))
        return new_traj

    def _at_goal(self, pose: Pose) -> bool:
        sc = self.sc
        return (math.hypot(pose.x - sc.goal.x, pose.y - sc.goal.y) <= sc.goal_pos_tol
                and abs(normalize_angle(pose.theta - sc.goal.theta)) <= sc.goal_heading_tol)

    def _log_tick(self, t, pose, prev_pose, prev_v, flag) -> None:
        sc = self.sc
        v = math.hypot(pose.x - prev_pose.x, pose.y - prev_pose.y) / sc.sim_dt \
            if self.trace.times else 0.0
        a = (v - prev_v) / sc.sim_dt if self.trace.times else 0.0
        robot_circles = footprint_circles(sc.robot, pose)
        clear = math.inf
        for obs in sc.static_obstacles:
            clear = min(clear, clearance_to_obstacle(robot_circles, sc.robot.radius, obs))
        for mob in sc.moving:
            clear = min(clear, clearance_to_obstacle(
                robot_circles, sc.robot.radius, mob.shape_at(t)))
        self.trace.times.append(t)
        self.trace.poses.append((pose.x, pose.y, pose.theta))
        self.trace.velocities.append(v)
        self.trace.accelerations.append(a)
        self.trace.flags.append(flag)
        self.trace.clearances.append(clear)
        for mob in sc.moving:
            p = mob.pose_at(t)
            self.trace.obstacle_poses[mob.id].append((p.x, p.y, p.theta))


def run_scenario(scenario: Scenario, planner_config: PlannerConfig | None = None,
                 temporal_config: TemporalConfig | None = None, seed: int = 0,
                 library: CurveLibrary | None = None,
                 ground_truth_tracks: bool = False,
                 replan_timeout: float = 3.0) -> TraceLog:
    """Execute one scenario to completion; deterministic in (scenario, seed)."""
    runner = _Runner(scenario, planner_config, temporal_config, seed, library,
                     ground_truth_tracks, replan_timeout)
    return runner.run()


def export_artifacts(trace: TraceLog, out_dir, scenario: Scenario | None = None) -> None:
    """Write trace CSV, metrics summary, trace SVG, and per-plan SI charts."""
    import os

    from .svg import SvgCanvas, plot_intervals, speed_color

    os.makedirs(out_dir, exist_ok=True)
    trace.to_csv(os.path.join(out_dir, "trace.csv"))
    m = metrics(trace)
    with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
        for key in sorted(m):
            val = m[key]
            fh.write("%s %s\n" % (key, val if isinstance(val, bool) else "%.17g" % val))
    pts = trace.poses
    if scenario is not None:
        box = scenario.bounds
    else:
        xs = [p[0] for p in pts] or [0.0]
        ys = [p[1] for p in pts] or [0.0]
        box = (min(xs) - 5, min(ys) - 5, max(xs) + 5, max(ys) + 5)
    cv = SvgCanvas(box)
    if scenario is not None:
        for obs in scenario.static_obstacles:
            if obs.kind == "disk":
                cv.circle(obs.center[0], obs.center[1], obs.radius, fill="#888888")
            elif obs.kind == "polygon":
                cv.polygon(obs.vertices, fill="#888888")
            elif obs.kind == "footprint":
                for cx, cy in footprint_circles(obs.footprint, obs.pose):
                    cv.circle(cx, cy, obs.footprint.radius, fill="#888888")
    v_max = scenario.v_max if scenario is not None else 2.0
    stride = max(1, len(pts) // 200)
    for i in range(0, len(pts), stride):
        x, y, _ = pts[i]
        cv.circle(x, y, 0.4, fill=speed_color(trace.velocities[i], v_max),
                  stroke="none", opacity=0.6)
    for oid in trace.obstacle_ids:
        opts = trace.obstacle_poses[oid]
        cv.polyline([(p[0], p[1]) for p in opts[::stride]], stroke="#777777",
                    stroke_width=1.0)
    cv.polyline([(p[0], p[1]) for p in pts], stroke="#000000", stroke_width=0.8)
    cv.write(os.path.join(out_dir, "trace.svg"))
    for k, ev in enumerate(e for e in trace.events if e.node_intervals is not None):
        intervals = [[(si.start, si.end) for si in ni.intervals]
                     for ni in ev.node_intervals]
        positions = list(range(len(intervals)))
        plot_intervals(positions, intervals, 60.0,
                       os.path.join(out_dir, "intervals_%02d.svg" % k))

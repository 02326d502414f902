"""Safe-interval estimation and timestamp optimization along a fixed path.

Each path node gets the set of time windows during which its pose is
collision-free against predicted obstacle motion.  A layered search picks one
interval per node (children must overlap their parent long enough to pass),
then the node timestamps are optimized: minimize arrival time and acceleration
effort subject to the interval bounds and velocity/acceleration limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .collision import FootprintSpec, footprint_circles_batch, poses_in_collision
from .rrt import Path
from .tracking import ObstacleTrack, predict_pose

# Minimum timestamp gap; true stopping is a long dwell, never equal stamps.
DT_MIN = 1e-3


@dataclass(frozen=True)
class SafeInterval:
    start: float
    end: float  # math.inf for an open horizon

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"degenerate interval [{self.start}, {self.end}]")


@dataclass
class NodeIntervals:
    node_index: int
    intervals: list[SafeInterval]


@dataclass
class IntervalSequence:
    """One (parent-narrowed) interval per node, in path order."""

    chosen: list[SafeInterval]
    source_indices: list[int]  # which original SI of each node was narrowed


@dataclass
class TemporalConfig:
    v_max: float = 2.0
    a_max: float = 1.0
    horizon: float = 30.0
    si_dt: float = 0.1
    overlap_min: float = 2.0 * (4.6 / 2.0)  # 2 x vehicle length / v_max
    sqp_tolerance: float = 1e-8
    sqp_max_iters: int = 200
    si_margin: float | None = None  # obstacle inflation during SI estimation; None = half the longest edge
    influence_extra: float = 0.5  # slack added to the node influence radius

    def __post_init__(self):
        for name in ("v_max", "a_max", "horizon", "si_dt", "sqp_tolerance"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.si_dt > 0.2:
            raise ValueError("si_dt must not exceed 0.2 s")


@dataclass
class Trajectory:
    """A path with optimized node timestamps and the derived motion profile."""

    path: Path
    timestamps: np.ndarray  # t_i, strictly increasing, t_1 = 0
    velocities: np.ndarray  # v_i for i >= 2; v[0] is 0 by convention
    accelerations: np.ndarray  # a_i for i >= 3; a[0:2] are 0 by convention

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1])

    def arc_length_at(self, t: float) -> float:
        """Piecewise-linear s(t) between node timestamps."""
        return float(np.interp(t, self.timestamps, self.path.arc_lengths))

    def pose_at(self, t: float):
        return self.path.pose_at(self.arc_length_at(t))

    def to_csv(self, path) -> None:
        lines = ["i,x,y,theta,s,t,v,a"]
        for i, pose in enumerate(self.path.poses):
            lines.append("%d,%s" % (i + 1, ",".join("%.17g" % v for v in (
                pose.x, pose.y, pose.theta, self.path.arc_lengths[i],
                self.timestamps[i], self.velocities[i], self.accelerations[i]))))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _effective_margin(path: Path, config: TemporalConfig) -> float:
    """SI inflation: half the longest edge, unless the config pins a value.

    Node poses stand in for the whole edge during interval estimation, and a
    pose between two nodes can sit up to half an edge away from either one.
    """
    if config.si_margin is not None:
        return config.si_margin
    edges = np.diff(path.arc_lengths)
    # Capped: past 1 m the inflation starts erasing genuinely usable windows,
    # and the executor revalidates against fresh predictions every tick anyway.
    return min(0.5 * float(np.max(edges)), 1.0) if len(edges) else 0.0


def _predicted_obstacle_circles(tracks, times: np.ndarray, t0: float):
    """Per-track predicted cover circles: list of ((T, k, 2) centers, radius, velocity)."""
    out = []
    for track in tracks:
        dt = (t0 + times) - track.last_update
        px = track.state[0] + track.state[2] * dt
        py = track.state[1] + track.state[3] * dt
        heading = predict_pose(track, track.last_update)[0].theta
        c, s = math.cos(heading), math.sin(heading)
        offs = np.asarray(track.footprint.center_offsets)
        centers = np.stack([px[:, None] + c * offs[None, :],
                            py[:, None] + s * offs[None, :]], axis=-1)
        out.append((centers, track.footprint.radius, track.velocity))
    return out


def compute_safe_intervals(path: Path, tracks, static_obstacles, config: TemporalConfig,
                           footprint: FootprintSpec, t0: float = 0.0) -> list[NodeIntervals]:
    """Safe intervals per node over [0, horizon], sampled every si_dt.

    Times are relative to ``t0`` (the moment the trajectory would start); the
    last interval is open-ended when the node is free at the horizon and every
    tracked obstacle has left its influence disk by then.
    """
    times = np.arange(0.0, config.horizon + config.si_dt / 2.0, config.si_dt)
    margin = _effective_margin(path, config)
    poses = np.array([[p.x, p.y, p.theta] for p in path.poses])
    n = len(poses)
    # No margin against statics: the geometric planner already cleared the
    # whole curve against them, so inflation would only erase narrow passages.
    static_hit = poses_in_collision(footprint, poses, static_obstacles)
    robot_circles = footprint_circles_batch(footprint, poses)  # (n, k, 2)
    free = np.repeat(~static_hit[:, None], len(times), axis=1)  # (n, T)
    obstacle_circles = _predicted_obstacle_circles(tracks, times, t0)
    for centers, radius, _vel in obstacle_circles:
        # (n, k, 1, 1, 2) vs (1, 1, T, m, 2)
        d = np.linalg.norm(robot_circles[:, :, None, None, :] - centers[None, None, :, :, :],
                           axis=-1)
        hit = np.any(d <= footprint.radius + radius + margin, axis=(1, 3))
        free &= ~hit
    result = []
    for i in range(n):
        intervals = []
        row = free[i]
        idx = 0
        while idx < len(times):
            if not row[idx]:
                idx += 1
                continue
            j = idx
            while j + 1 < len(times) and row[j + 1]:
                j += 1
            start = times[idx]
            if j == len(times) - 1 and _open_horizon(i, robot_circles, footprint,
                                                    obstacle_circles, config, margin):
                end = math.inf
            else:
                end = times[j]
            if end > start:
                intervals.append(SafeInterval(float(start), float(end)))
            idx = j + 1
        result.append(NodeIntervals(i, intervals))
    return result


def _open_horizon(i: int, robot_circles, footprint, obstacle_circles, config,
                  margin: float) -> bool:
    """Whether node i stays free past the horizon: every obstacle has exited
    the node's influence disk by the last sample and is not closing in."""
    node_center = robot_circles[i].mean(axis=0)
    for centers, radius, vel in obstacle_circles:
        last = centers[-1].mean(axis=0)  # (2,)
        influence = footprint.radius + radius + margin + config.influence_extra
        away = last - node_center
        dist = float(np.linalg.norm(away))
        if dist <= influence:
            return False
        if float(vel @ away) < 0.0 and float(np.linalg.norm(vel)) > 0.05:
            return False  # still approaching the node
    return True


def select_interval_sequence(node_intervals: list[NodeIntervals],
                             config: TemporalConfig,
                             edge_lengths=None) -> IntervalSequence | None:
    """Layer-by-layer growth of the interval sequence (Fig.-7 style structure).

    A child interval is valid when it overlaps its parent's narrowed interval
    by at least overlap_min and is reachable before it closes; its effective
    start becomes max(child.start, parent.start + minimum edge travel time),
    so branches the car cannot physically reach in time die early.  At the
    last layer the valid leaf with the smallest reachable start wins (ties by
    interval index), and the sequence is recovered by walking parents.
    Returns None when no leaf survives.
    """
    if any(len(ni.intervals) == 0 for ni in node_intervals):
        return None
    if edge_lengths is None:
        travel = [DT_MIN] * (len(node_intervals) - 1)
    else:
        travel = [max(float(d) / config.v_max, DT_MIN) for d in edge_lengths]
    # best[j] = (narrowed_start, parent_choice_index) for interval j of this layer
    first = node_intervals[0].intervals
    layers: list[list[tuple[float, int] | None]] = [[(si.start, -1) for si in first]]
    for layer_i, ni in enumerate(node_intervals[1:], start=1):
        prev = layers[-1]
        prev_ints = node_intervals[layer_i - 1].intervals
        row: list[tuple[float, int] | None] = []
        for child in ni.intervals:
            best: tuple[float, int] | None = None
            for pj, state in enumerate(prev):
                if state is None:
                    continue
                p_start = state[0]
                p_end = prev_ints[pj].end
                overlap = min(p_end, child.end) - max(p_start, child.start)
                if overlap < config.overlap_min:
                    continue
                eff = max(child.start, p_start + travel[layer_i - 1])
                if eff > child.end:
                    continue  # unreachable before the window closes
                if best is None or eff < best[0]:
                    best = (eff, pj)
            row.append(best)
        if all(state is None for state in row):
            return None
        layers.append(row)
    # Pick the leaf with the smallest reachable start.
    leaf_states = layers[-1]
    best_j = None
    for j, state in enumerate(leaf_states):
        if state is None:
            continue
        if best_j is None or state[0] < leaf_states[best_j][0]:
            best_j = j
    if best_j is None:
        return None
    chosen_idx = [0] * len(node_intervals)
    j = best_j
    for layer in range(len(layers) - 1, -1, -1):
        chosen_idx[layer] = j
        j = layers[layer][j][1]
    chosen = []
    for layer, j in enumerate(chosen_idx):
        orig = node_intervals[layer].intervals[j]
        narrowed_start = layers[layer][j][0]
        chosen.append(SafeInterval(narrowed_start, orig.end))
    return IntervalSequence(chosen, chosen_idx)


def velocity_profile(path: Path, timestamps) -> tuple[np.ndarray, np.ndarray]:
    """Node velocities v_i = ds_i/dt_i (i>=2) and accelerations
    a_i = (v_i - v_{i-1})/dt_i (i>=3); leading entries are zero."""
    t = np.asarray(timestamps, dtype=float)
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("timestamps must be strictly increasing")
    ds = np.diff(path.arc_lengths)
    dt = np.diff(t)
    v = np.zeros(len(t))
    v[1:] = ds / dt
    a = np.zeros(len(t))
    if len(t) >= 3:
        a[2:] = np.diff(v[1:]) / dt[1:]
    return v, a


def _feasible_init(path: Path, seq: IntervalSequence, config: TemporalConfig) -> np.ndarray | None:
    """Earliest-arrival greedy timestamps; None when interval geometry and
    v_max are incompatible."""
    ds = np.diff(path.arc_lengths)
    n = len(path.poses)
    t = np.zeros(n)
    if not (seq.chosen[0].start <= 0.0 <= seq.chosen[0].end):
        return None
    for i in range(1, n):
        lo = max(seq.chosen[i].start, t[i - 1] + max(ds[i - 1] / config.v_max, DT_MIN))
        if lo > seq.chosen[i].end:
            return None
        t[i] = lo
    return t


def optimize_timestamps(path: Path, seq: IntervalSequence,
                        config: TemporalConfig) -> Trajectory | None:
    """SQP refinement of node timestamps within the chosen intervals.

    Objective: w_t * t_n^2 + w_a * sum a_i^2 with normalization weights
    w_t = 1/t_min^2, w_a = 1/((n-2) a_max^2).  t_1 is pinned to 0.  Returns
    None when no feasible initialization exists.
    """
    n = len(path.poses)
    if n < 2:
        return None
    init = _feasible_init(path, seq, config)
    if init is None:
        return None
    ds = np.diff(path.arc_lengths)
    t_min = path.total_length / config.v_max
    w_t = 1.0 / t_min**2
    w_a = 1.0 / ((n - 2) * config.a_max**2) if n > 2 else 0.0

    def unpack(x):
        return np.concatenate([[0.0], x])

    def objective(x):
        t = unpack(x)
        dt = np.diff(t)
        val = w_t * t[-1] ** 2
        if n > 2:
            v = ds / dt
            a = np.diff(v) / dt[1:]
            val += w_a * float(a @ a)
        return val

    cons = []

    def ineq(x):
        t = unpack(x)
        dt = np.diff(t)
        v = ds / dt
        g = [dt - DT_MIN, config.v_max - v]
        if n > 2:
            a = np.diff(v) / dt[1:]
            g.append(config.a_max - a)
            g.append(config.a_max + a)
        for i in range(1, n):
            g.append(np.array([t[i] - seq.chosen[i].start]))
            if math.isfinite(seq.chosen[i].end):
                g.append(np.array([seq.chosen[i].end - t[i]]))
        return np.concatenate(g)

    cons.append({"type": "ineq", "fun": ineq})
    res = minimize(objective, init[1:], method="SLSQP", constraints=cons,
                   options={"maxiter": config.sqp_max_iters, "ftol": config.sqp_tolerance})
    candidates = []
    for x in (res.x, init[1:]):
        if x is not None and np.all(ineq(x) >= -1e-9):
            candidates.append(np.asarray(x, dtype=float))
    if not candidates:
        # Feasibility restoration: drive the violation to zero, then re-polish.
        def violation(x):
            g = ineq(x)
            neg = np.minimum(g, 0.0)
            return float(neg @ neg)

        rest = minimize(violation, init[1:], method="SLSQP",
                        options={"maxiter": config.sqp_max_iters, "ftol": 1e-14})
        if rest.x is not None and np.all(ineq(rest.x) >= -1e-9):
            res2 = minimize(objective, rest.x, method="SLSQP", constraints=cons,
                            options={"maxiter": config.sqp_max_iters,
                                     "ftol": config.sqp_tolerance})
            for x in (res2.x, rest.x):
                if x is not None and np.all(ineq(x) >= -1e-9):
                    candidates.append(np.asarray(x, dtype=float))
                    break
    if not candidates:
        return None
    best = unpack(min(candidates, key=objective))
    v, a = velocity_profile(path, best)
    return Trajectory(path, best, v, a)


def validate_trajectory(traj: Trajectory, tracks, static_obstacles, dt: float,
                        footprint: FootprintSpec, t0: float = 0.0,
                        margin: float = 0.0) -> bool:
    """Independent dense-time safety oracle for an optimized trajectory.

    Interpolates the robot pose every ``dt`` seconds (linear in arc length
    between node timestamps) and checks it against predicted obstacle poses.
    """
    times = np.arange(0.0, traj.duration + dt / 2.0, dt)
    svals = np.interp(times, traj.timestamps, traj.path.arc_lengths)
    grid, dense = traj.path.dense_samples()
    poses = np.stack([
        np.interp(svals, grid, dense[:, 0]),
        np.interp(svals, grid, dense[:, 1]),
        np.interp(svals, grid, dense[:, 2]),
    ], axis=-1)
    if np.any(poses_in_collision(footprint, poses, static_obstacles, margin)):
        return False
    robot_circles = footprint_circles_batch(footprint, poses)  # (T, k, 2)
    for centers, radius, _vel in _predicted_obstacle_circles(tracks, times, t0):
        d = np.linalg.norm(robot_circles[:, :, None, :] - centers[:, None, :, :], axis=-1)
        if np.any(d <= footprint.radius + radius + margin):
            return False
    return True


def plan_timing(path: Path, tracks, static_obstacles, config: TemporalConfig,
                footprint: FootprintSpec, t0: float = 0.0) -> Trajectory | None:
    """Full temporal pipeline: SIs, layered selection, SQP."""
    node_si = compute_safe_intervals(path, tracks, static_obstacles, config, footprint, t0)
    seq = select_interval_sequence(node_si, config, np.diff(path.arc_lengths))
    if seq is None:
        return None
    return optimize_timestamps(path, seq, config)


def export_safe_intervals(node_intervals: list[NodeIntervals], path) -> None:
    """Debug dump: CSV rows [i, j, start, end]."""
    lines = ["i,j,start,end"]
    for ni in node_intervals:
        for j, si in enumerate(ni.intervals):
            lines.append("%d,%d,%.17g,%s" % (
                ni.node_index + 1, j + 1, si.start,
                "inf" if math.isinf(si.end) else "%.17g" % si.end))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

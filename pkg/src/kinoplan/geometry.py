"""Cubic-curvature curve primitives, boundary-value fitting and the offline curve library.

A curve is parameterized by its curvature polynomial kappa(s) = kappa0 + a*s +
b*s^2 + c*s^3 over arc length s in [0, s_f].  Heading change has a closed form;
positions are obtained by composite Simpson quadrature.  The library stores
fitted curves indexed by the polar coordinates (r, beta) of their endpoint in
the start frame, for O(1) lookup during tree extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Quadrature step for position integrals (m).
SIMPSON_STEP = 0.01

# Endpoint tolerance for curve fitting (m / rad).
FIT_TOL = 1e-7


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose:
    """Planar pose (x, y, theta), theta in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def transform(self, dx: float, dy: float, dtheta: float) -> "Pose":
        """Compose this pose with a local-frame offset."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose(
            self.x + c * dx - s * dy,
            self.y + s * dx + c * dy,
            self.theta + dtheta,
        )

    def local_offset(self, other: "Pose") -> tuple[float, float, float]:
        """Express ``other`` in this pose's frame as (dx, dy, dtheta)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        rx = other.x - self.x
        ry = other.y - self.y
        return (
            c * rx + s * ry,
            -s * rx + c * ry,
            normalize_angle(other.theta - self.theta),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class CurveParams:
    """Cubic curvature polynomial coefficients plus total arc length."""

    kappa0: float
    a: float
    b: float
    c: float
    s_f: float

    def __post_init__(self):
        if not (self.s_f > 0.0) or not all(
            math.isfinite(v) for v in (self.kappa0, self.a, self.b, self.c, self.s_f)
        ):
            raise ValueError(f"invalid curve parameters: {self}")

    def reversed(self) -> "CurveParams":
        """The same geometric curve traversed end-to-start.

        kappa_rev(s) = -kappa(s_f - s), which is again a cubic polynomial.
        """
        k0, a, b, c, sf = self.kappa0, self.a, self.b, self.c, self.s_f
        return CurveParams(
            kappa0=-(k0 + a * sf + b * sf**2 + c * sf**3),
            a=a + 2.0 * b * sf + 3.0 * c * sf**2,
            b=-(b + 3.0 * c * sf),
            c=c,
            s_f=sf,
        )


def curvature_at(params: CurveParams, s) -> float:
    """Curvature kappa(s) = kappa0 + a s + b s^2 + c s^3; s may be an array."""
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > params.s_f + 1e-12):
        raise ValueError(f"arc length outside [0, {params.s_f}]")
    out = params.kappa0 + s * (params.a + s * (params.b + s * params.c))
    return float(out) if out.ndim == 0 else out


def heading_change(params: CurveParams, s) -> float:
    """Closed-form integral of curvature: kappa0 s + a s^2/2 + b s^3/3 + c s^4/4."""
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > params.s_f + 1e-12):
        raise ValueError(f"arc length outside [0, {params.s_f}]")
    out = s * (params.kappa0 + s * (params.a / 2.0 + s * (params.b / 3.0 + s * params.c / 4.0)))
    return float(out) if out.ndim == 0 else out


def max_abs_curvature(params: CurveParams, step: float = SIMPSON_STEP) -> float:
    """Max |kappa| sampled at the quadrature resolution over [0, s_f]."""
    n = max(2, int(math.ceil(params.s_f / step)))
    grid = np.linspace(0.0, params.s_f, n + 1)
    return float(np.max(np.abs(curvature_at(params, grid))))


def _offset_at(params: CurveParams, s: float) -> tuple[float, float, float]:
    """(dx, dy, dtheta) of the curve frame at arc length s, composite Simpson."""
    if s <= 0.0:
        return 0.0, 0.0, 0.0
    n = max(2, int(math.ceil(s / SIMPSON_STEP)))
    n += n % 2
    grid = np.linspace(0.0, min(s, params.s_f), n + 1)
    th = heading_change(params, grid)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    h3 = (s / n) / 3.0
    dx = h3 * float(w @ np.cos(th))
    dy = h3 * float(w @ np.sin(th))
    return dx, dy, float(th[-1])


def integrate_endpoint(params: CurveParams) -> tuple[float, float, float]:
    """Endpoint offset (dx, dy, dtheta) of the full curve in its start frame."""
    return _offset_at(params, params.s_f)


def sample_curve_poses(params: CurveParams, base: Pose, ds: float) -> list[Pose]:
    """Poses at arc lengths {0, ds, 2ds, ..., s_f} transformed into ``base``'s frame."""
    if ds <= 0.0:
        raise ValueError("ds must be positive")
    offsets = local_curve_samples(params, ds)
    return [base.transform(dx, dy, dth) for dx, dy, dth in offsets]


@lru_cache(maxsize=65536)
def local_curve_samples(params: CurveParams, ds: float) -> tuple[tuple[float, float, float], ...]:
    """Cached local-frame offsets at {0, ds, ..., s_f}; last entry is the exact endpoint."""
    svals = list(np.arange(0.0, params.s_f, ds))
    if not svals or params.s_f - svals[-1] > 1e-9:
        svals.append(params.s_f)
    else:
        svals[-1] = params.s_f
    return tuple(_offset_at(params, s) for s in svals)


def fit_curve(
    start_kappa: float,
    goal_offset: tuple[float, float, float],
    kappa_max: float,
    seed: CurveParams | None = None,
    max_iters: int = 80,
) -> CurveParams | None:
    """Solve for (a, b, c, s_f) so the curve endpoint hits ``goal_offset``.

    kappa0 is fixed to ``start_kappa`` (curvature continuity with the parent);
    the end curvature is left free.  Damped Gauss-Newton shooting with the
    pseudo-inverse step (minimum-norm in the underdetermined direction).
    Returns None when the iteration fails to converge or the curvature bound
    is violated.
    """
    gx, gy, gth = goal_offset
    chord = math.hypot(gx, gy)
    if chord < 1e-6:
        return None
    if seed is not None:
        u = np.array([seed.a, seed.b, seed.c, seed.s_f])
    else:
        u = np.array([0.0, 0.0, 0.0, max(chord, 0.1)])

    def residual(u):
        a, b, c, sf = u
        sf = max(sf, 1e-3)
        p = CurveParams(start_kappa, a, b, c, sf)
        dx, dy, dth = integrate_endpoint(p)
        return np.array([dx - gx, dy - gy, dth - gth]), p

    f, p = residual(u)
    cost = float(f @ f)
    for _ in range(max_iters):
        if cost < FIT_TOL**2:
            break
        # Finite-difference Jacobian, forward differences.
        J = np.empty((3, 4))
        steps = np.array([1e-6, 1e-6, 1e-7, 1e-5])
        for k in range(4):
            du = np.zeros(4)
            du[k] = steps[k]
            fk, _ = residual(u + du)
            J[:, k] = (fk - f) / steps[k]
        step = np.linalg.pinv(J, rcond=1e-10) @ f
        # Backtracking damping.
        lam = 1.0
        for _ in range(20):
            u_new = u - lam * step
            u_new[3] = max(u_new[3], 1e-3)
            try:
                f_new, p_new = residual(u_new)
            except (ValueError, FloatingPointError):
                lam *= 0.5
                continue
            c_new = float(f_new @ f_new)
            if c_new < cost:
                u, f, p, cost = u_new, f_new, p_new, c_new
                break
            lam *= 0.5
        else:
            return None
    if cost >= 1e-8:  # endpoint error above 1e-4 m/rad
        return None
    if max_abs_curvature(p) > kappa_max + 1e-9:
        return None
    return p


@dataclass(frozen=True)
class CurveEntry:
    """One lookup-table record: [r, a, b, c, s_f, dx, dy, dtheta, beta]."""

    r: float
    beta: float
    params: CurveParams
    dx: float
    dy: float
    dtheta: float


@dataclass(frozen=True)
class LibraryConfig:
    """Grid and feasibility settings for offline library generation."""

    r_min: float = 1.0
    # r_max is kept below max_arc_length so the top grid row stays populated;
    # clamping far samples to r_max then steers by a full-length curve.
    r_max: float = 4.0
    n_r: int = 8
    beta_min: float = math.radians(-60.0)
    beta_max: float = math.radians(60.0)
    n_beta: int = 17
    kappa_max: float = 0.7
    max_arc_length: float = 4.14  # 0.9 x default vehicle length
    # End headings tried per cell, as multiples of beta.  2.0 is the
    # circular-arc ending and is the minimum-peak-curvature option; smaller
    # factors give under-steer endings, larger over-steer.
    dtheta_factors: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5)


class CurveLibrary:
    """Grid of fitted curves indexed by endpoint polar coordinates (r, beta)."""

    def __init__(self, config: LibraryConfig, entries: dict[tuple[int, int], CurveEntry]):
        self.config = config
        self.entries = entries
        self._r_grid = np.linspace(config.r_min, config.r_max, config.n_r)
        self._b_grid = np.linspace(config.beta_min, config.beta_max, config.n_beta)

    @property
    def r_grid(self) -> np.ndarray:
        return self._r_grid

    @property
    def beta_grid(self) -> np.ndarray:
        return self._b_grid

    def cell_index(self, r: float, beta: float) -> tuple[int, int]:
        """Clamp (r, beta) into range and return the nearest grid cell index."""
        r = min(max(r, self.config.r_min), self.config.r_max)
        beta = min(max(beta, self.config.beta_min), self.config.beta_max)
        i = int(np.argmin(np.abs(self._r_grid - r)))
        j = int(np.argmin(np.abs(self._b_grid - beta)))
        return i, j

    def lookup(self, r: float, beta: float) -> CurveEntry | None:
        return self.entries.get(self.cell_index(r, beta))

    def save_csv(self, path) -> None:
        lines = [
            "# kinoplan curve library v1",
            "# r_min,r_max,beta_min,beta_max,kappa_max,n_r,n_beta,max_arc_length",
            "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g"
            % (
                self.config.r_min,
                self.config.r_max,
                self.config.beta_min,
                self.config.beta_max,
                self.config.kappa_max,
                self.config.n_r,
                self.config.n_beta,
                self.config.max_arc_length,
            ),
            "# i,j,r,a,b,c,s_f,dx,dy,dtheta,beta",
        ]
        for (i, j) in sorted(self.entries):
            e = self.entries[(i, j)]
            lines.append(
                "%d,%d," % (i, j)
                + ",".join(
                    "%.17g" % v
                    for v in (
                        e.r,
                        e.params.a,
                        e.params.b,
                        e.params.c,
                        e.params.s_f,
                        e.dx,
                        e.dy,
                        e.dtheta,
                        e.beta,
                    )
                )
            )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load_csv(cls, path) -> "CurveLibrary":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        header = lines[2].split(",")
        config = LibraryConfig(
            r_min=float(header[0]),
            r_max=float(header[1]),
            beta_min=float(header[2]),
            beta_max=float(header[3]),
            kappa_max=float(header[4]),
            n_r=int(header[5]),
            n_beta=int(header[6]),
            max_arc_length=float(header[7]),
        )
        entries = {}
        for ln in lines[4:]:
            parts = ln.split(",")
            i, j = int(parts[0]), int(parts[1])
            r, a, b, c, sf, dx, dy, dth, beta = (float(v) for v in parts[2:])
            entries[(i, j)] = CurveEntry(
                r=r, beta=beta, params=CurveParams(0.0, a, b, c, sf), dx=dx, dy=dy, dtheta=dth
            )
        return cls(config, entries)


def build_curve_library(config: LibraryConfig = LibraryConfig()) -> CurveLibrary:
    """Fit one curve per feasible (r, beta) grid cell; infeasible cells stay absent.

    Per cell, end headings beta * dtheta_factors are tried and the feasible fit
    with the smallest peak curvature is kept.  Deterministic for a fixed config.
    """
    r_grid = np.linspace(config.r_min, config.r_max, config.n_r)
    b_grid = np.linspace(config.beta_min, config.beta_max, config.n_beta)
    entries: dict[tuple[int, int], CurveEntry] = {}
    for j, beta in enumerate(b_grid):
        warm: CurveParams | None = None
        for i, r in enumerate(r_grid):
            best: tuple[float, CurveParams] | None = None
            for factor in config.dtheta_factors:
                target = (r * math.cos(beta), r * math.sin(beta), beta * factor)
                params = fit_curve(0.0, target, config.kappa_max, seed=warm)
                if params is None:
                    params = fit_curve(0.0, target, config.kappa_max, seed=None)
                if params is None or params.s_f > config.max_arc_length:
                    continue
                peak = max_abs_curvature(params)
                if best is None or peak < best[0]:
                    best = (peak, params)
            if best is not None:
                params = best[1]
                dx, dy, dth = integrate_endpoint(params)
                entries[(i, j)] = CurveEntry(
                    r=math.hypot(dx, dy),
                    beta=math.atan2(dy, dx),
                    params=params,
                    dx=dx,
                    dy=dy,
                    dtheta=dth,
                )
                warm = params
    return CurveLibrary(config, entries)

"""Vacuum AdS(2+1) causal structure in embedding coordinates.

Conventions: unit AdS radius, ambient metric diag(-1,-1,+1,+1), global
coordinates (t, rho, theta) embedded as

    X = (cosh(rho) cos t, cosh(rho) sin t, sinh(rho) cos theta,
         sinh(rho) sin theta),

with the quadric <X, X> = -1.  A boundary point carries the null vector
P = (cos t, sin t, cos theta, sin theta); against a bulk point in the
fundamental time band the sign of <X, P> separates timelike from spacelike
separation, and time ordering is read off the universal cover, where every
bulk point at |t - t_p| >= pi is causally related to p.  Entanglement
entropies are geodesic lengths in 4G_N = 1 units with the boundary cut off
at epsilon, where length between boundary points is

    L = ln((cos dt - cos dtheta) / 2) + 2 ln(2 / epsilon).

Configurations are expected to keep all relevant time separations inside
(-3pi/2, 3pi/2), which holds for the presets and grids used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDiamond, EmptyRegion, NotOnQuadric

ETA = np.diag([-1.0, -1.0, 1.0, 1.0])


def mink(u: np.ndarray, v: np.ndarray) -> float:
    return float(-u[..., 0] * v[..., 0] - u[..., 1] * v[..., 1]
                 + u[..., 2] * v[..., 2] + u[..., 3] * v[..., 3])


@dataclass(frozen=True)
class BoundaryPoint:
    t: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2 * np.pi))
        object.__setattr__(self, "t", float(self.t))

    def null_vector(self) -> np.ndarray:
        return np.array(
            [np.cos(self.t), np.sin(self.t), np.cos(self.theta), np.sin(self.theta)]
        )


@dataclass(frozen=True)
class BulkPoint:
    t: float
    rho: float
    theta: float

    def embedding(self) -> np.ndarray:
        return np.array(
            [
                np.cosh(self.rho) * np.cos(self.t),
                np.cosh(self.rho) * np.sin(self.t),
                np.sinh(self.rho) * np.cos(self.theta),
                np.sinh(self.rho) * np.sin(self.theta),
            ]
        )

    @classmethod
    def from_embedding(cls, vec, t_hint: float = 0.0) -> "BulkPoint":
        vec = np.asarray(vec, dtype=float)
        if abs(mink(vec, vec) + 1.0) > 1e-9:
            raise NotOnQuadric(f"<X,X> = {mink(vec, vec)} != -1")
        rho = np.arccosh(max(1.0, np.hypot(vec[0], vec[1])))
        theta = float(np.arctan2(vec[3], vec[2])) if rho > 1e-12 else 0.0
        t = float(np.arctan2(vec[1], vec[0]))
        # lift to the cover branch nearest the hint
        while t < t_hint - np.pi:
            t += 2 * np.pi
        while t > t_hint + np.pi:
            t -= 2 * np.pi
        return cls(t, float(rho), theta)


def bulk_causal(p: BoundaryPoint, x: BulkPoint, tol: float = 1e-9) -> str:
    """Relation of a bulk point to a boundary point's lightcones.

    Returns one of "timelike-future", "null", "spacelike", "past".
    """
    s = mink(x.embedding(), p.null_vector())
    dt = x.t - p.t
    if abs(s) <= tol and 0 < dt < np.pi:
        return "null"
    if abs(s) <= tol and -np.pi < dt < 0:
        return "null"
    if dt > 0 and (s > 0 or dt >= np.pi):
        return "timelike-future"
    if dt < 0 and (s > 0 or dt <= -np.pi):
        return "past"
    return "spacelike"


# ---------------------------------------------------------------------------
# scattering region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteringConfig:
    c0: BoundaryPoint
    c1: BoundaryPoint
    r0: BoundaryPoint
    r1: BoundaryPoint

    def inputs(self):
        return (self.c0, self.c1)

    def outputs(self):
        return (self.r0, self.r1)

    def translated(self, dt: float) -> "ScatteringConfig":
        return ScatteringConfig(
            *(BoundaryPoint(p.t + dt, p.theta) for p in (self.c0, self.c1, self.r0, self.r1))
        )

    def reflected(self) -> "ScatteringConfig":
        return ScatteringConfig(
            *(BoundaryPoint(p.t, -p.theta) for p in (self.c0, self.c1, self.r0, self.r1))
        )


def preset_config(name: str, delay: float = 0.2) -> ScatteringConfig:
    base = dict(
        c0=BoundaryPoint(0.0, 0.0),
        c1=BoundaryPoint(0.0, np.pi),
        r0=BoundaryPoint(np.pi, np.pi / 2),
        r1=BoundaryPoint(np.pi, -np.pi / 2),
    )
    if name == "marginal":
        return ScatteringConfig(**base)
    if name == "delayed":
        base["r0"] = BoundaryPoint(np.pi + delay, np.pi / 2)
        base["r1"] = BoundaryPoint(np.pi + delay, -np.pi / 2)
        return ScatteringConfig(**base)
    raise DimensionMismatch(f"unknown preset {name!r}")


def _margin_grid(cfg: ScatteringConfig, t_rng, u_rng, th_rng, nt, nu, nth):
    ts = np.linspace(*t_rng, nt)
    us = np.linspace(*u_rng, nu)        # u = tanh(rho)
    ths = np.linspace(*th_rng, nth, endpoint=False) if th_rng[1] - th_rng[0] >= 2 * np.pi - 1e-12 else np.linspace(*th_rng, nth)
    tg, ug, thg = np.meshgrid(ts, us, ths, indexing="ij")
    rho = np.arctanh(np.clip(ug, 0.0, 1.0 - 1e-12))
    x0 = np.cosh(rho) * np.cos(tg)
    x1 = np.cosh(rho) * np.sin(tg)
    x2 = np.sinh(rho) * np.cos(thg)
    x3 = np.sinh(rho) * np.sin(thg)
    margin = None
    for p in (cfg.c0, cfg.c1, cfg.r0, cfg.r1):
        pv = p.null_vector()
        s = -x0 * pv[0] - x1 * pv[1] + x2 * pv[2] + x3 * pv[3]
        margin = s if margin is None else np.minimum(margin, s)
    idx = np.unravel_index(np.argmax(margin), margin.shape)
    return float(margin[idx]), (float(tg[idx]), float(ug[idx]), float(thg[idx]))


@dataclass(frozen=True)
class RegionReport:
    nonempty: bool
    margin: float
    witness: BulkPoint | None


def scattering_region_nonempty(
    cfg: ScatteringConfig, *, tol: float = 1e-7, refinements: int = 18
) -> RegionReport:
    """Search the quadric for a point inside all four cones.

    A coarse grid over (t, tanh rho, theta) is refined around the best
    point; the reported margin is the maximized minimum of the four cone
    inner products (positive inside, zero on the boundary).
    """
    t_lo = max(p.t for p in cfg.inputs())
    t_hi = min(p.t for p in cfg.outputs())
    if t_hi <= t_lo:
        return RegionReport(False, -np.inf, None)
    t_rng = (t_lo, t_hi)
    u_rng = (0.0, 0.999)
    th_rng = (0.0, 2 * np.pi)
    best, at = _margin_grid(cfg, t_rng, u_rng, th_rng, 33, 21, 65)
    spans = [t_hi - t_lo, 0.999, 2 * np.pi]
    for _ in range(refinements):
        spans = [s * 0.35 for s in spans]
        t_rng = (at[0] - spans[0] / 2, at[0] + spans[0] / 2)
        u_rng = (max(0.0, at[1] - spans[1] / 2), min(0.999, at[1] + spans[1] / 2))
        th_rng = (at[2] - spans[2] / 2, at[2] + spans[2] / 2)
        cand, cand_at = _margin_grid(cfg, t_rng, u_rng, th_rng, 9, 9, 9)
        if cand > best:
            best, at = cand, cand_at
    witness = BulkPoint(at[0], float(np.arctanh(min(at[1], 1 - 1e-12))), at[2])
    return RegionReport(best >= -tol, best, witness if best >= -tol else None)


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeCurve:
    length: float
    points: np.ndarray = field(repr=False)   # (m, 4) embedding samples
    s_range: tuple = (0.0, 0.0)


def _ridge_frame(cfg: ScatteringConfig):
    """Orthonormal (timelike, spacelike) frame spanning the ridge plane."""
    p0 = cfg.c0.null_vector()
    p1 = cfg.c1.null_vector()
    rows = np.stack([ETA @ p0, ETA @ p1])
    _, _, vh = np.linalg.svd(rows)
    basis = vh[2:]  # Euclidean null space of the constraint rows
    b = np.array(
        [[mink(basis[i], basis[j]) for j in range(2)] for i in range(2)]
    )
    vals, vecs = np.linalg.eigh(b)
    if not (vals[0] < -1e-12 < 1e-12 < vals[1]):
        raise EmptyRegion("input lightcone intersection is not a spacelike curve")
    f_time = (vecs[:, 0] @ basis) / np.sqrt(-vals[0])
    f_space = (vecs[:, 1] @ basis) / np.sqrt(vals[1])
    return f_time, f_space


def _ridge_point(f_time, f_space, s):
    return np.cosh(s) * f_time + np.sinh(s) * f_space


def ridge_curve(cfg: ScatteringConfig, resolution: int = 4096) -> RidgeCurve:
    """The lower edge of the scattering region, clipped to the output pasts.

    The two input lightcone boundaries meet on the intersection of a
    2-plane with the quadric, a unit-speed hyperbola branch; the branch is
    clipped to the outputs' pasts and its length is returned by polyline
    integration of the induced (ambient) metric.
    """
    region = scattering_region_nonempty(cfg)
    if not region.nonempty:
        raise EmptyRegion("scattering region is empty")
    f_time, f_space = _ridge_frame(cfg)
    t_lo = max(p.t for p in cfg.inputs())
    t_hi = min(p.t for p in cfg.outputs())

    # pick the hyperbola branch sitting inside the causal window
    mid = _ridge_point(f_time, f_space, 0.0)
    t_mid = np.arctan2(mid[1], mid[0])
    if not (t_lo - 1e-9 <= t_mid <= t_hi + 1e-9):
        f_time = -f_time
        mid = _ridge_point(f_time, f_space, 0.0)
        t_mid = np.arctan2(mid[1], mid[0])
        if not (t_lo - 1e-9 <= t_mid <= t_hi + 1e-9):
            raise EmptyRegion("no ridge branch inside the causal window")

    pr0 = cfg.r0.null_vector()
    pr1 = cfg.r1.null_vector()

    def clip_margin(s):
        x = _ridge_point(f_time, f_space, s)
        return min(mink(x, pr0), mink(x, pr1))

    span = 15.0
    ss = np.linspace(-span, span, 20001)
    vals = np.array([clip_margin(s) for s in ss])
    feas = vals >= 0
    if not feas.any():
        smax = ss[np.argmax(vals)]
        if vals.max() > -1e-9:
            pt = _ridge_point(f_time, f_space, smax)
            return RidgeCurve(0.0, pt[None, :], (smax, smax))
        raise EmptyRegion("ridge clipped away by the output pasts")
    lo = ss[feas][0]
    hi = ss[feas][-1]
    lo = _bisect_root(clip_margin, lo - (ss[1] - ss[0]), lo) if lo > ss[0] else lo
    hi = _bisect_root(clip_margin, hi, hi + (ss[1] - ss[0])) if hi < ss[-1] else hi

    samples = np.linspace(lo, hi, resolution + 1)
    pts = np.stack([_ridge_point(f_time, f_space, s) for s in samples])
    diffs = pts[1:] - pts[:-1]
    seg = np.sqrt(np.maximum(0.0, np.einsum("ij,ij->i", diffs @ ETA, diffs)))
    return RidgeCurve(float(seg.sum()), pts, (float(lo), float(hi)))


def _bisect_root(f, a, b, iters: int = 80):
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        return a if abs(fa) < abs(fb) else b
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# boundary decision regions
# ---------------------------------------------------------------------------

def _circle_dist(a: float, b: float) -> float:
    d = abs(a - b) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


def _wrap_signed(a: float) -> float:
    return (a + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class Diamond:
    bottom: BoundaryPoint
    top: BoundaryPoint
    corner_left: BoundaryPoint
    corner_right: BoundaryPoint

    @property
    def base_width(self) -> float:
        return _circle_dist(self.corner_left.theta, self.corner_right.theta)


def _past_front(cfg: ScatteringConfig, theta: float) -> float:
    """Latest time at angle theta inside both output pasts."""
    return min(
        cfg.r0.t - _circle_dist(theta, cfg.r0.theta),
        cfg.r1.t - _circle_dist(theta, cfg.r1.theta),
    )


def decision_regions(cfg: ScatteringConfig) -> tuple:
    """Boundary diamonds from each input within both output pasts.

    The diamond top is the crossing of the two output past cones above the
    input point; the base interval runs between the diamond's left and
    right null corners.  Degenerate (null or empty) diamonds raise.
    """
    diamonds = []
    n_grid = 4096
    thetas = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    front = np.array([_past_front(cfg, th) for th in thetas])
    step = 2 * np.pi / n_grid
    # local maxima of the past front are the cone crossings; refine each by
    # ternary search (the front is piecewise linear and locally concave)
    peaks = []
    for i in range(n_grid):
        if front[i] >= front[i - 1] and front[i] >= front[(i + 1) % n_grid]:
            lo, hi = thetas[i] - step, thetas[i] + step
            for _ in range(120):
                m1 = lo + (hi - lo) / 3
                m2 = hi - (hi - lo) / 3
                if _past_front(cfg, m1) < _past_front(cfg, m2):
                    lo = m1
                else:
                    hi = m2
            th = 0.5 * (lo + hi)
            peaks.append(BoundaryPoint(_past_front(cfg, th), th))
    for c in cfg.inputs():
        best = None
        for peak in peaks:
            sep = _circle_dist(peak.theta, c.theta)
            if peak.t - c.t <= sep + 1e-12:
                continue  # not strictly inside the input's future
            if best is None or _circle_dist(peak.theta, c.theta) < _circle_dist(
                best.theta, c.theta
            ):
                best = peak
        if best is None:
            raise EmptyDiamond(f"no causal diamond above input at theta={c.theta}")
        dt = best.t - c.t
        dth = _wrap_signed(best.theta - c.theta)
        if dt <= abs(dth) + 1e-12:
            raise EmptyDiamond("diamond degenerates to a null segment")
        right = BoundaryPoint(c.t + (dt + dth) / 2, c.theta + (dt + dth) / 2)
        left = BoundaryPoint(c.t + (dt - dth) / 2, c.theta - (dt - dth) / 2)
        for corner in (left, right):
            if corner.t > _past_front(cfg, corner.theta) + 1e-9:
                # the region above this input is not a single diamond;
                # such configurations are outside the supported domain
                raise EmptyDiamond(
                    "decision region is not a causal diamond for this layout"
                )
        diamonds.append(Diamond(c, best, left, right))
    return tuple(diamonds)


# ---------------------------------------------------------------------------
# entanglement entropy and the connected wedge check
# ---------------------------------------------------------------------------

def boundary_geodesic_length(p: BoundaryPoint, q: BoundaryPoint, cutoff: float) -> float:
    """Regularized geodesic length between boundary points (4G_N = 1)."""
    dt = p.t - q.t
    dth = _circle_dist(p.theta, q.theta)
    arg = (np.cos(dt) - np.cos(dth)) / 2.0
    if arg <= 0:
        raise DimensionMismatch("boundary points are not spacelike separated")
    return float(np.log(arg) + 2.0 * np.log(2.0 / cutoff))


def mutual_information(cfg: ScatteringConfig, cutoff: float = 1e-4) -> float:
    """I(V0:V1) from the decision diamonds' base geodesics.

    Uses the two-interval prescription: the connected candidate surface is
    the cross pairing of the four diamond corners; the disconnected phase
    clamps I to zero.  Cutoff dependence cancels between the two phases.
    """
    d0, d1 = decision_regions(cfg)
    disc = boundary_geodesic_length(d0.corner_left, d0.corner_right, cutoff)
    disc += boundary_geodesic_length(d1.corner_left, d1.corner_right, cutoff)
    conn = boundary_geodesic_length(d0.corner_right, d1.corner_left, cutoff)
    conn += boundary_geodesic_length(d1.corner_right, d0.corner_left, cutoff)
    return float(max(0.0, disc - conn))


@dataclass(frozen=True)
class GeometryReport:
    region_nonempty: bool
    region_margin: float
    ridge_length: float
    decision_intervals: tuple
    mutual_information: float
    saturation_residual: float
    inequality_margin: float  # I - 2 * ridge


def verify_connected_wedge(
    cfg: ScatteringConfig, resolution: int = 4096, cutoff: float = 1e-4
) -> GeometryReport:
    """Mutual information versus twice the ridge length.

    In the vacuum the two quantities agree; the report carries the raw
    residual |I - 2 ridge| and the signed inequality margin.  Sub-leading
    corrections are not modelled, so residual interpretation is left to
    the caller.
    """
    region = scattering_region_nonempty(cfg)
    ridge_len = 0.0
    if region.nonempty:
        ridge_len = ridge_curve(cfg, resolution).length
    d0, d1 = decision_regions(cfg)
    mi = mutual_information(cfg, cutoff)
    return GeometryReport(
        region.nonempty,
        region.margin,
        ridge_len,
        ((d0.corner_left, d0.corner_right), (d1.corner_left, d1.corner_right)),
        mi,
        abs(mi - 2.0 * ridge_len),
        mi - 2.0 * ridge_len,
    )

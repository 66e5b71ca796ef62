"""Predictive uncertainty model for human-driven vehicles.

Covariances grow with prediction age, are inflated per lane (outer-lane
drivers are modeled as less predictable) and near exits (divergence between
exiting and circulating intentions), and are sampled under truncation to a
kinematically reachable envelope. All 5-vectors follow the state order
[r, theta, v, phi, lane].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fast
from .dynamics import VehicleState, IdmParams, step_hdv_nominal
from .errors import DegenerateDistributionError, InvalidParameterError
from .geometry import RoundaboutGeometry, angle_diff, footprint, wrap_angle

EIG_FLOOR = 1e-9
# slack absorbing the PSD floor jitter when the reachable radius is ~0
DISPLACEMENT_TOL = 1e-3


@dataclass(frozen=True)
class UncertaintyParams:
    sigma_r: float = 0.5
    sigma_theta: float = 0.05
    sigma_v: float = 0.3
    sigma_phi: float = 0.1
    sigma_l: float = 0.2
    eps_r: float = 0.1        # quadratic-in-time radial growth
    eps_theta: float = 0.01   # quadratic-in-time azimuthal growth
    rho_rv: float = 0.2       # radius-speed correlation rate
    rho_thetaphi: float = 0.1  # azimuth-heading correlation rate
    # per-lane diagonal inflation, inner lane first
    lane_scales: tuple[tuple[float, ...], ...] = (
        (0.3, 0.5, 0.4, 0.6, 0.2),
        (1.2, 1.5, 1.3, 1.4, 1.8),
    )
    xi_exit: float = 0.5      # peak exit-proximity inflation
    sigma_exit: float = 0.3   # angular width of the exit influence, rad
    # diagonal of J_k: which state dimensions an exit inflates hardest
    exit_profile: tuple[float, ...] = (1.0, 1.5, 1.0, 1.0, 1.5)
    n_samples: int = 500      # in-planner Monte Carlo budget

    def __post_init__(self):
        if min(self.sigma_r, self.sigma_theta, self.sigma_v,
               self.sigma_phi, self.sigma_l) <= 0:
            raise InvalidParameterError("all sigma_* must be positive")
        if self.eps_r < 0 or self.eps_theta < 0:
            raise InvalidParameterError("growth coefficients must be >= 0")
        if not (-1.0 < self.rho_rv < 1.0 and -1.0 < self.rho_thetaphi < 1.0):
            raise InvalidParameterError("correlations must lie in (-1, 1)")
        for row in self.lane_scales:
            if len(row) != 5 or min(row) <= 0:
                raise InvalidParameterError(
                    "lane_scales rows must be 5 positive values")
        if len(self.exit_profile) != 5:
            raise InvalidParameterError("exit_profile must have 5 entries")
        if self.n_samples < 1:
            raise InvalidParameterError("n_samples must be >= 1")


@dataclass(frozen=True)
class HdvPrediction:
    mean: VehicleState
    covariance: np.ndarray   # (5, 5) symmetric PSD
    horizon_t: float


def base_covariance(t: float, p: UncertaintyParams) -> np.ndarray:
    """Time-indexed covariance before lane/exit inflation, (5, 5)."""
    if t < 0.0:
        raise InvalidParameterError(f"prediction age must be >= 0, got {t}")
    s = np.zeros((5, 5))
    s[0, 0] = p.sigma_r ** 2 * t + p.eps_r ** 2 * t * t
    s[1, 1] = p.sigma_theta ** 2 * t + p.eps_theta ** 2 * t * t
    s[2, 2] = p.sigma_v ** 2
    s[3, 3] = p.sigma_phi ** 2
    s[4, 4] = p.sigma_l ** 2
    s[0, 2] = s[2, 0] = p.rho_rv * p.sigma_r * p.sigma_v * t
    s[1, 3] = s[3, 1] = p.rho_thetaphi * p.sigma_theta * p.sigma_phi * t
    return s


def lane_multiplier(lane: int, p: UncertaintyParams) -> np.ndarray:
    """Diagonal of the per-lane inflation matrix."""
    if not 0 <= lane < len(p.lane_scales):
        raise InvalidParameterError(f"no lane scale for lane {lane}")
    return np.asarray(p.lane_scales[lane])


def exit_multiplier(theta: float, geo: RoundaboutGeometry,
                    p: UncertaintyParams) -> np.ndarray:
    """Diagonal of the exit-proximity inflation at azimuth theta."""
    m = np.ones(5)
    profile = np.asarray(p.exit_profile)
    for ang in geo.exit_angles:
        d = angle_diff(theta, ang)
        m += p.xi_exit * math.exp(-(d * d) / (2.0 * p.sigma_exit ** 2)) * profile
    return m


def clamp_psd(s: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetrize and floor the eigenvalues of a covariance matrix."""
    s = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(s)
    if w[0] >= floor:
        return s
    w = np.maximum(w, floor)
    return (v * w) @ v.T


def lane_covariance(t: float, lane: int, theta: float,
                    geo: RoundaboutGeometry,
                    p: UncertaintyParams) -> np.ndarray:
    """Full predictive covariance at age t for a vehicle at (theta, lane):
    base covariance scaled per lane and exit proximity, symmetrized, and
    eigenvalue-floored so Cholesky always succeeds."""
    scale = lane_multiplier(lane, p) * exit_multiplier(theta, geo, p)
    s = base_covariance(t, p) @ np.diag(scale)
    return clamp_psd(s)


def predict_hdv(s_h: VehicleState, t: float, neighbors: list[VehicleState],
                dt: float, geo: RoundaboutGeometry, idm: IdmParams,
                p: UncertaintyParams,
                kinematics_mode: str = "standard") -> HdvPrediction:
    """Nominal mean (IDM rollout against a frozen neighbor snapshot) plus the
    lane covariance evaluated at the propagated pose."""
    if t < 0.0:
        raise InvalidParameterError(f"horizon must be >= 0, got {t}")
    steps = int(round(t / dt)) if t > 0.0 else 0
    mean = s_h
    for _ in range(steps):
        mean = step_hdv_nominal(mean, neighbors, dt, geo, idm,
                                kinematics_mode=kinematics_mode)
    cov = lane_covariance(t, mean.lane, mean.theta, geo, p)
    return HdvPrediction(mean, cov, t)


def sampling_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix L with L @ L.T = cov, tolerant of rank deficiency."""
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.maximum(w, 0.0)
    return v * np.sqrt(w)


def sample_reachable(pred: HdvPrediction, s_h0: VehicleState, n: int,
                     rng: np.random.Generator, geo: RoundaboutGeometry,
                     p: UncertaintyParams,
                     oversample: int = 10,
                     max_total_factor: int = 100) -> np.ndarray:
    """Draw n state rows from N(mean, cov) truncated to the reachable set.

    A candidate is kept iff all of: planar displacement from s_h0's position
    within (v_max + sigma_v) * t; |v| <= v_max + 2*sigma_v; |phi| <= pi. The
    lane coordinate stays continuous (threshold at 0.5 downstream). Output
    theta is wrapped to [0, 2*pi). Deterministic given the generator state.
    Raises DegenerateDistributionError when acceptance collapses below 1%.
    """
    if n <= 0:
        raise InvalidParameterError(f"sample count must be positive, got {n}")
    mean = pred.mean.as_array()
    factor = sampling_factor(pred.covariance)
    reach = (geo.v_max + p.sigma_v) * max(pred.horizon_t, 0.0) + DISPLACEMENT_TOL
    x0 = s_h0.r * math.cos(s_h0.theta)
    y0 = s_h0.r * math.sin(s_h0.theta)
    v_cap = geo.v_max + 2.0 * p.sigma_v
    out = np.empty((n, 5))
    got = 0
    drawn = 0
    limit = max_total_factor * n
    while got < n:
        want = min(oversample * (n - got), limit - drawn)
        if want <= 0:
            raise DegenerateDistributionError(
                f"accepted {got}/{n} after {drawn} draws")
        z = rng.standard_normal((want, 5))
        cand = mean + z @ factor.T
        drawn += want
        dx = cand[:, 0] * np.cos(cand[:, 1]) - x0
        dy = cand[:, 0] * np.sin(cand[:, 1]) - y0
        ok = dx * dx + dy * dy <= reach * reach
        ok &= np.abs(cand[:, 2]) <= v_cap
        ok &= np.abs(cand[:, 3]) <= math.pi
        acc = cand[ok]
        if drawn >= oversample * n and got + len(acc) < 0.01 * drawn:
            raise DegenerateDistributionError(
                f"acceptance rate {(got + len(acc)) / drawn:.4%} "
                f"after {drawn} draws")
        take = min(len(acc), n - got)
        out[got:got + take] = acc[:take]
        got += take
    out[:, 1] = np.array([wrap_angle(a) for a in out[:, 1]])
    return out


def lane_from_coordinate(l: float) -> int:
    """Threshold the continuous lane coordinate into a lane index."""
    return 1 if l >= 0.5 else 0


def collision_fraction(samples: np.ndarray, av_verts: np.ndarray,
                       safe_distance: float,
                       hdv_length: float, hdv_width: float) -> float:
    """Fraction of sampled HDV states whose footprint comes within
    safe_distance of a fixed AV footprint."""
    hits = _fast.collision_hits(np.ascontiguousarray(samples, dtype=float),
                                np.ascontiguousarray(av_verts, dtype=float),
                                safe_distance, hdv_length, hdv_width)
    return hits / len(samples)


def collision_probability(s_i_at_t: VehicleState, s_h: VehicleState, t: float,
                          n_samples: int, rng_seed, safe_distance: float,
                          av_dims: tuple[float, float],
                          hdv_dims: tuple[float, float],
                          neighbors: list[VehicleState],
                          dt: float, geo: RoundaboutGeometry, idm: IdmParams,
                          p: UncertaintyParams,
                          pred: HdvPrediction | None = None) -> float:
    """Monte Carlo collision probability between a planned AV state at
    horizon t and the HDV's truncated predictive distribution.

    safe_distance is the adaptive pairwise threshold evaluated by the caller
    (risk layer). Deterministic given rng_seed. A precomputed prediction can
    be passed to skip the nominal rollout.
    """
    if n_samples < 100:
        raise InvalidParameterError(
            f"n_samples must be >= 100, got {n_samples}")
    if pred is None:
        pred = predict_hdv(s_h, t, neighbors, dt, geo, idm, p)
    rng = (rng_seed if isinstance(rng_seed, np.random.Generator)
           else np.random.default_rng(rng_seed))
    samples = sample_reachable(pred, s_h, n_samples, rng, geo, p)
    av_verts = footprint(s_i_at_t.r, s_i_at_t.theta, s_i_at_t.phi,
                         av_dims[0], av_dims[1])
    return collision_fraction(samples, av_verts, safe_distance,
                              hdv_dims[0], hdv_dims[1])

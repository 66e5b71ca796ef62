"""Safety-pruned joint-action Monte Carlo Tree Search.

Each tree node holds the controlled vehicles' joint state one simulated step
per depth level ahead of the root; human-driven vehicles follow a nominal IDM
rollout frozen at plan time, so their rows are a pure function of depth.
Expansion classifies the child (pairwise risk thresholds, Monte Carlo
collision probability, boundary clearance); unsafe children are kept in the
tree with a large negative return but never expanded. Rollouts hold lanes and
bang-off toward the desired speed. Returns are discounted by gamma_r during
backpropagation and min/max-normalized before UCB comparison.

The node evaluator mirrors risk.py / reward.py exactly through the compiled
kernels in _fast; tests drive both routes on the same states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _fast
from .dynamics import (IDX_CRUISE, IDX_MAX_BRAKE, IDX_MED_BRAKE, IdmParams,
                       N_ACCEL, N_ACTIONS, N_PHIDOT, VehicleParams,
                       VehicleState, decode_action, encode_action)
from .errors import InvalidParameterError
from .geometry import RoundaboutGeometry, footprint
from .reward import RewardConfig
from .risk import RiskConfig
from .uncertainty import (HdvPrediction, UncertaintyParams, lane_covariance,
                          sample_reachable, DISPLACEMENT_TOL)
from .world import (MODE_ARRIVED, MODE_CIRCULATE, VehicleSpec, YieldRule,
                    build_hdv_cache, step_row)

# pose parked far outside the scene for vehicles that have left it; spacing
# keeps any two parked footprints from interacting
_SENTINEL_R0 = 1000.0
_SENTINEL_SPACING = 40.0


@dataclass(frozen=True)
class PlannerConfig:
    iterations: int = 300      # K
    d_max: int = 8
    c_exp: float = 0.1
    c_pw: float = 4.0          # progressive widening coefficient
    alpha_pw: float = 0.5      # progressive widening exponent
    r_penalty: float = 1e3     # return assigned to unsafe nodes
    ucb_mode: str = "ucb1"     # ucb1 | paper

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.d_max < 1:
            raise InvalidParameterError("d_max must be >= 1")
        if self.c_exp < 0:
            raise InvalidParameterError("c_exp must be >= 0")
        if self.c_pw <= 0 or not 0 < self.alpha_pw <= 1:
            raise InvalidParameterError(
                "widening needs c_pw > 0 and alpha_pw in (0, 1]")
        if self.r_penalty <= 0:
            raise InvalidParameterError("r_penalty must be > 0")
        if self.ucb_mode not in ("ucb1", "paper"):
            raise InvalidParameterError(
                f"unknown ucb_mode {self.ucb_mode!r}")


def enumerate_actions(n_agents: int):
    """Lazily yield all N_ACTIONS**n_agents joint actions as flat-index
    tuples, in lexicographic order."""
    return product(range(N_ACTIONS), repeat=n_agents)


def widening_cap(visits: int, cfg: PlannerConfig) -> int:
    """Progressive widening: max child count for a node visited `visits`
    times (counting the visit in progress)."""
    return math.ceil(cfg.c_pw * max(visits, 1) ** cfg.alpha_pw)


class TreeNode:
    __slots__ = ("depth", "parent", "action", "visits", "value", "safe",
                 "reward", "rows", "modes", "ctrl", "children", "bundle",
                 "rng", "_seen", "_heads", "_exhausted")

    def __init__(self, depth, parent, action, rows, modes, ctrl, safe,
                 reward, bundle, rng):
        self.depth = depth
        self.parent = parent
        self.action = action          # joint flat-index tuple, None at root
        self.visits = 0
        self.value = 0.0
        self.safe = safe
        self.reward = reward          # immediate reward of the step into here
        self.rows = rows              # (n_av, 5) controlled-vehicle states
        self.modes = modes            # (n_av,) movement modes
        self.ctrl = ctrl              # (n_av, 2) incoming (accel, phi_dot)
        self.children = []
        self.bundle = bundle          # _EvalBundle of this node's state
        self.rng = rng
        self._seen = set()
        self._heads = None
        self._exhausted = False

    @property
    def mean_value(self) -> float:
        return self.value / self.visits if self.visits else 0.0


def ucb_score(node: TreeNode, parent_visits: int, c_exp: float,
              v_min: float | None = None, v_max: float | None = None,
              mode: str = "ucb1") -> float:
    """Selection score: exploitation mean plus exploration bonus; +inf for
    an unvisited node. When v_min/v_max are given the mean is rescaled to
    [0, 1] so c_exp keeps a consistent scale across scenarios."""
    if node.visits == 0:
        return math.inf
    exploit = node.value / node.visits
    if v_min is not None and v_max is not None and v_max > v_min:
        exploit = (exploit - v_min) / (v_max - v_min)
    if mode == "paper":
        # literal reading of the ratio form; clamped to keep the root real
        explore = math.sqrt(max(0.0, math.log(parent_visits / node.visits)))
    else:
        explore = math.sqrt(math.log(parent_visits) / node.visits)
    return exploit + c_exp * explore


def _pack_score_params(rcfg: RiskConfig, cfg: RewardConfig,
                       dt: float) -> np.ndarray:
    """Flatten the risk and reward parameters consumed by the compiled state
    scorer into the _fast.SP_* layout."""
    sp = np.empty(_fast.SP_SIZE)
    sp[_fast.SP_QTH_CC] = rcfg.q_th_cc
    sp[_fast.SP_QTH_CH] = rcfg.q_th_ch
    sp[_fast.SP_W1_CC] = rcfg.w1_cc
    sp[_fast.SP_W2_CC] = rcfg.w2_cc
    sp[_fast.SP_W1_CH] = rcfg.w1_ch
    sp[_fast.SP_W2_CH] = rcfg.w2_ch
    sp[_fast.SP_W3_CH] = rcfg.w3_ch
    sp[_fast.SP_LAMBDA_T] = cfg.lambda_t
    sp[_fast.SP_LAMBDA_C] = cfg.lambda_c
    sp[_fast.SP_WC2C] = cfg.w_c2c
    sp[_fast.SP_WC2R] = cfg.w_c2r
    sp[_fast.SP_WC2H] = cfg.w_c2h
    sp[_fast.SP_DMIN] = rcfg.d_min
    sp[_fast.SP_BETA_B] = rcfg.beta_boundary
    sp[_fast.SP_DSAFE_B] = rcfg.d_safe_boundary
    sp[_fast.SP_VDES] = cfg.v_des
    sp[_fast.SP_VTOL] = cfg.v_tol
    sp[_fast.SP_ALPHA_V] = cfg.alpha_v
    sp[_fast.SP_BETA_V] = cfg.beta_v
    sp[_fast.SP_WACC] = cfg.w_acc
    sp[_fast.SP_ADES] = cfg.a_des
    sp[_fast.SP_WPATH] = cfg.w_path
    sp[_fast.SP_WJERK] = cfg.w_jerk
    sp[_fast.SP_WCURV] = cfg.w_curvature
    sp[_fast.SP_WCENT] = cfg.w_centripetal
    sp[_fast.SP_ACENT] = cfg.a_cent_des
    sp[_fast.SP_WINNER] = cfg.w_inner
    sp[_fast.SP_WOUTER] = cfg.w_outer
    sp[_fast.SP_WTRANS] = cfg.w_trans
    sp[_fast.SP_WEXIT] = cfg.w_exit
    sp[_fast.SP_SIGEXIT] = cfg.sigma_exit
    sp[_fast.SP_W1] = cfg.w1
    sp[_fast.SP_W2] = cfg.w2
    sp[_fast.SP_W3] = cfg.w3
    sp[_fast.SP_W4] = cfg.w4
    sp[_fast.SP_LAMBDA_I] = cfg.lambda_init
    sp[_fast.SP_DT] = dt
    sp[_fast.SP_GAMMA] = cfg.gamma_r
    return sp


class _EvalBundle:
    __slots__ = ("safe", "immediate", "dist0", "dsafe0", "lanes", "bdist",
                 "qcc_max", "qch_max", "rewards")

    def __init__(self, safe, immediate, dist0, dsafe0, lanes, bdist,
                 qcc_max, qch_max, rewards):
        self.safe = safe
        self.immediate = immediate
        self.dist0 = dist0
        self.dsafe0 = dsafe0
        self.lanes = lanes
        self.bdist = bdist
        self.qcc_max = qcc_max
        self.qch_max = qch_max
        self.rewards = rewards


@dataclass
class PlanResult:
    actions: tuple[int, ...]            # flat action index per AV
    controls: list[tuple[float, float, int]]   # decoded (a, phi_dot, delta)
    av_rows_next: np.ndarray            # the chosen child's AV states
    av_modes_next: np.ndarray
    fallback: bool
    n_safe_children: int
    n_children: int
    root: TreeNode | None = None


class Planner:
    """Joint-action MCTS over the shared world model.

    Static configuration is bound once; plan() is called with the live state
    every step. All randomness derives from the two seeds passed to plan(),
    so identical inputs give identical actions.
    """

    def __init__(self, geo: RoundaboutGeometry, av_params: VehicleParams,
                 idm: IdmParams, risk_cfg: RiskConfig,
                 reward_cfg: RewardConfig, ucfg: UncertaintyParams,
                 pcfg: PlannerConfig, dt: float = 0.1,
                 yield_rule: YieldRule | None = None,
                 kinematics_mode: str = "standard"):
        if dt <= 0:
            raise InvalidParameterError(f"dt must be > 0, got {dt}")
        self.geo = geo
        self.av_params = av_params
        self.idm = idm
        self.risk_cfg = risk_cfg
        self.reward_cfg = reward_cfg
        self.ucfg = ucfg
        self.pcfg = pcfg
        self.dt = dt
        self.yield_rule = yield_rule
        self.kinematics_mode = kinematics_mode
        self._t_risk = int(risk_cfg.t_risk)
        self._exit_angles = np.asarray(geo.exit_angles)
        fixed_ds = 0.0 if risk_cfg.adaptive else risk_cfg.d_base
        self._risk_scalars = (risk_cfg.d_base, risk_cfg.kappa_v,
                              risk_cfg.beta_1, risk_cfg.beta_2,
                              risk_cfg.beta_3, risk_cfg.v_ref, fixed_ds,
                              risk_cfg.lambda_v)
        self._score_params = _pack_score_params(risk_cfg, reward_cfg, dt)
        self._lane_centers = np.array(
            [geo.lane_center(k) for k in range(geo.n_lanes)])
        self._shapley_flag = {"raw": 0, "uniform": 1,
                              "normalized": 2}[reward_cfg.shapley_mode]

    # -- per-plan state ----------------------------------------------------

    def _reset_plan(self, av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                    hdv_specs, seed, uncertainty_seed):
        self.n_av = len(av_specs)
        self.n_h = len(hdv_specs)
        geo = self.geo
        self._av_specs = av_specs
        self._hdv_specs = hdv_specs
        self._merge_rs = np.array([geo.lane_center(s.lane) for s in av_specs])
        self._entry_angles = np.array(
            [geo.exit_angles[s.entry] for s in av_specs])
        self._dest_angles = np.array(
            [geo.exit_angles[s.dest] for s in av_specs])
        self._dest_idx = np.array([s.dest for s in av_specs], dtype=np.int64)
        self._lengths = np.array([s.length for s in av_specs]
                                 + [s.length for s in hdv_specs])
        self._widths = np.array([s.width for s in av_specs]
                                + [s.width for s in hdv_specs])
        self._is_av = np.array([True] * self.n_av + [False] * self.n_h)
        self._active = np.ones(self.n_av + self.n_h, dtype=bool)
        steps = self.pcfg.d_max + self._t_risk + 1
        rows_all = np.vstack([av_rows, hdv_rows]) if self.n_h else \
            np.array(av_rows, dtype=float)
        modes_all = np.concatenate([av_modes, hdv_modes]) if self.n_h else \
            np.array(av_modes, dtype=np.int64)
        cache, cache_modes = build_hdv_cache(
            rows_all, modes_all, list(av_specs) + list(hdv_specs),
            list(range(self.n_av, self.n_av + self.n_h)), steps, self.dt,
            geo, self.idm, self.yield_rule, self.kinematics_mode)
        # park departed vehicles far away so they stop interacting
        for k in range(self.n_h):
            gone = cache_modes[k] >= MODE_ARRIVED
            cache[k, gone] = self._sentinel_row(self.n_av + k)
        self._cache = cache
        self._cache_modes = cache_modes
        self._sample_cache: dict[tuple[int, int], np.ndarray] = {}
        self._useed = uncertainty_seed
        self._seed = seed
        self._node_count = 0
        self._gmin = math.inf
        self._gmax = -math.inf

    @staticmethod
    def _sentinel_row(world_idx: int) -> np.ndarray:
        return np.array([_SENTINEL_R0 + _SENTINEL_SPACING * world_idx,
                         0.0, 0.0, 0.0, 0.0])

    def _node_rng(self) -> np.random.Generator:
        rng = np.random.default_rng(
            np.random.SeedSequence((self._seed, self._node_count)))
        self._node_count += 1
        return rng

    # -- joint state evaluation -------------------------------------------

    def _evaluate(self, rows, modes, accels, phi_dots, prev_ctrl, depth,
                  deltas, margins, in_range, compute_cih) -> _EvalBundle:
        """Classify and score one joint state. rows/modes are the controlled
        vehicles at tree depth `depth`; accels/phi_dots are the controls that
        produced them (held for the risk horizon), prev_ctrl the controls one
        step earlier (for jerk terms)."""
        geo = self.geo
        t_risk = self._t_risk
        ext, ext_modes = _fast.av_extrapolate(
            np.ascontiguousarray(rows), np.ascontiguousarray(modes),
            accels, phi_dots, self._merge_rs, self._entry_angles,
            self._dest_angles, self._lengths[:self.n_av], self._lane_centers,
            t_risk, self.dt, geo.r_inner, geo.r_outer, geo.leg_end_radius,
            geo.v_max, self.kinematics_mode == "paper")
        for i in range(self.n_av):
            gone = ext_modes[:, i] >= MODE_ARRIVED
            if gone.any():
                ext[gone, i] = self._sentinel_row(i)
        if self.n_h:
            hdv_slice = self._cache[:, depth:depth + t_risk + 1]
            traj = np.concatenate(
                [ext, np.swapaxes(hdv_slice, 0, 1)], axis=1)
        else:
            traj = ext
        traj = np.ascontiguousarray(traj)
        dist0, dsafe0, rinst0, rtemp, rinst_nx = _fast.risk_block(
            traj, self._active, self._is_av, self._lengths, self._widths,
            *self._risk_scalars, geo.v_max, geo.r_inner, geo.r_outer)

        rcfg = self.risk_cfg
        av_live = [i for i in range(self.n_av) if modes[i] < MODE_ARRIVED]
        bdist = np.full(self.n_av, math.inf)
        if av_live:
            live_rows = rows[av_live]
            verts = _fast.footprints_batch(
                live_rows[:, 0], live_rows[:, 1], live_rows[:, 3],
                self._lengths[av_live], self._widths[av_live])
            bd = _fast.boundary_dists_batch(
                verts, geo.r_inner, geo.r_outer, self._exit_angles,
                geo.leg_half_width, geo.leg_end_radius)
            for k, i in enumerate(av_live):
                bdist[i] = bd[k]

        cih = np.zeros((self.n_av, self.n_h))
        if compute_cih and self.n_h:
            pend = []        # (i, h) pairs that survived the cheap gates
            pend_samples = []
            pend_verts = []
            pend_thr = []
            for i in av_live:
                for h in range(self.n_h):
                    prep = self._cih_prepare(traj, depth, i, h)
                    if prep is not None:
                        pend.append((i, h))
                        pend_samples.append(prep[0])
                        pend_verts.append(prep[1])
                        pend_thr.append(prep[2])
            if pend:
                idx = [self.n_av + h for _, h in pend]
                hits = _fast.collision_hits_multi(
                    np.stack(pend_samples), np.stack(pend_verts),
                    np.array(pend_thr), self._lengths[idx],
                    self._widths[idx])
                for (i, h), n_hit, s in zip(pend, hits, pend_samples):
                    cih[i, h] = n_hit / s.shape[0]

        live = modes < MODE_ARRIVED
        trans_pen = (self.reward_cfg.w_trans * deltas.astype(float) ** 2
                     * np.where(in_range, margins, 1.0))
        safe_i, qcc_max, qch_max, immediate, rewards = _fast.score_step(
            np.ascontiguousarray(rows), np.ascontiguousarray(modes), live,
            accels, phi_dots, np.ascontiguousarray(prev_ctrl[:, 0]),
            np.ascontiguousarray(prev_ctrl[:, 1]), trans_pen,
            self._lane_centers, self._dest_idx, self._exit_angles,
            rinst0, rtemp, rinst_nx, cih, bdist, self._score_params,
            self._shapley_flag)
        return _EvalBundle(bool(safe_i), immediate, dist0, dsafe0,
                           traj[0, :, 4].copy(), bdist, qcc_max, qch_max,
                           rewards)

    def _cih_prepare(self, traj, depth, i, h):
        """Gate and sample preparation for the Monte Carlo collision
        probability of AV i's held-action state at the risk horizon against
        HDV h's reachable set, anchored at the node-time HDV state. Returns
        (samples, av_verts, threshold) for the batched hit count, or None
        when the reachable ball cannot touch the safety threshold (the
        probability is exactly 0)."""
        if not self.risk_cfg.adaptive:
            # ablation: collision-probability term forced to 0
            return None
        t_risk = self._t_risk
        geo = self.geo
        h_now = self._cache[h, depth]
        if h_now[0] >= _SENTINEL_R0 - 1.0:
            return None
        av_row = traj[t_risk, i]
        if av_row[0] >= _SENTINEL_R0 - 1.0:
            return None
        zi = 1 if geo.r_inner <= av_row[0] <= geo.r_outer else 0
        zh = 1 if geo.r_inner <= h_now[0] <= geo.r_outer else 0
        thr = _fast._pair_safe_distance(
            av_row[1], av_row[2], av_row[3], av_row[4], zi,
            h_now[1], h_now[2], h_now[3], h_now[4], zh,
            *self._risk_scalars[:7])
        horizon = t_risk * self.dt
        ball = (geo.v_max + self.ucfg.sigma_v) * horizon + DISPLACEMENT_TOL
        cax = av_row[0] * math.cos(av_row[1])
        cay = av_row[0] * math.sin(av_row[1])
        chx = h_now[0] * math.cos(h_now[1])
        chy = h_now[0] * math.sin(h_now[1])
        j = self.n_av + h
        half_diag = 0.5 * (math.hypot(self._lengths[i], self._widths[i])
                           + math.hypot(self._lengths[j], self._widths[j]))
        if math.hypot(cax - chx, cay - chy) - ball - half_diag >= thr:
            return None
        key = (h, depth)
        samples = self._sample_cache.get(key)
        if samples is None:
            mean_row = self._cache[h, depth + t_risk]
            mean = VehicleState(*mean_row)
            cov = lane_covariance(horizon, int(mean_row[4]), mean_row[1],
                                  geo, self.ucfg)
            pred = HdvPrediction(mean=mean, covariance=cov,
                                 horizon_t=horizon)
            rng = np.random.default_rng(
                np.random.SeedSequence((self._useed, h, depth)))
            samples = sample_reachable(pred, VehicleState(*h_now),
                                       self.ucfg.n_samples, rng, geo,
                                       self.ucfg)
            self._sample_cache[key] = samples
        av_verts = footprint(av_row[0], av_row[1], av_row[3],
                             self._lengths[i], self._widths[i])
        return samples, av_verts, thr

    # -- candidate actions -------------------------------------------------

    def _effective_key(self, action, modes):
        # outside circulation only the acceleration component acts
        return tuple(a if modes[i] == MODE_CIRCULATE else 1000 + a // 15
                     for i, a in enumerate(action))

    def _next_candidate(self, node: TreeNode):
        if node._exhausted:
            return None
        if node._heads is None:
            node._heads = [tuple([IDX_CRUISE] * self.n_av),
                           tuple([IDX_MED_BRAKE] * self.n_av),
                           tuple([IDX_MAX_BRAKE] * self.n_av),
                           tuple([encode_action(3, 2, 1)] * self.n_av),
                           tuple([encode_action(4, 2, 1)] * self.n_av)]
        while node._heads:
            action = node._heads.pop(0)
            key = self._effective_key(action, node.modes)
            if key not in node._seen:
                node._seen.add(key)
                return action
        max_unique = 1
        for i in range(self.n_av):
            max_unique *= (N_ACTIONS if node.modes[i] == MODE_CIRCULATE
                           else len(self.av_params.accel_levels))
        if len(node._seen) >= max_unique:
            node._exhausted = True
            return None
        for _ in range(256):
            action = tuple(self._draw_component(node.rng)
                           for _ in range(self.n_av))
            key = self._effective_key(action, node.modes)
            if key not in node._seen:
                node._seen.add(key)
                return action
        node._exhausted = True
        return None

    @staticmethod
    def _draw_component(rng: np.random.Generator) -> int:
        """One vehicle's flat action index, biased toward straight-ahead
        lane keeping (full spread over accelerations)."""
        ai = int(rng.integers(0, N_ACCEL))
        pi = 2 if rng.random() < 0.5 else int(rng.integers(0, N_PHIDOT))
        u = rng.random()
        di = 1 if u < 0.6 else (0 if u < 0.8 else 2)
        return encode_action(ai, pi, di)

    def _lane_margin(self, node: TreeNode, i: int, target: int) -> float:
        """Worst proximity margin against target-lane vehicles, from this
        node's cached pair distances; 0 means the change is admissible."""
        b = node.bundle
        worst = 0.0
        for j in range(self.n_av + self.n_h):
            if j == i or b.lanes[j] != target:
                continue
            if b.dsafe0[i, j] <= 0.0:
                continue
            worst = max(worst, max(0.0, 1.0 - b.dist0[i, j] / b.dsafe0[i, j]))
        return worst

    # -- tree search --------------------------------------------------------

    def _expand(self, node: TreeNode):
        action = self._next_candidate(node)
        if action is None:
            return None
        geo = self.geo
        n_av = self.n_av
        accels = np.empty(n_av)
        phi_dots = np.empty(n_av)
        deltas = np.zeros(n_av, dtype=np.int64)
        margins = np.zeros(n_av)
        in_range = np.zeros(n_av, dtype=bool)
        new_rows = np.empty_like(node.rows)
        new_modes = np.empty_like(node.modes)
        for i in range(n_av):
            a, pd, delta = decode_action(action[i], self.av_params)
            accels[i] = a
            phi_dots[i] = pd
            deltas[i] = delta
            z_ok = False
            if delta != 0 and node.modes[i] == MODE_CIRCULATE:
                target = int(node.rows[i, 4]) + delta
                if 0 <= target < geo.n_lanes:
                    in_range[i] = True
                    margins[i] = self._lane_margin(node, i, target)
                    z_ok = margins[i] == 0.0
            new_rows[i], new_modes[i] = step_row(
                node.rows[i], node.modes[i], self._av_specs[i], a, pd,
                delta, z_ok, self.dt, geo, self.kinematics_mode)
        bundle = self._evaluate(new_rows, new_modes, accels, phi_dots,
                                node.ctrl, node.depth + 1, deltas, margins,
                                in_range, compute_cih=True)
        child = TreeNode(node.depth + 1, node, action, new_rows, new_modes,
                         np.column_stack([accels, phi_dots]), bundle.safe,
                         bundle.immediate if bundle.safe else 0.0,
                         bundle, self._node_rng())
        node.children.append(child)
        return child

    def _rollout_tail(self, child: TreeNode) -> tuple[float, bool]:
        """Discounted return of the heuristic rollout below a safe child and
        whether it was truncated by an unsafe state. Policy: hold lane, zero
        steering rate, bang-off toward the desired speed. Simulation,
        sliding-window risk (over the rollout's own continuation, extended
        past the horizon by holding the final controls), scoring, and
        discounting all run in one fused kernel call."""
        n_eval = self.pcfg.d_max - child.depth
        if n_eval <= 0:
            return 0.0, False
        geo = self.geo
        t_risk = self._t_risk
        if self.n_h:
            hdv_block = np.ascontiguousarray(
                self._cache[:, child.depth:
                            child.depth + n_eval + t_risk + 1])
        else:
            hdv_block = np.zeros((0, 1 + n_eval + t_risk, 5))
        tail, truncated = _fast.rollout_eval(
            np.ascontiguousarray(child.rows),
            np.ascontiguousarray(child.modes),
            np.ascontiguousarray(child.ctrl), n_eval, hdv_block,
            self._merge_rs, self._entry_angles, self._dest_angles,
            self._dest_idx, self._lengths, self._widths, self._is_av,
            self.av_params.a_med, self.kinematics_mode == "paper",
            *self._risk_scalars, geo.v_max, geo.r_inner, geo.r_outer,
            self._exit_angles, geo.leg_half_width, geo.leg_end_radius,
            t_risk, self._lane_centers, self._score_params,
            self._shapley_flag, self.pcfg.r_penalty, _SENTINEL_R0,
            _SENTINEL_SPACING)
        return tail, bool(truncated)

    def _note_return(self, g: float) -> None:
        if g < self._gmin:
            self._gmin = g
        if g > self._gmax:
            self._gmax = g

    def _select_child(self, node: TreeNode) -> TreeNode:
        vmin = self._gmin if self._gmin < self._gmax else None
        vmax = self._gmax if self._gmin < self._gmax else None
        best = None
        best_score = -math.inf
        for child in node.children:
            s = ucb_score(child, node.visits, self.pcfg.c_exp, vmin, vmax,
                          self.pcfg.ucb_mode)
            if s > best_score:
                best_score = s
                best = child
        return best

    def _search(self, node: TreeNode) -> tuple[float, bool]:
        """One iteration below `node`; returns (discounted return, whether
        the return carries an unsafe penalty). Penalized returns keep their
        full weight in node statistics but are left out of the running
        min/max so normalization reflects the scale of safe outcomes."""
        node.visits += 1
        if node.parent is not None and not node.safe:
            g = -self.pcfg.r_penalty
            node.value += g
            return g, True
        if node.depth >= self.pcfg.d_max:
            g = node.reward
            node.value += g
            self._note_return(g)
            return g, False
        gamma = self.reward_cfg.gamma_r
        if len(node.children) < widening_cap(node.visits, self.pcfg):
            child = self._expand(node)
            if child is not None:
                child.visits += 1
                if child.safe:
                    tail, penalized = self._rollout_tail(child)
                    g_child = child.reward + tail
                else:
                    g_child = -self.pcfg.r_penalty
                    penalized = True
                child.value += g_child
                g = node.reward + gamma * g_child
                node.value += g
                if not penalized:
                    self._note_return(g_child)
                    self._note_return(g)
                return g, penalized
        if node.children:
            g_child, penalized = self._search(self._select_child(node))
            g = node.reward + gamma * g_child
            node.value += g
            if not penalized:
                self._note_return(g)
            return g, penalized
        g = node.reward
        node.value += g
        return g, False

    # -- public entry --------------------------------------------------------

    def plan(self, av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
             hdv_specs, prev_controls, seed: int, uncertainty_seed: int,
             return_tree: bool = False) -> PlanResult:
        """Run K search iterations and return the most-visited safe root
        action, or the flagged max-brake fallback when no root child is
        safe. Deterministic given (state, seed, uncertainty_seed)."""
        av_rows = np.array(av_rows, dtype=float)
        av_modes = np.array(av_modes, dtype=np.int64)
        if av_rows.ndim != 2 or av_rows.shape[1] != 5 or not len(av_rows):
            raise InvalidParameterError("av_rows must be (n_av, 5), n_av >= 1")
        if (av_modes >= MODE_ARRIVED).any():
            raise InvalidParameterError(
                "plan expects only active controlled vehicles")
        hdv_rows = (np.array(hdv_rows, dtype=float) if len(hdv_specs)
                    else np.empty((0, 5)))
        hdv_modes = (np.array(hdv_modes, dtype=np.int64) if len(hdv_specs)
                     else np.empty(0, dtype=np.int64))
        self._reset_plan(av_rows, av_modes, av_specs, hdv_rows, hdv_modes,
                         hdv_specs, seed, uncertainty_seed)
        prev = np.array(prev_controls, dtype=float).reshape(self.n_av, 2)
        root_bundle = self._evaluate(
            av_rows, av_modes, prev[:, 0].copy(), prev[:, 1].copy(), prev,
            0, np.zeros(self.n_av, dtype=np.int64), np.zeros(self.n_av),
            np.zeros(self.n_av, dtype=bool), compute_cih=False)
        root = TreeNode(0, None, None, av_rows, av_modes, prev, True, 0.0,
                        root_bundle, self._node_rng())
        for _ in range(self.pcfg.iterations):
            self._search(root)

        safe_children = [c for c in root.children if c.safe]
        if safe_children:
            best = min(safe_children, key=lambda c: (-c.visits, c.action))
            actions = best.action
            rows_next = best.rows.copy()
            modes_next = best.modes.copy()
            fallback = False
        else:
            actions = tuple([IDX_MAX_BRAKE] * self.n_av)
            rows_next = np.empty_like(av_rows)
            modes_next = np.empty_like(av_modes)
            for i in range(self.n_av):
                a, pd, _ = decode_action(IDX_MAX_BRAKE, self.av_params)
                rows_next[i], modes_next[i] = step_row(
                    av_rows[i], av_modes[i], av_specs[i], a, pd, 0, False,
                    self.dt, self.geo, self.kinematics_mode)
            fallback = True
        controls = [decode_action(a, self.av_params) for a in actions]
        return PlanResult(actions=actions, controls=controls,
                          av_rows_next=rows_next, av_modes_next=modes_next,
                          fallback=fallback,
                          n_safe_children=len(safe_children),
                          n_children=len(root.children),
                          root=root if return_tree else None)

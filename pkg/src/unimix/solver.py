"""Adaptive integration of the descent flow with weight-vanishing events.

The flow is integrated with an explicit embedded Dormand-Prince 5(4)
pair: seven stages, FSAL, a quartic dense-output interpolant, and a
proportional-integral step controller targeting (abs_tol, rel_tol). An
explicit method is adequate here because the field is a smooth gradient
system on a compact set; the tolerances are exposed for regimes where
the stability limit bites.

After every accepted step the dense output is scanned for weights
crossing the zero threshold. At the earliest crossing the run freezes,
drops the vanished component (all simultaneously sub-threshold ones),
renormalizes the surviving weights to sum exactly one, and restarts
integration with the reduced system -- the active component count only
ever shrinks. Trajectories are sampled log-spaced in time plus at every
event, recording the objective, the weights, their sum before any
renormalization, and the field norm.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channels import MixedUnitaryChannel, random_channel
from .linalg import re_unitarize, unitarity_defect
from .objective import ObjectiveInstance, PackedFlow

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output coefficients (Shampine's interpolant for this pair)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_BETA = 0.04          # integral gain of the PI controller
_EXPO = 0.2 - 0.75 * _BETA


@dataclass
class FlowConfig:
    """Integrator and stopping configuration.

    Defaults follow the reference experiments: integration tolerances
    1e-12 and an objective stop at 1e-17; ``grad_tol`` additionally stops
    at non-zero-residual stationary points.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    objective_tol: float = 1e-17
    grad_tol: float = 1e-10
    p_zero_threshold: float = 1e-12
    unitarity_tol: float = 1e-12
    renorm_interval: int = 50
    t_max: float = 1e5
    max_steps: int = 200_000
    seed: int = 0
    samples_per_decade: int = 60

    @property
    def descent_slack(self) -> float:
        return 100.0 * self.abs_tol


@dataclass(frozen=True)
class SolverState:
    """Flow variable at time t over the currently active components."""

    t: float
    active: tuple
    p: np.ndarray
    U: np.ndarray

    @property
    def n_active(self) -> int:
        return len(self.active)


@dataclass(frozen=True)
class RestartEvent:
    """A weight hit zero: integration froze at t_hat and the component
    (in the original indexing) was removed."""

    t_hat: float
    removed_index: int
    p_before: np.ndarray


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    f: float
    sum_p: float
    field_norm: float
    p_full: np.ndarray
    event: bool = False
    # max_k ||U_k*U_k - I||_F at the sample, before any re-unitarization
    unitarity: float = 0.0


@dataclass
class TrajectoryRecord:
    n_initial: int
    samples: list = field(default_factory=list)
    events: list = field(default_factory=list)


@dataclass(frozen=True)
class StepDiagnostics:
    t_start: float
    t_end: float
    h_used: float
    h_next: float
    n_rejected: int
    error_norm: float
    f_end: float
    field_norm_end: float


@dataclass
class RunResult:
    state: SolverState
    record: TrajectoryRecord
    channel: MixedUnitaryChannel
    stop_reason: str
    n_steps: int
    n_rejected: int
    wall_time: float
    final_objective: float


class StepUnderflowError(RuntimeError):
    """The controller drove the step below machine resolution; carries
    the last accepted state."""

    def __init__(self, message, state: SolverState):
        super().__init__(message)
        self.state = state


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


class Dopri5:
    """Minimal RK5(4) stepper with FSAL, PI control and dense output."""

    def __init__(self, fun, t0, y0, abs_tol, rel_tol, t_bound, first_step=None):
        self.fun = fun
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.t_bound = float(t_bound)
        self.f0 = np.array(fun(self.t, self.y), dtype=float)
        self.K = np.empty((7, self.y.size))
        self.err_old = 1e-4
        self.n_rejected_total = 0
        self.h = first_step if first_step is not None else self._initial_step()
        # dense-output snapshot of the last accepted step
        self.t_old = self.t
        self.y_old = self.y.copy()
        self.h_old = 0.0
        self.f_end = np.nan

    def _initial_step(self):
        # standard curvature-probing heuristic
        scale = self.abs_tol + self.rel_tol * np.abs(self.y)
        d0 = _rms(self.y / scale)
        d1 = _rms(self.f0 / scale)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        f1 = self.fun(self.t + h0, self.y + h0 * self.f0)
        d2 = _rms((f1 - self.f0) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1, max(self.t_bound - self.t, 1e-12))

    def reset_state(self, y_new):
        """Replace the current state (after renormalization) and refresh
        the FSAL derivative."""
        self.y = np.array(y_new, dtype=float)
        self.f0 = np.array(self.fun(self.t, self.y), dtype=float)

    def step(self):
        """Advance one accepted step; returns (h_used, n_rejected, err)."""
        fun, K = self.fun, self.K
        t, y = self.t, self.y
        h = min(self.h, self.t_bound - t)
        if h <= 0:
            raise RuntimeError("stepper already at t_bound")
        n_rejected = 0
        while True:
            h_min = 16 * np.finfo(float).eps * max(abs(t), 1.0)
            if h < h_min:
                raise StepUnderflowError(
                    f"step size {h:.3e} under machine resolution at t={t:.6e}", None
                )
            K[0] = self.f0
            for i in range(1, 6):
                dy = h * (K[:i].T @ _A[i])
                K[i] = fun(t + _C[i] * h, y + dy)
            y_new = y + h * (K[:6].T @ _B)
            K[6] = fun(t + h, y_new)
            f_end = getattr(fun, "last_value", np.nan)
            err_vec = h * (K.T @ _E)
            scale = self.abs_tol + self.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(err_vec / scale)
            if err <= 1.0:
                break
            n_rejected += 1
            factor = max(_MIN_FACTOR, _SAFETY * err ** -_EXPO)
            h *= factor
        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -_EXPO * self.err_old ** _BETA))
        if n_rejected > 0:
            factor = min(1.0, factor)
        self.err_old = max(err, 1e-4)
        self.t_old, self.y_old, self.h_old = t, y.copy(), h
        self.t = t + h
        self.y = y_new
        self.f0 = K[6].copy()
        self.f_end = f_end
        self.h = h * factor
        self.n_rejected_total += n_rejected
        return h, n_rejected, err

    def dense(self):
        """Interpolant over the last accepted step, callable on scalar t."""
        t0, y0, h = self.t_old, self.y_old, self.h_old
        Q = self.K.T @ _P

        def sol(t):
            theta = (t - t0) / h
            powers = np.array([theta, theta**2, theta**3, theta**4])
            return y0 + h * (Q @ powers)

        return sol

    def min_weights_on_step(self, r, n_scan=17):
        """Per-component minimum of the first r state entries over the
        last step's dense output, scanned on a uniform grid."""
        Qp = self.K.T[:r] @ _P
        theta = np.linspace(0.0, 1.0, n_scan)
        powers = np.vstack([theta, theta**2, theta**3, theta**4])
        vals = self.y_old[:r, None] + self.h_old * (Qp @ powers)
        return vals.min(axis=1)


def detect_zero_crossing(t_lo, t_hi, weights_at, eps_p, time_tol=None, scan_points=17):
    """Locate the earliest weight crossing of ``eps_p`` within a step.

    ``weights_at`` maps a time in [t_lo, t_hi] to the vector of active
    weights (typically the dense output restricted to the weight block).
    Returns (t_hat, k_hat) for the earliest crossing, resolving ties
    within the time tolerance in favor of the smallest index, or None if
    no weight dips to ``eps_p`` inside the interval.
    """
    if time_tol is None:
        time_tol = 1e-10 * max(1.0, abs(t_hi))
    grid = np.linspace(t_lo, t_hi, scan_points)
    w = np.stack([np.atleast_1d(weights_at(t)) for t in grid])
    below = w <= eps_p
    if not below.any():
        return None
    hits = []
    for k in np.nonzero(below.any(axis=0))[0]:
        rows = np.nonzero(below[:, k])[0]
        first = rows[0]
        if first == 0:
            hits.append((t_lo, int(k)))
            continue
        lo, hi = grid[first - 1], grid[first]
        while hi - lo > time_tol:
            mid = 0.5 * (lo + hi)
            if np.atleast_1d(weights_at(mid))[k] <= eps_p:
                hi = mid
            else:
                lo = mid
        hits.append((hi, int(k)))
    t_first = min(t for t, _ in hits)
    k_hat = min(k for t, k in hits if t <= t_first + time_tol)
    t_hat = next(t for t, k in hits if k == k_hat)
    return t_hat, k_hat


def renormalize_state(state: SolverState, cfg: FlowConfig = None) -> SolverState:
    """Project the state back onto the constraint set.

    Weights are divided by their sum (made to sum exactly one); unitaries
    whose drift exceeds the tolerance are replaced by their polar factor.
    """
    cfg = cfg or FlowConfig()
    total = float(state.p.sum())
    if total <= 0:
        raise ValueError(f"corrupted state: sum of weights is {total!r}")
    if abs(total - 1.0) > 0.01:
        raise ValueError(f"sum of weights {total!r} too far from 1 to renormalize")
    p = state.p / total
    U = state.U
    if max(unitarity_defect(u) for u in U) > cfg.unitarity_tol:
        U = np.stack([re_unitarize(u) for u in U])
    return replace(state, p=p, U=U)


def initial_state(inst: ObjectiveInstance, cfg: FlowConfig, initial=None, n_components=None):
    """Starting point: a given channel/state, or a seeded random guess."""
    if isinstance(initial, SolverState):
        return initial
    if isinstance(initial, MixedUnitaryChannel):
        chan = initial
    else:
        if n_components is None:
            raise ValueError("need n_components for a random initial guess")
        chan = random_channel(inst.dim, n_components, np.random.default_rng(cfg.seed))
    return SolverState(0.0, tuple(range(chan.n_components)), chan.weights.copy(),
                       chan.unitaries.copy())


def integrate_step(state: SolverState, inst: ObjectiveInstance, cfg: FlowConfig):
    """Advance the flow by one accepted adaptive step.

    Convenience single-step form of the run loop; returns the new state
    plus diagnostics. Renormalizes afterwards only if drift exceeds the
    configured tolerances.
    """
    pf = PackedFlow(inst, state.n_active)
    stepper = Dopri5(pf, state.t, pf.pack(state.p, state.U),
                     cfg.abs_tol, cfg.rel_tol, t_bound=state.t + np.inf)
    try:
        h_used, n_rej, err = stepper.step()
    except StepUnderflowError as exc:
        raise StepUnderflowError(str(exc), state) from None
    p, U = pf.unpack(stepper.y)
    new = SolverState(stepper.t, state.active, p.copy(), U.copy())
    if max(unitarity_defect(u) for u in new.U) > cfg.unitarity_tol:
        new = renormalize_state(new, cfg)
    diag = StepDiagnostics(
        t_start=state.t, t_end=stepper.t, h_used=h_used, h_next=stepper.h,
        n_rejected=n_rej, error_norm=err, f_end=stepper.f_end,
        field_norm_end=float(np.linalg.norm(stepper.f0)),
    )
    return new, diag


def _max_defect(U):
    gram = np.matmul(np.conj(np.swapaxes(U, 1, 2)), U)
    gram -= np.eye(U.shape[-1])
    return float(np.sqrt((np.abs(gram) ** 2).sum(axis=(1, 2))).max())


def _scatter(p, active, n_initial):
    full = np.zeros(n_initial)
    full[list(active)] = p
    return full


def run(inst: ObjectiveInstance, cfg: FlowConfig, initial=None, n_components=None) -> RunResult:
    """Integrate the flow with event-driven component removal.

    Stops when the objective reaches ``objective_tol``, the field norm
    reaches ``grad_tol``, time reaches ``t_max``, or the step budget is
    exhausted. An integrator failure surfaces the partial trajectory with
    stop_reason ``integrator_failure``.
    """
    t_start = time.perf_counter()
    state = initial_state(inst, cfg, initial, n_components)
    n_initial = state.n_active
    record = TrajectoryRecord(n_initial=n_initial)
    eps_p = cfg.p_zero_threshold

    pf = PackedFlow(inst, state.n_active)
    y = pf.pack(state.p, state.U)
    f_cur = pf.value(y)
    fnorm = float(np.linalg.norm(pf(state.t, y)))
    record.samples.append(TrajectorySample(
        state.t, f_cur, float(state.p.sum()), fnorm,
        _scatter(state.p, state.active, n_initial),
        unitarity=_max_defect(state.U)))

    growth = 10.0 ** (1.0 / cfg.samples_per_decade)
    next_mark = 0.0
    n_steps = 0
    n_rejected = 0
    stop_reason = None
    stepper = None

    while True:
        if f_cur <= cfg.objective_tol:
            stop_reason = "objective_tol"
            break
        if fnorm <= cfg.grad_tol:
            stop_reason = "grad_tol"
            break
        if state.t >= cfg.t_max or cfg.t_max - state.t <= 1e-10 * max(1.0, cfg.t_max):
            stop_reason = "t_max"
            break
        if n_steps >= cfg.max_steps:
            stop_reason = "max_steps"
            break

        if stepper is None:
            stepper = Dopri5(pf, state.t, y, cfg.abs_tol, cfg.rel_tol, t_bound=cfg.t_max)
        try:
            stepper.step()
        except StepUnderflowError:
            stop_reason = "integrator_failure"
            break
        n_steps += 1
        n_rejected = stepper.n_rejected_total

        r_act = state.n_active
        hit = None
        if stepper.min_weights_on_step(r_act).min() <= eps_p:
            sol = stepper.dense()
            hit = detect_zero_crossing(
                stepper.t_old, stepper.t, lambda t: sol(t)[:r_act], eps_p)
        if hit is not None:
            t_hat, _ = hit
            y_hat = sol(t_hat)
            p_hat, U_hat = pf.unpack(y_hat)
            p_hat = p_hat.copy()
            U_hat = U_hat.copy()
            f_hat = pf.value(y_hat)
            sum_p_hat = float(p_hat.sum())
            fnorm_hat = float(np.linalg.norm(pf(t_hat, y_hat)))
            removed = np.nonzero(p_hat <= eps_p)[0]
            keep = np.nonzero(p_hat > eps_p)[0]
            assert keep.size >= 1, "all components removed; weights should sum to 1"
            p_full = _scatter(p_hat, state.active, n_initial)
            record.samples.append(TrajectorySample(
                t_hat, f_hat, sum_p_hat, fnorm_hat, p_full, event=True,
                unitarity=_max_defect(U_hat)))
            for k in removed:
                record.events.append(RestartEvent(
                    t_hat=t_hat, removed_index=state.active[k], p_before=p_full.copy()))
            active = tuple(state.active[k] for k in keep)
            p_new = p_hat[keep] / p_hat[keep].sum()
            U_new = np.stack([re_unitarize(U_hat[k]) for k in keep])
            state = SolverState(t_hat, active, p_new, U_new)
            pf = PackedFlow(inst, state.n_active)
            y = pf.pack(state.p, state.U)
            f_cur = pf.value(y)
            fnorm = float(np.linalg.norm(pf(state.t, y)))
            stepper = None
            next_mark = max(next_mark, t_hat) * growth
            continue

        # plain accepted step
        y = stepper.y
        p_cur, U_cur = pf.unpack(y)
        sum_p_raw = float(p_cur.sum())
        f_cur = stepper.f_end
        fnorm = float(np.linalg.norm(stepper.f0))
        state = SolverState(stepper.t, state.active, p_cur.copy(), U_cur.copy())
        will_sample = state.t >= next_mark or f_cur <= cfg.objective_tol
        defect_raw = _max_defect(state.U) if will_sample else 0.0

        if n_steps % cfg.renorm_interval == 0:
            state = renormalize_state(state, cfg)
            y = pf.pack(state.p, state.U)
            stepper.reset_state(y)
            f_cur = pf.value(y)

        if will_sample:
            record.samples.append(TrajectorySample(
                state.t, f_cur, sum_p_raw, fnorm,
                _scatter(state.p, state.active, n_initial),
                unitarity=defect_raw))
            next_mark = state.t * growth

    final = renormalize_state(state, cfg)
    # the assembled channel must satisfy the strict invariants
    p_final = np.clip(final.p, 0.0, None)
    p_final /= p_final.sum()
    channel = MixedUnitaryChannel(p_final, np.stack([re_unitarize(u) for u in final.U]))
    if not record.samples or record.samples[-1].t < final.t:
        record.samples.append(TrajectorySample(
            final.t, f_cur, float(state.p.sum()), fnorm,
            _scatter(final.p, final.active, n_initial),
            unitarity=_max_defect(final.U)))
    return RunResult(
        state=final, record=record, channel=channel, stop_reason=stop_reason,
        n_steps=n_steps, n_rejected=n_rejected,
        wall_time=time.perf_counter() - t_start, final_objective=f_cur,
    )


# ----------------------------------------------------------------------
# Trajectory artifacts: CSV of samples, JSON of restart events. Floats
# are written with repr for exact round-trips and reproducible bytes.
# ----------------------------------------------------------------------

def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    cols = ["t", "f", "sum_p", "field_norm"]
    cols += [f"p_{k + 1}" for k in range(record.n_initial)]
    cols += ["event"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for s in record.samples:
            row = [repr(float(s.t)), repr(float(s.f)), repr(float(s.sum_p)),
                   repr(float(s.field_norm))]
            row += [repr(float(v)) for v in s.p_full]
            row += ["1" if s.event else "0"]
            fh.write(",".join(row) + "\n")


def write_events_json(record: TrajectoryRecord, path) -> None:
    import json

    events = [
        {"t_hat": float(e.t_hat), "removed_index": int(e.removed_index),
         "p_before": list(map(float, e.p_before))}
        for e in record.events
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(events, fh, indent=1, sort_keys=True)
        fh.write("\n")

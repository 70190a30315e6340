"""Coupled macro-meso time stepping.

Each macro step advances the stress rows and the velocity together by a
fixed-point (Picard) iteration on the end-of-step velocity:

    b^k  = G0 (dy u^k + V(t+dt))          loading from the velocity iterate
    p^k  = meso advance of the saved rows over [t, t+dt] under frozen b^k
    tau^k = first moment of p^k
    u^{k+1} = backward-Euler momentum step driven by dy tau^k

declared converged when the relative L2 change of u falls below picard_tol.
Every iterate restarts the meso rows from the saved start-of-step state, so
the accepted step is a genuine implicit solve, not an accumulation.

The fully relaxing variant replaces the meso advance by the exact per-node
relaxation update tau' + tau = b (integrating factor, b frozen per step)
and is used both as a production path for sigma_c = 0 runs and as the
cross-validation partner for the general solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticFailure, NonContractionError, ValidationError
from .grids import SigmaGrid, SpaceTimeGrid
from .initial import InitialData
from .macro import heat_step, l2_norm, velocity_gradient
from .meso import StepReport, advance_rows, compute_d, compute_tau, required_substeps
from .params import DimensionlessParams
from .protocols import ShearProtocol

PICARD_TOL = 1e-8
PICARD_MAX = 50
MASS_TOL = 1e-10
TRUNCATION_TOL = 1e-8  # mass allowed in the outermost stress cells


@dataclass(frozen=True)
class CoupledProblem:
    """Everything fixed over a run (parameters, grids, protocol, knobs)."""

    dp: DimensionlessParams
    sigma_grid: SigmaGrid
    space_grid: SpaceTimeGrid
    protocol: ShearProtocol
    picard_tol: float = PICARD_TOL
    picard_max: int = PICARD_MAX
    mass_tol: float = MASS_TOL
    sink_scale: float = 1.0  # fault-injection hook, production value 1.0


@dataclass
class CoupledState:
    step: int
    u: np.ndarray            # (n_y,)
    p: np.ndarray            # (n_y, n_sigma)

    def tau(self, grid: SigmaGrid) -> np.ndarray:
        return np.asarray(compute_tau(self.p, grid))

    def d(self, grid: SigmaGrid, alpha: float) -> np.ndarray:
        return np.asarray(compute_d(self.p, grid, alpha))


@dataclass
class Accumulators:
    """Running integrals the diagnostics need (resumed exactly on restart)."""

    xi: np.ndarray           # G0 int_0^t (dy u + V) ds per row
    acc_d: np.ndarray        # int_0^t D ds per row
    grad_sq: np.ndarray      # int_0^t int |dsigma p|^2 dsigma ds per row
    clipped_total: float = 0.0
    min_before_clip: float = math.inf
    truncation_steps: int = 0

    @classmethod
    def zeros(cls, n_y: int) -> "Accumulators":
        return cls(xi=np.zeros(n_y), acc_d=np.zeros(n_y), grad_sq=np.zeros(n_y))


@dataclass
class PicardStats:
    iterations: int
    ratio: float             # first measured contraction ratio (nan if unobserved)
    final_change: float


@dataclass
class Snapshot:
    index: int
    t: float
    u: np.ndarray
    tau: np.ndarray
    d: np.ndarray
    p: np.ndarray | None
    xi: np.ndarray
    acc_d: np.ndarray


@dataclass
class RunResult:
    kind: str                      # "general" or "maxwell"
    problem: CoupledProblem
    eta: float
    p0_max: float
    p0: np.ndarray
    u0: np.ndarray
    times: np.ndarray
    tau_series: np.ndarray         # (n_steps+1, n_y)
    u_series: np.ndarray           # (n_steps+1, n_y)
    b_series: np.ndarray           # (n_steps, n_y) loading frozen per step
    trunc_series: np.ndarray       # (n_steps, n_y) metered boundary moment flux
    inner_series: np.ndarray       # (n_steps+1, n_y) banded first moment
    mass_err_series: np.ndarray    # (n_steps+1,) max row deviation from 1
    min_d_series: np.ndarray       # (n_steps+1,)
    max_p_series: np.ndarray       # (n_steps+1,)
    picard_iters: np.ndarray       # (n_steps,)
    picard_ratios: np.ndarray      # (n_steps,)
    snapshots: list[Snapshot]
    accum: Accumulators
    state: CoupledState
    warnings: list[str] = field(default_factory=list)

    def snapshot_times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def coupled_step(state: CoupledState, prob: CoupledProblem
                 ) -> tuple[CoupledState, PicardStats, StepReport, np.ndarray]:
    """One Picard-coupled macro step; returns the new state, iteration
    stats, the meso step report, and the loading field actually used."""
    grid, sgrid, dp = prob.sigma_grid, prob.space_grid, prob.dp
    dt = sgrid.dt
    t_next = sgrid.time(state.step + 1)
    v_next = prob.protocol.value(t_next)
    vdot_next = prob.protocol.derivative(t_next)

    u_iter = state.u
    changes: list[float] = []
    p_new = state.p
    rep = StepReport.zeros(state.p.shape[0])
    b = np.zeros(state.p.shape[0])
    strikes = 0
    for _ in range(prob.picard_max):
        b = dp.g0 * (velocity_gradient(u_iter, sgrid) + v_next)
        n_sub = required_substeps(b, dt, grid)
        p_new, rep = advance_rows(state.p, b, dt, grid, dp.alpha,
                                  n_sub=n_sub, sink_scale=prob.sink_scale)
        tau_new = np.asarray(compute_tau(p_new, grid))
        u_new = heat_step(state.u, tau_new, vdot_next, dp.rho, dp.mu, dt, sgrid)
        change = l2_norm(u_new - u_iter, sgrid)
        changes.append(change)
        u_iter = u_new
        if change <= prob.picard_tol * (1.0 + l2_norm(u_new, sgrid)):
            break
        if len(changes) >= 2 and changes[-2] > 0:
            if change >= changes[-2] and change > 1e-13:
                strikes += 1
                if strikes >= 3:
                    raise NonContractionError(
                        f"fixed-point iteration diverging at t = {t_next:.6g} "
                        f"(ratio {change / changes[-2]:.3g}); reduce dt",
                        ratio=change / changes[-2])
            else:
                strikes = 0
    else:
        ratio = changes[-1] / changes[-2] if len(changes) >= 2 and changes[-2] > 0 else math.nan
        raise NonContractionError(
            f"fixed-point iteration did not converge in {prob.picard_max} "
            f"iterations at t = {t_next:.6g} (last ratio {ratio:.3g}); reduce dt",
            ratio=ratio)

    ratio = changes[1] / changes[0] if len(changes) >= 2 and changes[0] > 0 else math.nan
    stats = PicardStats(iterations=len(changes), ratio=ratio, final_change=changes[-1])
    new_state = CoupledState(step=state.step + 1, u=u_iter, p=p_new)
    return new_state, stats, rep, b


def _sigma_gradient_energy(p: np.ndarray, grid: SigmaGrid) -> np.ndarray:
    diff = np.diff(p, axis=1) / grid.d_sigma
    return (diff * diff).sum(axis=1) * grid.d_sigma


@dataclass
class ResumePayload:
    """Exact state needed to continue a run bit-for-bit."""

    step: int
    u: np.ndarray
    p: np.ndarray
    accum: Accumulators
    series: dict  # per-step arrays up to and including `step`


def run(prob: CoupledProblem, init: InitialData, eta: float,
        snap_every: int = 0, checkpoint_every: int = 0,
        checkpoint_sink=None, resume: ResumePayload | None = None) -> RunResult:
    """Integrate the coupled system to the horizon.

    snap_every / checkpoint_every are step counts (0 disables; snapshots
    always include t = 0 and the final time).  checkpoint_sink, when given,
    receives a ResumePayload at every checkpoint step.
    """
    grid, sgrid, dp = prob.sigma_grid, prob.space_grid, prob.dp
    n_y, n_steps = sgrid.n_y, sgrid.n_steps
    if init.p0.shape != (n_y, grid.n_sigma):
        raise ValidationError("initial rows do not match the grids")

    p0 = init.p0.copy()
    u0 = init.u0.copy()
    p0_max = float(p0.max())

    tau_series = np.zeros((n_steps + 1, n_y))
    u_series = np.zeros((n_steps + 1, n_y))
    b_series = np.zeros((n_steps, n_y))
    trunc_series = np.zeros((n_steps, n_y))
    inner_series = np.zeros((n_steps + 1, n_y))
    mass_err = np.zeros(n_steps + 1)
    min_d = np.zeros(n_steps + 1)
    max_p = np.zeros(n_steps + 1)
    iters = np.zeros(n_steps, dtype=int)
    ratios = np.full(n_steps, math.nan)
    warnings: list[str] = []

    if resume is None:
        state = CoupledState(step=0, u=u0.copy(), p=p0.copy())
        accum = Accumulators.zeros(n_y)
        start = 0
    else:
        state = CoupledState(step=resume.step, u=resume.u.copy(), p=resume.p.copy())
        accum = resume.accum
        start = resume.step
        s = resume.series
        tau_series[:start + 1] = s["tau"]
        u_series[:start + 1] = s["u"]
        b_series[:start] = s["b"]
        trunc_series[:start] = s["trunc"]
        inner_series[:start + 1] = s["inner"]
        mass_err[:start + 1] = s["mass_err"]
        min_d[:start + 1] = s["min_d"]
        max_p[:start + 1] = s["max_p"]
        iters[:start] = s["iters"]
        ratios[:start] = s["ratios"]
        warnings.extend(s.get("warnings", []))

    def _observe(k: int):
        masses = np.asarray(grid.mass(state.p))
        mass_err[k] = float(np.abs(masses - 1.0).max())
        tau_series[k] = state.tau(grid)
        u_series[k] = state.u
        inner_series[k] = np.asarray(grid.inner_moment(state.p))
        min_d[k] = float(state.d(grid, dp.alpha).min())
        max_p[k] = float(state.p.max())
        if mass_err[k] > prob.mass_tol:
            row = int(np.abs(masses - 1.0).argmax())
            exc = DiagnosticFailure(
                f"mass conservation failed at step {k}, row {row}: "
                f"|mass - 1| = {mass_err[k]:.3e} > {prob.mass_tol:.1e}")
            exc.payload = _payload(k)  # full state dump for post-mortems
            raise exc
        outer = np.asarray(grid.outermost_mass(state.p))
        if float(outer.max()) > TRUNCATION_TOL:
            accum.truncation_steps += 1
            if accum.truncation_steps == 1:
                warnings.append(
                    f"truncation monitor: outermost-cell mass {float(outer.max()):.3e} "
                    f"exceeds {TRUNCATION_TOL:.1e} at t = {sgrid.time(k):.6g}; "
                    "consider a larger sigma_max")

    snapshots: list[Snapshot] = []

    def _snap(k: int):
        if snap_every and (k % snap_every == 0 or k == n_steps):
            snapshots.append(Snapshot(
                index=k, t=sgrid.time(k), u=state.u.copy(),
                tau=state.tau(grid), d=state.d(grid, dp.alpha),
                p=state.p.copy(), xi=accum.xi.copy(), acc_d=accum.acc_d.copy()))

    def _payload(k: int) -> ResumePayload:
        return ResumePayload(
            step=k, u=state.u.copy(), p=state.p.copy(),
            accum=Accumulators(xi=accum.xi.copy(), acc_d=accum.acc_d.copy(),
                               grad_sq=accum.grad_sq.copy(),
                               clipped_total=accum.clipped_total,
                               min_before_clip=accum.min_before_clip,
                               truncation_steps=accum.truncation_steps),
            series={"tau": tau_series[:k + 1].copy(), "u": u_series[:k + 1].copy(),
                    "b": b_series[:k].copy(), "trunc": trunc_series[:k].copy(),
                    "inner": inner_series[:k + 1].copy(),
                    "mass_err": mass_err[:k + 1].copy(), "min_d": min_d[:k + 1].copy(),
                    "max_p": max_p[:k + 1].copy(), "iters": iters[:k].copy(),
                    "ratios": ratios[:k].copy(), "warnings": list(warnings)})

    if resume is None:
        _observe(0)
        _snap(0)

    for k in range(start, n_steps):
        grad_prev = velocity_gradient(state.u, sgrid)
        d_prev = state.d(grid, dp.alpha)
        t_prev, t_next = sgrid.time(k), sgrid.time(k + 1)

        state, stats, rep, b_used = coupled_step(state, prob)

        iters[k] = stats.iterations
        ratios[k] = stats.ratio
        b_series[k] = b_used
        trunc_series[k] = rep.trunc_moment
        accum.clipped_total += float(rep.clipped_mass.sum())
        accum.min_before_clip = min(accum.min_before_clip, rep.min_before_clip)
        grad_new = velocity_gradient(state.u, sgrid)
        accum.xi += dp.g0 * (0.5 * sgrid.dt * (grad_prev + grad_new)
                             + (prob.protocol.integral(t_next) - prob.protocol.integral(t_prev)))
        accum.acc_d += 0.5 * sgrid.dt * (d_prev + state.d(grid, dp.alpha))
        accum.grad_sq += sgrid.dt * _sigma_gradient_energy(state.p, grid)

        _observe(k + 1)
        _snap(k + 1)
        if checkpoint_every and checkpoint_sink is not None and (k + 1) % checkpoint_every == 0:
            checkpoint_sink(_payload(k + 1))

    return RunResult(kind="general", problem=prob, eta=eta, p0_max=p0_max,
                     p0=p0, u0=u0, times=sgrid.times,
                     tau_series=tau_series, u_series=u_series, b_series=b_series,
                     trunc_series=trunc_series,
                     inner_series=inner_series, mass_err_series=mass_err,
                     min_d_series=min_d, max_p_series=max_p,
                     picard_iters=iters, picard_ratios=ratios,
                     snapshots=snapshots, accum=accum, state=state,
                     warnings=warnings)


def run_maxwell(prob: CoupledProblem, tau0: np.ndarray, u0: np.ndarray,
                snap_every: int = 0) -> RunResult:
    """Integrate the fully relaxing variant (linear coupled system).

    The per-node stress balance tau' + tau = b is integrated exactly per
    step with b frozen at the Picard iterate, inside the same backward-Euler
    fixed point as the general path.
    """
    sgrid, dp = prob.space_grid, prob.dp
    n_y, n_steps = sgrid.n_y, sgrid.n_steps
    tau = np.asarray(tau0, dtype=float).copy()
    u = np.asarray(u0, dtype=float).copy()
    if tau.shape != (n_y,) or u.shape != (n_y,):
        raise ValidationError("tau0/u0 do not match the space grid")

    decay = math.exp(-sgrid.dt)
    gain = -math.expm1(-sgrid.dt)  # 1 - e^{-dt}, accurate for small dt

    tau_series = np.zeros((n_steps + 1, n_y))
    u_series = np.zeros((n_steps + 1, n_y))
    b_series = np.zeros((n_steps, n_y))
    iters = np.zeros(n_steps, dtype=int)
    ratios = np.full(n_steps, math.nan)
    tau_series[0] = tau
    u_series[0] = u
    snapshots: list[Snapshot] = []
    zero = np.zeros(n_y)

    def _snap(k: int):
        if snap_every and (k % snap_every == 0 or k == n_steps):
            snapshots.append(Snapshot(index=k, t=sgrid.time(k), u=u.copy(),
                                      tau=tau.copy(), d=np.full(n_y, dp.alpha),
                                      p=None, xi=zero.copy(), acc_d=zero.copy()))

    _snap(0)
    for k in range(n_steps):
        t_next = sgrid.time(k + 1)
        v_next = prob.protocol.value(t_next)
        vdot_next = prob.protocol.derivative(t_next)
        u_iter = u
        changes: list[float] = []
        tau_new = tau
        b = zero
        for _ in range(prob.picard_max):
            b = dp.g0 * (velocity_gradient(u_iter, sgrid) + v_next)
            tau_new = decay * tau + gain * b
            u_new = heat_step(u, tau_new, vdot_next, dp.rho, dp.mu, sgrid.dt, sgrid)
            change = l2_norm(u_new - u_iter, sgrid)
            changes.append(change)
            u_iter = u_new
            if change <= prob.picard_tol * (1.0 + l2_norm(u_new, sgrid)):
                break
        else:
            raise NonContractionError(
                f"fixed-point iteration did not converge at t = {t_next:.6g}; reduce dt")
        tau, u = tau_new, u_iter
        tau_series[k + 1] = tau
        u_series[k + 1] = u
        b_series[k] = b
        iters[k] = len(changes)
        ratios[k] = changes[1] / changes[0] if len(changes) >= 2 and changes[0] > 0 else math.nan
        _snap(k + 1)

    n_sigma_dummy = prob.sigma_grid.n_sigma
    return RunResult(kind="maxwell", problem=prob, eta=dp.alpha, p0_max=math.nan,
                     p0=np.zeros((0, n_sigma_dummy)), u0=u_series[0].copy(),
                     times=sgrid.times, tau_series=tau_series, u_series=u_series,
                     b_series=b_series,
                     trunc_series=np.zeros((n_steps, n_y)),
                     inner_series=np.zeros((n_steps + 1, n_y)),
                     mass_err_series=np.zeros(n_steps + 1),
                     min_d_series=np.full(n_steps + 1, dp.alpha),
                     max_p_series=np.full(n_steps + 1, math.nan),
                     picard_iters=iters, picard_ratios=ratios,
                     snapshots=snapshots,
                     accum=Accumulators.zeros(n_y),
                     state=CoupledState(step=n_steps, u=u, p=np.zeros((0, n_sigma_dummy))),
                     warnings=[])


def refined_space_grid(sgrid: SpaceTimeGrid, refine: int) -> SpaceTimeGrid:
    """Grid refined so coarse nodes/times are subsets of the fine ones."""
    return SpaceTimeGrid(n_y=refine * (sgrid.n_y + 1) - 1,
                         dt=sgrid.dt / refine, t_final=sgrid.t_final)


def restrict_nodes(field_fine: np.ndarray, refine: int) -> np.ndarray:
    """Restrict a fine interior-node field (last axis) to the coarse nodes."""
    return np.asarray(field_fine)[..., refine - 1::refine]


def restrict_times(series_fine: np.ndarray, refine: int) -> np.ndarray:
    """Restrict a per-step series (first axis) to the coarse time ladder."""
    return np.asarray(series_fine)[::refine]


def maxwell_reference_run(prob: CoupledProblem, tau0_fn, u0_fn,
                          refine: int = 4, snap_every: int = 0) -> RunResult:
    """Fully relaxing reference on a refine-times finer grid in y and t.

    tau0_fn / u0_fn evaluate the initial fields at arbitrary gap nodes so
    the refined grid can be seeded consistently.
    """
    fine = refined_space_grid(prob.space_grid, refine)
    fine_prob = CoupledProblem(dp=prob.dp, sigma_grid=prob.sigma_grid,
                               space_grid=fine, protocol=prob.protocol,
                               picard_tol=prob.picard_tol, picard_max=prob.picard_max)
    return run_maxwell(fine_prob, tau0=np.asarray([tau0_fn(y) for y in fine.y]),
                       u0=np.asarray([u0_fn(y) for y in fine.y]),
                       snap_every=snap_every)

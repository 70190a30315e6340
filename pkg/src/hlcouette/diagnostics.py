"""Run diagnostics: every a-priori bound the scheme is expected to honor.

Checks come in two flavors.  Hard checks (mass, positivity) guard exact
invariants of the update and fail outright when violated.  Soft checks
compare against analytical bounds that hold up to discretization slack;
they pass inside the stated slack, warn inside twice the slack, and fail
beyond that.

The comparison check rebuilds the explicit Gaussian sub-solution

    p_-(t, sigma) = exp(-t) * (p0 * G_nu)(sigma - xi(t)),  nu^2 = 2 int_0^t D ds

per row from the accumulated dissipation and drift, and requires the
computed density to dominate it up to O(d_sigma + dt).  The induced floor
check then re-derives the diffusivity lower bound from that sub-solution
instead of trusting the recorded minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coupler import (CoupledProblem, CoupledState, ResumePayload, RunResult,
                      Snapshot, TRUNCATION_TOL)
from .errors import DiagnosticFailure, ValidationError
from .grids import SigmaGrid, SpaceTimeGrid
from .initial import InitialData
from .macro import h1_norm_sq, heat_step, l2_norm
from .maxwell import offset_kernel
from .meso import compute_d, compute_tau, linf_bound

MASS_TOL = 1e-10
NEGATIVITY_FLOOR = -1e-12
CLIP_TOL = 1e-10
C_COMPARISON = 0.3    # comparison slack per unit (d_sigma + dt)
C_MOMENT = 1.0        # moment-identity residual per unit (dt + d_sigma)
D_FLOOR_REL_SLACK = 1e-3
SUP_REL_SLACK = 1e-6
F2_SLACK = 1.05


@dataclass
class CheckResult:
    name: str
    status: str          # "pass", "warn", "fail"
    measured: float
    bound: float
    message: str

    @property
    def ok(self) -> bool:
        return self.status != "fail"


@dataclass
class DiagnosticsReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.status == "fail"]

    def format(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"{r.status.upper():4s} {r.name}: {r.message}")
        verdict = "all checks passed" if self.ok else \
            f"{len(self.failures)} check(s) FAILED"
        lines.append(verdict)
        return "\n".join(lines)

    def raise_if_failed(self) -> None:
        if not self.ok:
            detail = "; ".join(f"{r.name}: {r.message}" for r in self.failures)
            raise DiagnosticFailure(f"diagnostics failed: {detail}")


def _soft(name: str, violation: float, slack: float, message: str) -> CheckResult:
    """Grade a soft check: violation <= slack passes, <= 2*slack warns."""
    if violation <= slack:
        status = "pass"
    elif violation <= 2.0 * slack:
        status = "warn"
    else:
        status = "fail"
    return CheckResult(name=name, status=status, measured=violation,
                       bound=slack, message=message)


def check_mass(result: RunResult, tol: float = MASS_TOL) -> CheckResult:
    worst = float(result.mass_err_series.max())
    step = int(result.mass_err_series.argmax())
    ok = worst <= tol
    return CheckResult(
        name="mass_conservation", status="pass" if ok else "fail",
        measured=worst, bound=tol,
        message=f"max |row mass - 1| = {worst:.3e} at step {step} (tol {tol:.1e})")


def check_positivity(result: RunResult, floor: float = NEGATIVITY_FLOOR,
                     clip_tol: float = CLIP_TOL) -> CheckResult:
    pre = result.accum.min_before_clip
    pre = 0.0 if not math.isfinite(pre) else min(pre, 0.0)
    clipped = result.accum.clipped_total
    ok = pre >= floor and clipped <= clip_tol
    return CheckResult(
        name="positivity", status="pass" if ok else "fail",
        measured=min(pre, -clipped), bound=floor,
        message=(f"min pre-clip value = {pre:.3e} (floor {floor:.1e}), "
                 f"total clipped mass = {clipped:.3e} (tol {clip_tol:.1e})"))


def check_sup_norm(result: RunResult, rel_slack: float = SUP_REL_SLACK) -> CheckResult:
    alpha = result.problem.dp.alpha
    bounds = np.array([linf_bound(result.p0_max, alpha, t) for t in result.times])
    excess = result.max_p_series - bounds
    k = int(excess.argmax())
    violation = float(excess[k])
    slack = rel_slack * (1.0 + float(bounds[k]))
    return _soft("sup_norm_growth", violation, slack,
                 f"max density excess over p0_max + sqrt(alpha t / pi) is "
                 f"{violation:.3e} at t = {result.times[k]:.4g} (slack {slack:.1e})")


def check_d_floor(result: RunResult, rel_slack: float = D_FLOOR_REL_SLACK) -> CheckResult:
    eta = result.eta
    floors = 0.5 * eta * np.exp(-result.times)
    deficit = floors - result.min_d_series
    k = int(deficit.argmax())
    violation = float(deficit[k])
    slack = rel_slack * eta if eta > 0 else rel_slack
    return _soft("diffusivity_floor", violation, slack,
                 f"max deficit below (eta/2) e^(-t) is {violation:.3e} "
                 f"at t = {result.times[k]:.4g} (slack {slack:.1e}, eta = {eta:.6g})")


def sub_solution(p0: np.ndarray, grid: SigmaGrid, t: float,
                 xi: np.ndarray, acc_d: np.ndarray) -> np.ndarray:
    """Explicit lower barrier exp(-t) (p0 * G_nu)(sigma - xi) per row."""
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    acc = np.atleast_1d(np.asarray(acc_d, dtype=float))
    n = grid.n_sigma
    out = np.empty_like(p0)
    for i in range(p0.shape[0]):
        kern = offset_kernel(grid, float(xi[i]), 2.0 * float(acc[i]))
        out[i] = grid.d_sigma * np.convolve(p0[i], kern)[n - 1:2 * n - 1]
    return math.exp(-t) * out


def check_comparison(result: RunResult, c_comp: float = C_COMPARISON) -> CheckResult:
    grid = result.problem.sigma_grid
    dt = result.problem.space_grid.dt
    slack = c_comp * (grid.d_sigma + dt)
    worst, worst_t = -math.inf, 0.0
    for snap in result.snapshots:
        if snap.p is None:
            continue
        barrier = sub_solution(result.p0, grid, snap.t, snap.xi, snap.acc_d)
        deficit = float((barrier - snap.p).max())
        if deficit > worst:
            worst, worst_t = deficit, snap.t
    if worst == -math.inf:
        return CheckResult("comparison_barrier", "pass", 0.0, slack,
                           "no density snapshots recorded; nothing to compare")
    return _soft("comparison_barrier", worst, slack,
                 f"max (barrier - p) = {worst:.3e} at t = {worst_t:.4g} "
                 f"(slack {slack:.1e})")


def check_induced_d_floor(result: RunResult, c_comp: float = C_COMPARISON) -> CheckResult:
    """Re-derive the diffusivity floor from the barrier instead of the
    recorded minimum: D = alpha * exterior mass must dominate the
    barrier's exterior mass up to the pointwise comparison slack."""
    grid = result.problem.sigma_grid
    dp = result.problem.dp
    dt = result.problem.space_grid.dt
    window = 2.0 * (grid.sigma_max - grid.threshold)
    slack = dp.alpha * (window * c_comp * (grid.d_sigma + dt) + 1e-12)
    worst, worst_t = -math.inf, 0.0
    for snap in result.snapshots:
        if snap.p is None:
            continue
        barrier = sub_solution(result.p0, grid, snap.t, snap.xi, snap.acc_d)
        induced = dp.alpha * np.asarray(grid.exterior_mass(barrier))
        deficit = float((induced - snap.d).max())
        if deficit > worst:
            worst, worst_t = deficit, snap.t
    if worst == -math.inf:
        return CheckResult("induced_diffusivity_floor", "pass", 0.0, slack,
                           "no density snapshots recorded; nothing to compare")
    return _soft("induced_diffusivity_floor", worst, slack,
                 f"max (barrier-induced D - recorded D) = {worst:.3e} "
                 f"at t = {worst_t:.4g} (slack {slack:.1e})")


def moment_residuals(result: RunResult) -> np.ndarray:
    """Residual of the stress balance tau' + tau = b + banded moment,
    evaluated on the recorded series with backward differences.

    The balance is posed on the truncated stress interval, so the exactly
    metered moment flux through +-sigma_max enters as a known source; what
    remains measures genuine discretization error of the identity.
    """
    dt = result.problem.space_grid.dt
    tau = result.tau_series
    r = ((tau[1:] - tau[:-1]) / dt + tau[1:]
         - result.b_series - result.inner_series[1:]
         + result.trunc_series / dt)
    return r


def check_moment_identity(result: RunResult, c_mom: float = C_MOMENT) -> CheckResult:
    grid = result.problem.sigma_grid
    dt = result.problem.space_grid.dt
    r = moment_residuals(result)
    worst = float(np.abs(r).max()) if r.size else 0.0
    slack = c_mom * (dt + grid.d_sigma)
    return _soft("stress_moment_identity", worst, slack,
                 f"max |moment residual| = {worst:.3e} (slack {slack:.1e})")


def gradient_energy_bound(p0_max: float, alpha: float, eta: float, t: float) -> float:
    """A-priori bound on int_0^t int |dsigma p|^2 dsigma ds (per row)."""
    if eta <= 0:
        return math.inf
    return (2.0 / eta) * math.exp(t) * (p0_max * (0.5 + t)
                                        + (alpha / math.sqrt(math.pi)) * t ** 1.5)


def check_gradient_bound(result: RunResult, rel_slack: float = 1e-6) -> CheckResult:
    t_final = result.problem.space_grid.t_final
    dp = result.problem.dp
    bound = gradient_energy_bound(result.p0_max, dp.alpha, result.eta, t_final)
    measured = float(result.accum.grad_sq.max())
    violation = measured - bound
    slack = rel_slack * (1.0 + abs(bound)) if math.isfinite(bound) else math.inf
    msg = (f"max row gradient energy = {measured:.4g}, bound = {bound:.4g} "
           f"(slack {slack:.1e})")
    if not math.isfinite(bound):
        return CheckResult("gradient_energy", "warn", measured, bound,
                           msg + "; bound undefined for eta = 0")
    return _soft("gradient_energy", violation, slack, msg)


def check_truncation(result: RunResult) -> CheckResult:
    n_bad = result.accum.truncation_steps
    status = "pass" if n_bad == 0 else "warn"
    return CheckResult("stress_domain_truncation", status, float(n_bad),
                       TRUNCATION_TOL,
                       f"{n_bad} step(s) with outermost-cell mass above "
                       f"{TRUNCATION_TOL:.1e}")


def measure_f2_ratio(tau_series: np.ndarray, sgrid: SpaceTimeGrid,
                     rho: float, mu: float, t_upto: float) -> float:
    """Lipschitz quotient of the stress-to-velocity map on [0, t_upto].

    Drives the momentum equation from rest with the recorded stress and no
    wall forcing, then returns ||v||_{L2 H1} / sup_t ||tau||_{L2} with a
    right-endpoint Riemann sum in time.
    """
    n = int(round(t_upto / sgrid.dt))
    if not 0 < n <= sgrid.n_steps or abs(n * sgrid.dt - t_upto) > 1e-9 * max(1.0, t_upto):
        raise ValueError("t_upto must be a positive multiple of dt within the run")
    v = np.zeros(tau_series.shape[1])
    energy = 0.0
    sup = l2_norm(tau_series[0], sgrid)
    for k in range(n):
        v = heat_step(v, tau_series[k + 1], 0.0, rho, mu, sgrid.dt, sgrid)
        energy += sgrid.dt * h1_norm_sq(v, sgrid)
        sup = max(sup, l2_norm(tau_series[k + 1], sgrid))
    if sup == 0.0:
        return math.nan
    return math.sqrt(energy) / sup


def check_f2(result: RunResult, slack: float = F2_SLACK) -> CheckResult:
    sgrid = result.problem.space_grid
    dp = result.problem.dp
    t = sgrid.t_final
    ratio = measure_f2_ratio(result.tau_series, sgrid, dp.rho, dp.mu, t)
    bound = 2.0 * math.sqrt(t) / dp.mu
    if math.isnan(ratio):
        return CheckResult("velocity_map_lipschitz", "pass", 0.0, bound,
                           "stress identically zero; map trivially bounded")
    violation = ratio - bound
    return _soft("velocity_map_lipschitz", violation, (slack - 1.0) * bound,
                 f"measured ratio {ratio:.4g} vs bound 2 sqrt(T)/mu = {bound:.4g}")


GENERAL_CHECKS = ("mass", "positivity", "sup_norm", "d_floor", "comparison",
                  "induced_d_floor", "moment", "gradient", "truncation", "f2")
MAXWELL_CHECKS = ("f2",)


def evaluate(result: RunResult, checks: tuple[str, ...] | None = None,
             c_comp: float = C_COMPARISON, c_mom: float = C_MOMENT
             ) -> DiagnosticsReport:
    """Run the applicable checks for a finished run."""
    if checks is None:
        checks = GENERAL_CHECKS if result.kind == "general" else MAXWELL_CHECKS
    dispatch = {
        "mass": lambda: check_mass(result),
        "positivity": lambda: check_positivity(result),
        "sup_norm": lambda: check_sup_norm(result),
        "d_floor": lambda: check_d_floor(result),
        "comparison": lambda: check_comparison(result, c_comp),
        "induced_d_floor": lambda: check_induced_d_floor(result, c_comp),
        "moment": lambda: check_moment_identity(result, c_mom),
        "gradient": lambda: check_gradient_bound(result),
        "truncation": lambda: check_truncation(result),
        "f2": lambda: check_f2(result),
    }
    report = DiagnosticsReport()
    for name in checks:
        report.results.append(dispatch[name]())
    return report


def result_from_checkpoint(prob: CoupledProblem, init: InitialData, eta: float,
                           payload: ResumePayload) -> RunResult:
    """Rebuild a result view from a checkpoint so the full check battery
    can run on a stored state (horizon truncated at the checkpoint step)."""
    if payload.step < 1:
        raise ValidationError("checkpoint holds no completed steps to diagnose")
    sg = prob.space_grid
    tgrid = SpaceTimeGrid(n_y=sg.n_y, dt=sg.dt, t_final=payload.step * sg.dt)
    tprob = CoupledProblem(dp=prob.dp, sigma_grid=prob.sigma_grid,
                           space_grid=tgrid, protocol=prob.protocol,
                           picard_tol=prob.picard_tol, picard_max=prob.picard_max)
    s = payload.series
    snap = Snapshot(
        index=payload.step, t=tgrid.time(payload.step), u=payload.u.copy(),
        tau=np.asarray(compute_tau(payload.p, prob.sigma_grid)),
        d=np.asarray(compute_d(payload.p, prob.sigma_grid, prob.dp.alpha)),
        p=payload.p.copy(), xi=payload.accum.xi.copy(),
        acc_d=payload.accum.acc_d.copy())
    return RunResult(
        kind="general", problem=tprob, eta=eta,
        p0_max=float(init.p0.max()), p0=init.p0.copy(), u0=init.u0.copy(),
        times=tgrid.times, tau_series=s["tau"], u_series=s["u"],
        b_series=s["b"], trunc_series=s["trunc"], inner_series=s["inner"],
        mass_err_series=s["mass_err"], min_d_series=s["min_d"],
        max_p_series=s["max_p"], picard_iters=s["iters"],
        picard_ratios=s["ratios"], snapshots=[snap], accum=payload.accum,
        state=CoupledState(step=payload.step, u=payload.u, p=payload.p),
        warnings=list(s.get("warnings", [])))


def verify_resume(payload: ResumePayload, grid: SigmaGrid, dt: float,
                  p0: np.ndarray, alpha: float,
                  c_comp: float = C_COMPARISON) -> DiagnosticsReport:
    """Re-validate a restored state before continuing a run."""
    report = DiagnosticsReport()
    masses = np.asarray(grid.mass(payload.p))
    worst = float(np.abs(masses - 1.0).max())
    report.results.append(CheckResult(
        "resume_mass", "pass" if worst <= MASS_TOL else "fail", worst, MASS_TOL,
        f"max |row mass - 1| = {worst:.3e}"))
    pmin = float(payload.p.min())
    report.results.append(CheckResult(
        "resume_positivity", "pass" if pmin >= NEGATIVITY_FLOOR else "fail",
        pmin, NEGATIVITY_FLOOR, f"min restored value = {pmin:.3e}"))
    t0 = payload.step * dt
    barrier = sub_solution(p0, grid, t0, payload.accum.xi, payload.accum.acc_d)
    deficit = float((barrier - payload.p).max())
    slack = c_comp * (grid.d_sigma + dt)
    report.results.append(_soft(
        "resume_comparison", deficit, slack,
        f"max (barrier - p) = {deficit:.3e} at t = {t0:.4g} (slack {slack:.1e})"))
    return report

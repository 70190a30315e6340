"""Pin the acceptance measurements before freezing the acceptance tests."""

import time

import numpy as np

from hlcouette.config import standard_config
from hlcouette.coupler import (CoupledProblem, maxwell_reference_run,
                               restrict_nodes, restrict_times, run,
                               run_maxwell)
from hlcouette.diagnostics import evaluate, measure_f2_ratio, moment_residuals
from hlcouette.grids import SigmaGrid, SpaceTimeGrid
from hlcouette.initial import InitialData, compute_eta
from hlcouette.params import DimensionlessParams
from hlcouette.protocols import ShearProtocol


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


DP = DimensionlessParams(1.0, 1.0, 1.0, 1.0)

# --- standard run -----------------------------------------------------------
cfg = standard_config()
prob, init, eta, _ = cfg.build()
t0 = time.perf_counter()
res_std = run(prob, init, eta, snap_every=100, checkpoint_every=500)
elapsed = time.perf_counter() - t0
print(f"standard run: {elapsed:.2f} s")
print("mass err max:", np.max(res_std.mass_err_series))
print("min_before_clip:", res_std.accum.min_before_clip, "clipped:", res_std.accum.clipped_total)
print("min D overall:", np.min(res_std.min_d_series),
      "floor:", 0.5 * eta * np.exp(-1.0) - 1e-3 * eta)
iters = res_std.picard_iters
ratios = res_std.picard_ratios
print("picard iters max:", iters.max(), "ratio max:", np.nanmax(ratios))
r_std = moment_residuals(res_std)
print("moment residual std:", np.max(np.abs(r_std)))

# --- half-dt run (criterion 10) --------------------------------------------
cfg_h = standard_config(run__dt=0.0005)
prob_h, init_h, eta_h, _ = cfg_h.build()
res_h = run(prob_h, init_h, eta_h)
print("half-dt picard ratio max:", np.nanmax(res_h.picard_ratios),
      "iters max:", res_h.picard_iters.max())

# --- refined-both run (criterion 8) -----------------------------------------
cfg_r = standard_config(run__dt=0.0005, grid__n_sigma=512)
prob_r, init_r, eta_r, _ = cfg_r.build()
t0 = time.perf_counter()
res_r = run(prob_r, init_r, eta_r)
print(f"refined-both run: {time.perf_counter() - t0:.2f} s")
r_ref = moment_residuals(res_r)
print("moment residual refined:", np.max(np.abs(r_ref)),
      "ratio:", np.max(np.abs(r_std)) / np.max(np.abs(r_ref)))

# --- fault run (criterion 7) -------------------------------------------------
prob_f = CoupledProblem(dp=prob.dp, sigma_grid=prob.sigma_grid,
                        space_grid=prob.space_grid, protocol=prob.protocol,
                        sink_scale=2.0)
res_f = run(prob_f, init, eta, snap_every=100)
rep_f = evaluate(res_f)
rep_std = evaluate(res_std)
print("standard statuses:", {r.name: r.status for r in rep_std.results})
print("fault statuses:", {r.name: r.status for r in rep_f.results})

# --- criterion 9: synthetic pair sweep ---------------------------------------
sg9 = SpaceTimeGrid(64, 0.0005, 1.0)
mode = np.sin(np.pi * sg9.y)
series = np.tile(mode, (sg9.n_steps + 1, 1))
for T in (1.0 / 16.0, 0.25, 1.0):
    r = measure_f2_ratio(series, sg9, 1.0, 1.0, T)
    print(f"f2 ratio T={T}: {r:.6f}  bound {2*np.sqrt(T):.4f}")

# --- criterion 5: fully relaxing trio ----------------------------------------
def trio(n_sigma, dt):
    sgrid = SigmaGrid(8.0, n_sigma, threshold=0.0)
    space = SpaceTimeGrid(64, dt, 1.0)
    protocol = ShearProtocol.ramp(1.0, 0.5)
    p = CoupledProblem(dp=DP, sigma_grid=sgrid, space_grid=space,
                       protocol=protocol)
    ini = InitialData.from_preset(sgrid, space, "gaussian", (0.0, 1.0))
    et, _ = compute_eta(ini.p0, sgrid, DP.alpha)
    t0 = time.perf_counter()
    gen = run(p, ini, et)
    print(f"  general run ({n_sigma}, {dt}): {time.perf_counter() - t0:.2f} s")
    mx = run_maxwell(p, tau0=np.zeros(64), u0=np.zeros(64))
    ref = maxwell_reference_run(p, lambda y: 0.0, lambda y: 0.0, refine=4)
    tau_ref = restrict_nodes(restrict_times(ref.tau_series, 4), 4)
    d1 = rel_l2(gen.tau_series, mx.tau_series)
    d2 = rel_l2(gen.tau_series, tau_ref)
    d3 = rel_l2(mx.tau_series, tau_ref)
    print(f"  d(gen,max)={d1:.6e} d(gen,ref)={d2:.6e} d(max,ref)={d3:.6e}")
    return d1, d2, d3

print("criterion 5 coarse:")
c = trio(256, 0.001)
print("criterion 5 refined:")
f = trio(512, 0.0005)
print("shrink factors:", [c[i] / f[i] for i in range(3)])

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

# --- criterion 5: fully relaxing trio ----------------------------------------
def trio(n_sigma, dt):
    sgrid = SigmaGrid(8.0, n_sigma, threshold=0.0)
    space = SpaceTimeGrid(64, dt, 1.0)
    protocol = ShearProtocol.ramp(1.0, 0.5)
    p = CoupledProblem(dp=DP, sigma_grid=sgrid, space_grid=space,
                       protocol=protocol)
    ini = InitialData.from_preset(sgrid, space, "gaussian", {"mean": 0.0, "width": 1.0})
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

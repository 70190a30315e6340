"""Config parsing, fingerprints, and artifact round trips."""

import numpy as np
import pytest

from hlcouette.config import load_config, standard_config
from hlcouette.coupler import CoupledProblem, run
from hlcouette.errors import ArtifactIOError, ConfigError, ValidationError
from hlcouette.grids import SigmaGrid, SpaceTimeGrid
from hlcouette.initial import InitialData, compute_eta
from hlcouette.params import DimensionlessParams
from hlcouette.protocols import ShearProtocol
from hlcouette.snapshots import (_npz_bytes, load_checkpoint, read_fields_csv,
                                 read_series, read_summary, save_checkpoint,
                                 write_density_csv, write_fields_csv,
                                 write_series, write_snapshots, write_summary)


def micro_run(snap_every=5, checkpoint_every=5):
    dp = DimensionlessParams(rho=1.0, alpha=1.0, g0=1.0, mu=1.0)
    sgrid = SigmaGrid(sigma_max=4.0, n_sigma=64)
    space = SpaceTimeGrid(n_y=6, dt=1e-3, t_final=0.01)
    prob = CoupledProblem(dp=dp, sigma_grid=sgrid, space_grid=space,
                          protocol=ShearProtocol.ramp(1.0, 0.5))
    init = InitialData.from_preset(sgrid, space, "gaussian",
                                   {"mean": 0.0, "width": 1.0})
    eta, _ = compute_eta(init.p0, sgrid, dp.alpha)
    payloads = []
    res = run(prob, init, eta, snap_every=snap_every,
              checkpoint_every=checkpoint_every,
              checkpoint_sink=payloads.append)
    return res, payloads


def test_defaults_and_types():
    cfg = standard_config()
    assert cfg.mode == "dimensionless" and not cfg.fully_relaxing
    assert cfg[("run", "dt")] == 0.001 and isinstance(cfg[("grid", "n_y")], int)
    assert len(cfg.fingerprint) == 64
    assert cfg.snapshot_every == 100 and cfg.checkpoint_every == 0
    assert cfg.sigma_grid().threshold == 1.0
    assert cfg.space_grid().n_steps == 1000


def test_fingerprint_tracks_effective_values():
    base = standard_config()
    tweaked = standard_config(run__dt="0.0005")
    assert tweaked[("run", "dt")] == 0.0005
    assert tweaked.fingerprint != base.fingerprint
    assert standard_config(run__dt="0.0005").fingerprint == tweaked.fingerprint
    # surrounding whitespace is canonicalized away
    assert load_config(overrides=["run.dt= 0.0005 "]).fingerprint == \
        tweaked.fingerprint
    assert standard_config().fingerprint == base.fingerprint


@pytest.mark.parametrize("text", [
    "[extra]\nx = 1\n",
    "[run]\nbogus = 1\n",
])
def test_unknown_sections_and_keys_rejected(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


@pytest.mark.parametrize("override", [
    "run.bogus=1", "nosection=1", "rundt", "bogus.dt=1",
])
def test_bad_overrides_rejected(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


@pytest.mark.parametrize("override", [
    "grid.n_y=2.5", "model.fully_relaxing=maybe", "run.dt=inf",
    "run.dt=oops", "protocol.times=1,a", "model.mode=physical",
])
def test_bad_values_rejected(override):
    with pytest.raises(ConfigError):
        load_config(overrides=[override])


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(path=str(tmp_path / "absent.ini"))


def test_file_and_overrides_compose(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\ndt = 0.002\nt_final = 0.5\n")
    cfg = load_config(path=str(path), overrides=["run.t_final=0.25"])
    assert cfg[("run", "dt")] == 0.002
    assert cfg[("run", "t_final")] == 0.25


def test_build_standard_scenario():
    prob, init, eta, report = standard_config().build()
    assert report.ok and report.theory_backed
    assert eta == pytest.approx(0.31726726187560095, abs=1e-14)
    assert prob.space_grid.n_y == 64 and prob.sigma_grid.n_sigma == 256
    assert init.p0.shape == (64, 256)
    assert prob.protocol.value(0.5) == pytest.approx(1.0)


def test_build_rejects_degenerate_unless_allowed():
    bad = standard_config(initial__p0="uniform", initial__lo="-0.5",
                          initial__hi="0.5")
    with pytest.raises(ValidationError):
        bad.build()
    forced = standard_config(initial__p0="uniform", initial__lo="-0.5",
                             initial__hi="0.5", model__allow_degenerate="true")
    _, _, eta, report = forced.build()
    assert eta == 0.0 and not report.theory_backed


def test_fully_relaxing_grid_and_dimensional_conflict():
    cfg = standard_config(model__fully_relaxing="true", grid__sigma_max="8.0",
                          grid__n_sigma="512")
    assert cfg.sigma_grid().threshold == 0.0
    clash = standard_config(model__mode="dimensional",
                            model__fully_relaxing="true")
    with pytest.raises(ConfigError):
        clash.sigma_grid()


def test_dimensional_config_scales_to_the_standard_scenario():
    cfg = standard_config(
        model__mode="dimensional", model__rho="16.0", model__alpha="16.0",
        model__g0="4.0", model__mu="8.0", model__t0="2.0",
        model__sigma_c="4.0", model__length="1.0",
        grid__sigma_max="16.0", initial__width="4.0",
        run__dt="0.002", run__t_final="2.0",
        protocol__v_max="0.5", protocol__t_ramp="1.0")
    dp = cfg.dimensionless_params()
    assert (dp.rho, dp.alpha, dp.g0, dp.mu) == (1.0, 1.0, 1.0, 1.0)
    sg = cfg.space_grid()
    assert sg.dt == 0.001 and sg.t_final == 1.0
    assert cfg.sigma_grid().sigma_max == 4.0
    proto = cfg.protocol()
    assert proto.value(0.5) == pytest.approx(1.0, abs=1e-15)
    assert proto.value(0.25) == pytest.approx(0.5, abs=1e-15)
    ref = standard_config().build()
    prob, init, eta, _ = cfg.build()
    assert np.array_equal(init.p0, ref[1].p0)
    assert eta == ref[2]


def test_fields_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    y = np.linspace(0.1, 0.9, 9)
    fields = {"u": rng.normal(size=9) * 1e-7,
              "tau": rng.normal(size=9) * 1e3,
              "d": np.abs(rng.normal(size=9))}
    path = tmp_path / "snap.csv"
    write_fields_csv(path, 0.125, y, fields, "f" * 64)
    t, data = read_fields_csv(path)
    assert t == 0.125
    assert np.array_equal(data["y"], y)
    for k, v in fields.items():
        assert np.array_equal(data[k], v)
    assert ("# fingerprint = " + "f" * 64) in path.read_text()


def test_fields_csv_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ArtifactIOError):
        read_fields_csv(path)
    with pytest.raises(ArtifactIOError):
        read_fields_csv(tmp_path / "absent.csv")


def test_density_csv_layout(tmp_path):
    y = np.array([0.25, 0.5, 0.75])
    centers = np.array([-0.5, 0.5])
    p = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    path = tmp_path / "density.csv"
    write_density_csv(path, 0.5, y, centers, p, "a" * 64)
    lines = path.read_text().splitlines()
    assert lines[2] == "y,-0.5,0.5"
    assert [float(x) for x in lines[3].split(",")] == [0.25, 1.0, 2.0]
    assert len(lines) == 6


def test_npz_bytes_deterministic():
    arrays = {"a": np.arange(5.0), "b": np.array("text")}
    assert _npz_bytes(**arrays) == _npz_bytes(**arrays)


def test_series_round_trip(tmp_path):
    res, _ = micro_run()
    path = tmp_path / "series.npz"
    write_series(path, res, "b" * 64)
    data = read_series(path)
    assert data["fingerprint"] == "b" * 64 and data["kind"] == "general"
    assert np.array_equal(data["tau"], res.tau_series)
    assert np.array_equal(data["trunc"], res.trunc_series)
    assert np.array_equal(data["picard_ratios"], res.picard_ratios,
                          equal_nan=True)
    write_series(tmp_path / "again.npz", res, "b" * 64)
    assert path.read_bytes() == (tmp_path / "again.npz").read_bytes()
    with pytest.raises(ArtifactIOError):
        read_series(tmp_path / "absent.npz")


def test_checkpoint_round_trip(tmp_path):
    _, payloads = micro_run()
    payload = payloads[-1]
    path = tmp_path / "checkpoint.npz"
    save_checkpoint(path, payload, "c" * 64)
    back = load_checkpoint(path, expect_fingerprint="c" * 64)
    assert back.step == payload.step
    assert back.u.tobytes() == payload.u.tobytes()
    assert back.p.tobytes() == payload.p.tobytes()
    assert back.accum.xi.tobytes() == payload.accum.xi.tobytes()
    assert back.accum.truncation_steps == payload.accum.truncation_steps
    assert back.series["warnings"] == payload.series["warnings"]
    for key in ("tau", "u", "b", "trunc", "inner", "mass_err",
                "min_d", "max_p", "iters"):
        assert np.array_equal(back.series[key], payload.series[key])
    assert np.array_equal(back.series["ratios"], payload.series["ratios"],
                          equal_nan=True)


def test_checkpoint_fingerprint_and_corruption_guards(tmp_path):
    _, payloads = micro_run()
    path = tmp_path / "checkpoint.npz"
    save_checkpoint(path, payloads[-1], "c" * 64)
    with pytest.raises(ArtifactIOError):
        load_checkpoint(path, expect_fingerprint="d" * 64)
    with pytest.raises(ArtifactIOError):
        load_checkpoint(tmp_path / "absent.npz")
    truncated = tmp_path / "broken.npz"
    truncated.write_bytes(_npz_bytes(fingerprint=np.array("c" * 64),
                                     step=np.array(5)))
    with pytest.raises(ArtifactIOError):
        load_checkpoint(truncated)


def test_summary_round_trip(tmp_path):
    path = tmp_path / "summary.json"
    payload = {"fingerprint": "e" * 64, "steps": 10, "eta": 0.317}
    write_summary(path, payload)
    assert read_summary(path) == payload
    bad = tmp_path / "corrupt.json"
    bad.write_text("{not json")
    with pytest.raises(ArtifactIOError):
        read_summary(bad)


def test_atomic_write_makes_parents_and_rejects_directories(tmp_path):
    nested = tmp_path / "a" / "b" / "snap.csv"
    write_fields_csv(nested, 0.0, np.array([0.5]), {"u": np.array([1.0])}, "f")
    assert nested.exists()
    clash = tmp_path / "clash.csv"
    clash.mkdir()
    with pytest.raises(ArtifactIOError):
        write_fields_csv(clash, 0.0, np.array([0.5]), {"u": np.array([1.0])}, "f")


def test_write_snapshots_names_and_rescaling(tmp_path):
    res, _ = micro_run()
    written = write_snapshots(tmp_path, res, "a" * 64, dump_density=True)
    names = sorted(p.name for p in written)
    assert names == ["density_000000.csv", "density_000005.csv",
                     "density_000010.csv", "snapshot_000000.csv",
                     "snapshot_000005.csv", "snapshot_000010.csv"]
    t, data = read_fields_csv(tmp_path / "snapshot_000010.csv")
    assert t == pytest.approx(0.01)
    assert np.array_equal(data["tau"], res.snapshots[-1].tau)

    scaled_dir = tmp_path / "scaled"
    write_snapshots(scaled_dir, res, "a" * 64, scales=(2.0, 1.0, 4.0))
    t_dim, dim = read_fields_csv(scaled_dir / "snapshot_000010.csv")
    assert t_dim == pytest.approx(0.02)                    # t0 = 2
    assert np.allclose(dim["tau"], 4.0 * data["tau"])      # sigma_c = 4
    assert np.allclose(dim["u"], 0.5 * data["u"])          # length / t0
    assert np.allclose(dim["d"], 8.0 * data["d"])          # sigma_c^2 / t0

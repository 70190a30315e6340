"""INI run configuration: parsing, validation, and assembly of a run.

A config file fully determines a run.  The effective configuration
(defaults filled in, command-line overrides applied) is fingerprinted
with SHA-256 and the digest is stamped into every artifact the run
writes, so outputs can always be traced back to their exact inputs.

In dimensional mode the file carries physical constants plus the scales
(t0, sigma_c, length); everything is converted to the scaled system
before integration and results are mapped back on output.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass
from typing import Callable

from .coupler import CoupledProblem, PICARD_MAX, PICARD_TOL
from .diagnostics import C_COMPARISON, C_MOMENT
from .errors import ConfigError
from .grids import SigmaGrid, SpaceTimeGrid
from .initial import InitialData, ValidationReport, compute_eta, validate_initial
from .params import DimensionlessParams, PhysicalParams, nondimensionalize
from .protocols import ShearProtocol

DEFAULTS: dict[str, dict[str, str]] = {
    "model": {
        "mode": "dimensionless",
        "rho": "1.0", "alpha": "1.0", "g0": "1.0", "mu": "1.0",
        "t0": "1.0", "sigma_c": "1.0", "length": "1.0",
        "fully_relaxing": "false",
        "allow_degenerate": "false",
    },
    "protocol": {
        "kind": "ramp",
        "v_max": "1.0", "t_ramp": "0.5",
        "amplitude": "1.0", "period": "1.0",
        "times": "", "values": "",
    },
    "initial": {
        "p0": "gaussian",
        "mean": "0.0", "width": "1.0",
        "lo": "-1.0", "hi": "1.0",
        "mean1": "0.0", "width1": "1.0", "mean2": "0.0", "width2": "1.0",
        "weight1": "0.5",
        "u0": "zero", "u0_amplitude": "0.0",
    },
    "grid": {
        "n_y": "64", "sigma_max": "4.0", "n_sigma": "256",
    },
    "run": {
        "dt": "0.001", "t_final": "1.0",
        "snapshot_every": "100", "checkpoint_every": "0",
        "picard_tol": str(PICARD_TOL), "picard_max": str(PICARD_MAX),
    },
    "tolerances": {
        "c_comparison": str(C_COMPARISON), "c_moment": str(C_MOMENT),
    },
}


def _parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse float list {text!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Typed view of an effective configuration."""

    values: dict
    fingerprint: str

    def __getitem__(self, key: tuple[str, str]):
        return self.values[key[0]][key[1]]

    # model ----------------------------------------------------------
    @property
    def mode(self) -> str:
        return self.values["model"]["mode"]

    @property
    def fully_relaxing(self) -> bool:
        return self.values["model"]["fully_relaxing"]

    @property
    def scales(self) -> tuple[float, float, float]:
        m = self.values["model"]
        return m["t0"], m["length"], m["sigma_c"]

    def dimensionless_params(self) -> DimensionlessParams:
        m = self.values["model"]
        if self.mode == "dimensionless":
            return DimensionlessParams(rho=m["rho"], alpha=m["alpha"],
                                       g0=m["g0"], mu=m["mu"])
        phys = PhysicalParams(rho=m["rho"], mu=m["mu"], g0=m["g0"],
                              alpha=m["alpha"], t0=m["t0"],
                              sigma_c=m["sigma_c"], length=m["length"])
        return nondimensionalize(phys)

    # grids ----------------------------------------------------------
    def sigma_grid(self) -> SigmaGrid:
        g = self.values["grid"]
        sigma_max = g["sigma_max"]
        threshold = 0.0 if self.fully_relaxing else 1.0
        if self.mode == "dimensional":
            if self.fully_relaxing:
                raise ConfigError(
                    "fully relaxing dimensional runs have no stress scale; "
                    "set mode = dimensionless and work in native units")
            sigma_max = sigma_max / self.values["model"]["sigma_c"]
        return SigmaGrid(sigma_max=sigma_max, n_sigma=g["n_sigma"],
                         threshold=threshold)

    def space_grid(self) -> SpaceTimeGrid:
        r = self.values["run"]
        dt, t_final = r["dt"], r["t_final"]
        if self.mode == "dimensional":
            t0 = self.values["model"]["t0"]
            dt, t_final = dt / t0, t_final / t0
        return SpaceTimeGrid(n_y=self.values["grid"]["n_y"], dt=dt,
                             t_final=t_final)

    # protocol -------------------------------------------------------
    def protocol(self) -> ShearProtocol:
        p = self.values["protocol"]
        kind = p["kind"]
        if kind == "zero":
            proto = ShearProtocol.ramp(0.0, 1.0)
        elif kind == "ramp":
            proto = ShearProtocol.ramp(p["v_max"], p["t_ramp"])
        elif kind == "sinusoid":
            proto = ShearProtocol.sinusoid(p["amplitude"], p["period"])
        elif kind == "table":
            proto = ShearProtocol.table(p["times"], p["values"])
        else:
            raise ConfigError(f"unknown protocol kind {kind!r}")
        if self.mode == "dimensional":
            t0, length, _ = self.scales
            proto = proto.scaled(time_scale=t0, velocity_scale=t0 / length)
        return proto

    # initial data ---------------------------------------------------
    def initial(self) -> InitialData:
        i = self.values["initial"]
        kind = i["p0"]
        sc = self.values["model"]["sigma_c"] if self.mode == "dimensional" else 1.0
        if kind == "gaussian":
            args = {"mean": i["mean"] / sc, "width": i["width"] / sc}
        elif kind == "uniform":
            args = {"lo": i["lo"] / sc, "hi": i["hi"] / sc}
        elif kind == "mixture":
            args = {"mean1": i["mean1"] / sc, "width1": i["width1"] / sc,
                    "mean2": i["mean2"] / sc, "width2": i["width2"] / sc,
                    "weight1": i["weight1"]}
        else:
            raise ConfigError(f"unknown initial preset {kind!r}")
        return InitialData.from_preset(self.sigma_grid(), self.space_grid(),
                                       p0_kind=kind, p0_args=args,
                                       u0_kind=i["u0"],
                                       u0_amplitude=i["u0_amplitude"])

    # run knobs ------------------------------------------------------
    @property
    def snapshot_every(self) -> int:
        return self.values["run"]["snapshot_every"]

    @property
    def checkpoint_every(self) -> int:
        return self.values["run"]["checkpoint_every"]

    @property
    def c_comparison(self) -> float:
        return self.values["tolerances"]["c_comparison"]

    @property
    def c_moment(self) -> float:
        return self.values["tolerances"]["c_moment"]

    def problem(self) -> CoupledProblem:
        r = self.values["run"]
        return CoupledProblem(dp=self.dimensionless_params(),
                              sigma_grid=self.sigma_grid(),
                              space_grid=self.space_grid(),
                              protocol=self.protocol(),
                              picard_tol=r["picard_tol"],
                              picard_max=r["picard_max"])

    def build(self) -> tuple[CoupledProblem, InitialData, float, ValidationReport]:
        """Assemble and validate everything needed to start a run."""
        prob = self.problem()
        init = self.initial()
        report = validate_initial(
            init, prob.sigma_grid, prob.dp.alpha, prob.dp.mu,
            protocol=prob.protocol,
            allow_degenerate=self.values["model"]["allow_degenerate"])
        report.raise_if_failed()
        eta, _ = compute_eta(init.p0, prob.sigma_grid, prob.dp.alpha)
        return prob, init, eta, report


_CASTS: dict[tuple[str, str], Callable] = {
    ("model", "mode"): str,
    ("model", "fully_relaxing"): None,          # boolean, handled below
    ("model", "allow_degenerate"): None,
    ("protocol", "kind"): str,
    ("protocol", "times"): _parse_floats,
    ("protocol", "values"): _parse_floats,
    ("initial", "p0"): str,
    ("initial", "u0"): str,
    ("grid", "n_y"): int,
    ("grid", "n_sigma"): int,
    ("run", "snapshot_every"): int,
    ("run", "checkpoint_every"): int,
    ("run", "picard_max"): int,
}

_BOOL_KEYS = {("model", "fully_relaxing"), ("model", "allow_degenerate")}


def _cast(section: str, key: str, raw: str, parser: configparser.ConfigParser):
    if (section, key) in _BOOL_KEYS:
        try:
            return parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}") from exc
    fn = _CASTS.get((section, key), float)
    try:
        value = fn(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc
    if fn is float and not math.isfinite(value):
        raise ConfigError(f"{section}.{key}: value must be finite, got {raw!r}")
    return value


def load_config(path: str | None = None, overrides: list[str] | None = None,
                text: str | None = None) -> RunConfig:
    """Load an INI config, apply key=value overrides, return the typed view.

    Unknown sections or keys are rejected so typos cannot silently fall
    back to defaults.  `text` bypasses the filesystem (used by tests and
    by the fingerprint round trip).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    if text is not None:
        parser.read_string(text)

    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        parser[section][key] = value

    values: dict[str, dict] = {}
    for section in DEFAULTS:
        values[section] = {}
        for key in DEFAULTS[section]:
            values[section][key] = _cast(section, key, parser[section][key], parser)

    mode = values["model"]["mode"]
    if mode not in ("dimensionless", "dimensional"):
        raise ConfigError(f"model.mode must be dimensionless or dimensional, got {mode!r}")

    canonical = io.StringIO()
    for section in sorted(DEFAULTS):
        for key in sorted(DEFAULTS[section]):
            canonical.write(f"{section}.{key}={parser[section][key].strip()}\n")
    digest = hashlib.sha256(canonical.getvalue().encode()).hexdigest()
    return RunConfig(values=values, fingerprint=digest)


def standard_config(**overrides: str) -> RunConfig:
    """The reference scenario, optionally tweaked via section.key=value."""
    items = [f"{k.replace('__', '.')}={v}" for k, v in overrides.items()]
    return load_config(overrides=items)

"""Exception types mapped to CLI exit codes.

Exit code contract (see README):
    0  success
    2  usage errors (argparse)
    3  configuration or input validation rejected
    4  numerical failure (CFL, instability, fixed point did not contract)
    5  hard diagnostic invariant violated
    6  I/O failure (unreadable/corrupt run artifacts)
"""

from __future__ import annotations


class HlCouetteError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(HlCouetteError):
    """Malformed or inconsistent configuration."""

    exit_code = 3


class ValidationError(HlCouetteError):
    """Input data rejected by validation (bad p0, bad protocol, bad params)."""

    exit_code = 3


class ScalingUndefinedError(ValidationError):
    """Requested a change of scales that does not exist (sigma_c = 0)."""


class CFLError(HlCouetteError):
    """Advection step size exceeds the CFL limit; caller must sub-cycle."""

    exit_code = 4


class SchemeInstabilityError(HlCouetteError):
    """The scheme produced values a stable run cannot produce (deep negativity,
    sup-norm bound violation). Signals a bug or a broken step size."""

    exit_code = 4


class NonContractionError(HlCouetteError):
    """Fixed-point coupling iteration failed to contract."""

    exit_code = 4

    def __init__(self, msg: str, ratio: float | None = None):
        super().__init__(msg)
        self.ratio = ratio


class DiagnosticFailure(HlCouetteError):
    """A hard diagnostic check failed on a run.

    When raised mid-run, `payload` carries the offending solver state so
    the driver can dump it for post-mortems.
    """

    exit_code = 5
    payload = None


class ArtifactIOError(HlCouetteError):
    """Run artifacts are missing, corrupt, or mismatched."""

    exit_code = 6

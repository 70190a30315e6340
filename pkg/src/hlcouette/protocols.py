"""Wall-velocity protocols and forcing histories.

Two layers live here.  ``Forcing`` objects are scalar functions of time
exposing the three integrals every consumer needs:

* ``value(t)``         the forcing itself,
* ``integral(t)``      int_0^t b ds          (accumulated shear),
* ``exp_integral(t)``  int_0^t e^{s-t} b ds  (relaxation memory integral).

Piecewise-linear and sinusoidal forcings evaluate those in closed form, so
oracle results built on them carry no quadrature error.  Sampled histories
(recorded from a run) fall back to trapezoid sums on their sample ladder.

``ShearProtocol`` wraps a forcing as the moving-wall velocity V(t) and
enforces the start-from-rest constraint V(0) = 0.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .errors import ValidationError


class Forcing:
    """Interface for scalar time histories."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def derivative(self, t: float) -> float:
        raise NotImplementedError

    def integral(self, t: float) -> float:
        raise NotImplementedError

    def exp_integral(self, t: float) -> float:
        raise NotImplementedError


class PiecewiseLinearForcing(Forcing):
    """Piecewise-linear history with constant extension past the last knot.

    All integrals are exact per segment.  For a segment b(s) = v_a + m (s-a)
    on [a, c],

        int_a^c e^{s-t} b ds = e^{c-t} (b(c) - m) - e^{a-t} (v_a - m),

    which stays well conditioned because every exponent is <= 0 for s <= t.
    """

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 1:
            raise ValidationError("forcing table needs matching 1-d times/values")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValidationError("forcing knots must be nonnegative and strictly increasing")
        if t[0] != 0.0:
            raise ValidationError("forcing table must start at t = 0")
        self.times = t
        self.values = v
        self._slopes = np.zeros_like(v)
        if t.size > 1:
            self._slopes[:-1] = np.diff(v) / np.diff(t)
        # cumulative exact integrals at the knots
        self._cum = np.zeros_like(v)
        if t.size > 1:
            seg = 0.5 * (v[:-1] + v[1:]) * np.diff(t)
            self._cum[1:] = np.cumsum(seg)

    def _segment(self, t: float) -> int:
        # index i with times[i] <= t < times[i+1]; last segment extends to inf
        i = bisect_right(self.times, t) - 1
        return min(max(i, 0), self.times.size - 1)

    def value(self, t: float) -> float:
        i = self._segment(t)
        if i == self.times.size - 1:
            return float(self.values[-1])
        return float(self.values[i] + self._slopes[i] * (t - self.times[i]))

    def derivative(self, t: float) -> float:
        i = self._segment(t)
        if i == self.times.size - 1:
            return 0.0
        return float(self._slopes[i])

    def integral(self, t: float) -> float:
        i = self._segment(t)
        dt = t - self.times[i]
        return float(self._cum[i] + dt * (self.values[i] + 0.5 * self._slopes[i] * dt)
                     if i < self.times.size - 1
                     else self._cum[i] + dt * self.values[i])

    def exp_integral(self, t: float) -> float:
        if t <= 0:
            return 0.0
        total = 0.0
        for i in range(self._segment(t) + 1):
            a = self.times[i]
            c = min(self.times[i + 1], t) if i < self.times.size - 1 else t
            if c <= a:
                continue
            m = self._slopes[i] if i < self.times.size - 1 else 0.0
            va = self.values[i]
            total += (math.exp(c - t) * (va + m * (c - a) - m)
                      - math.exp(a - t) * (va - m))
        return total


class SinusoidForcing(Forcing):
    """b(t) = amplitude * sin(omega t); all integrals closed form."""

    def __init__(self, amplitude: float, omega: float):
        if omega <= 0:
            raise ValidationError("sinusoid needs omega > 0")
        self.amplitude = float(amplitude)
        self.omega = float(omega)

    def value(self, t: float) -> float:
        return self.amplitude * math.sin(self.omega * t)

    def derivative(self, t: float) -> float:
        return self.amplitude * self.omega * math.cos(self.omega * t)

    def integral(self, t: float) -> float:
        return self.amplitude * (1.0 - math.cos(self.omega * t)) / self.omega

    def exp_integral(self, t: float) -> float:
        w = self.omega
        return self.amplitude * (math.sin(w * t) - w * math.cos(w * t)
                                 + w * math.exp(-t)) / (1.0 + w * w)


class SampledForcing(Forcing):
    """History known only at sample times; integrals use trapezoid sums."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValidationError("sampled forcing needs >= 2 samples")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("sample times must be strictly increasing")
        self.times = t
        self.values = v

    def value(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def derivative(self, t: float) -> float:
        i = min(max(bisect_right(self.times, t) - 1, 0), self.times.size - 2)
        return float((self.values[i + 1] - self.values[i])
                     / (self.times[i + 1] - self.times[i]))

    def _upto(self, t: float):
        i = bisect_right(self.times, t)
        ts = self.times[:i]
        vs = self.values[:i]
        if ts.size == 0 or ts[-1] < t:
            ts = np.append(ts, t)
            vs = np.append(vs, self.value(t))
        return ts, vs

    def integral(self, t: float) -> float:
        ts, vs = self._upto(t)
        return float(np.trapezoid(vs, ts))

    def exp_integral(self, t: float) -> float:
        ts, vs = self._upto(t)
        return float(np.trapezoid(np.exp(ts - t) * vs, ts))

    def trapezoid_error_estimate(self, t: float) -> float:
        """Crude bound on the exp_integral quadrature error: t/12 * h^2 * max|b''|."""
        ts, vs = self._upto(t)
        if ts.size < 3:
            return 0.0
        h = np.diff(ts)
        second = np.abs(np.diff(vs, 2)) / (h[:-1] * h[1:])
        return float(t / 12.0 * np.max(h) ** 2 * (np.max(second) + np.max(np.abs(vs))))


class CompositeForcing(Forcing):
    """Weighted sum of forcings; every integral is linear in the parts."""

    def __init__(self, parts: list[tuple[float, Forcing]]):
        self.parts = list(parts)

    def value(self, t: float) -> float:
        return sum(c * f.value(t) for c, f in self.parts)

    def derivative(self, t: float) -> float:
        return sum(c * f.derivative(t) for c, f in self.parts)

    def integral(self, t: float) -> float:
        return sum(c * f.integral(t) for c, f in self.parts)

    def exp_integral(self, t: float) -> float:
        return sum(c * f.exp_integral(t) for c, f in self.parts)


class ShearProtocol:
    """Moving-wall velocity V(t) with V(0) = 0, built on a Forcing.

    kind is one of "ramp", "sinusoid", "table"; the constructor classmethods
    are the supported presets.
    """

    def __init__(self, forcing: Forcing, kind: str, spec: dict):
        if forcing.value(0.0) != 0.0:
            raise ValidationError("wall protocol must start from rest, V(0) = 0")
        self.forcing = forcing
        self.kind = kind
        self.spec = dict(spec)

    @classmethod
    def ramp(cls, v_max: float, t_ramp: float) -> "ShearProtocol":
        if t_ramp <= 0:
            raise ValidationError("ramp time must be positive")
        f = PiecewiseLinearForcing([0.0, t_ramp], [0.0, v_max])
        return cls(f, "ramp", {"v_max": v_max, "t_ramp": t_ramp})

    @classmethod
    def sinusoid(cls, amplitude: float, period: float) -> "ShearProtocol":
        if period <= 0:
            raise ValidationError("period must be positive")
        f = SinusoidForcing(amplitude, 2.0 * math.pi / period)
        return cls(f, "sinusoid", {"amplitude": amplitude, "period": period})

    @classmethod
    def table(cls, times, values) -> "ShearProtocol":
        f = PiecewiseLinearForcing(times, values)
        if f.values[0] != 0.0:
            raise ValidationError("wall protocol table must have V(0) = 0")
        return cls(f, "table", {"times": list(map(float, f.times)),
                                "values": list(map(float, f.values))})

    def value(self, t: float) -> float:
        return self.forcing.value(t)

    def derivative(self, t: float) -> float:
        return self.forcing.derivative(t)

    def integral(self, t: float) -> float:
        return self.forcing.integral(t)

    def exp_integral(self, t: float) -> float:
        return self.forcing.exp_integral(t)

    def scaled(self, time_scale: float, velocity_scale: float) -> "ShearProtocol":
        """Protocol seen in rescaled variables: V'(t') = velocity_scale * V(time_scale * t')."""
        if self.kind == "ramp":
            return ShearProtocol.ramp(self.spec["v_max"] * velocity_scale,
                                      self.spec["t_ramp"] / time_scale)
        if self.kind == "sinusoid":
            return ShearProtocol.sinusoid(self.spec["amplitude"] * velocity_scale,
                                          self.spec["period"] / time_scale)
        times = [t / time_scale for t in self.spec["times"]]
        values = [v * velocity_scale for v in self.spec["values"]]
        return ShearProtocol.table(times, values)

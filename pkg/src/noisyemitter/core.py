"""Shared domain types, unit conventions, and grid utilities.

All rates and frequencies are expressed in units of the total emitter decay
rate Gamma; spectra are stored versus detuning delta = omega - omega0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Tolerance for modulus-bound invariant checks on analytic results.
# Monte Carlo results are judged against 5 * std_error instead.
EPS_NUM = 1e-9

PLUS = "+"
MINUS = "-"
CHANNELS = (PLUS, MINUS)


class DomainError(ValueError):
    """A precondition on physical or numerical inputs was violated."""


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class ConvergenceError(RuntimeError):
    """A quadrature, series, or ODE solve failed to reach tolerance (CLI exit code 3)."""


class StatisticalCheckError(RuntimeError):
    """A Monte Carlo consistency check failed beyond its error budget (CLI exit code 4)."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def other_channel(channel: str) -> str:
    if channel == PLUS:
        return MINUS
    if channel == MINUS:
        return PLUS
    raise DomainError(f"channel must be '+' or '-', got {channel!r}")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Emitter and waveguide rates.

    gamma_plus / gamma_minus are the directional guided emission rates,
    gamma_loss the emission into unguided modes. gamma_wb is an optional
    white dephasing background that shifts every solver's Gamma/2 to
    Gamma/2 + gamma_wb while leaving the coupling prefactors untouched.
    """

    gamma_plus: float
    gamma_minus: float
    gamma_loss: float
    omega0: float = 0.0
    gamma_wb: float = 0.0

    def __post_init__(self) -> None:
        for name in ("gamma_plus", "gamma_minus", "gamma_loss", "gamma_wb"):
            value = _require_finite(name, getattr(self, name))
            if value < 0:
                raise DomainError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "omega0", _require_finite("omega0", self.omega0))
        if self.Gamma() <= 0:
            raise DomainError("total decay rate must be positive")

    def Gamma(self) -> float:
        """Total decay rate gamma_plus + gamma_minus + gamma_loss."""
        return self.gamma_plus + self.gamma_minus + self.gamma_loss

    def gamma_guided(self) -> float:
        """Guided decay gamma_plus + gamma_minus."""
        return self.gamma_plus + self.gamma_minus

    def gamma(self, channel: str) -> float:
        """Rate of one emission channel: '+', '-', or 'loss'."""
        if channel == PLUS:
            return self.gamma_plus
        if channel == MINUS:
            return self.gamma_minus
        if channel == "loss":
            return self.gamma_loss
        raise DomainError(f"unknown channel {channel!r}")

    def beta(self, channel: str) -> float:
        """Branching fraction gamma_channel / Gamma."""
        return self.gamma(channel) / self.Gamma()

    def half_width(self) -> float:
        """Coherence decay rate Gamma/2 + gamma_wb entering every lineshape."""
        return 0.5 * self.Gamma() + self.gamma_wb


@dataclass(frozen=True)
class FrequencyGrid:
    """Ordered detunings delta = omega - omega0 (units of Gamma)."""

    detunings: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.detunings, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DomainError("detunings must be a nonempty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise DomainError("detunings must be finite")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise DomainError("detunings must be strictly increasing")
        object.__setattr__(self, "detunings", _readonly(arr))

    def __len__(self) -> int:
        return self.detunings.size

    def spacing(self) -> float:
        if len(self) < 2:
            raise DomainError("grid spacing undefined for a single point")
        return float(self.detunings[1] - self.detunings[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if len(self) < 3:
            return True
        d = np.diff(self.detunings)
        return bool(np.max(np.abs(d - d[0])) <= rtol * abs(d[0]))


def make_grid(delta_min: float, delta_max: float, n_points: int) -> FrequencyGrid:
    """Uniform detuning grid including both endpoints."""
    delta_min = _require_finite("delta_min", delta_min)
    delta_max = _require_finite("delta_max", delta_max)
    if int(n_points) != n_points or n_points < 2:
        raise DomainError(f"n_points must be an integer >= 2, got {n_points!r}")
    if not delta_min < delta_max:
        raise DomainError("delta_min must be < delta_max")
    return FrequencyGrid(np.linspace(delta_min, delta_max, int(n_points)))


SPECTRUM_KINDS = ("transmittance", "reflectance", "loss_reflectance", "overlap")


@dataclass(frozen=True)
class ComplexSpectrum:
    """Complex values on a frequency grid: t, r, r_loss, or the overlap G."""

    grid: FrequencyGrid
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in SPECTRUM_KINDS:
            raise DomainError(f"kind must be one of {SPECTRUM_KINDS}, got {self.kind!r}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.grid),):
            raise DomainError("values length must match the grid")
        if not np.all(np.isfinite(vals)):
            raise DomainError("spectrum values must be finite")
        if self.kind == "transmittance" and np.max(np.abs(vals)) > 1 + EPS_NUM:
            raise DomainError("|transmittance| exceeds 1 beyond numerical tolerance")
        object.__setattr__(self, "values", _readonly(vals))


@dataclass(frozen=True)
class EnvelopeCurve:
    """Dephasing envelope C_phi(t) on a time grid starting at t = 0.

    stderr holds per-point Monte Carlo standard errors when the curve was
    estimated by trajectory averaging. tol loosens the analytic invariants
    (C(0) = 1, |C| <= 1) for curves reconstructed from measured spectra,
    where the contract bounds the error at a few percent instead.
    """

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    tol: float = EPS_NUM

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.ndim != 1 or t.size < 1 or v.shape != t.shape:
            raise DomainError("times and values must be matching 1-D arrays")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DomainError("envelope data must be finite")
        if t[0] != 0.0 or (t.size > 1 and not np.all(np.diff(t) > 0)):
            raise DomainError("times must start at 0 and strictly increase")
        if abs(v[0] - 1.0) > self.tol:
            raise DomainError(f"C(0) must be 1 within {self.tol}, got {v[0]}")
        if np.max(np.abs(v)) > 1 + self.tol:
            raise DomainError(f"|C(t)| must stay <= 1 within {self.tol}")
        object.__setattr__(self, "times", _readonly(t))
        object.__setattr__(self, "values", _readonly(v))
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=float)
            if se.shape != t.shape or np.any(se < 0) or not np.all(np.isfinite(se)):
                raise DomainError("stderr must be nonnegative and match the grid")
            object.__setattr__(self, "stderr", _readonly(se))

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class EstimateWithError:
    """A Monte Carlo average with its standard error."""

    mean: complex
    std_error: float
    n_samples: int

    def __post_init__(self) -> None:
        mean = complex(self.mean)
        if not (math.isfinite(mean.real) and math.isfinite(mean.imag)):
            raise DomainError("mean must be finite")
        if not math.isfinite(self.std_error) or self.std_error < 0:
            raise DomainError("std_error must be >= 0")
        if int(self.n_samples) < 1:
            raise DomainError("n_samples must be >= 1")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std_error", float(self.std_error))
        object.__setattr__(self, "n_samples", int(self.n_samples))

"""Trajectory-level Monte Carlo cross-checks for the averaged lineshapes.

These estimators share no code path with the deterministic routes: the
overlap comes from time-stepping the stationary filter
dx/dT = 1 - (Gamma/2 + gamma_wb - i delta + i Delta(T)) x along sampled
noise trajectories, so agreement within error bars validates both sides.
"""
from __future__ import annotations

import math

import numpy as np

from .core import (
    DomainError,
    EstimateWithError,
    StatisticalCheckError,
    SystemParams,
)
from .noise import (
    MAX_KAPPA_DT,
    NoiseModel,
    _sample_block,
    max_rate,
    split_white_background,
    variance,
)

_MIN_SETTLE_GAMMAS = 10.0
_DEFAULT_SETTLE_GAMMAS = 15.0
_CHUNK_TRAJ = 1024


def _noise_step(base: NoiseModel | None, cap: float) -> float:
    dt = cap
    if base is not None:
        rate = max_rate(base)
        if rate > 0:
            dt = min(dt, MAX_KAPPA_DT / rate)
        sig = math.sqrt(variance(base))
        if sig > 0:
            dt = min(dt, 0.1 / sig)
    return dt


def _combined_stats(samples: np.ndarray) -> tuple[complex, float]:
    n = samples.size
    mean = complex(np.mean(samples))
    if n < 2:
        return mean, 0.0
    var = float(np.mean(np.abs(samples - mean) ** 2)) * n / (n - 1)
    return mean, math.sqrt(var / n)


def overlap_mc(
    params: SystemParams,
    model: NoiseModel | None,
    delta: float,
    n_traj: int = 10_000,
    t_ss: float | None = None,
    seed: int = 0,
) -> EstimateWithError:
    """Monte Carlo estimate of the averaged overlap G at one detuning.

    Runs the stationary filter to t_ss (>= 10/Gamma) with the fluctuating
    rate frozen per step and records x(t_ss) per trajectory. A model with
    only white dephasing is deterministic here and returns the closed value
    with zero error.
    """
    gamma_tot = params.Gamma()
    if t_ss is None:
        t_ss = _DEFAULT_SETTLE_GAMMAS / gamma_tot
    if t_ss < _MIN_SETTLE_GAMMAS / gamma_tot:
        raise DomainError(f"t_ss must be at least {_MIN_SETTLE_GAMMAS}/Gamma")
    if n_traj < 2:
        raise DomainError("n_traj must be at least 2")
    base, gamma_wb_extra = split_white_background(model) if model is not None else (None, 0.0)
    a_const = params.half_width() + gamma_wb_extra - 1j * delta
    if base is None:
        return EstimateWithError(mean=1.0 / a_const, std_error=0.0, n_samples=n_traj)

    dt = _noise_step(base, 0.05 / gamma_tot)
    n_steps = int(math.ceil(t_ss / dt))
    times = np.arange(n_steps + 1) * dt
    finals = np.empty(n_traj, dtype=complex)
    done = 0
    while done < n_traj:
        nc = min(_CHUNK_TRAJ, n_traj - done)
        shifts = _sample_block(base, times, seed, np.arange(done, done + nc))
        x = np.zeros(nc, dtype=complex)
        for k in range(n_steps):
            a = a_const + 1j * shifts[:, k]
            decay = np.exp(-a * dt)
            x = decay * x + (1.0 - decay) / a
        finals[done : done + nc] = x
        done += nc
    mean, se = _combined_stats(finals)
    return EstimateWithError(mean=mean, std_error=se, n_samples=n_traj)


def _window_phase(shifts: np.ndarray, dt: float, lo: int, hi: int) -> np.ndarray:
    """Trapezoid integral of Delta over grid indices [lo, hi] per trajectory."""
    seg = shifts[:, lo : hi + 1]
    return dt * (np.sum(seg, axis=1) - 0.5 * (seg[:, 0] + seg[:, -1]))


def stationary_phase_check(
    model: NoiseModel,
    t: float,
    n_traj: int = 4096,
    seed: int = 0,
) -> EstimateWithError:
    """Estimate C(t) from a late window and verify stationarity.

    The accumulated-phase average over [0, t] must match the one over a
    window of the same length placed after a decorrelation gap; a mean
    difference beyond five joint standard errors raises
    StatisticalCheckError. Returns the late-window estimate.
    """
    if not math.isfinite(t) or t < 0:
        raise DomainError("t must be finite and >= 0")
    if n_traj < 2:
        raise DomainError("n_traj must be at least 2")
    base, gamma_wb = split_white_background(model)
    damp = math.exp(-gamma_wb * t)
    if t == 0 or base is None:
        return EstimateWithError(mean=damp, std_error=0.0, n_samples=n_traj)

    dt = _noise_step(base, t / 8.0)
    n_win = max(int(math.ceil(t / dt)), 8)
    dt = t / n_win
    rate = max_rate(base)
    gap = 3.0 / rate if rate > 0 else 0.0
    n_gap = int(math.ceil(gap / dt))
    n_total = 2 * n_win + n_gap
    times = np.arange(n_total + 1) * dt

    late = np.empty(n_traj, dtype=complex)
    diff = np.empty(n_traj, dtype=complex)
    done = 0
    while done < n_traj:
        nc = min(_CHUNK_TRAJ, n_traj - done)
        shifts = _sample_block(base, times, seed, np.arange(done, done + nc))
        phase_origin = _window_phase(shifts, dt, 0, n_win)
        phase_late = _window_phase(shifts, dt, n_win + n_gap, n_total)
        z_origin = np.exp(-1j * phase_origin)
        z_late = np.exp(-1j * phase_late)
        late[done : done + nc] = z_late
        diff[done : done + nc] = z_late - z_origin
        done += nc

    mean_diff, se_diff = _combined_stats(diff)
    if abs(mean_diff) > 5.0 * se_diff + 1e-12:
        raise StatisticalCheckError(
            f"phase average is not stationary: windows differ by {abs(mean_diff):.3e}"
            f" against 5 sigma = {5 * se_diff:.3e}"
        )
    mean_late, se_late = _combined_stats(late)
    return EstimateWithError(mean=damp * mean_late, std_error=damp * se_late, n_samples=n_traj)

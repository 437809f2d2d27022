"""Weakly driven two-level dynamics under fluctuating detuning.

Monte Carlo steady state of the stochastic Bloch equations

    ds/dt = -(Gamma/2 + gamma_wb - i delta + i Delta(t)) s - Omega z
    dz/dt = -Gamma (1 + z) + 4 Re(conj(Omega) s)

with s the coherence in the drive frame and z the inversion, plus the
coherent/power observables derived from the windowed averages and the
photon-flux balance across the output channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CHANNELS,
    PLUS,
    DomainError,
    EstimateWithError,
    StatisticalCheckError,
    SystemParams,
    _require_finite,
)
from .noise import (
    MAX_KAPPA_DT,
    NoiseModel,
    _sample_block,
    max_rate,
    split_white_background,
    variance,
)
from .scattering import transmittance_white

WEAK_DRIVE_MAX_RATIO = 0.2
_MIN_RELAX_GAMMAS = 10.0
_CHUNK_TRAJ = 512


@dataclass(frozen=True)
class DriveConfig:
    """Coherent drive: Rabi amplitude, detuning from omega0, input channel."""

    rabi: complex
    detuning: float
    input_channel: str = PLUS

    def __post_init__(self) -> None:
        rabi = complex(self.rabi)
        if not (math.isfinite(rabi.real) and math.isfinite(rabi.imag)):
            raise DomainError("rabi must be finite")
        _require_finite("detuning", self.detuning)
        if self.input_channel not in CHANNELS:
            raise DomainError(f"input_channel must be one of {CHANNELS}")
        object.__setattr__(self, "rabi", rabi)


def _check_weak_drive(params: SystemParams, drive: DriveConfig) -> None:
    if abs(drive.rabi) > WEAK_DRIVE_MAX_RATIO * params.Gamma():
        raise DomainError(
            f"|rabi| must stay below {WEAK_DRIVE_MAX_RATIO} Gamma for the"
            " weak-drive protocol"
        )


def _time_step(params: SystemParams, base: NoiseModel | None) -> float:
    dt = 0.05 / params.Gamma()
    if base is not None:
        rate = max_rate(base)
        if rate > 0:
            dt = min(dt, MAX_KAPPA_DT / rate)
        sig = math.sqrt(variance(base))
        if sig > 0:
            dt = min(dt, 0.1 / sig)
    return dt


def bloch_steady_state(
    params: SystemParams,
    model: NoiseModel | None,
    drive: DriveConfig,
    n_traj: int = 2000,
    t_relax: float | None = None,
    seed: int = 0,
    window: float | None = None,
) -> tuple[EstimateWithError, EstimateWithError]:
    """Windowed steady-state averages (coherence/Omega, population z).

    Exponential-Euler stepping with the fluctuating rate frozen per step and
    an exact inversion update with a trapezoid drive source. After relaxing
    for t_relax the state is averaged over a window; two internal checks run
    per call: the second half of the relaxation stretch must agree with the
    window (residual transient) and the windowed averages must satisfy the
    integrated inversion balance per trajectory up to the discretization
    floor.
    """
    _check_weak_drive(params, drive)
    if drive.rabi == 0:
        raise DomainError("drive amplitude must be nonzero")
    if n_traj < 2:
        raise DomainError("n_traj must be at least 2")
    gamma_tot = params.Gamma()
    if t_relax is None:
        t_relax = 12.0 / gamma_tot
    if t_relax < _MIN_RELAX_GAMMAS / gamma_tot:
        raise DomainError(f"t_relax must be at least {_MIN_RELAX_GAMMAS}/Gamma")
    if window is None:
        window = 20.0 / gamma_tot
    if window <= 0:
        raise DomainError("window must be positive")

    base, gamma_wb_extra = split_white_background(model) if model is not None else (None, 0.0)
    dt = _time_step(params, base)
    n_relax = int(math.ceil(t_relax / dt))
    n_win = int(math.ceil(window / dt))
    n_steps = n_relax + n_win
    times = np.arange(n_steps + 1) * dt
    half = params.half_width() + gamma_wb_extra
    omega = complex(drive.rabi)
    decay_z = math.exp(-gamma_tot * dt)
    grow_z = -math.expm1(-gamma_tot * dt) / gamma_tot

    # tail of the relaxation stretch, compared against the window below
    n_tail = max(n_relax // 5, 1)

    sum_s = 0.0 + 0.0j
    sum_z = 0.0
    sq_s = 0.0
    sq_z = 0.0
    sum_tail_minus_win = 0.0
    sq_tail_minus_win = 0.0
    sum_balance = 0.0
    sq_balance = 0.0

    done = 0
    while done < n_traj:
        nc = min(_CHUNK_TRAJ, n_traj - done)
        if base is not None:
            shifts = _sample_block(base, times, seed, np.arange(done, done + nc))
        else:
            shifts = np.zeros((nc, times.size))
        s = np.zeros(nc, dtype=complex)
        z = np.full(nc, -1.0)
        s_win = np.zeros(nc, dtype=complex)
        z_win = np.zeros(nc)
        s_tail = np.zeros(nc, dtype=complex)
        z_tail = np.zeros(nc)
        z_at_win_start = np.empty(nc)
        for k in range(n_steps):
            rate = half - 1j * (drive.detuning - shifts[:, k])
            decay = np.exp(-rate * dt)
            s_new = decay * s + (1.0 - decay) / rate * (-omega * z)
            source = 4.0 * np.real(np.conj(omega) * 0.5 * (s + s_new))
            z_new = -1.0 + (z + 1.0) * decay_z + grow_z * source
            s, z = s_new, z_new
            if k + 1 == n_relax:
                z_at_win_start = z.copy()
            if k + 1 > n_relax:
                s_win += s
                z_win += z
            elif k + 1 > n_relax - n_tail:
                s_tail += s
                z_tail += z
        s_win /= n_win
        z_win /= n_win
        s_tail /= n_tail
        z_tail /= n_tail

        sum_s += complex(np.sum(s_win))
        sum_z += float(np.sum(z_win))
        sq_s += float(np.sum(np.abs(s_win) ** 2))
        sq_z += float(np.sum(z_win**2))
        diff = z_tail - z_win
        sum_tail_minus_win += float(np.sum(diff))
        sq_tail_minus_win += float(np.sum(diff**2))
        # integrated inversion balance over the window, exact up to the
        # trapezoid source: (z_end - z_start)/W = -Gamma (1 + z_bar) + 4 Re(conj(Omega) s_bar)
        balance = (z - z_at_win_start) / (n_win * dt) + gamma_tot * (
            1.0 + z_win
        ) - 4.0 * np.real(np.conj(omega) * s_win)
        sum_balance += float(np.sum(balance))
        sq_balance += float(np.sum(balance**2))

        done += nc

    n = float(n_traj)
    mean_s = sum_s / n
    mean_z = sum_z / n
    var_s = max(sq_s / n - abs(mean_s) ** 2, 0.0)
    var_z = max(sq_z / n - mean_z**2, 0.0)
    se_s = math.sqrt(var_s / max(n - 1, 1.0))
    se_z = math.sqrt(var_z / max(n - 1, 1.0))

    mean_diff = sum_tail_minus_win / n
    se_diff = math.sqrt(
        max(sq_tail_minus_win / n - mean_diff**2, 0.0) / max(n - 1, 1.0)
    )
    if abs(mean_diff) > 5.0 * se_diff + 1e-6 * (1.0 + abs(mean_z)):
        raise StatisticalCheckError(
            f"steady state not reached: relaxation tail differs from the window by"
            f" {mean_diff:.3e} (5 sigma = {5 * se_diff:.3e}); increase t_relax"
        )
    mean_bal = sum_balance / n
    se_bal = math.sqrt(max(sq_balance / n - mean_bal**2, 0.0) / max(n - 1, 1.0))
    scale = gamma_tot * (1.0 + abs(mean_z)) + 4.0 * abs(omega) * abs(mean_s)
    if abs(mean_bal) > 5.0 * se_bal + 1e-2 * scale + 1e-12:
        raise StatisticalCheckError(
            f"windowed inversion balance violated: residual {mean_bal:.3e}"
            f" against allowance {5 * se_bal + 1e-2 * scale:.3e}"
        )

    coherence_over_omega = EstimateWithError(
        mean=mean_s / omega, std_error=se_s / abs(omega), n_samples=n_traj
    )
    population = EstimateWithError(mean=mean_z, std_error=se_z, n_samples=n_traj)
    return coherence_over_omega, population


def output_observables(
    params: SystemParams,
    coherence_over_omega,
    drive: DriveConfig,
    output_channel: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Weak-drive coherent observables from the normalized coherence.

    homodyne = delta_out,in - sqrt(gamma_out gamma_in) (s/Omega); the
    normalized transmitted/reflected power keeps only the terms linear in
    the coherence, the weak-drive limit of |amplitude|^2.
    """
    if output_channel not in CHANNELS:
        raise DomainError(f"output_channel must be one of {CHANNELS}")
    coh = np.asarray(coherence_over_omega, dtype=complex)
    g_in = params.gamma(drive.input_channel)
    g_out = params.gamma(output_channel)
    root = math.sqrt(g_out * g_in)
    same = 1.0 if output_channel == drive.input_channel else 0.0
    homodyne = same - root * coh
    beta_term = same - math.sqrt(params.beta(output_channel) * params.beta(drive.input_channel))
    power = same - 2.0 * root * beta_term * np.real(coh)
    return homodyne, power


def flux_conservation(
    params: SystemParams,
    coherence_over_omega,
    drive: DriveConfig,
    population=None,
) -> np.ndarray:
    """Residual of the photon-flux balance across all output channels.

    P_lambda = delta_lm + gamma_lambda gamma_mu n_e / |Omega|^2
    - delta_lm 2 sqrt(gamma_lambda gamma_mu) Re(conj(Omega) s)/|Omega|^2 with
    n_e = (1+z)/2, plus the loss channel; the three must sum to 1. With
    population omitted, z is taken from the steady-state identity
    z = -1 + 4 Re(conj(Omega) s)/Gamma and the residual vanishes
    identically; passing a measured population makes this a real check.
    """
    omega = complex(drive.rabi)
    if omega == 0:
        raise DomainError("flux balance needs a nonzero drive")
    coh = np.asarray(coherence_over_omega, dtype=complex)
    s = coh * omega
    drive_term = np.real(np.conj(omega) * s)
    if population is None:
        z = -1.0 + 4.0 * drive_term / params.Gamma()
    else:
        # measured populations arrive as complex-typed estimates with zero
        # imaginary part
        z = np.real(np.asarray(population, dtype=complex))
    n_e = 0.5 * (1.0 + z)
    g_in = params.gamma(drive.input_channel)
    omega_sq = abs(omega) ** 2
    total = np.zeros_like(np.real(coh))
    for channel in CHANNELS:
        g_l = params.gamma(channel)
        same = 1.0 if channel == drive.input_channel else 0.0
        total = total + (
            same
            + g_l * g_in * n_e / omega_sq
            - same * 2.0 * math.sqrt(g_l * g_in) * drive_term / omega_sq
        )
    total = total + params.gamma_loss * g_in * n_e / omega_sq
    return np.abs(total - 1.0)


def squares_deficit_white(
    params: SystemParams,
    gamma_phi: float,
    grid,
    input_channel: str = PLUS,
) -> np.ndarray:
    """Deficit 1 - (|t|^2 + |r|^2 + |r_loss|^2) for white dephasing.

    Verifies the closed form
    deficit = 2 gamma_mu (gamma_phi + gamma_wb) / ((Gamma/2 + gamma_wb + gamma_phi)^2 + delta^2)
    before returning, and the lossless special case Re t = |t|^2 when the
    input carries exactly half the total decay and no dephasing is present.
    """
    result = transmittance_white(params, gamma_phi, grid, input_channel)
    t = result.transmittance.values
    r = result.reflectance.values
    rl = result.loss_reflectance.values
    deficit = 1.0 - (np.abs(t) ** 2 + np.abs(r) ** 2 + np.abs(rl) ** 2)
    gm = params.gamma(input_channel)
    hw = params.half_width()
    phi_eff = gamma_phi + params.gamma_wb
    expected = 2.0 * gm * phi_eff / ((hw + gamma_phi) ** 2 + grid.detunings**2)
    if float(np.max(np.abs(deficit - expected))) > 1e-12:
        raise RuntimeError("internal error: white-noise deficit identity violated")
    if phi_eff == 0.0 and gm == 0.5 * params.Gamma():
        if float(np.max(np.abs(t.real - np.abs(t) ** 2))) > 1e-12:
            raise RuntimeError("internal error: lossless-balance identity violated")
    return deficit

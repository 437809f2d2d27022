"""Dephasing envelopes C_phi(t) and the resulting coherence decay.

Closed forms are provided for the Gaussian (Ornstein-Uhlenbeck) and telegraph
processes, an exact linear-ODE propagation for any finite jump model, a
cumulant quadrature for arbitrary Gaussian autocorrelations, and a Monte
Carlo phase average as the model-independent fallback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.integrate import solve_ivp

from .core import ConvergenceError, DomainError, EnvelopeCurve, SystemParams
from .noise import (
    ColoredGaussian,
    JumpModel,
    NoiseModel,
    OneOverF,
    Telegraph,
    TLFEnsemble,
    White,
    WithWhiteBackground,
    build_jump_model,
    DEFAULT_STATE_CAP,
    MAX_KAPPA_DT,
    _sample_block,
    split_white_background,
    variance,
)

_EXPM_STATE_LIMIT = 512
_SIMPSON_MAX_DEPTH = 50


def _as_time_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1 or not np.all(np.isfinite(t)):
        raise DomainError("times must be a finite 1-D array")
    if t[0] != 0.0 or (t.size > 1 and np.min(np.diff(t)) <= 0):
        raise DomainError("times must start at 0 and strictly increase")
    return t


def _ou_exponent(sigma: float, kappa: float, t: np.ndarray) -> np.ndarray:
    """Cumulant exponent sigma^2 t^2 phi(kappa t) with phi(u) = (e^-u + u - 1)/u^2.

    The stable form covers the quasi-static limit kappa = 0 (phi -> 1/2) and
    the fast-noise limit kappa t >> 1 (phi -> 1/u) without branching on kappa.
    """
    u = kappa * t
    phi = np.empty_like(u)
    small = u < 1e-4
    us = u[small]
    phi[small] = 0.5 - us / 6.0 + us**2 / 24.0
    ul = u[~small]
    phi[~small] = (np.expm1(-ul) + ul) / ul**2
    return sigma**2 * t**2 * phi


def envelope_ou(sigma: float, kappa: float, times) -> EnvelopeCurve:
    """Closed-form envelope exp(-(sigma/kappa)^2 (e^{-kappa t} + kappa t - 1))."""
    if sigma < 0 or kappa < 0:
        raise DomainError("sigma and kappa must be >= 0")
    t = _as_time_grid(times)
    return EnvelopeCurve(t, np.exp(-_ou_exponent(sigma, kappa, t)))


def _sinhc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x for complex x, series near 0."""
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 + xs**2 / 6.0 + xs**4 / 120.0
    xl = x[~small]
    out[~small] = np.sinh(xl) / xl
    return out


def _telegraph_values(sigma: float, kappa: float, t: np.ndarray) -> np.ndarray:
    disc = complex(kappa * kappa - 4.0 * sigma * sigma)
    x = 0.5 * np.sqrt(disc) * t
    vals = np.exp(-0.5 * kappa * t) * (np.cosh(x) + (0.5 * kappa * t) * _sinhc(x))
    if np.max(np.abs(vals.imag)) > 1e-12 * max(1.0, np.max(np.abs(vals.real))):
        raise ConvergenceError("telegraph envelope developed a spurious imaginary part")
    return vals.real


def envelope_telegraph(sigma: float, kappa: float, times) -> EnvelopeCurve:
    """Telegraph envelope; oscillates for kappa < 2 sigma, monotone above.

    Equivalent root form: (1/2)[(1+v0) e^{v+ t} + (1-v0) e^{v- t}] with
    v0 = kappa/D, v_pm = (-kappa +/- D)/2, D = sqrt(kappa^2 - 4 sigma^2);
    evaluated via cosh/sinhc so the degenerate root kappa = 2 sigma and the
    static limit kappa = 0 (pure cos(sigma t)) need no special casing.
    """
    if sigma < 0 or kappa < 0:
        raise DomainError("sigma and kappa must be >= 0")
    t = _as_time_grid(times)
    return EnvelopeCurve(t, _telegraph_values(sigma, kappa, t))


def _adaptive_simpson_pair(acf, a, b, fa, fm, fb, whole, tol, depth):
    """Adaptive Simpson for the pair (acf(tau), tau*acf(tau)) on [a, b]."""
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm = np.array([acf(lm), lm * acf(lm)])
    frm = np.array([acf(rm), rm * acf(rm)])
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if np.max(np.abs(err)) <= 15.0 * tol or (b - a) < 1e-14 * max(1.0, abs(b)):
        return left + right + err / 15.0
    if depth >= _SIMPSON_MAX_DEPTH:
        raise ConvergenceError("cumulant quadrature did not reach tolerance")
    return _adaptive_simpson_pair(
        acf, a, m, fa, flm, fm, left, tol / 2.0, depth + 1
    ) + _adaptive_simpson_pair(acf, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)


def envelope_gaussian_from_acf(acf, times) -> EnvelopeCurve:
    """Gaussian-noise envelope exp(-int_0^t (t - tau) acf(tau) dtau).

    The double integral is reduced to two running integrals F1 = int acf and
    F2 = int tau*acf, so the exponent is t*F1(t) - F2(t); each grid segment
    is integrated by adaptive Simpson with the tolerance budgeted so the
    total exponent error stays below 1e-10.
    """
    t = _as_time_grid(times)
    exponent = np.zeros(t.size)
    if t.size > 1:
        n_seg = t.size - 1
        seg_tol = 1e-10 / (n_seg * (1.0 + t[-1]))
        F = np.zeros(2)
        for k in range(1, t.size):
            a, b = t[k - 1], t[k]
            m = 0.5 * (a + b)
            fa = np.array([acf(a), a * acf(a)])
            fm = np.array([acf(m), m * acf(m)])
            fb = np.array([acf(b), b * acf(b)])
            whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
            F = F + _adaptive_simpson_pair(acf, a, b, fa, fm, fb, whole, seg_tol, 0)
            exponent[k] = t[k] * F[0] - F[1]
    return EnvelopeCurve(t, np.exp(-exponent))


def envelope_jump(
    jump: JumpModel, times, state_cap: int = DEFAULT_STATE_CAP
) -> EnvelopeCurve:
    """Envelope from the marginal-average ODE dx/dt = (-i diag(Delta) + W) x.

    Initial condition x = P_ss; C_phi(t) = sum_m x_m(t). Propagates by matrix
    exponential up to 512 states, adaptive Runge-Kutta above.
    """
    t = _as_time_grid(times)
    n = jump.n_states
    if n > state_cap:
        raise DomainError(f"jump model has {n} states, exceeding cap {state_cap}")
    A = -1j * np.diag(jump.realizations) + jump.transition_matrix
    x0 = jump.stationary.astype(complex)
    if n <= _EXPM_STATE_LIMIT:
        values = np.empty(t.size, dtype=complex)
        x = x0.copy()
        values[0] = x.sum()
        cache: dict[float, np.ndarray] = {}
        for k in range(1, t.size):
            dt = float(t[k] - t[k - 1])
            E = cache.get(dt)
            if E is None:
                E = expm(A * dt)
                cache[dt] = E
            x = E @ x
            values[k] = x.sum()
    else:
        def rhs(_t, y):
            x = y[:n] + 1j * y[n:]
            dx = A @ x
            return np.concatenate([dx.real, dx.imag])

        y0 = np.concatenate([x0.real, x0.imag])
        sol = solve_ivp(rhs, (0.0, float(t[-1])), y0, t_eval=t, rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise ConvergenceError(
                f"jump-envelope ODE failed ({sol.message}); retry with a smaller time step"
            )
        values = sol.y[:n].sum(axis=0) + 1j * sol.y[n:].sum(axis=0)
    return EnvelopeCurve(t, values)


def envelope_mc(
    model: NoiseModel, times, n_traj: int, seed: int = 0, chunk: int = 1024
) -> EnvelopeCurve:
    """Monte Carlo phase average over sampled trajectories, with std errors."""
    if n_traj < 100:
        raise DomainError(f"n_traj must be >= 100, got {n_traj}")
    base, gamma_wb = split_white_background(model)
    if base is None:
        raise DomainError("white noise is never sampled; use the closed form exp(-gamma_phi t)")
    t = _as_time_grid(times)
    if t.size > 1:
        dt = float(t[1] - t[0])
        sig = math.sqrt(variance(base))
        if sig * dt > MAX_KAPPA_DT * (1 + 1e-9):
            raise DomainError(f"step too coarse: sigma*dt = {sig * dt:.3g} exceeds {MAX_KAPPA_DT}")
    total = np.zeros(t.size, dtype=complex)
    for off in range(0, n_traj, chunk):
        idx = np.arange(off, min(off + chunk, n_traj))
        block = _sample_block(base, t, seed, idx)
        phase = np.zeros((idx.size, t.size))
        if t.size > 1:
            dts = np.diff(t)
            phase[:, 1:] = np.cumsum(0.5 * (block[:, 1:] + block[:, :-1]) * dts, axis=1)
        total += np.exp(-1j * phase).sum(axis=0)
    mean = total / n_traj
    # each sample has unit modulus, so var_re + var_im = (1 - |mean|^2) n/(n-1)
    var = np.maximum(1.0 - np.abs(mean) ** 2, 0.0)
    stderr = np.sqrt(var / max(n_traj - 1, 1))
    damp = np.exp(-gamma_wb * t)
    return EnvelopeCurve(t, mean * damp, stderr=stderr * damp)


@dataclass(frozen=True)
class CoherenceDecay:
    """Full coherence (1/2) e^{-Gamma t/2} C_phi(t) and the inverted-frame population."""

    times: np.ndarray
    coherence: np.ndarray
    population: np.ndarray


def coherence_decay(params: SystemParams, envelope: EnvelopeCurve) -> CoherenceDecay:
    """Coherence and population decay of an initially superposed emitter."""
    t = envelope.times
    coh = 0.5 * np.exp(-params.half_width() * t) * envelope.values
    pop = np.exp(-params.Gamma() * t) - 1.0
    return CoherenceDecay(times=t, coherence=coh, population=pop)


def make_envelope_callable(model: NoiseModel):
    """Vectorized closed-form C_phi(t) for models that have one.

    Covers white, Ornstein-Uhlenbeck, telegraph, Gaussian composites, and any
    of those under a white background. Jump ensembles have no closed form and
    are rejected; use the jump ODE or the exact linear solver instead.
    """
    base, gamma_wb = split_white_background(model)

    if base is None:
        inner = None
    elif isinstance(base, ColoredGaussian):
        sigma, kappa = base.sigma, base.kappa

        def inner(t):
            return np.exp(-_ou_exponent(sigma, kappa, t))

    elif isinstance(base, Telegraph):
        sigma, kappa = base.sigma, base.kappa

        def inner(t):
            return _telegraph_values(sigma, kappa, t)

    elif isinstance(base, OneOverF) and base.gaussian:
        comps = base.components
        inv_n = 1.0 / base.N

        def inner(t):
            exponent = np.zeros(np.shape(t))
            for kappa_j, sigma_j in comps:
                exponent += _ou_exponent(sigma_j, kappa_j, t) * inv_n
            return np.exp(-exponent)

    else:
        raise DomainError(f"no closed-form envelope for {type(base).__name__}")

    def envelope(times):
        t = np.asarray(times, dtype=float)
        out = np.ones(t.shape) if inner is None else inner(t)
        if gamma_wb != 0.0:
            out = out * np.exp(-gamma_wb * t)
        return out

    return envelope


def envelope_for_model(
    model: NoiseModel,
    times,
    method: str = "auto",
    n_traj: int = 10000,
    seed: int = 0,
    state_cap: int = DEFAULT_STATE_CAP,
) -> EnvelopeCurve:
    """Envelope by the preferred route for the given model.

    method: 'auto', 'closed', 'jump', 'mc', or 'acf'. 'closed' covers the
    exact analytic forms (white, Ornstein-Uhlenbeck, telegraph, Gaussian
    composites); 'jump' the finite-state ODE; 'acf' the Gaussian cumulant
    quadrature; 'mc' the trajectory average.
    """
    t = _as_time_grid(times)
    base, gamma_wb = split_white_background(model)
    damp = np.exp(-gamma_wb * t)
    if base is None:
        if method not in ("auto", "closed"):
            raise DomainError(f"method {method!r} is not available for white noise")
        return EnvelopeCurve(t, damp.astype(complex))

    if method == "mc":
        return envelope_mc(model, t, n_traj=n_traj, seed=seed)
    if method == "acf":
        if isinstance(base, (Telegraph, TLFEnsemble)) or (
            isinstance(base, OneOverF) and not base.gaussian
        ):
            raise DomainError("the Gaussian cumulant route does not apply to jump noise")
        from .noise import autocorrelation

        inner = envelope_gaussian_from_acf(lambda tau: autocorrelation(base, tau), t)
        return EnvelopeCurve(t, inner.values * damp)
    if method == "jump":
        jump = build_jump_model(base, state_cap=state_cap)
        inner = envelope_jump(jump, t, state_cap=state_cap)
        return EnvelopeCurve(t, inner.values * damp)
    if method not in ("auto", "closed"):
        raise DomainError(f"unknown envelope method {method!r}")

    if isinstance(base, ColoredGaussian):
        inner = envelope_ou(base.sigma, base.kappa, t)
    elif isinstance(base, Telegraph):
        inner = envelope_telegraph(base.sigma, base.kappa, t)
    elif isinstance(base, OneOverF) and base.gaussian:
        exponent = np.zeros(t.size)
        for kappa_j, sigma_j in base.components:
            exponent += _ou_exponent(sigma_j, kappa_j, t) / base.N
        inner = EnvelopeCurve(t, np.exp(-exponent))
    elif isinstance(base, (Telegraph, TLFEnsemble, OneOverF)):
        if method == "closed":
            raise DomainError(f"no closed-form envelope for {type(base).__name__}")
        jump = build_jump_model(base, state_cap=state_cap)
        inner = envelope_jump(jump, t, state_cap=state_cap)
    else:
        raise DomainError(f"unsupported model {type(base).__name__}")
    return EnvelopeCurve(t, inner.values * damp)

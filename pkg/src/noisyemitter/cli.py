"""Command-line front end.

Reads a JSON config describing the emitter parameters, the noise model, the
frequency grid, and per-task options; dispatches to the solver modules and
writes CSV artifacts plus a JSON metadata sidecar. Numerical output uses 17
significant digits so identical configs reproduce byte-identical files.

Config layout (all physics rates in units where Gamma sets the scale):

    {
      "schema_version": 1,
      "params": {"gamma_plus": 0.45, "gamma_minus": 0.45, "gamma_loss": 0.1,
                 "omega0": 0.0, "gamma_wb": 0.0},
      "noise": {"type": "colored_gaussian", "sigma": 1.0, "kappa": 2.0},
      "grid": {"min": -5.0, "max": 5.0, "n": 201},
      "seed": 0,
      "spectrum": {"method": "auto", "input_channel": "+"},
      "ramsey": {"t_max": 6.0, "n_points": 241, "method": "auto",
                 "n_traj": 2000, "with_decay": false},
      "invert": {"route": "real", "input_csv": "spectrum.csv", "t_max": 6.0,
                 "input_channel": "+"},
      "mc_validate": {"delta": 0.0, "n_traj": 10000, "t_ss": 15.0},
      "fano": {"omega_c": 0.0, "kappa_c": 15.0, "mode": "spectrum",
               "include_z": true, "t_max": 6.0, "input_channel": "+"},
      "bloch": {"rabi": 0.01, "n_traj": 500, "t_relax": 12.0,
                "window": 20.0, "input_channel": "+"}
    }

Unknown keys are rejected at every level. Noise model variants:
white(gamma_phi), colored_gaussian(sigma, kappa), telegraph(sigma, kappa),
tlf_ensemble(m, sigma, kappa), one_over_f(components=[[kappa, sigma], ...]
or n/kappa_min/kappa_max/sigma1/eta recipe, gaussian, m),
with_white_background(base, gamma_wb).

Exit codes: 0 success, 2 config or input validation error, 3 numerical
non-convergence, 4 statistical check failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_STATISTICAL = 4

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_SCATTER_METHODS = ("auto", "white", "laplace", "series", "quasistatic", "telegraph", "jump")

_CANONICAL_PARAMS = {"gamma_plus": 0.45, "gamma_minus": 0.45, "gamma_loss": 0.1}

# caption-pinned parameter sets behind the `figure` task; tests assert these
FIGURES = {
    "fig2c": {
        "kind": "envelopes_ou",
        "sigma": 1.0,
        "kappa_over_sigma": (10.0, 2.0, 0.0),
        "t_max": 6.0,
        "n_points": 601,
    },
    "fig3a": {
        "kind": "spectra_ou",
        "params": _CANONICAL_PARAMS,
        "sigma": 1.0,
        "kappa_over_sigma": (10.0, 2.0, 0.0),
        "delta_max": 6.0,
        "n_points": 601,
    },
    "fig4a": {
        "kind": "one_over_f_spectrum",
        "n_components": 8,
        "kappa_min": 1e-5,
        "kappa_max": 10.0,
        "sigma1": 2.0,
        "eta": 0.99,
        "omega_min": 1e-6,
        "omega_max": 100.0,
        "n_points": 321,
    },
    "fig4b": {
        "kind": "spectra_one_over_f",
        "params": _CANONICAL_PARAMS,
        "n_components": 8,
        "kappa_min": 1e-5,
        "kappa_max": 10.0,
        "sigma1": 2.0,
        "eta": 0.99,
        "m_per_fluctuator": 1,
        "delta_max": 8.0,
        "n_points": 401,
    },
    "fig4c": {
        "kind": "envelopes_one_over_f",
        "n_components": 8,
        "kappa_min": 1e-5,
        "kappa_max": 10.0,
        "sigma1": 2.0,
        "eta": 0.99,
        "m_per_fluctuator": 1,
        "t_max": 4.0,
        "n_points": 401,
    },
    "fig5b": {
        "kind": "spectra_telegraph",
        "params": _CANONICAL_PARAMS,
        "sigma": 2.0,
        "kappa_over_sigma": (5.0, 1.0, 0.05),
        "delta_max": 8.0,
        "n_points": 601,
    },
    "fig5c": {
        "kind": "envelopes_telegraph",
        "sigma": 2.0,
        "kappa_over_sigma": (5.0, 1.0, 0.05),
        "t_max": 6.0,
        "n_points": 601,
    },
    "fig6b": {
        "kind": "spectra_tlf",
        "params": _CANONICAL_PARAMS,
        "sigma": 2.0,
        "kappa_over_sigma": 0.1,
        "m_values": (2, 3, 4, 5, 10),
        "delta_max": 8.0,
        "n_points": 401,
    },
    "fig6c": {
        "kind": "envelopes_tlf",
        "sigma": 2.0,
        "kappa_over_sigma": 0.1,
        "m_values": (2, 3, 4, 5, 10),
        "t_max": 3.0,
        "n_points": 301,
    },
}


def _set_threads(n: int) -> None:
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(n)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyemitter",
        description="Noise-averaged single-photon scattering and dephasing toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp: argparse.ArgumentParser, config_required: bool = True) -> None:
        sp.add_argument("--config", required=config_required, help="JSON config path")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None, help="cap solver threads")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    for name in ("spectrum", "ramsey", "invert", "mc-validate", "fano", "bloch"):
        add_common(sub.add_parser(name))
    fig = sub.add_parser("figure", help="emit a pinned figure dataset")
    fig.add_argument("figure_id", choices=sorted(FIGURES))
    add_common(fig, config_required=False)
    st = sub.add_parser("selftest", help="run fast numerical self-checks")
    st.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        if args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        _set_threads(args.threads)

    from .core import ConfigError, ConvergenceError, DomainError, StatisticalCheckError

    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StatisticalCheckError as exc:
        print(f"statistical check failed: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except ConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _dispatch(args) -> None:
    if args.command == "selftest":
        _run_selftest()
        return
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    if args.command == "figure":
        config = {"figure_id": args.figure_id}
        artifacts, extras = _task_figure(args.figure_id, out_dir, args.format)
        task = f"figure:{args.figure_id}"
    else:
        config = _load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        task = args.command
        runner = {
            "spectrum": _task_spectrum,
            "ramsey": _task_ramsey,
            "invert": _task_invert,
            "mc-validate": _task_mc_validate,
            "fano": _task_fano,
            "bloch": _task_bloch,
        }[args.command]
        artifacts, extras = runner(config, out_dir, args.format)
    runtime = time.monotonic() - started
    _write_sidecar(out_dir, task, config, artifacts, extras, runtime)


# ---------------------------------------------------------------- config ---

_TASK_SECTIONS = ("spectrum", "ramsey", "invert", "mc_validate", "fano", "bloch")
_TOP_KEYS = frozenset(("schema_version", "params", "noise", "grid", "seed") + _TASK_SECTIONS)


def _config_error(message: str):
    from .core import ConfigError

    return ConfigError(message)


def _reject_unknown(context: str, mapping: dict, allowed) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise _config_error(f"unknown key(s) in {context}: {', '.join(unknown)}")


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise _config_error(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _config_error(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise _config_error("config root must be a JSON object")
    _reject_unknown("config", raw, _TOP_KEYS)
    version = raw.get("schema_version")
    if version != 1:
        raise _config_error(f"schema_version must be 1, got {version!r}")
    return raw


def _as_number(context: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _config_error(f"{context} must be a number, got {value!r}")
    return float(value)


def _as_int(context: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _config_error(f"{context} must be an integer, got {value!r}")
    return value


def _parse_params(config: dict):
    from .core import DomainError, SystemParams

    section = config.get("params")
    if not isinstance(section, dict):
        raise _config_error("config needs a 'params' object")
    allowed = ("gamma_plus", "gamma_minus", "gamma_loss", "omega0", "gamma_wb")
    _reject_unknown("params", section, allowed)
    kwargs = {}
    for key in allowed:
        if key in section:
            kwargs[key] = _as_number(f"params.{key}", section[key])
    for key in ("gamma_plus", "gamma_minus", "gamma_loss"):
        if key not in kwargs:
            raise _config_error(f"params.{key} is required")
    try:
        return SystemParams(**kwargs)
    except DomainError as exc:
        raise _config_error(f"params: {exc}") from exc


def _parse_noise(config: dict, required: bool = True):
    from .noise import model_from_dict

    section = config.get("noise")
    if section is None:
        if required:
            raise _config_error("config needs a 'noise' object")
        return None
    if not isinstance(section, dict):
        raise _config_error("'noise' must be an object")
    return model_from_dict(section)


def _parse_grid(config: dict):
    from .core import DomainError, make_grid

    section = config.get("grid")
    if not isinstance(section, dict):
        raise _config_error("config needs a 'grid' object")
    _reject_unknown("grid", section, ("min", "max", "n"))
    try:
        return make_grid(
            _as_number("grid.min", section.get("min")),
            _as_number("grid.max", section.get("max")),
            _as_int("grid.n", section.get("n")),
        )
    except DomainError as exc:
        raise _config_error(f"grid: {exc}") from exc


def _parse_seed(config: dict) -> int:
    seed = config.get("seed", 0)
    return _as_int("seed", seed)


def _section(config: dict, name: str, defaults: dict) -> dict:
    raw = config.get(name, {})
    if not isinstance(raw, dict):
        raise _config_error(f"'{name}' must be an object")
    _reject_unknown(name, raw, defaults)
    merged = dict(defaults)
    merged.update(raw)
    return merged


def _parse_channel(context: str, value: str) -> str:
    from .core import CHANNELS

    if value not in CHANNELS:
        raise _config_error(f"{context} must be one of {list(CHANNELS)}, got {value!r}")
    return value


# ------------------------------------------------------------- artifacts ---


def _format_number(x) -> str:
    return "%.17g" % x


def _write_table(path: str, header: list[str], columns: list) -> None:
    import numpy as np

    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(header) or any(c.shape != cols[0].shape for c in cols):
        raise RuntimeError("internal error: mismatched table columns")
    if path.endswith(".json"):
        payload = {name: [float(v) for v in col] for name, col in zip(header, cols)}
        text = json.dumps({"columns": payload}, indent=1)
    else:
        lines = [",".join(header)]
        for row in zip(*cols):
            lines.append(",".join(_format_number(v) for v in row))
        text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _artifact_path(out_dir: str, stem: str, fmt: str) -> str:
    return os.path.join(out_dir, f"{stem}.{'json' if fmt == 'json' else 'csv'}")


def _write_sidecar(out_dir, task, config, artifacts, extras, runtime) -> None:
    from . import __version__

    payload = {
        "schema_version": 1,
        "task": task,
        "config": config,
        "code_version": __version__,
        "artifacts": [os.path.basename(a) for a in artifacts],
        "extras": extras,
        "runtime_seconds": runtime,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = os.path.join(out_dir, f"{task.replace(':', '_')}.meta.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, default=str)
        fh.write("\n")


def _spectrum_columns(result) -> tuple[list[str], list]:
    header = ["delta", "re_t", "im_t", "re_r", "im_r", "re_rloss", "im_rloss"]
    t = result.transmittance.values
    r = result.reflectance.values
    rl = result.loss_reflectance.values
    cols = [
        result.grid.detunings,
        t.real,
        t.imag,
        r.real,
        r.imag,
        rl.real,
        rl.imag,
    ]
    return header, cols


def _envelope_columns(times, values, stderr=None) -> tuple[list[str], list]:
    import numpy as np

    values = np.asarray(values, dtype=complex)
    header = ["t", "re_C", "im_C"]
    cols = [np.asarray(times, dtype=float), values.real, values.imag]
    if stderr is not None:
        header.append("stderr")
        cols.append(np.asarray(stderr, dtype=float))
    return header, cols


# ------------------------------------------------------------------ tasks ---


def _dispatch_scatter(params, model, grid, method: str, input_channel: str):
    """Route a (model, method) pair to the matching solver."""
    from .noise import (
        ColoredGaussian,
        OneOverF,
        Telegraph,
        TLFEnsemble,
        build_jump_model,
        split_white_background,
    )
    from .ramsey import make_envelope_callable
    from .scattering import (
        apply_white_background,
        scatter_from_envelope,
        scatter_jump,
        transmittance_ou_series,
        transmittance_quasistatic,
        transmittance_telegraph,
        transmittance_white,
    )

    if method not in _SCATTER_METHODS:
        raise _config_error(f"method must be one of {_SCATTER_METHODS}, got {method!r}")

    base, gamma_wb = split_white_background(model) if model is not None else (None, 0.0)
    if base is None:
        if method not in ("auto", "white"):
            raise _config_error(f"method {method!r} is invalid for purely white noise")
        return transmittance_white(params, gamma_wb, grid, input_channel)

    eff = apply_white_background(params, gamma_wb)

    def laplace_route():
        return scatter_from_envelope(eff, make_envelope_callable(base), grid, input_channel)

    if isinstance(base, ColoredGaussian):
        if method == "quasistatic" or (method == "auto" and base.kappa == 0):
            if base.kappa != 0:
                raise _config_error("method 'quasistatic' needs kappa = 0")
            if base.sigma == 0:
                return transmittance_white(eff, 0.0, grid, input_channel)
            return transmittance_quasistatic(eff, base.sigma, grid, input_channel)
        if method == "series" or (
            method == "auto" and (base.sigma / base.kappa) ** 2 <= 25.0
        ):
            return transmittance_ou_series(eff, base.sigma, base.kappa, grid, input_channel=input_channel)
        if method in ("auto", "laplace"):
            return laplace_route()
        raise _config_error(f"method {method!r} is invalid for colored Gaussian noise")
    if isinstance(base, Telegraph):
        if method in ("auto", "telegraph"):
            return transmittance_telegraph(eff, base.sigma, base.kappa, grid, input_channel)
        if method == "jump":
            return scatter_jump(eff, build_jump_model(base), grid, input_channel)
        if method == "laplace":
            return laplace_route()
        raise _config_error(f"method {method!r} is invalid for telegraph noise")
    if isinstance(base, TLFEnsemble):
        if method in ("auto", "jump"):
            return scatter_jump(eff, build_jump_model(base), grid, input_channel)
        raise _config_error(f"method {method!r} is invalid for a fluctuator ensemble")
    if isinstance(base, OneOverF):
        if base.gaussian:
            if method in ("auto", "laplace"):
                return laplace_route()
            raise _config_error(
                f"method {method!r} is invalid for the Gaussian composite model"
            )
        if method in ("auto", "jump"):
            return scatter_jump(eff, build_jump_model(base), grid, input_channel)
        raise _config_error(f"method {method!r} is invalid for the composite jump model")
    raise _config_error(f"unsupported noise model {type(base).__name__}")


def _task_spectrum(config, out_dir, fmt):
    params = _parse_params(config)
    model = _parse_noise(config)
    grid = _parse_grid(config)
    section = _section(config, "spectrum", {"method": "auto", "input_channel": "+"})
    channel = _parse_channel("spectrum.input_channel", section["input_channel"])
    result = _dispatch_scatter(params, model, grid, section["method"], channel)
    path = _artifact_path(out_dir, "spectrum", fmt)
    header, cols = _spectrum_columns(result)
    _write_table(path, header, cols)
    extras = {"method": section["method"], "input_channel": channel}
    if result.meta:
        extras.update({k: v for k, v in result.meta.items() if isinstance(v, (int, float))})
    return [path], extras


def _task_ramsey(config, out_dir, fmt):
    import numpy as np

    params = _parse_params(config)
    model = _parse_noise(config)
    seed = _parse_seed(config)
    section = _section(
        config,
        "ramsey",
        {
            "t_max": 6.0,
            "n_points": 241,
            "method": "auto",
            "n_traj": 2000,
            "with_decay": False,
        },
    )
    t_max = _as_number("ramsey.t_max", section["t_max"])
    n_points = _as_int("ramsey.n_points", section["n_points"])
    if t_max <= 0 or n_points < 2:
        raise _config_error("ramsey needs t_max > 0 and n_points >= 2")
    from .ramsey import coherence_decay, envelope_for_model

    times = np.linspace(0.0, t_max, n_points)
    envelope = envelope_for_model(
        model,
        times,
        method=section["method"],
        n_traj=_as_int("ramsey.n_traj", section["n_traj"]),
        seed=seed,
    )
    path = _artifact_path(out_dir, "ramsey", fmt)
    header, cols = _envelope_columns(envelope.times, envelope.values, envelope.stderr)
    _write_table(path, header, cols)
    artifacts = [path]
    if section["with_decay"]:
        decay = coherence_decay(params, envelope)
        decay_path = _artifact_path(out_dir, "ramsey_decay", fmt)
        _write_table(
            decay_path,
            ["t", "re_coh", "im_coh", "population"],
            [decay.times, decay.coherence.real, decay.coherence.imag, decay.population],
        )
        artifacts.append(decay_path)
    return artifacts, {"method": section["method"], "seed": seed}


def _read_spectrum_csv(path: str):
    import numpy as np

    from .core import FrequencyGrid

    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise _config_error(f"cannot read input spectrum {path!r}: {exc}") from exc
    except ValueError as exc:
        raise _config_error(f"malformed spectrum CSV {path!r}: {exc}") from exc
    required = ("delta", "re_t", "im_t")
    for name in required:
        if name not in header:
            raise _config_error(f"spectrum CSV {path!r} lacks a {name!r} column")
    if data.shape[1] != len(header):
        raise _config_error(f"spectrum CSV {path!r} rows do not match the header")
    idx = {name: header.index(name) for name in required}
    grid = FrequencyGrid(data[:, idx["delta"]])
    t = data[:, idx["re_t"]] + 1j * data[:, idx["im_t"]]
    return grid, t


def _task_invert(config, out_dir, fmt):
    from .core import ComplexSpectrum
    from .inversion import (
        envelope_from_complex_transmittance,
        envelope_from_transmittance,
        kramers_kronig,
    )
    from .scattering import ScatterResult

    params = _parse_params(config)
    section = _section(
        config,
        "invert",
        {"route": "real", "input_csv": None, "t_max": None, "input_channel": "+"},
    )
    route = section["route"]
    if route not in ("real", "complex", "kk"):
        raise _config_error(f"invert.route must be real|complex|kk, got {route!r}")
    if not isinstance(section["input_csv"], str):
        raise _config_error("invert.input_csv is required")
    channel = _parse_channel("invert.input_channel", section["input_channel"])
    t_max = section["t_max"]
    if t_max is not None:
        t_max = _as_number("invert.t_max", t_max)
    in_path = section["input_csv"]
    if not os.path.isabs(in_path):
        in_path = os.path.join(out_dir, in_path)
    grid, t_values = _read_spectrum_csv(in_path)

    if route == "kk":
        im_t = kramers_kronig(grid, t_values.real)
        completed = ScatterResult.from_overlap(
            params, grid, (1.0 - (t_values.real + 1j * im_t)) / params.gamma(channel), channel
        )
        path = _artifact_path(out_dir, "spectrum_kk", fmt)
        header, cols = _spectrum_columns(completed)
        _write_table(path, header, cols)
        return [path], {"route": route}

    if route == "real":
        recovered = envelope_from_transmittance(
            params, grid, t_values.real, t_max=t_max, input_channel=channel
        )
    else:
        spectrum = ComplexSpectrum(grid, t_values, "transmittance")
        recovered = envelope_from_complex_transmittance(
            params, spectrum, t_max=t_max, input_channel=channel
        )
    raw_path = _artifact_path(out_dir, "envelope_raw", fmt)
    header, cols = _envelope_columns(recovered.times, recovered.values)
    _write_table(raw_path, header, cols)
    norm_path = _artifact_path(out_dir, "envelope_normalized", fmt)
    header, cols = _envelope_columns(recovered.times, recovered.normalized)
    _write_table(norm_path, header, cols)
    return [raw_path, norm_path], {"route": route}


def _task_mc_validate(config, out_dir, fmt):
    from .core import StatisticalCheckError
    from .mc_oracle import overlap_mc

    params = _parse_params(config)
    model = _parse_noise(config)
    seed = _parse_seed(config)
    section = _section(
        config, "mc_validate", {"delta": 0.0, "n_traj": 10_000, "t_ss": None}
    )
    delta = _as_number("mc_validate.delta", section["delta"])
    n_traj = _as_int("mc_validate.n_traj", section["n_traj"])
    t_ss = section["t_ss"]
    if t_ss is not None:
        t_ss = _as_number("mc_validate.t_ss", t_ss)
    estimate = overlap_mc(params, model, delta, n_traj=n_traj, t_ss=t_ss, seed=seed)

    from .core import FrequencyGrid
    import numpy as np

    grid = FrequencyGrid(np.array([delta]))
    analytic = _dispatch_scatter(params, model, grid, "auto", "+").overlap.values[0]
    distance = abs(estimate.mean - analytic)
    sigmas = distance / estimate.std_error if estimate.std_error > 0 else 0.0
    report = {
        "delta": delta,
        "mc_re": estimate.mean.real,
        "mc_im": estimate.mean.imag,
        "mc_std_error": estimate.std_error,
        "n_traj": estimate.n_samples,
        "analytic_re": analytic.real,
        "analytic_im": analytic.imag,
        "abs_distance": distance,
        "sigma_distance": sigmas,
    }
    path = os.path.join(out_dir, "mc_validate.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    if estimate.std_error > 0 and sigmas > 5.0:
        raise StatisticalCheckError(
            f"Monte Carlo overlap is {sigmas:.1f} sigma from the analytic value"
            f" (report written to {path})"
        )
    return [path], report


def _task_fano(config, out_dir, fmt):
    from .fano import FanoParams, fano_recover_envelope, fano_scatter
    from .ramsey import make_envelope_callable

    params = _parse_params(config)
    model = _parse_noise(config)
    grid = _parse_grid(config)
    section = _section(
        config,
        "fano",
        {
            "omega_c": 0.0,
            "kappa_c": None,
            "mode": "spectrum",
            "include_z": True,
            "t_max": None,
            "input_channel": "+",
        },
    )
    if section["kappa_c"] is None:
        raise _config_error("fano.kappa_c is required")
    mode = section["mode"]
    if mode not in ("spectrum", "recover", "both"):
        raise _config_error(f"fano.mode must be spectrum|recover|both, got {mode!r}")
    channel = _parse_channel("fano.input_channel", section["input_channel"])
    fano = FanoParams(
        omega_c=_as_number("fano.omega_c", section["omega_c"]),
        kappa_c=_as_number("fano.kappa_c", section["kappa_c"]),
    )
    envelope = make_envelope_callable(model)
    scatter = fano_scatter(params, fano, envelope, grid, channel)
    artifacts = []
    extras = {"omega_c": fano.omega_c, "kappa_c": fano.kappa_c, "mode": mode}
    if mode in ("spectrum", "both"):
        path = _artifact_path(out_dir, "fano_spectrum", fmt)
        header, cols = _spectrum_columns(scatter.result)
        if section["include_z"]:
            header = header + ["z_re", "z_im"]
            cols = cols + [scatter.z.real, scatter.z.imag]
        _write_table(path, header, cols)
        artifacts.append(path)
    if mode in ("recover", "both"):
        t_max = section["t_max"]
        if t_max is not None:
            t_max = _as_number("fano.t_max", t_max)
        recovered = fano_recover_envelope(params, fano, scatter.fano_overlap, t_max=t_max)
        path = _artifact_path(out_dir, "fano_envelope", fmt)
        header, cols = _envelope_columns(recovered.times, recovered.values)
        _write_table(path, header, cols)
        artifacts.append(path)
    return artifacts, extras


def _task_bloch(config, out_dir, fmt):
    import numpy as np

    from .bloch import DriveConfig, bloch_steady_state, flux_conservation, output_observables
    from .core import other_channel

    params = _parse_params(config)
    model = _parse_noise(config, required=False)
    grid = _parse_grid(config)
    seed = _parse_seed(config)
    section = _section(
        config,
        "bloch",
        {
            "rabi": 0.01,
            "n_traj": 500,
            "t_relax": None,
            "window": None,
            "input_channel": "+",
        },
    )
    rabi_raw = section["rabi"]
    if isinstance(rabi_raw, list):
        if len(rabi_raw) != 2:
            raise _config_error("bloch.rabi as a list must be [re, im]")
        rabi = complex(
            _as_number("bloch.rabi[0]", rabi_raw[0]), _as_number("bloch.rabi[1]", rabi_raw[1])
        )
    else:
        rabi = complex(_as_number("bloch.rabi", rabi_raw))
    n_traj = _as_int("bloch.n_traj", section["n_traj"])
    t_relax = section["t_relax"]
    if t_relax is not None:
        t_relax = _as_number("bloch.t_relax", t_relax)
    window = section["window"]
    if window is not None:
        window = _as_number("bloch.window", window)
    channel = _parse_channel("bloch.input_channel", section["input_channel"])

    deltas = grid.detunings
    n = deltas.size
    re_hom = np.empty(n)
    im_hom = np.empty(n)
    p_trans = np.empty(n)
    p_refl = np.empty(n)
    flux = np.empty(n)
    se_coh = np.empty(n)
    se_pop = np.empty(n)
    for k, delta in enumerate(deltas):
        drive = DriveConfig(rabi=rabi, detuning=float(delta), input_channel=channel)
        coh, pop = bloch_steady_state(
            params,
            model,
            drive,
            n_traj=n_traj,
            t_relax=t_relax,
            seed=seed + 7919 * k,
            window=window,
        )
        hom_t, pow_t = output_observables(params, coh.mean, drive, channel)
        _, pow_r = output_observables(params, coh.mean, drive, other_channel(channel))
        re_hom[k] = complex(hom_t).real
        im_hom[k] = complex(hom_t).imag
        p_trans[k] = float(np.real(pow_t))
        p_refl[k] = float(np.real(pow_r))
        flux[k] = float(flux_conservation(params, coh.mean, drive, population=pop.mean))
        se_coh[k] = coh.std_error
        se_pop[k] = pop.std_error
    path = _artifact_path(out_dir, "bloch", fmt)
    _write_table(
        path,
        ["delta", "re_hom", "im_hom", "power_trans", "power_refl", "flux_residual", "stderr_coh", "stderr_pop"],
        [deltas, re_hom, im_hom, p_trans, p_refl, flux, se_coh, se_pop],
    )
    return [path], {"rabi_abs": abs(rabi), "n_traj": n_traj, "seed": seed}


# ----------------------------------------------------------------- figures ---


def _figure_params(spec_params: dict):
    from .core import SystemParams

    return SystemParams(**spec_params)


def _kappa_label(ratio: float) -> str:
    text = ("%g" % ratio).replace(".", "p")
    return f"kappa_{text}sigma"


def _task_figure(figure_id: str, out_dir: str, fmt: str):
    import numpy as np

    from .core import make_grid
    from .noise import (
        OneOverF,
        ideal_one_over_f_spectrum,
        one_over_f_components,
        power_spectrum,
    )
    from .ramsey import envelope_for_model, envelope_ou, envelope_telegraph
    from .noise import ColoredGaussian, Telegraph, TLFEnsemble

    spec = FIGURES[figure_id]
    kind = spec["kind"]
    artifacts = []
    extras = {"figure_id": figure_id, **{k: v for k, v in spec.items() if k != "kind"}}

    def emit(stem: str, header, cols):
        path = _artifact_path(out_dir, f"{figure_id}__{stem}", fmt)
        _write_table(path, header, cols)
        artifacts.append(path)

    if kind == "envelopes_ou":
        times = np.linspace(0.0, spec["t_max"], spec["n_points"])
        sigma = spec["sigma"]
        for ratio in spec["kappa_over_sigma"]:
            env = envelope_ou(sigma, ratio * sigma, times)
            header, cols = _envelope_columns(env.times, env.values)
            emit(_kappa_label(ratio), header, cols)
    elif kind == "spectra_ou":
        params = _figure_params(spec["params"])
        grid = make_grid(-spec["delta_max"], spec["delta_max"], spec["n_points"])
        sigma = spec["sigma"]
        for ratio in spec["kappa_over_sigma"]:
            model = ColoredGaussian(sigma=sigma, kappa=ratio * sigma)
            result = _dispatch_scatter(params, model, grid, "auto", "+")
            header, cols = _spectrum_columns(result)
            emit(_kappa_label(ratio), header, cols)
    elif kind == "one_over_f_spectrum":
        comps = one_over_f_components(
            spec["n_components"], spec["kappa_min"], spec["kappa_max"], spec["sigma1"], spec["eta"]
        )
        model = OneOverF(components=comps, gaussian=True)
        omega = np.logspace(
            np.log10(spec["omega_min"]), np.log10(spec["omega_max"]), spec["n_points"]
        )
        emit("exact", ["omega", "S"], [omega, power_spectrum(model, omega)])
        ideal = ideal_one_over_f_spectrum(
            spec["sigma1"], spec["kappa_min"], spec["kappa_max"], spec["eta"], omega
        )
        emit("ideal", ["omega", "S"], [omega, ideal])
    elif kind in ("spectra_one_over_f", "envelopes_one_over_f"):
        comps = one_over_f_components(
            spec["n_components"], spec["kappa_min"], spec["kappa_max"], spec["sigma1"], spec["eta"]
        )
        gauss = OneOverF(components=comps, gaussian=True)
        jumpy = OneOverF(components=comps, gaussian=False, M=spec["m_per_fluctuator"])
        if kind == "spectra_one_over_f":
            params = _figure_params(spec["params"])
            grid = make_grid(-spec["delta_max"], spec["delta_max"], spec["n_points"])
            for label, model in (("gaussian", gauss), ("non_gaussian", jumpy)):
                result = _dispatch_scatter(params, model, grid, "auto", "+")
                header, cols = _spectrum_columns(result)
                emit(label, header, cols)
        else:
            times = np.linspace(0.0, spec["t_max"], spec["n_points"])
            for label, model in (("gaussian", gauss), ("non_gaussian", jumpy)):
                env = envelope_for_model(model, times, method="auto")
                header, cols = _envelope_columns(env.times, env.values)
                emit(label, header, cols)
    elif kind == "spectra_telegraph":
        params = _figure_params(spec["params"])
        grid = make_grid(-spec["delta_max"], spec["delta_max"], spec["n_points"])
        sigma = spec["sigma"]
        for ratio in spec["kappa_over_sigma"]:
            model = Telegraph(sigma=sigma, kappa=ratio * sigma)
            result = _dispatch_scatter(params, model, grid, "auto", "+")
            header, cols = _spectrum_columns(result)
            emit(_kappa_label(ratio), header, cols)
    elif kind == "envelopes_telegraph":
        times = np.linspace(0.0, spec["t_max"], spec["n_points"])
        sigma = spec["sigma"]
        for ratio in spec["kappa_over_sigma"]:
            env = envelope_telegraph(sigma, ratio * sigma, times)
            header, cols = _envelope_columns(env.times, env.values)
            emit(_kappa_label(ratio), header, cols)
    elif kind == "spectra_tlf":
        params = _figure_params(spec["params"])
        grid = make_grid(-spec["delta_max"], spec["delta_max"], spec["n_points"])
        sigma = spec["sigma"]
        kappa = spec["kappa_over_sigma"] * sigma
        for m in spec["m_values"]:
            model = TLFEnsemble(M=m, sigma=sigma, kappa=kappa)
            result = _dispatch_scatter(params, model, grid, "auto", "+")
            header, cols = _spectrum_columns(result)
            emit(f"m{m}", header, cols)
        reference = _dispatch_scatter(
            params, ColoredGaussian(sigma=sigma, kappa=0.0), grid, "auto", "+"
        )
        header, cols = _spectrum_columns(reference)
        emit("gaussian_limit", header, cols)
    elif kind == "envelopes_tlf":
        times = np.linspace(0.0, spec["t_max"], spec["n_points"])
        sigma = spec["sigma"]
        kappa = spec["kappa_over_sigma"] * sigma
        for m in spec["m_values"]:
            env = envelope_for_model(TLFEnsemble(M=m, sigma=sigma, kappa=kappa), times)
            header, cols = _envelope_columns(env.times, env.values)
            emit(f"m{m}", header, cols)
        env = envelope_ou(sigma, 0.0, times)
        header, cols = _envelope_columns(env.times, env.values)
        emit("gaussian_limit", header, cols)
    else:  # pragma: no cover - registry and dispatch stay in sync
        raise RuntimeError(f"internal error: unhandled figure kind {kind!r}")
    return artifacts, extras


# ---------------------------------------------------------------- selftest ---


def _run_selftest() -> None:
    import numpy as np

    from .core import ConvergenceError, SystemParams, make_grid
    from .inversion import kramers_kronig
    from .noise import Telegraph, build_jump_model
    from .ramsey import envelope_ou
    from .scattering import (
        scatter_from_envelope,
        scatter_jump,
        transmittance_ou_series,
        transmittance_telegraph,
        transmittance_white,
    )

    params = SystemParams(gamma_plus=0.45, gamma_minus=0.45, gamma_loss=0.1)
    failures = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        print(f"{'ok' if ok else 'FAIL'} - {name}{(' ' + detail) if detail else ''}")
        if not ok:
            failures.append(name)

    grid0 = make_grid(-1.0, 1.0, 3)
    t0 = transmittance_white(params, 0.0, grid0).transmittance.values[1]
    check("noiseless resonance t=0.1", abs(t0 - 0.1) <= 1e-12, f"t={t0:.3g}")

    grid = make_grid(-5.0, 5.0, 51)
    closed = transmittance_telegraph(params, 2.0, 2.0, grid).transmittance.values
    exact = scatter_jump(params, build_jump_model(Telegraph(sigma=2.0, kappa=2.0)), grid)
    dist = float(np.max(np.abs(closed - exact.transmittance.values)))
    check("telegraph jump solver vs closed form", dist <= 1e-12, f"max|dt|={dist:.2e}")

    series = transmittance_ou_series(params, 1.0, 2.0, grid).transmittance.values
    laplace = scatter_from_envelope(
        params, lambda t: np.exp(-(1.0**2) * t**2 * _ou_phi(2.0 * t)), grid
    ).transmittance.values
    dist = float(np.max(np.abs(series - laplace)))
    check("colored-Gaussian series vs Laplace", dist <= 1e-6, f"max|dt|={dist:.2e}")

    kk_grid = make_grid(-60.0, 60.0, 4001)
    gamma_phi = 0.3
    white = transmittance_white(params, gamma_phi, kk_grid).transmittance.values
    im_kk = kramers_kronig(kk_grid, white.real)
    dist = float(np.max(np.abs(im_kk - white.imag)))
    check("dispersion completion of the white lineshape", dist <= 1e-3, f"max|dIm|={dist:.2e}")

    env = envelope_ou(1.0, 2.0, np.linspace(0.0, 6.0, 121))
    ok = bool(np.all(np.abs(env.values) <= 1.0 + 1e-9)) and abs(env.values[0] - 1.0) <= 1e-12
    check("envelope bounds", ok)

    if failures:
        raise ConvergenceError(f"selftest failures: {', '.join(failures)}")
    print("selftest: all checks passed")


def _ou_phi(u):
    import numpy as np

    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = 0.5 - us / 6.0 + us**2 / 24.0
    ub = u[~small]
    out[~small] = (np.expm1(-ub) + ub) / ub**2
    return out


if __name__ == "__main__":
    sys.exit(main())

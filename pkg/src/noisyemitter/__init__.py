"""Noise-averaged single-photon scattering and dephasing toolkit.

Submodule imports are lazy (PEP 562) so that the command-line entry point can
pin BLAS/OpenMP thread counts before any numerical library loads.
"""
from __future__ import annotations

__version__ = "0.1.0"

_EXPORTS = {
    # core
    "CHANNELS": "core",
    "ComplexSpectrum": "core",
    "ConfigError": "core",
    "ConvergenceError": "core",
    "DomainError": "core",
    "EnvelopeCurve": "core",
    "EstimateWithError": "core",
    "FrequencyGrid": "core",
    "MINUS": "core",
    "PLUS": "core",
    "StatisticalCheckError": "core",
    "SystemParams": "core",
    "make_grid": "core",
    "other_channel": "core",
    # noise
    "ColoredGaussian": "noise",
    "JumpModel": "noise",
    "OneOverF": "noise",
    "Telegraph": "noise",
    "TLFEnsemble": "noise",
    "Trajectory": "noise",
    "White": "noise",
    "WithWhiteBackground": "noise",
    "autocorrelation": "noise",
    "build_jump_model": "noise",
    "correlation_time": "noise",
    "ideal_one_over_f_spectrum": "noise",
    "max_rate": "noise",
    "model_from_dict": "noise",
    "model_to_dict": "noise",
    "one_over_f_components": "noise",
    "power_spectrum": "noise",
    "sample_trajectory": "noise",
    "split_white_background": "noise",
    "variance": "noise",
    # ramsey
    "CoherenceDecay": "ramsey",
    "coherence_decay": "ramsey",
    "envelope_for_model": "ramsey",
    "envelope_gaussian_from_acf": "ramsey",
    "envelope_jump": "ramsey",
    "envelope_mc": "ramsey",
    "envelope_ou": "ramsey",
    "envelope_telegraph": "ramsey",
    "make_envelope_callable": "ramsey",
    # scattering
    "ScatterResult": "scattering",
    "apply_white_background": "scattering",
    "laplace_envelope": "scattering",
    "scatter_from_envelope": "scattering",
    "scatter_jump": "scattering",
    "transmittance_ou_series": "scattering",
    "transmittance_quasistatic": "scattering",
    "transmittance_telegraph": "scattering",
    "transmittance_white": "scattering",
    # fano
    "FanoParams": "fano",
    "FanoScatter": "fano",
    "fano_measurements": "fano",
    "fano_recover_envelope": "fano",
    "fano_scatter": "fano",
    "fano_z": "fano",
    # bloch
    "DriveConfig": "bloch",
    "bloch_steady_state": "bloch",
    "flux_conservation": "bloch",
    "output_observables": "bloch",
    "squares_deficit_white": "bloch",
    # inversion
    "RecoveredEnvelope": "inversion",
    "envelope_from_complex_transmittance": "inversion",
    "envelope_from_transmittance": "inversion",
    "kramers_kronig": "inversion",
    # mc_oracle
    "overlap_mc": "mc_oracle",
    "stationary_phase_check": "mc_oracle",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    module_name = _EXPORTS.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))

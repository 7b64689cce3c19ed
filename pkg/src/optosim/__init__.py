"""Phase-space Monte Carlo for pulsed cavity optomechanics.

Submodules load lazily so that the command-line front end can configure the
numba thread pool before numba itself is imported.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "PhysicalParams": "model", "ScaledParams": "model", "PulseEnvelope": "model",
    "paper_preset": "model", "drive_amplitude": "model", "coupling_gain": "model",
    "integrated_gain": "model", "thermal_occupation": "model", "gain_grid": "model",
    "IntegratorConfig": "sde", "PPState": "sde", "WignerState": "sde", "step": "sde",
    "EnsembleConfig": "ensemble", "EnsembleResult": "ensemble", "MomentAccumulator": "ensemble",
    "run_ensemble": "ensemble", "batch_standard_error": "ensemble",
    "QuadCovariance": "estimators", "WitnessReport": "estimators",
    "quad_covariance": "estimators", "entanglement_witness": "estimators",
    "steer_m_given_c": "estimators", "steer_c_given_m": "estimators",
    "witness_vs_r": "estimators",
    "FockConfig": "oracle", "DensityState": "oracle", "evolve_me": "oracle",
    "liouvillian_apply": "oracle",
    "RunConfig": "config", "parse_config": "config", "load_config": "config",
    "load_preset": "config", "resolve_config": "config",
    "run_representation": "runner", "run_command": "runner", "oracle_compare": "runner",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'optosim' has no attribute {name!r}")
    return getattr(importlib.import_module(f"optosim.{mod}"), name)


def __dir__():
    return __all__

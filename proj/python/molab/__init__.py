"""Few-body Coulomb solvers: clamped nuclei, nuclear motion, Born-Huang couplings,
explicitly correlated nonadiabatic states and spectral probes."""

import json as _json

from . import _molab
from ._molab import (  # noqa: F401
    INFINITE_MASS,
    CouplingMatrix,
    Error,
    InvalidInput,
    IoError,
    MolecularSystem,
    NonSelfAdjointRisk,
    PotentialCurve,
    SolverError,
    __version__,
    build_system,
    coupling_matrix,
    experiment_names,
    kappa,
    nuclear_reduced_mass,
    potential_curve,
    refine_minimum,
    solve_coupled,
    solve_two_center,
    spectrum_cover,
    validate_config,
    vibrational_levels,
)


def _pair(result):
    csv, text = result
    return csv, _json.loads(text)


def solve_variational(system, **kw):
    """Nonadiabatic ground state(s); returns the result as a dict."""
    return _json.loads(_molab.solve_variational(system, **kw))


def mass_scan(system, lambdas, mode="molecular", **kw):
    """Returns (csv text, summary dict)."""
    return _pair(_molab.mass_scan(system, [float(x) for x in lambdas], mode, **kw))


def weyl_moments(curve, b, state, sigmas):
    return _pair(_molab.weyl_moments(curve, b, state, sigmas))


def collapse_probe(system, curve, b, sigmas, mode):
    return _pair(_molab.collapse_probe(system, curve, b, sigmas, mode))


def kato_ratio_probe(system, centers, widths, shrinking, shrink_widths):
    return _pair(_molab.kato_ratio_probe(system, centers, widths, shrinking, shrink_widths))


def run_config(path, out=None, seed=None, threads=None):
    """Runs a config file or manifest.json; returns (output_dir, csv text, summary dict)."""
    out_dir, csv, summary = _molab.run_config(path, out, seed, threads)
    return out_dir, csv, _json.loads(summary)

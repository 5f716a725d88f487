"""Shared fixtures: grids, torsion solutions, and the canonical runs.

The three mass-trichotomy runs (epsilon 1e-3) and the deep blow-up run
(epsilon 1e-9, where the capped nonlocal coefficient never saturates below
the blow-up cap) are expensive enough to share across test modules.
"""

import numpy as np
import pytest

import replidyn as rd
from replidyn import diagnostics as diag

EPS = 1e-3


@pytest.fixture(scope="session")
def grid201():
    return rd.build_grid(1, [1.0], [201])


@pytest.fixture(scope="session")
def torsion201(grid201):
    return rd.solve_torsion(grid201)


@pytest.fixture(scope="session")
def subdomain201(grid201):
    return rd.solve_torsion_subdomain(grid201, 0.25)


def trichotomy_params(**overrides):
    base = dict(epsilon=EPS, dt_init=1e-4, dt_max=0.05, t_end=5.0,
                snapshot_stride=20, reaction_cap_c=0.015)
    base.update(overrides)
    return rd.SolverParams(**base)


@pytest.fixture(scope="session")
def run_decay(grid201, torsion201):
    u0 = rd.torsion_profile(grid201, 0.5, EPS, torsion201)
    return rd.run(u0, trichotomy_params(t_end=50.0), torsion201)


@pytest.fixture(scope="session")
def run_critical(grid201, torsion201):
    u0 = rd.torsion_profile(grid201, 1.0, EPS, torsion201)
    return rd.run(u0, trichotomy_params(t_end=5.0), torsion201)


@pytest.fixture(scope="session")
def run_blowup(grid201, torsion201):
    u0 = rd.torsion_profile(grid201, 1.5, EPS, torsion201)
    return rd.run(u0, trichotomy_params(t_end=5.0), torsion201)


@pytest.fixture(scope="session")
def run_deep(grid201, torsion201):
    """Blow-up run at epsilon 1e-9: the nonlocal cap stays unsaturated up to
    the sup cap 1e4, so the growth identities hold all the way there."""
    u0 = rd.torsion_profile(grid201, 1.5, 1e-9, torsion201)
    params = rd.SolverParams(epsilon=1e-9, dt_init=1e-5, dt_max=0.05, t_end=5.0,
                             sup_cap=1e4, snapshot_stride=20, reaction_cap_c=0.015)
    return rd.run(u0, params, torsion201)


def precap_trace(result, frac=0.5):
    trace = result.trace
    mask = trace.precap_mask(result.sup_cap, frac=frac)
    return trace.sliced(mask) if int(mask.sum()) >= 3 else trace


def normalized_mass_residual(result):
    """Max mass-ODE residual normalized by the scale of the equation terms,
    evaluated on unsaturated rows below half the blow-up cap."""
    trace = precap_trace(result)
    residuals, mx = diag.mass_ode_residual(trace)
    y = trace.corrected_mass
    scale = max(float(np.max(np.abs(np.gradient(y, trace.t)))),
                float(np.max(np.abs((y - 1.0) * trace.energy))), 1e-12)
    return mx / scale

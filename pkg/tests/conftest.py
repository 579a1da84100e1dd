"""Shared fixtures: the reference ladder and the bundled scenario runs."""

import numpy as np
import pytest

from wsdirac import (LatticeParams, ModulationSpec, compile_couplings,
                     compute_overlaps, solve_ws, tune_balanced_amplitudes)
from wsdirac.cli import bundled_scenario_dir
from wsdirac.config import load_config
from wsdirac.runner import run_scenario


@pytest.fixture(scope="session")
def ladder():
    return solve_ws(LatticeParams(V1=6.0, F=1.0))


@pytest.fixture(scope="session")
def fig3_spec():
    return ModulationSpec.from_terms([(2, 1, 0, 0.25)])


@pytest.fixture(scope="session")
def fig4_spec():
    return ModulationSpec.from_terms([(2, 1, 0, 0.25), (2, 0, 0, 0.005)])


@pytest.fixture(scope="session")
def overlaps(ladder, fig3_spec):
    return compute_overlaps(ladder, fig3_spec)


@pytest.fixture(scope="session")
def fig3_table(fig3_spec, overlaps):
    return compile_couplings(fig3_spec, overlaps)


@pytest.fixture(scope="session")
def fig4_table(ladder, fig4_spec):
    return compile_couplings(fig4_spec, compute_overlaps(ladder, fig4_spec))


@pytest.fixture(scope="session")
def fig5_setup(ladder):
    spec0 = ModulationSpec.from_terms([(1, 1, 1, -0.03j)], vs_amp=5e-3)
    ov = compute_overlaps(ladder, spec0)
    spec = tune_balanced_amplitudes(spec0, ov, "dirac")
    return spec, compile_couplings(spec, ov)


def _run_bundled(name, tmp_path_factory):
    cfg = load_config(bundled_scenario_dir() / f"{name}.cfg")
    out = tmp_path_factory.mktemp(f"run_{name.replace('-', '_')}")
    return run_scenario(cfg, out), out


@pytest.fixture(scope="session")
def fig3_run(tmp_path_factory):
    return _run_bundled("fig3", tmp_path_factory)


@pytest.fixture(scope="session")
def fig4_run(tmp_path_factory):
    return _run_bundled("fig4", tmp_path_factory)


@pytest.fixture(scope="session")
def fig5_run(tmp_path_factory):
    return _run_bundled("fig5-dirac", tmp_path_factory)


@pytest.fixture(scope="session")
def weyl_run(tmp_path_factory):
    return _run_bundled("weyl-demo", tmp_path_factory)


@pytest.fixture(scope="session")
def band_run(tmp_path_factory):
    return _run_bundled("band-structure", tmp_path_factory)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)

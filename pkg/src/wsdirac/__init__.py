"""Wannier-Stark quantum simulator for one-dimensional Dirac models."""

__version__ = "0.1.0"

from .couplings import (CouplingTable, ModulationSpec, OverlapTable,
                        compile_couplings, compute_overlaps, dense_hamiltonian,
                        drive_potential, tune_balanced_amplitudes)
from .discrete import (BandStructure, KSpaceField, SpinorField, WavepacketInit,
                       band_structure, continuum_residual, envelopes,
                       evolve_discrete, evolve_kblocks, from_kspace,
                       init_wavepacket, step_discrete, to_kspace)
from .exact import (GridWavefunction, density_l2_error, evolve_exact,
                    make_grid, project_to_ws, synthesize_from_spinor)
from .observables import (EffectiveConstants, ZBFit, drift_velocity,
                          effective_constants, fit_zitterbewegung,
                          lockin_amplitude, mean_position, zb_presence)
from .ws_solver import (LatticeParams, WSLadder, solve_ws, translate_state)

__all__ = [name for name in dir() if not name.startswith("_")]

import numpy as np
import pytest

from wsdirac import (ModulationSpec, compile_couplings, compute_overlaps,
                     dense_hamiltonian, drive_potential,
                     tune_balanced_amplitudes)
from wsdirac.couplings import EVEN, ODD, CouplingTable, OverlapTable
from wsdirac.errors import GridMisaligned, ResonanceCollision, ZeroOverlap
from wsdirac.ws_solver import translate_state


def test_overlap_cospi_nearest(overlaps):
    val = overlaps.cospi[("g", "g", 1)]
    assert val < 0  # leans against the tilt
    assert abs(abs(val) - 2.31e-2) < 0.05 * 2.31e-2


def test_overlap_cospi_diagonal(overlaps):
    # E0 / (V2 A0) with E0 = 4.6e-3 at V2 A0 = 0.005
    assert abs(overlaps.cospi[("g", "g", 0)] - 0.92) < 0.05 * 0.92


def test_parity_identity_direct_quadrature(ladder, overlaps):
    phi1 = translate_state(ladder, "g", 1)
    phi2 = translate_state(ladder, "g", 2)
    lhs = float(np.sum(phi1 * np.cos(np.pi * ladder.grid) * phi2) * ladder.dx)
    assert abs(lhs - (-overlaps.cospi[("g", "g", 1)])) < 1e-8


def test_translation_symmetry_identity(overlaps):
    # <e0|cos 2pi x|g_{+1}> = <g0|cos 2pi x|e_{-1}>
    assert overlaps.cos2pi[("e", "g", 1)] == pytest.approx(
        overlaps.cos2pi[("g", "e", -1)], abs=1e-10)


def test_reality_condition_enforced():
    with pytest.raises(ValueError):
        ModulationSpec(amps={(2, 1, 0): 0.25 + 0j})
    with pytest.raises(ValueError):
        ModulationSpec(amps={(2, 1, 0): 0.25, (2, -1, 0): 0.30})


def test_from_terms_symmetrizes():
    spec = ModulationSpec.from_terms([(2, 1, 0, 0.25)])
    assert spec.amp(2, -1, 0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ModulationSpec.from_terms([(2, 0, 0, 0.1j)])


def test_compiled_spinor2_structure(fig3_table):
    up_even = fig3_table.coeff(EVEN, 1, "gg")
    up_odd = fig3_table.coeff(ODD, 1, "gg")
    assert up_even == pytest.approx(-up_odd)
    assert fig3_table.coeff(EVEN, 1, "ge") == 0
    omega2 = fig3_table.hopping("spinor2")
    assert -5.8e-3 <= omega2 <= -5.4e-3


def test_all_zero_amps(overlaps):
    spec = ModulationSpec(amps={})
    table = compile_couplings(spec, overlaps)
    assert table.T == {}
    assert table.rest_mass("spinor2") == 0.0


def test_fig4_rest_mass(fig4_table):
    E0 = fig4_table.rest_mass("spinor2")
    assert abs(E0 - 4.6e-3) < 0.02 * 4.6e-3


def test_fig5_hopping(fig5_setup):
    _, table = fig5_setup
    omega1 = table.hopping("spinor4_dirac")
    assert abs(omega1 - (-1.5e-3)) < 0.10 * 1.5e-3


def test_tune_balance_ratio(fig5_setup):
    spec, _ = fig5_setup
    ratio = abs(spec.amp(1, 1, -1) / spec.amp(1, 1, 1))
    assert abs(ratio - 1.5) < 0.15 * 1.5


def test_tune_postcondition(fig5_setup, overlaps):
    spec, _ = fig5_setup
    lhs = spec.amp(1, 1, 1) * overlaps.cos2pi[("g", "e", 1)]
    rhs = -np.conj(spec.amp(1, 1, -1)) * overlaps.cos2pi[("g", "e", -1)]
    assert abs(lhs - rhs) < 1e-12


def test_tune_idempotence(fig5_setup, overlaps):
    spec, _ = fig5_setup
    again = tune_balanced_amplitudes(spec, overlaps, "dirac")
    assert again.amp(1, 1, -1) == pytest.approx(spec.amp(1, 1, -1), abs=1e-18)


def test_tune_symmetric_overlaps_balanced():
    ov = OverlapTable(
        cos2pi={("g", "e", 1): -0.05, ("g", "e", -1): 0.05},
        cospi={}, vs_diag={"g": 0.0, "e": 0.0}, omega_B=1.0, Delta=5.66)
    spec = ModulationSpec.from_terms([(1, 1, 1, -0.01j)])
    tuned = tune_balanced_amplitudes(spec, ov, "dirac")
    assert abs(tuned.amp(1, 1, -1)) == pytest.approx(abs(tuned.amp(1, 1, 1)))


def test_tune_zero_overlap_error():
    ov = OverlapTable(
        cos2pi={("g", "e", 1): -0.05, ("g", "e", -1): 0.0},
        cospi={}, vs_diag={"g": 0.0, "e": 0.0}, omega_B=1.0, Delta=5.66)
    spec = ModulationSpec.from_terms([(1, 1, 1, -0.01j)])
    with pytest.raises(ZeroOverlap):
        tune_balanced_amplitudes(spec, ov, "dirac")


def test_drive_potential_zero(ladder):
    spec = ModulationSpec(amps={})
    v = drive_potential(spec, ladder.grid, ladder.omega_B, ladder.Delta, 0.3)
    assert np.all(v == 0)


def test_drive_potential_fig3_at_t0(ladder, fig3_spec):
    v = drive_potential(fig3_spec, ladder.grid, ladder.omega_B, ladder.Delta, 0.0)
    np.testing.assert_allclose(v, 0.5 * np.cos(np.pi * ladder.grid), atol=1e-14)


def test_drive_potential_real_for_random_amps(ladder, rng):
    terms = []
    for alpha in (1, 2):
        terms.append((alpha, 0, 0, rng.normal()))
        for j, q in ((0, 1), (1, -1), (1, 0), (1, 1)):
            terms.append((alpha, j, q, rng.normal() + 1j * rng.normal()))
    spec = ModulationSpec.from_terms(terms, vs_amp=rng.normal())
    for t in (0.0, 0.7, 13.9):
        f1 = sum(a * np.exp(1j * (j * 1.0 + q * 5.66) * t)
                 for (al, j, q), a in spec.amps.items() if al == 1)
        assert abs(f1.imag) < 1e-12 * max(1.0, abs(f1))


def test_rotating_wave_bookkeeping(overlaps):
    spec = ModulationSpec.from_terms([(2, 1, 0, 0.25), (1, 1, 0, 0.1)])
    table = compile_couplings(spec, overlaps)
    channels = {key[2] for key in table.T}
    assert channels <= {"gg", "ee"}
    rs = {key[1] for key in table.T}
    assert rs == {1, -1}


def test_hermiticity_dense(fig5_setup, fig4_table):
    for table in (fig4_table, fig5_setup[1]):
        H = dense_hamiltonian(table, 64)
        assert np.max(np.abs(H - H.conj().T)) < 1e-14


def test_parity_sign_rule(overlaps):
    both = ModulationSpec.from_terms([(1, 1, 1, -0.02j), (2, 1, 1, 0.03j)])
    only_cos2pi = ModulationSpec.from_terms([(1, 1, 1, -0.02j)])
    t_both = compile_couplings(both, overlaps)
    t_2pi = compile_couplings(only_cos2pi, overlaps)
    even = t_both.coeff(EVEN, 1, "ge")
    odd = t_both.coeff(ODD, 1, "ge")
    base = t_2pi.coeff(EVEN, 1, "ge")
    # parity flip negates the cos(pi x) part and keeps the cos(2 pi x) part
    assert 0.5 * (even + odd) == pytest.approx(base, abs=1e-15)
    assert t_2pi.coeff(ODD, 1, "ge") == pytest.approx(base, abs=1e-15)


def test_resonance_collision():
    ov = OverlapTable(cos2pi={}, cospi={}, vs_diag={"g": 0.0, "e": 0.0},
                      omega_B=1.0, Delta=2.03)
    with pytest.raises(ResonanceCollision):
        compile_couplings(ModulationSpec(amps={}), ov)


def test_grid_misaligned(ladder, fig3_spec):
    from dataclasses import replace

    bad = replace(ladder, grid=ladder.grid + 0.3 * ladder.dx)
    with pytest.raises(GridMisaligned):
        compute_overlaps(bad, fig3_spec)


def test_truncation_report(overlaps):
    # dominated by <e0|cos 2pi x|e2>, which rides on the excited state's
    # downhill resonance tail
    assert 0 < overlaps.truncation_max() < 0.1


def test_rest_mass_requires_known_model(fig3_table):
    with pytest.raises(ValueError):
        fig3_table.rest_mass("general")


def test_vs_diag_vs_rest_mass(ladder):
    spec = ModulationSpec.from_terms([], vs_amp=5e-3)
    ov = compute_overlaps(ladder, spec)
    table = compile_couplings(spec, ov)
    e0 = table.rest_mass("spinor4_dirac")
    assert e0 == pytest.approx(0.5 * (ov.vs_diag["g"] - ov.vs_diag["e"]))
    assert abs(e0 - 1.6e-3) < 0.02 * 1.6e-3

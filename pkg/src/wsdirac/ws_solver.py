"""Tilted-lattice eigenproblem: Wannier-Stark states of the reference well.

Dimensionless units: length in lattice steps (a = 1), energy in recoil
energies, time in hbar over recoil energy, reduced mass m* = pi^2/2.
The static Hamiltonian is  H0 = p^2/(2 m*) - V1 cos(2 pi x) + F x.

The two lowest states localized in a chosen reference well are extracted
from a hard-wall box diagonalization (metastable Wannier-Stark states are
treated as bound; their lifetimes exceed any run length used here).  All
other sites follow by translation:  phi_n(x) = phi_0(x - n), with energies
E_n = E_0 + n * omega_B and omega_B = F.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import DegenerateLadder, NoBoundExcitedState, OutOfDomain

M_STAR = np.pi**2 / 2.0

# Selection keeps box eigenvectors whose weight outside the reference well
# and its two neighbors stays below this; the excited state carries a real
# downhill resonance tail of a few 1e-3 at typical parameters, so the bound
# is a selection filter, not a physical localization claim.
SELECT_LOC_TOL = 0.05


@dataclass(frozen=True)
class LatticeParams:
    """Static lattice: depth V1, tilt F, and the numerical grid."""

    V1: float
    F: float
    grid_points_per_well: int = 32
    domain_half_width: int = 8
    m_star: float = M_STAR

    def __post_init__(self):
        if self.V1 <= 0:
            raise ValueError(f"V1 must be positive, got {self.V1}")
        if self.F <= 0:
            raise ValueError(f"F must be positive, got {self.F}")
        if self.grid_points_per_well < 32:
            raise ValueError("grid_points_per_well must be at least 32")
        if self.domain_half_width < 4:
            raise ValueError("domain_half_width must be at least 4")

    @property
    def dx(self) -> float:
        return 1.0 / self.grid_points_per_well


@dataclass(frozen=True)
class WSLadder:
    """Reference-well Wannier-Stark pair and the ladder it generates."""

    params: LatticeParams
    grid: np.ndarray
    phi_g: np.ndarray
    phi_e: np.ndarray
    E_g: float
    Delta: float
    omega_B: float
    center: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dx(self) -> float:
        return self.params.dx

    @property
    def E_e(self) -> float:
        return self.E_g + self.Delta

    def energy(self, ell: str, n: int) -> float:
        """Ladder energy E_n^ell = E_0^ell + n * omega_B."""
        base = self.E_g if ell == "g" else self.E_e
        return base + n * self.omega_B

    def state(self, ell: str) -> np.ndarray:
        return self.phi_g if ell == "g" else self.phi_e

    def localization_defect(self, ell: str) -> float:
        """Probability weight outside wells {center-1, center, center+1}."""
        phi = self.state(ell)
        inside = np.abs(self.grid - self.center) <= 1.5
        return 1.0 - float(np.sum(phi[inside] ** 2) * self.dx)


def _sine_dvr_kinetic(n_interior: int, length: float, m: float) -> np.ndarray:
    """Colbert-Miller sine-DVR kinetic matrix for a hard-wall box."""
    N = n_interior + 1
    i = np.arange(1, N)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    pref = np.pi**2 / (4.0 * m * length**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = pref * (-1.0) ** (ii - jj) * (
            1.0 / np.sin(np.pi * (ii - jj) / (2 * N)) ** 2
            - 1.0 / np.sin(np.pi * (ii + jj) / (2 * N)) ** 2
        )
    T = np.where(ii == jj, 0.0, off)
    diag = pref * ((2.0 * N**2 + 1.0) / 3.0 - 1.0 / np.sin(np.pi * i / N) ** 2)
    T[np.arange(n_interior), np.arange(n_interior)] = diag
    return T


def ws_potential(params: LatticeParams, x: np.ndarray) -> np.ndarray:
    return -params.V1 * np.cos(2 * np.pi * x) + params.F * x


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def solve_ws(params: LatticeParams, center: int = 0,
             degeneracy_tol: float = 0.05) -> WSLadder:
    """Diagonalize H0 on a hard-wall box and pick the reference-well pair.

    Box eigenvectors are binned by their position expectation; within the
    bin at `center` the two lowest localized states define the ground and
    excited ladder heads.  Each state's global sign is fixed so its sample
    of largest magnitude is positive.
    """
    W = params.domain_half_width
    gppw = params.grid_points_per_well
    a, b = center - W, center + W
    n_sub = 2 * W * gppw
    dx = (b - a) / n_sub
    x = a + dx * np.arange(1, n_sub)

    H = _sine_dvr_kinetic(n_sub - 1, b - a, params.m_star)
    V = ws_potential(params, x)
    idx = np.arange(n_sub - 1)
    H[idx, idx] += V

    # window wide enough for both reference states: from the global potential
    # minimum up past the barrier top near the reference well
    lo = float(V.min()) - 1.0
    hi = center * params.F + params.V1 + max(1.0, params.F)
    evals, evecs = eigh(H, subset_by_value=(lo, hi))
    evecs = evecs / np.sqrt(dx)

    picked = []
    for k in range(len(evals)):
        phi = evecs[:, k]
        w = phi**2 * dx
        xm = float(np.sum(x * w))
        if abs(xm - center) > 0.45:
            continue
        w_in = float(np.sum(w[np.abs(x - center) <= 1.5]))
        if 1.0 - w_in > SELECT_LOC_TOL:
            continue
        picked.append((float(evals[k]), phi))
    picked.sort(key=lambda t: t[0])

    if len(picked) < 2:
        raise NoBoundExcitedState(
            f"found {len(picked)} localized state(s) in well {center} for "
            f"V1={params.V1}, F={params.F}; need a ground and an excited state"
        )

    E_g, phi_g = picked[0]
    E_e, phi_e = picked[1]
    phi_g = phi_g.copy()
    phi_e = phi_e.copy()
    for phi in (phi_g, phi_e):
        if phi[np.argmax(np.abs(phi))] < 0:
            phi *= -1.0

    omega_B = params.F
    Delta = E_e - E_g
    if Delta <= omega_B:
        raise DegenerateLadder(
            f"gap Delta={Delta:.4f} does not exceed omega_B={omega_B:.4f}"
        )
    nearest = round(Delta / omega_B) * omega_B
    if abs(Delta - nearest) < degeneracy_tol:
        raise DegenerateLadder(
            f"Delta={Delta:.4f} within {degeneracy_tol} of {nearest:.4f} "
            f"(multiple of omega_B={omega_B})"
        )

    ladder = WSLadder(
        params=params,
        grid=_freeze(x),
        phi_g=_freeze(phi_g),
        phi_e=_freeze(phi_e),
        E_g=E_g,
        Delta=Delta,
        omega_B=omega_B,
        center=center,
    )
    ladder.meta["loc_defect_g"] = ladder.localization_defect("g")
    ladder.meta["loc_defect_e"] = ladder.localization_defect("e")
    return ladder


def shift_samples(phi: np.ndarray, n_steps: int, gppw: int) -> np.ndarray:
    """Shift a sampled state by an integer number of lattice steps (zero fill)."""
    out = np.zeros_like(phi)
    k = n_steps * gppw
    if k == 0:
        out[:] = phi
    elif k > 0:
        out[k:] = phi[:-k]
    else:
        out[:k] = phi[-k:]
    return out


def translate_state(ladder: WSLadder, ell: str, n: int) -> np.ndarray:
    """Samples of phi_n^ell(x) = phi_0^ell(x - n) on the ladder grid."""
    if abs(n) > ladder.params.domain_half_width - 2:
        raise OutOfDomain(
            f"translation by {n} steps leaves the grid "
            f"(half width {ladder.params.domain_half_width})"
        )
    return shift_samples(ladder.state(ell), n, ladder.params.grid_points_per_well)


def dump_states(ladder: WSLadder, path) -> None:
    """Write the reference states as a text table: x, phi_g, phi_e."""
    from .tables import write_table

    write_table(
        path,
        ["reference Wannier-Stark states",
         f"V1={ladder.params.V1} F={ladder.params.F} "
         f"E_g={ladder.E_g:.9f} Delta={ladder.Delta:.9f}"],
        ["x", "phi_g", "phi_e"],
        np.column_stack([ladder.grid, ladder.phi_g, ladder.phi_e]),
    )

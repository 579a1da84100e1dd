"""Temporal modulation of the tilted lattice and its compiled coupling tables.

The drive is
    Hbar(x, t) = -V1_mod cos(2 pi x) f1(t) + V2_mod cos(pi x) f2(t) + Vs(x),
    f_alpha(t) = sum_{j,q} A_{j,q}^{(alpha)} exp(i (j omega_B + q Delta) t),
    Vs(x)      = Vs_amp cos(4 pi x).

Resonance selection keeps the term A_{j,q} in the hopping channel that it
bridges: j sets the well offset r = j, q = 0 stays within a ladder, q = +1
drives g -> e and q = -1 drives e -> g.  Double-period terms (cos pi x)
carry an extra (-1)^n sign on the source site n.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridMisaligned, ResonanceCollision, ZeroOverlap
from .ws_solver import WSLadder, translate_state

CHANNELS = ("gg", "ee", "ge", "eg")
_CHANNEL_Q = {"gg": 0, "ee": 0, "ge": +1, "eg": -1}
_CHANNEL_BRAKET = {"gg": ("g", "g"), "ee": ("e", "e"), "ge": ("g", "e"), "eg": ("e", "g")}
EVEN, ODD = 0, 1


def _as_key(alpha, j, q):
    if alpha not in (1, 2):
        raise ValueError(f"modulation index alpha must be 1 or 2, got {alpha}")
    if q not in (-1, 0, 1):
        raise ValueError(f"ladder index q must be -1, 0 or +1, got {q}")
    return (int(alpha), int(j), int(q))


@dataclass(frozen=True)
class ModulationSpec:
    """Amplitude table A_{j,q}^{(alpha)} plus the static double-frequency term."""

    amps: dict
    V1_mod: float = 1.0
    V2_mod: float = 1.0
    Vs_amp: float = 0.0

    def __post_init__(self):
        clean = {}
        for key, val in self.amps.items():
            clean[_as_key(*key)] = complex(val)
        object.__setattr__(self, "amps", clean)
        for (alpha, j, q), val in clean.items():
            partner = clean.get((alpha, -j, -q))
            if partner is None or abs(partner - np.conj(val)) > 1e-12 * max(1.0, abs(val)):
                raise ValueError(
                    f"reality condition broken for A[{alpha},{j},{q}]: "
                    f"needs A[{alpha},{-j},{-q}] = conj(A[{alpha},{j},{q}])"
                )

    @classmethod
    def from_terms(cls, terms, vs_amp: float = 0.0,
                   v1_mod: float = 1.0, v2_mod: float = 1.0) -> "ModulationSpec":
        """Build from one-sided terms; conjugate partners are filled in."""
        amps = {}
        for alpha, j, q, val in terms:
            key = _as_key(alpha, j, q)
            val = complex(val)
            if key == (alpha, 0, 0) and abs(val.imag) > 1e-15 * max(1.0, abs(val)):
                raise ValueError("the static (j=0, q=0) amplitude must be real")
            if key in amps and abs(amps[key] - val) > 1e-15:
                raise ValueError(f"duplicate term {key} with conflicting values")
            amps[key] = val
            amps.setdefault((alpha, -j, -q), np.conj(val))
        return cls(amps=amps, Vs_amp=vs_amp, V1_mod=v1_mod, V2_mod=v2_mod)

    def amp(self, alpha: int, j: int, q: int) -> complex:
        return self.amps.get((alpha, j, q), 0j)

    def f(self, alpha: int, t: float, omega_B: float, Delta: float) -> float:
        """Modulation waveform f_alpha(t); real by the stored symmetry."""
        total = 0j
        for (a, j, q), val in self.amps.items():
            if a == alpha:
                total += val * np.exp(1j * (j * omega_B + q * Delta) * t)
        return float(total.real)


@dataclass(frozen=True)
class OverlapTable:
    """Quadrature overlaps of the reference pair against its translates."""

    cos2pi: dict
    cospi: dict
    vs_diag: dict
    omega_B: float
    Delta: float
    r_max: int = 2

    def get(self, family: str, a: str, b: str, r: int) -> float:
        table = self.cos2pi if family == "cos2pi" else self.cospi
        return table[(a, b, r)]

    def truncation_max(self) -> float:
        """Largest dropped |r| = 2 overlap magnitude (nearest-neighbor scope)."""
        vals = [abs(v) for (a, b, r), v in {**self.cos2pi, **self.cospi}.items()
                if abs(r) == 2]
        return max(vals)


def compute_overlaps(ladder: WSLadder, spec: ModulationSpec) -> OverlapTable:
    """Quadrature of <phi_0^a | cos(k pi x) | phi_r^b> for r in [-2, 2]."""
    x = ladder.grid
    dx = ladder.dx
    gppw = ladder.params.grid_points_per_well
    if abs(round(1.0 / dx) - 1.0 / dx) > 1e-9:
        raise GridMisaligned("grid spacing does not divide the lattice step")
    # well centers must sit on grid points for the index-shift translations
    offset = (x[0] - round(x[0] / dx) * dx)
    if abs(offset) > 1e-9 * dx:
        raise GridMisaligned("well centers are not aligned with grid points")

    c2 = np.cos(2 * np.pi * x)
    c1 = np.cos(np.pi * x)
    c4 = np.cos(4 * np.pi * x)
    states = {"g": ladder.phi_g, "e": ladder.phi_e}

    cos2pi, cospi = {}, {}
    for a in "ge":
        for b in "ge":
            for r in range(-2, 3):
                ket = translate_state(ladder, b, r)
                cos2pi[(a, b, r)] = float(np.sum(states[a] * c2 * ket) * dx)
                cospi[(a, b, r)] = float(np.sum(states[a] * c1 * ket) * dx)
    vs_diag = {ell: spec.Vs_amp * float(np.sum(states[ell] ** 2 * c4) * dx)
               for ell in "ge"}

    table = OverlapTable(cos2pi=cos2pi, cospi=cospi, vs_diag=vs_diag,
                         omega_B=ladder.omega_B, Delta=ladder.Delta)
    _check_identities(table, gppw, ladder)
    return table


def _check_identities(table: OverlapTable, gppw: int, ladder: WSLadder) -> None:
    """Spot-check the translation/parity identities the compiler relies on."""
    x = ladder.grid
    dx = ladder.dx
    c1 = np.cos(np.pi * x)
    phi1g = translate_state(ladder, "g", 1)
    phi2g = translate_state(ladder, "g", 2)
    lhs = float(np.sum(phi1g * c1 * phi2g) * dx)
    rhs = -table.cospi[("g", "g", 1)]
    if abs(lhs - rhs) > 1e-8:
        raise GridMisaligned(
            f"parity identity violated ({lhs:.3e} vs {rhs:.3e}); "
            "grid does not sample cos(pi x) commensurately"
        )


@dataclass(frozen=True)
class CouplingTable:
    """Resonant coefficients T_{n,r}^{ab}, resolved by source-site parity."""

    T: dict
    omega_B: float
    Delta: float
    vs_mean: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def coeff(self, parity: int, r: int, channel: str) -> complex:
        return self.T.get((parity, r, channel), 0j)

    def rest_mass(self, model: str) -> float:
        """Scalar mass parameter of the reduced model."""
        if model == "spinor2":
            return 0.5 * (self.coeff(EVEN, 0, "gg") - self.coeff(ODD, 0, "gg")).real
        if model == "spinor4_dirac":
            gg = 0.5 * (self.coeff(EVEN, 0, "gg") + self.coeff(ODD, 0, "gg")).real
            ee = 0.5 * (self.coeff(EVEN, 0, "ee") + self.coeff(ODD, 0, "ee")).real
            return 0.5 * (gg - ee)
        if model == "spinor4_weyl":
            return self.coeff(EVEN, 0, "ge").real
        raise ValueError(f"no rest-mass rule for model {model!r}")

    def hopping(self, model: str) -> float:
        """Hopping frequency of the reduced model (Omega2, Omega1 or OmegaW)."""
        if model == "spinor2":
            return self.coeff(EVEN, 1, "gg").real
        if model in ("spinor4_dirac", "spinor4_weyl"):
            return (self.coeff(EVEN, 1, "ge") / 1j).real
        raise ValueError(f"no hopping rule for model {model!r}")


def compile_couplings(spec: ModulationSpec, overlaps: OverlapTable,
                      collision_tol: float = 0.05) -> CouplingTable:
    """Rotating-wave coupling table from the amplitude and overlap tables.

    Keeps only resonant terms (j = r, q matched to the channel) within the
    nearest-neighbor scope |r| <= 1.  cos(pi x) contributions flip sign with
    the source-site parity; the static Vs term sits on the r = 0 diagonal.
    """
    omega_B, Delta = overlaps.omega_B, overlaps.Delta
    for j in range(-2, 3):
        if abs(Delta - j * omega_B) < collision_tol:
            raise ResonanceCollision(
                f"Delta={Delta:.4f} within {collision_tol} of {j}*omega_B; "
                "intra- and inter-ladder resonances would mix"
            )

    T = {}
    for channel in CHANNELS:
        q = _CHANNEL_Q[channel]
        a, b = _CHANNEL_BRAKET[channel]
        for r in (-1, 0, 1):
            base = 0j
            base += -spec.V1_mod * spec.amp(1, r, q) * overlaps.cos2pi[(a, b, r)]
            flip = spec.V2_mod * spec.amp(2, r, q) * overlaps.cospi[(a, b, r)]
            if channel in ("gg", "ee") and r == 0:
                base += overlaps.vs_diag[a]
            for parity, sign in ((EVEN, 1.0), (ODD, -1.0)):
                val = base + sign * flip
                if val != 0:
                    T[(parity, r, channel)] = val

    vs_mean = 0.5 * (overlaps.vs_diag["g"] + overlaps.vs_diag["e"])
    table = CouplingTable(T=T, omega_B=omega_B, Delta=Delta, vs_mean=vs_mean)
    table.meta["truncation_max_overlap"] = overlaps.truncation_max()
    return table


def tune_balanced_amplitudes(spec: ModulationSpec, overlaps: OverlapTable,
                             channel: str) -> ModulationSpec:
    """Rescale A_{1,-1} so the two inter-ladder hops compensate exactly.

    The balanced condition  A_{1,1} ov(+1) = -conj(A_{1,-1}) ov(-1)  removes
    the asymmetry between uphill and downhill overlap integrals; `channel`
    picks the overlap family: "dirac" uses cos(2 pi x), "weyl" cos(pi x).
    """
    if channel == "dirac":
        alpha, family = 1, "cos2pi"
    elif channel == "weyl":
        alpha, family = 2, "cospi"
    else:
        raise ValueError(f"channel must be 'dirac' or 'weyl', got {channel!r}")

    ov_p = overlaps.get(family, "g", "e", 1)
    ov_m = overlaps.get(family, "g", "e", -1)
    if abs(ov_p) < 1e-12 or abs(ov_m) < 1e-12:
        raise ZeroOverlap(
            f"cannot balance {channel} amplitudes: overlaps {ov_p:.2e}, {ov_m:.2e}"
        )
    a_up = spec.amp(alpha, 1, 1)
    if a_up == 0:
        raise ZeroOverlap(f"no A[{alpha},1,1] amplitude to balance against")

    a_down = np.conj(-a_up * ov_p / ov_m)
    amps = dict(spec.amps)
    amps[(alpha, 1, -1)] = a_down
    amps[(alpha, -1, 1)] = np.conj(a_down)
    return replace(spec, amps=amps)


def drive_potential(spec: ModulationSpec, x: np.ndarray,
                    omega_B: float, Delta: float, t: float) -> np.ndarray:
    """Hbar(x, t) sampled on x; real by the amplitude reality condition."""
    out = spec.Vs_amp * np.cos(4 * np.pi * x)
    f1 = spec.f(1, t, omega_B, Delta)
    if f1 != 0.0:
        out = out - spec.V1_mod * f1 * np.cos(2 * np.pi * x)
    f2 = spec.f(2, t, omega_B, Delta)
    if f2 != 0.0:
        out = out + spec.V2_mod * f2 * np.cos(np.pi * x)
    return out


def dense_hamiltonian(table: CouplingTable, n_sites: int) -> np.ndarray:
    """Effective tight-binding matrix over [c_n | d_n] blocks (diagnostics)."""
    sites = np.arange(-(n_sites // 2), n_sites - n_sites // 2)
    H = np.zeros((2 * n_sites, 2 * n_sites), dtype=complex)
    block = {"gg": (0, 0), "ge": (0, 1), "eg": (1, 0), "ee": (1, 1)}
    for i, n in enumerate(sites):
        parity = n % 2
        for (par, r, channel), val in table.T.items():
            if par != parity:
                continue
            j = i + r
            if not 0 <= j < n_sites:
                continue
            bi, bj = block[channel]
            H[bi * n_sites + i, bj * n_sites + j] += val
    return H


def dump_overlaps(table: OverlapTable, path) -> None:
    """Write the overlap table as text rows: family, a, b, r, value."""
    rows = []
    for family, data in (("cos2pi", table.cos2pi), ("cospi", table.cospi)):
        for (a, b, r), val in sorted(data.items()):
            rows.append((family, a, b, r, f"{val:.12e}"))
    for ell, val in sorted(table.vs_diag.items()):
        rows.append(("vs_diag", ell, ell, 0, f"{val:.12e}"))
    path = str(path)
    with open(path, "w") as fh:
        fh.write("# overlap integrals of reference states\n")
        fh.write("# family\ta\tb\tr\tvalue\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")

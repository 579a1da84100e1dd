"""Scenario configuration: TOML schema, validation, canonical hashing.

Documented keys
---------------
scenario            string, required
description         string, optional
seed                integer, optional (recorded; runs are deterministic)

[lattice]           v1, f, grid_points_per_well, half_width
[modulation]        terms = [{alpha, j, q, re, im}], vs_amp,
                    v1_mod, v2_mod (defaults 1.0), balance ("none"|"dirac"|"weyl")
[packet]            a_plus, a_minus, b_plus, b_minus, k0, sigma
[run]               model (general|spinor2|spinor4_dirac|spinor4_weyl),
                    engine (discrete|exact|both), t_final_tb, stride_tb,
                    dt_tb, n_sites, exact_domain_steps, absorber,
                    snapshots_tb, trajectory_stride_tb,
                    suppressed_companion, weyl_pair
[tolerances.NAME]   target+rtol, target+atol, max, and/or min

Modulation amplitudes are stated as the full products multiplying the
spatial harmonics (v1_mod/v2_mod stay at 1 unless a split is wanted).
Unknown keys anywhere are errors.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .couplings import ModulationSpec
from .discrete import MODELS, WavepacketInit
from .errors import ParseError, ValidationError
from .ws_solver import LatticeParams

ENGINES = ("discrete", "exact", "both")
BALANCE = ("none", "dirac", "weyl")

_TOP_KEYS = {"scenario", "description", "seed", "lattice", "modulation",
             "packet", "run", "tolerances"}
_LATTICE_KEYS = {"v1", "f", "grid_points_per_well", "half_width"}
_MODULATION_KEYS = {"terms", "vs_amp", "v1_mod", "v2_mod", "balance"}
_TERM_KEYS = {"alpha", "j", "q", "re", "im"}
_PACKET_KEYS = {"a_plus", "a_minus", "b_plus", "b_minus", "k0", "sigma"}
_RUN_KEYS = {"model", "engine", "t_final_tb", "stride_tb", "dt_tb", "n_sites",
             "exact_domain_steps", "absorber", "snapshots_tb",
             "trajectory_stride_tb", "suppressed_companion", "weyl_pair"}
_TOL_KEYS = {"target", "rtol", "atol", "max", "min"}


@dataclass(frozen=True)
class Tolerance:
    target: float | None = None
    rtol: float | None = None
    atol: float | None = None
    max: float | None = None
    min: float | None = None

    def check(self, value: float) -> bool:
        ok = True
        if self.target is not None:
            if self.rtol is not None:
                ok &= abs(value - self.target) <= self.rtol * abs(self.target)
            if self.atol is not None:
                ok &= abs(value - self.target) <= self.atol
        if self.max is not None:
            ok &= value <= self.max
        if self.min is not None:
            ok &= value >= self.min
        return bool(ok)

    def describe(self) -> str:
        parts = []
        if self.target is not None:
            if self.rtol is not None:
                parts.append(f"{self.target:g} +-{100 * self.rtol:g}%")
            if self.atol is not None:
                parts.append(f"{self.target:g} +-{self.atol:g}")
        if self.min is not None:
            parts.append(f">= {self.min:g}")
        if self.max is not None:
            parts.append(f"<= {self.max:g}")
        return ", ".join(parts) if parts else "(none)"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    description: str
    lattice: LatticeParams
    modulation: ModulationSpec
    balance: str
    packet: WavepacketInit
    model: str
    engine: str
    t_final_tb: float
    stride_tb: float
    dt_tb: float
    n_sites: int
    exact_domain_steps: int
    absorber: bool
    snapshots_tb: tuple
    trajectory_stride_tb: float
    suppressed_companion: bool
    weyl_pair: bool
    tolerances: dict
    seed: int | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def canonical_dict(self) -> dict:
        return self.raw

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _require_keys(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValidationError(
            f"unknown key(s) {sorted(unknown)} in {context}; "
            f"allowed: {sorted(allowed)}"
        )


def _need(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValidationError(f"missing required key '{key}' in {context}")
    return mapping[key]


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file; unknown keys are errors."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not data:
        raise ParseError(f"{path}: empty configuration")
    return config_from_dict(data, source=str(path))


def config_from_dict(data: dict, source: str = "<dict>") -> ScenarioConfig:
    _require_keys(data, _TOP_KEYS, source)
    scenario = _need(data, "scenario", source)
    if not isinstance(scenario, str) or not scenario:
        raise ValidationError("scenario name must be a non-empty string")
    description = data.get("description", "")
    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ValidationError("seed must be an integer")

    lat = _need(data, "lattice", source)
    _require_keys(lat, _LATTICE_KEYS, "lattice")
    try:
        lattice = LatticeParams(
            V1=float(_need(lat, "v1", "lattice")),
            F=float(_need(lat, "f", "lattice")),
            grid_points_per_well=int(lat.get("grid_points_per_well", 32)),
            domain_half_width=int(lat.get("half_width", 8)),
        )
    except ValueError as exc:
        raise ValidationError(f"lattice: {exc}") from exc

    mod = data.get("modulation", {})
    _require_keys(mod, _MODULATION_KEYS, "modulation")
    terms = []
    for i, term in enumerate(mod.get("terms", [])):
        _require_keys(term, _TERM_KEYS, f"modulation.terms[{i}]")
        terms.append((
            int(_need(term, "alpha", f"modulation.terms[{i}]")),
            int(_need(term, "j", f"modulation.terms[{i}]")),
            int(_need(term, "q", f"modulation.terms[{i}]")),
            complex(float(term.get("re", 0.0)), float(term.get("im", 0.0))),
        ))
    balance = mod.get("balance", "none")
    if balance not in BALANCE:
        raise ValidationError(f"modulation.balance must be one of {BALANCE}")
    try:
        modulation = ModulationSpec.from_terms(
            terms,
            vs_amp=float(mod.get("vs_amp", 0.0)),
            v1_mod=float(mod.get("v1_mod", 1.0)),
            v2_mod=float(mod.get("v2_mod", 1.0)),
        )
    except ValueError as exc:
        raise ValidationError(f"modulation: {exc}") from exc

    pk = data.get("packet", {})
    _require_keys(pk, _PACKET_KEYS, "packet")
    if not any(k in pk for k in ("a_plus", "a_minus", "b_plus", "b_minus")):
        pk = dict(pk, a_plus=1.0)  # default: ground-ladder even-site packet
    try:
        packet = WavepacketInit(
            a_plus=float(pk.get("a_plus", 0.0)),
            a_minus=float(pk.get("a_minus", 0.0)),
            b_plus=float(pk.get("b_plus", 0.0)),
            b_minus=float(pk.get("b_minus", 0.0)),
            k0=float(pk.get("k0", 0.0)),
            sigma=float(pk.get("sigma", 10.0)),
        )
    except ValueError as exc:
        raise ValidationError(f"packet: {exc}") from exc

    run = _need(data, "run", source)
    _require_keys(run, _RUN_KEYS, "run")
    model = run.get("model", "spinor2")
    if model not in MODELS:
        raise ValidationError(f"run.model must be one of {MODELS}, got {model!r}")
    engine = run.get("engine", "discrete")
    if engine not in ENGINES:
        raise ValidationError(f"run.engine must be one of {ENGINES}, got {engine!r}")
    t_final_tb = float(run.get("t_final_tb", 0.0))
    if t_final_tb < 0:
        raise ValidationError("run.t_final_tb must be non-negative")
    snapshots = tuple(float(v) for v in run.get("snapshots_tb", ()))

    tols = {}
    tol_section = data.get("tolerances", {})
    for name, body in tol_section.items():
        _require_keys(body, _TOL_KEYS, f"tolerances.{name}")
        tol = Tolerance(
            target=_maybe_float(body, "target"),
            rtol=_maybe_float(body, "rtol"),
            atol=_maybe_float(body, "atol"),
            max=_maybe_float(body, "max"),
            min=_maybe_float(body, "min"),
        )
        if tol.target is None and tol.max is None and tol.min is None:
            raise ValidationError(f"tolerances.{name}: no bound given")
        if tol.target is not None and tol.rtol is None and tol.atol is None:
            raise ValidationError(f"tolerances.{name}: target needs rtol or atol")
        tols[name] = tol

    raw = _canonicalize(data)
    return ScenarioConfig(
        scenario=scenario,
        description=description,
        lattice=lattice,
        modulation=modulation,
        balance=balance,
        packet=packet,
        model=model,
        engine=engine,
        t_final_tb=t_final_tb,
        stride_tb=float(run.get("stride_tb", 1.0)),
        dt_tb=float(run.get("dt_tb", 0.01)),
        n_sites=int(run.get("n_sites", 256)),
        exact_domain_steps=int(run.get("exact_domain_steps", 64)),
        absorber=bool(run.get("absorber", False)),
        snapshots_tb=snapshots,
        trajectory_stride_tb=float(run.get("trajectory_stride_tb", 10.0)),
        suppressed_companion=bool(run.get("suppressed_companion", False)),
        weyl_pair=bool(run.get("weyl_pair", False)),
        tolerances=tols,
        seed=seed,
        raw=raw,
    )


def _maybe_float(mapping: dict, key: str):
    return float(mapping[key]) if key in mapping else None


def _canonicalize(obj):
    """JSON-ready copy with deterministic structure for hashing."""
    if isinstance(obj, dict):
        return {str(k): _canonicalize(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_canonicalize(v) for v in obj]
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, float, str)):
        return obj
    raise ValidationError(f"unsupported config value type {type(obj).__name__}")

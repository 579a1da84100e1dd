"""Scenario orchestration: solve, compile, evolve, analyze, report.

A scenario run wires the modules end to end, writes plain-text artifacts
plus a JSON manifest with file hashes, and grades the metrics named in the
config's tolerances block.  Identical configs produce bit-identical data
tables (single-threaded deterministic numerics; timestamps live only in
the manifest).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .couplings import (compile_couplings, compute_overlaps, dump_overlaps,
                        tune_balanced_amplitudes)
from .discrete import band_structure, evolve_discrete, init_wavepacket
from .errors import ValidationError
from .exact import (density_l2_error, dump_snapshot, evolve_exact, make_grid,
                    synthesize_from_spinor)
from .observables import (fit_zitterbewegung, lockin_amplitude,
                          sign_split_centroids, splitting_speed)
from .tables import write_table
from .ws_solver import dump_states, solve_ws

REDUCED_MODELS = ("spinor2", "spinor4_dirac", "spinor4_weyl")


@dataclass
class RunManifest:
    scenario: str
    config_hash: str
    version: str
    started_at: str
    finished_at: str
    files: dict
    metrics: dict
    all_passed: bool

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "files": self.files,
            "metrics": self.metrics,
            "all_passed": self.all_passed,
        }


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _isoformat(ts: float) -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(ts))


class _RunState:
    """Everything a metric extractor might need, produced lazily."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.ladder = None
        self.overlaps = None
        self.spec = None
        self.table = None
        self.field0 = None
        self.discrete = None
        self.exact = None
        self.suppressed = None
        self.weyl_b = None
        self.E0 = None
        self.Omega = None
        self.T_B = None
        self.band = None


def _prepare(state: _RunState) -> None:
    cfg = state.config
    state.ladder = solve_ws(cfg.lattice)
    state.T_B = 2 * np.pi / state.ladder.omega_B
    state.spec = cfg.modulation
    state.overlaps = compute_overlaps(state.ladder, state.spec)
    if cfg.balance != "none":
        state.spec = tune_balanced_amplitudes(state.spec, state.overlaps, cfg.balance)
    state.table = compile_couplings(state.spec, state.overlaps)
    if cfg.model in REDUCED_MODELS:
        state.E0 = state.table.rest_mass(cfg.model)
        state.Omega = state.table.hopping(cfg.model)
        k = np.linspace(-np.pi, np.pi, 513)[1:]
        state.band = band_structure(state.E0, state.Omega, k)


def _snapshot_times(cfg: ScenarioConfig, T_B: float):
    times = set(float(t) * T_B for t in cfg.snapshots_tb)
    if cfg.t_final_tb > 0 and cfg.trajectory_stride_tb > 0:
        n = int(cfg.t_final_tb / cfg.trajectory_stride_tb)
        times.update(k * cfg.trajectory_stride_tb * T_B for k in range(n + 1))
        times.add(cfg.t_final_tb * T_B)
    return tuple(sorted(times))


def _run_engines(state: _RunState) -> None:
    cfg = state.config
    if cfg.t_final_tb <= 0:
        return
    T_B = state.T_B
    t_final = cfg.t_final_tb * T_B
    snaps = _snapshot_times(cfg, T_B)
    state.field0 = init_wavepacket(cfg.packet, cfg.n_sites)

    if cfg.engine in ("discrete", "both"):
        state.discrete = evolve_discrete(
            state.field0, state.table, cfg.model, t_final,
            dt=cfg.dt_tb * T_B, sample_every=cfg.stride_tb * T_B,
            snapshot_times=snaps,
        )
        if cfg.suppressed_companion:
            flipped = replace(cfg.packet, a_minus=-cfg.packet.a_minus)
            sup0 = init_wavepacket(flipped, cfg.n_sites)
            state.suppressed = evolve_discrete(
                sup0, state.table, cfg.model, t_final,
                dt=cfg.dt_tb * T_B, sample_every=cfg.stride_tb * T_B,
            )
        if cfg.weyl_pair:
            mirrored = replace(
                cfg.packet,
                a_plus=cfg.packet.b_plus, b_plus=cfg.packet.a_plus,
                a_minus=cfg.packet.b_minus, b_minus=cfg.packet.a_minus,
            )
            mir0 = init_wavepacket(mirrored, cfg.n_sites)
            state.weyl_b = evolve_discrete(
                mir0, state.table, cfg.model, t_final,
                dt=cfg.dt_tb * T_B, sample_every=cfg.stride_tb * T_B,
            )

    if cfg.engine in ("exact", "both"):
        grid = make_grid(state.ladder, cfg.exact_domain_steps)
        # tails below 1e-9 carry < 1e-18 weight; clipping them keeps the
        # domain size set by physics rather than by float underflow
        psi0 = synthesize_from_spinor(state.field0, state.ladder, x=grid,
                                      support_floor=1e-9)
        # grid snapshots only at the configured times (plus the end point,
        # which the engine comparison needs); the dense sampling lives in
        # the projected site amplitudes
        exact_snaps = tuple(sorted({float(ts) * T_B for ts in cfg.snapshots_tb}
                                   | {t_final}))
        state.exact = evolve_exact(
            psi0, state.ladder, state.spec, t_final,
            sample_every=cfg.stride_tb * T_B,
            snapshot_times=exact_snaps,
            absorber=cfg.absorber,
            project_sites=state.field0.sites,
        )


# --- metric extractors -------------------------------------------------------

def _projected_series(state: _RunState):
    fields = state.exact.projected
    times = np.array([f.t for f in fields])
    dens = np.array([f.site_density() for f in fields])
    norms = dens.sum(axis=1)
    mean_x = (dens * fields[0].sites).sum(axis=1) / norms
    return times, mean_x, dens


def _drift_speed(times, densities, sites) -> float:
    n = len(times)
    lo = (2 * n) // 3
    window = slice(lo, n)
    cl, cr = [], []
    for rho in densities[window]:
        l, r = sign_split_centroids(sites, rho)
        cl.append(l)
        cr.append(r)
    # bimodality guard on the final snapshot via the sign-split contract
    from .observables import drift_velocity

    drift_velocity(sites, densities[lo], densities[-1], times[lo], times[-1])
    return abs(splitting_speed(times[window], np.array(cl), np.array(cr)))


def _fit_discrete(state: _RunState):
    traj = state.discrete
    return fit_zitterbewegung(traj.times, traj.mean_x / traj.norms,
                              state.E0, state.Omega, state.config.packet.sigma)


def _fit_exact(state: _RunState):
    times, mean_x, _ = _projected_series(state)
    return fit_zitterbewegung(times, mean_x, state.E0, state.Omega,
                              state.config.packet.sigma)


def _slope(times, series) -> float:
    return float(np.polyfit(times, series, 1)[0])


def _metric_registry(state: _RunState) -> dict:
    cfg = state.config

    def need(attr, name):
        if getattr(state, attr) is None:
            raise ValidationError(
                f"metric '{name}' needs {attr} results; check run.engine/model"
            )
        return getattr(state, attr)

    def ws_gap():
        return state.ladder.Delta

    def overlap_cospi_g0_g1_abs():
        return abs(state.overlaps.cospi[("g", "g", 1)])

    def hopping():
        return state.table.hopping(cfg.model)

    def rest_mass():
        return state.table.rest_mass(cfg.model)

    def balance_ratio():
        alpha = 1 if cfg.balance == "dirac" else 2
        up = state.spec.amp(alpha, 1, 1)
        down = state.spec.amp(alpha, 1, -1)
        return abs(down / up)

    def drift_speed_discrete():
        traj = need("discrete", "drift_speed_discrete")
        return _drift_speed(traj.times, traj.densities, state.field0.sites)

    def drift_speed_exact():
        need("exact", "drift_speed_exact")
        times, _, dens = _projected_series(state)
        return _drift_speed(times, dens, state.field0.sites)

    def density_l2():
        disc = need("discrete", "density_l2_error")
        exact = need("exact", "density_l2_error")
        if not disc.snapshots or not exact.snapshots:
            raise ValidationError("density_l2_error needs common snapshots")
        fld = disc.snapshots[-1]
        psi_e = exact.snapshots[-1]
        # far tails below 1e-6 may fall off the engine grid; they carry no
        # weight at the 0.1 comparison scale
        psi_d = synthesize_from_spinor(fld, state.ladder, x=psi_e.x,
                                       support_floor=1e-6)
        rho_e = psi_e.density()
        ne = psi_e.norm()
        if ne > 0:
            rho_e = rho_e / ne  # absorber removes norm; compare shapes
        return density_l2_error(rho_e, psi_d.density(), psi_e.dx)

    def zb_period_tb_discrete():
        need("discrete", "zb_period_tb_discrete")
        return _fit_discrete(state).period / state.T_B

    def zb_amplitude_discrete():
        need("discrete", "zb_amplitude_discrete")
        return _fit_discrete(state).amplitude

    def zb_attenuation_final_discrete():
        traj = need("discrete", "zb_attenuation_final_discrete")
        fit = _fit_discrete(state)
        return fit.envelope(traj.times[-1] - traj.times[0])

    def zb_period_tb_exact():
        need("exact", "zb_period_tb_exact")
        return _fit_exact(state).period / state.T_B

    def zb_period_ratio_exact():
        need("exact", "zb_period_ratio_exact")
        need("discrete", "zb_period_ratio_exact")
        return _fit_exact(state).period / _fit_discrete(state).period

    def zb_amplitude_ratio_exact():
        need("exact", "zb_amplitude_ratio_exact")
        need("discrete", "zb_amplitude_ratio_exact")
        t_e, x_e, _ = _projected_series(state)
        t_d = state.discrete.times
        x_d = state.discrete.mean_x / state.discrete.norms
        window = 2 * np.pi / state.E0  # two beat periods
        me = t_e - t_e[0] <= window
        md = t_d - t_d[0] <= window
        omega = 2 * state.E0
        return (lockin_amplitude(t_e[me], x_e[me], omega)
                / lockin_amplitude(t_d[md], x_d[md], omega))

    def zb_meanx_rms_exact_vs_discrete():
        need("exact", "zb_meanx_rms_exact_vs_discrete")
        need("discrete", "zb_meanx_rms_exact_vs_discrete")
        t_e, x_e, _ = _projected_series(state)
        t_d = state.discrete.times
        x_d = state.discrete.mean_x / state.discrete.norms
        x_interp = np.interp(t_d, t_e, x_e)
        return float(np.sqrt(np.mean((x_d - x_interp) ** 2)))

    def leakage_final():
        traj = need("exact", "leakage_final")
        return float(traj.leakage[-1])

    def leakage_backstep_max():
        # recapture detector: smooth over the fast projection micromotion
        # so only a secular decrease counts
        traj = need("exact", "leakage_backstep_max")
        lk = traj.leakage
        if len(lk) >= 5:
            kernel = np.ones(5) / 5.0
            lk = np.convolve(lk, kernel, mode="valid")
        drops = np.maximum(0.0, lk[:-1] - lk[1:])
        return float(np.max(drops)) if len(drops) else 0.0

    def zb_suppression_ratio():
        sup = need("suppressed", "zb_suppression_ratio")
        main_amp = _fit_discrete(state).amplitude
        amp = lockin_amplitude(sup.times, sup.mean_x / sup.norms, 2 * state.E0)
        return amp / main_amp

    def band_gap_dirac():
        return abs(state.E0)

    def band_slope_abs():
        return abs(state.band.group_velocity(1e-9))

    def weyl_speed_over_2omega():
        traj = need("discrete", "weyl_speed_over_2omega")
        v = _slope(traj.times, traj.mean_x / traj.norms)
        return abs(v) / (2 * abs(state.Omega))

    def weyl_antisymmetry():
        a = need("discrete", "weyl_antisymmetry")
        b = need("weyl_b", "weyl_antisymmetry")
        va = _slope(a.times, a.mean_x / a.norms)
        vb = _slope(b.times, b.mean_x / b.norms)
        return abs(va + vb) / max(abs(va), abs(vb))

    return {
        "ws_gap": ws_gap,
        "overlap_cospi_g0_g1_abs": overlap_cospi_g0_g1_abs,
        "hopping": hopping,
        "rest_mass": rest_mass,
        "balance_ratio": balance_ratio,
        "drift_speed_discrete": drift_speed_discrete,
        "drift_speed_exact": drift_speed_exact,
        "density_l2_error": density_l2,
        "zb_period_tb_discrete": zb_period_tb_discrete,
        "zb_amplitude_discrete": zb_amplitude_discrete,
        "zb_attenuation_final_discrete": zb_attenuation_final_discrete,
        "zb_period_tb_exact": zb_period_tb_exact,
        "zb_period_ratio_exact": zb_period_ratio_exact,
        "zb_amplitude_ratio_exact": zb_amplitude_ratio_exact,
        "zb_meanx_rms_exact_vs_discrete": zb_meanx_rms_exact_vs_discrete,
        "leakage_final": leakage_final,
        "leakage_backstep_max": leakage_backstep_max,
        "zb_suppression_ratio": zb_suppression_ratio,
        "band_gap_dirac": band_gap_dirac,
        "band_slope_abs": band_slope_abs,
        "weyl_speed_over_2omega": weyl_speed_over_2omega,
        "weyl_antisymmetry": weyl_antisymmetry,
    }


# --- artifact writing --------------------------------------------------------

def _write_discrete_tables(state: _RunState, out: Path, files: list, tag="discrete"):
    traj = getattr(state, "discrete" if tag == "discrete" else tag)
    head = [f"scenario {state.config.scenario}",
            f"config {state.config.config_hash()}"]
    p = out / f"{tag}_meanx.tsv"
    write_table(p, head, ["t", "mean_x", "norm"],
                np.column_stack([traj.times, traj.mean_x / traj.norms, traj.norms]))
    files.append(p)
    if tag == "discrete" and traj.snapshots:
        rows = []
        for snap in traj.snapshots:
            for i, n in enumerate(snap.sites):
                rows.append((snap.t, n, snap.c[i].real, snap.c[i].imag,
                             snap.d[i].real, snap.d[i].imag))
        p = out / "discrete_trajectory.tsv"
        write_table(p, head, ["t", "n", "re_c", "im_c", "re_d", "im_d"], rows)
        files.append(p)


def _write_exact_tables(state: _RunState, out: Path, files: list):
    traj = state.exact
    head = [f"scenario {state.config.scenario}",
            f"config {state.config.config_hash()}"]
    times, mean_x, _ = _projected_series(state)
    p = out / "exact_meanx.tsv"
    write_table(p, head, ["t", "mean_x_sites", "mean_x_grid", "norm"],
                np.column_stack([times, mean_x, traj.mean_x_grid, traj.norms]))
    files.append(p)
    p = out / "exact_leakage.tsv"
    write_table(p, head, ["t", "leakage"],
                np.column_stack([times, traj.leakage]))
    files.append(p)
    for i, snap in enumerate(traj.snapshots):
        p = out / f"exact_snapshot_{i:03d}.tsv"
        dump_snapshot(snap, p, header_extra=head)
        files.append(p)


def _write_band_table(state: _RunState, out: Path, files: list):
    bs = state.band
    head = [f"scenario {state.config.scenario}",
            f"config {state.config.config_hash()}",
            f"E0={state.E0:.9e} Omega={state.Omega:.9e}"]
    p = out / "band.tsv"
    write_table(p, head, ["k", "omega_plus", "omega_minus"],
                np.column_stack([bs.k, bs.omega_plus, bs.omega_minus]))
    files.append(p)


def _has_zb_metrics(config: ScenarioConfig) -> bool:
    return any(name.startswith("zb_") for name in config.tolerances)


def _write_fit_summary(state: _RunState, out: Path, files: list) -> None:
    from .errors import NoOscillation

    rows = []
    for engine, available, fitter in (("discrete", state.discrete, _fit_discrete),
                                      ("exact", state.exact, _fit_exact)):
        if available is None:
            continue
        try:
            fit = fitter(state)
        except (NoOscillation, ValueError):
            continue
        rows.append((engine, fit.period, fit.amplitude, fit.damping_D,
                     fit.r_squared))
    if not rows:
        return
    p = out / "fit_summary.tsv"
    with open(p, "w") as fh:
        fh.write(f"# scenario {state.config.scenario}\n")
        fh.write(f"# config {state.config.config_hash()}\n")
        fh.write("# engine\tperiod\tamplitude\tdamping_D\tr_squared\n")
        for engine, period, amp, damp, r2 in rows:
            fh.write(f"{engine}\t{period:.9e}\t{amp:.9e}\t{damp:.9e}\t{r2:.6f}\n")
    files.append(p)


def run_scenario(config: ScenarioConfig, out_dir,
                 engine_override: str | None = None) -> RunManifest:
    """Execute a scenario and write its artifacts; returns the manifest."""
    if engine_override is not None:
        from .config import ENGINES

        if engine_override not in ENGINES:
            raise ValidationError(f"engine override must be one of {ENGINES}")
        cfg_raw = dict(config.raw)
        run_raw = dict(cfg_raw.get("run", {}))
        run_raw["engine"] = engine_override
        cfg_raw["run"] = run_raw
        from .config import config_from_dict

        config = config_from_dict(cfg_raw)

    started = time.time()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    state = _RunState(config)
    _prepare(state)
    _run_engines(state)

    files: list[Path] = []
    dump_states(state.ladder, out / "ws_states.tsv")
    files.append(out / "ws_states.tsv")
    dump_overlaps(state.overlaps, out / "overlaps.tsv")
    files.append(out / "overlaps.tsv")
    if state.band is not None:
        _write_band_table(state, out, files)
    if state.discrete is not None:
        _write_discrete_tables(state, out, files)
    if state.suppressed is not None:
        _write_discrete_tables(state, out, files, tag="suppressed")
    if state.weyl_b is not None:
        _write_discrete_tables(state, out, files, tag="weyl_b")
    if state.exact is not None:
        _write_exact_tables(state, out, files)

    if state.E0 is not None and _has_zb_metrics(config):
        _write_fit_summary(state, out, files)

    registry = _metric_registry(state)
    metrics = {}
    all_passed = True
    report_rows = []
    for name, tol in config.tolerances.items():
        if name not in registry:
            raise ValidationError(f"unknown tolerance metric '{name}'")
        value = float(registry[name]())
        passed = tol.check(value)
        all_passed &= passed
        metrics[name] = {"value": value, "criterion": tol.describe(),
                         "passed": passed}
        rel = (abs(value - tol.target) / abs(tol.target)
               if tol.target else float("nan"))
        report_rows.append((name, value, tol.describe(), rel,
                            "pass" if passed else "FAIL"))

    report = out / "report.tsv"
    with open(report, "w") as fh:
        fh.write(f"# scenario {config.scenario}\n")
        fh.write(f"# config {config.config_hash()}\n")
        fh.write("# metric\tvalue\ttarget\trel_err\tstatus\n")
        for name, value, crit, rel, status in report_rows:
            rel_s = f"{rel:.3e}" if rel == rel else "-"
            fh.write(f"{name}\t{value:.9e}\t{crit}\t{rel_s}\t{status}\n")
    files.append(report)

    manifest = RunManifest(
        scenario=config.scenario,
        config_hash=config.config_hash(),
        version=__version__,
        started_at=_isoformat(started),
        finished_at=_isoformat(time.time()),
        files={p.name: _sha256(p) for p in files},
        metrics=metrics,
        all_passed=all_passed,
    )
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def verify_manifest(manifest_path) -> list:
    """Re-hash the files listed in a manifest; returns a list of problems."""
    manifest_path = Path(manifest_path)
    problems = []
    try:
        data = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [f"cannot read manifest: {exc}"]
    base = manifest_path.parent
    for name, digest in data.get("files", {}).items():
        p = base / name
        if not p.exists():
            problems.append(f"missing file: {name}")
        elif _sha256(p) != digest:
            problems.append(f"hash mismatch: {name}")
    return problems

"""Experiment drivers: parallel ensembles and run-directory writers.

Paths are split into fixed blocks of 64 indices; each block is an
independent work item for a process pool.  Per-path samples are
reassembled in path order before a single reduction pass, and running
sums are accumulated in block order, so every number written to disk is
bitwise identical no matter how many workers executed the blocks.  The
worker count is read from the ``SCHSIM_WORKERS`` environment variable
(unset means serial, ``0`` means one worker per core) and affects wall
time only.

Each ``run_*`` driver validates the sections it needs, computes, writes
its data files into the configured run directory and finishes with an
atomic manifest; the returned summary dict mirrors what was written.
"""

from __future__ import annotations

import os
from dataclasses import replace
from multiprocessing import get_context

import numpy as np

from .commutators import DEFAULT_DELTAS, class_field, delta_sweep
from .config import ConfigError, RunConfig
from .diagnostics import (
    LEDGER_COLUMNS,
    GronwallProcess,
    MCEstimate,
    gronwall_check,
    residual_samples,
)
from .paths import refine, sample_path
from .runio import (
    ensure_run_dir,
    snapshot_path,
    write_manifest,
    write_rows,
    write_snapshot,
)
from .spectral import FourierField, SpectralGrid, sobolev_norm
from .stepping import StepperConfig, integrate, integrate_batch, linear_transport_reference

BLOCK_SIZE = 64
WORKERS_ENV = "SCHSIM_WORKERS"

__all__ = [
    "BLOCK_SIZE",
    "WORKERS_ENV",
    "resolve_workers",
    "run_simulate",
    "run_ensemble",
    "run_converge",
    "run_uniqueness",
    "run_commutators",
    "run_gronwall",
    "build_gronwall_process",
]


# -- worker pool --------------------------------------------------------------


def resolve_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r}: expected an integer") from None
    if value < 0:
        raise ConfigError(f"{WORKERS_ENV} must be >= 0 (0 means one per core)")
    if value == 0:
        value = os.cpu_count() or 1
    return max(1, min(value, 64))


def _blocks(n_paths: int) -> list[list[int]]:
    return [
        list(range(s, min(s + BLOCK_SIZE, n_paths)))
        for s in range(0, n_paths, BLOCK_SIZE)
    ]


def _map_blocks(fn, payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    ctx = get_context("spawn")
    with ctx.Pool(processes=min(workers, len(payloads))) as pool:
        return pool.map(fn, payloads)


def _build_objects(raw: dict):
    cfg = RunConfig(raw)
    params = cfg.model_params()
    scfg = cfg.stepper_config()
    grid = SpectralGrid(params.n)
    u0 = cfg.initial_field(grid)
    return cfg, params, scfg, grid, u0


def _needs_paths(params, scfg) -> bool:
    return scfg.scheme != "rk4_deterministic" and not params.sigma.is_zero


def _path_list(indices, scfg, master_seed):
    return [
        sample_path(0.0, scfg.t_end, scfg.n_steps, master_seed, i) for i in indices
    ]


# -- simulate -----------------------------------------------------------------


def run_simulate(cfg: RunConfig) -> dict:
    """Integrate a single path and write ledger + field snapshots."""
    cfg.require("model", "stepper", "initial", "outputs")
    params = cfg.model_params()
    scfg = cfg.stepper_config()
    grid = SpectralGrid(params.n)
    u0 = cfg.initial_field(grid)
    path = None
    if _needs_paths(params, scfg):
        path = sample_path(0.0, scfg.t_end, scfg.n_steps, cfg.master_seed, 0)
    traj = integrate(u0, params, scfg, path, store_states=True)

    run_dir = ensure_run_dir(cfg.out_dir)
    files = ["ledger.csv"]
    write_rows(os.path.join(run_dir, "ledger.csv"), LEDGER_COLUMNS, traj.ledger.data)
    for k in range(len(traj.times)):
        write_snapshot(snapshot_path(run_dir, k), traj.states[k], params.n)
        files.append(os.path.join("fields", f"{k:04d}.snap"))
    status = "blowup" if traj.blew_up else "completed"
    extra = {
        "status": status,
        "blowup_time": traj.blowup_time,
        "n_records": int(len(traj.times)),
        "final_h1_sq": float(traj.ledger.h1_sq[-1]),
    }
    write_manifest(run_dir, "simulate", cfg.raw, files, extra)
    return {"run_dir": run_dir, **extra}


# -- ensemble -----------------------------------------------------------------

_SAMPLE_NAMES = ("final_h1_sq", "sup_h1_sq", "final_hm_sq", "energy_residual")


def _ensemble_block(payload) -> dict:
    raw, indices = payload
    cfg, params, scfg, grid, u0 = _build_objects(raw)
    paths = None
    if _needs_paths(params, scfg):
        paths = _path_list(indices, scfg, cfg.master_seed)
    trajs = integrate_batch(
        u0, params, scfg, paths, n_paths=len(indices), store_states=False
    )

    def per_path(fn):
        return np.array(
            [np.nan if t.blew_up else float(fn(t)) for t in trajs], dtype=np.float64
        )

    out = {
        "blew_up": np.array([t.blew_up for t in trajs]),
        "final_h1_sq": per_path(lambda t: t.ledger.h1_sq[-1]),
        "sup_h1_sq": per_path(lambda t: np.max(t.ledger.h1_sq)),
        "final_hm_sq": per_path(lambda t: t.ledger.hm_sq[-1]),
        "energy_residual": per_path(lambda t: residual_samples([t])[0]),
    }
    survivors = [t for t in trajs if not t.blew_up]
    if survivors:
        stack = np.stack([t.ledger.data for t in survivors])
        out["ledger_sum"] = stack.sum(axis=0)
        out["h1_sumsq"] = (stack[:, :, 1] ** 2).sum(axis=0)
    else:
        out["ledger_sum"] = None
        out["h1_sumsq"] = None
    out["n_surv"] = len(survivors)
    return out


def run_ensemble(cfg: RunConfig) -> dict:
    """Monte Carlo over paths 0..n_paths-1; writes mean ledger and stats."""
    cfg.require("model", "stepper", "initial", "ensemble", "outputs")
    if cfg.n_paths < 2:
        raise ConfigError("ensemble.n_paths: need >= 2 paths (use simulate for 1)")
    payloads = [(cfg.raw, idx) for idx in _blocks(cfg.n_paths)]
    results = _map_blocks(_ensemble_block, payloads, resolve_workers())

    blew = np.concatenate([r["blew_up"] for r in results])
    samples = {
        name: np.concatenate([r[name] for r in results]) for name in _SAMPLE_NAMES
    }
    failed = [int(i) for i in np.nonzero(blew)[0]]
    n_surv = int(cfg.n_paths - len(failed))

    ledger_sum = None
    h1_sumsq = None
    for r in results:  # block order: the reduction order is fixed
        if r["n_surv"] == 0:
            continue
        if ledger_sum is None:
            ledger_sum = r["ledger_sum"].copy()
            h1_sumsq = r["h1_sumsq"].copy()
        else:
            ledger_sum += r["ledger_sum"]
            h1_sumsq += r["h1_sumsq"]

    run_dir = ensure_run_dir(cfg.out_dir)
    files = []
    stats: dict[str, MCEstimate] = {}
    if n_surv >= 1:
        mean = ledger_sum / n_surv
        var = (h1_sumsq - ledger_sum[:, 1] ** 2 / n_surv) / max(n_surv - 1, 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / n_surv)
        write_rows(
            os.path.join(run_dir, "ledger.csv"),
            list(LEDGER_COLUMNS) + ["h1_sq_stderr"],
            np.column_stack([mean, stderr]),
        )
        files.append("ledger.csv")
    if n_surv >= 2:
        keep = ~blew
        for name in _SAMPLE_NAMES:
            stats[name] = MCEstimate.from_samples(samples[name][keep])
        stats["sup_h1_p4"] = MCEstimate.from_samples(samples["sup_h1_sq"][keep] ** 2)
        write_rows(
            os.path.join(run_dir, "stats.csv"),
            ["quantity", "mean", "stderr", "n_samples"],
            [[k, e.mean, e.stderr, e.n_samples] for k, e in sorted(stats.items())],
        )
        files.append("stats.csv")
    status = (
        "completed" if not failed else ("all_failed" if n_surv == 0 else "partial")
    )
    extra = {
        "status": status,
        "n_paths": cfg.n_paths,
        "n_survivors": n_surv,
        "paths_failed": failed,
    }
    write_manifest(run_dir, "ensemble", cfg.raw, files, extra)
    return {"run_dir": run_dir, "stats": stats, **extra}


# -- convergence studies ------------------------------------------------------


def _h1_weights(grid: SpectralGrid) -> np.ndarray:
    return 1.0 + grid.omega**2


def _sup_h1_distance(states_a, states_b, grid_b) -> float:
    """sup over records of the H^1 distance; states_a from a coarser level."""
    lifted = np.zeros_like(states_b)
    lifted[:, : states_a.shape[1]] = states_a
    diff = lifted - states_b
    per_record = (diff**2 * _h1_weights(grid_b)).sum(axis=1)
    return float(np.sqrt(np.max(per_record)))


def _converge_n_block(payload) -> dict:
    raw, indices, levels = payload
    cfg, params0, scfg, _, _ = _build_objects(raw)
    fine = SpectralGrid(levels[-1])
    u0_fine = RunConfig(raw).initial_field(fine)
    paths = None
    if _needs_paths(params0, scfg):
        paths = _path_list(indices, scfg, cfg.master_seed)
    by_level = {}
    for n in levels:
        params = replace(params0, n=n)
        u0 = u0_fine.on_grid(SpectralGrid(n))
        by_level[n] = integrate_batch(
            u0, params, scfg, paths, n_paths=len(indices), store_states=True
        )
    errors = np.full((len(levels) - 1, len(indices)), np.nan)
    for k in range(len(levels) - 1):
        n_a, n_b = levels[k], levels[k + 1]
        grid_b = SpectralGrid(n_b)
        for p in range(len(indices)):
            ta, tb = by_level[n_a][p], by_level[n_b][p]
            if ta.blew_up or tb.blew_up:
                continue
            errors[k, p] = _sup_h1_distance(ta.states, tb.states, grid_b)
    return {"errors": errors}


def _converge_dt_block(payload) -> dict:
    raw, indices, dts, schemes = payload
    cfg, params, scfg0, grid, u0 = _build_objects(raw)
    t_end = scfg0.t_end
    n0 = int(round(t_end / dts[0]))
    families = []
    for i in indices:
        fam = [sample_path(0.0, t_end, n0, cfg.master_seed, i)]
        for _ in dts[1:]:
            fam.append(refine(fam[-1]))
        families.append(fam)

    exact_ref = (
        params.epsilon == 0.0
        and not params.nonlinear_terms
        and params.sigma.band_limit == 0
    )
    weights = _h1_weights(grid)
    refs = None
    if exact_ref:
        sigma_value = float(params.sigma.sigma.coeffs[0])
        refs = np.stack(
            [
                linear_transport_reference(u0, sigma_value, fam[-1].terminal).coeffs
                for fam in families
            ]
        )

    out = {}
    for scheme in schemes:
        exp_lin = (
            raw["stepper"].get("exponential_linear", False)
            and scheme == "euler_maruyama"
        )
        finals = []
        blown = []
        for lv, dt in enumerate(dts):
            scfg = StepperConfig(
                scheme,
                dt,
                t_end,
                record_every=int(round(t_end / dt)),
                exponential_linear=exp_lin,
            )
            trajs = integrate_batch(
                u0,
                params,
                scfg,
                [fam[lv] for fam in families],
                store_states=False,
            )
            finals.append(np.stack([t.final_coeffs for t in trajs]))
            blown.append(np.array([t.blew_up for t in trajs]))
        if exact_ref:
            ref, n_levels = refs, len(dts)
        else:
            ref, n_levels = finals[-1], len(dts) - 1
        errors = np.full((n_levels, len(indices)), np.nan)
        for lv in range(n_levels):
            diff = finals[lv] - ref
            err = np.sqrt((diff**2 * weights).sum(axis=1))
            bad = blown[lv] | (blown[-1] if not exact_ref else False)
            errors[lv] = np.where(bad, np.nan, err)
        out[scheme] = errors
    return out


def _fit_rate(x: np.ndarray, y: np.ndarray) -> float:
    mask = np.isfinite(y) & (y > 0.0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)[0])


def run_converge(cfg: RunConfig, axis: str) -> dict:
    """Coupled-path convergence sweep along ``n``, ``dt`` or ``delta``."""
    if axis == "delta":
        levels = cfg.section("converge").get("levels")
        if levels:
            raw = dict(cfg.raw)
            raw["commutators"] = dict(raw.get("commutators", {}))
            raw["commutators"]["deltas"] = list(levels)
            cfg = RunConfig(raw)
        return run_commutators(cfg, command="converge")
    cfg.require("model", "stepper", "initial", "ensemble", "outputs", "converge")
    levels = cfg.section("converge").get("levels")
    if not levels:
        raise ConfigError("converge.levels: required for this axis")
    workers = resolve_workers()
    blocks = _blocks(cfg.n_paths)

    if axis == "n":
        ns = [int(round(x)) for x in levels]
        if any(abs(x - n) > 1e-9 for x, n in zip(levels, ns)):
            raise ConfigError("converge.levels: n values must be integers")
        if any(b != 2 * a for a, b in zip(ns, ns[1:])):
            raise ConfigError("converge.levels: each n must double the previous")
        payloads = [(cfg.raw, idx, ns) for idx in blocks]
        results = _map_blocks(_converge_n_block, payloads, workers)
        errors = np.concatenate([r["errors"] for r in results], axis=1)
        rows = []
        ests = []
        for k in range(len(ns) - 1):
            samp = errors[k][np.isfinite(errors[k])]
            if samp.size < 2:
                raise ConfigError(
                    f"converge: fewer than two surviving paths at n={ns[k]}"
                )
            ests.append(MCEstimate.from_samples(samp))
        rate = _fit_rate(
            np.array(ns[:-1], dtype=float), np.array([e.mean for e in ests])
        )
        for k, est in enumerate(ests):
            rows.append(
                [cfg.raw["stepper"]["scheme"], float(ns[k]), est.mean, est.stderr,
                 est.n_samples, rate]
            )
        header = ["scheme", "n", "error", "stderr", "n_samples", "fitted_rate"]
        rates = {cfg.raw["stepper"]["scheme"]: rate}
    elif axis == "dt":
        dts = [float(x) for x in levels]
        if any(not 0.0 < b < a for a, b in zip(dts, dts[1:])):
            raise ConfigError("converge.levels: dt values must decrease")
        if any(abs(a / b - 2.0) > 1e-9 for a, b in zip(dts, dts[1:])):
            raise ConfigError("converge.levels: each dt must halve the previous")
        t_end = cfg.raw["stepper"]["t_end"]
        if abs(t_end / dts[0] - round(t_end / dts[0])) > 1e-9:
            raise ConfigError("converge.levels: coarsest dt must divide t_end")
        schemes = cfg.section("converge").get(
            "schemes", [cfg.raw["stepper"]["scheme"]]
        )
        payloads = [(cfg.raw, idx, dts, schemes) for idx in blocks]
        results = _map_blocks(_converge_dt_block, payloads, workers)
        rows = []
        rates = {}
        for scheme in schemes:
            errors = np.concatenate([r[scheme] for r in results], axis=1)
            ests = []
            for lv in range(errors.shape[0]):
                samp = errors[lv][np.isfinite(errors[lv])]
                if samp.size < 2:
                    raise ConfigError(
                        f"converge: fewer than two surviving paths at dt={dts[lv]}"
                    )
                ests.append(MCEstimate.from_samples(samp))
            used = np.array(dts[: errors.shape[0]])
            rate = _fit_rate(used, np.array([e.mean for e in ests]))
            rates[scheme] = rate
            for lv, est in enumerate(ests):
                rows.append([scheme, dts[lv], est.mean, est.stderr,
                             est.n_samples, rate])
        header = ["scheme", "dt", "error", "stderr", "n_samples", "fitted_rate"]
    else:
        raise ConfigError(f"unknown convergence axis {axis!r} (n, dt or delta)")

    run_dir = ensure_run_dir(cfg.out_dir)
    write_rows(os.path.join(run_dir, "stats.csv"), header, rows)
    extra = {"status": "completed", "axis": axis, "fitted_rates": rates}
    write_manifest(run_dir, "converge", cfg.raw, ["stats.csv"], extra)
    return {"run_dir": run_dir, "rows": rows, **extra}


# -- uniqueness ---------------------------------------------------------------


def _unit_h1_direction(grid: SpectralGrid) -> FourierField:
    e = FourierField.from_modes(grid, cos={1: 1.0})
    return e * (1.0 / sobolev_norm(e, 1))


def run_uniqueness(cfg: RunConfig) -> dict:
    """Twin determinism, initial-data sensitivity and level refinement."""
    cfg.require("model", "stepper", "initial", "outputs")
    sec = cfg.section("uniqueness")
    amps = sec.get("amplitudes", [1e-3, 1e-4, 1e-5])
    do_refine = sec.get("refine_n", True)
    params = cfg.model_params()
    scfg = cfg.stepper_config()
    grid = SpectralGrid(params.n)
    u0 = cfg.initial_field(grid)
    path = None
    if _needs_paths(params, scfg):
        path = sample_path(0.0, scfg.t_end, scfg.n_steps, cfg.master_seed, 0)

    base = integrate(u0, params, scfg, path, store_states=True)
    twin = integrate(u0, params, scfg, path, store_states=True)
    twin_gap = float(
        np.max(np.abs(base.final_coeffs - twin.final_coeffs))
    ) if not (base.blew_up or twin.blew_up) else float("nan")
    twin_bitwise = (
        np.array_equal(base.final_coeffs, twin.final_coeffs)
        and np.array_equal(base.ledger.data, twin.ledger.data)
    )
    rows = [["twin", 0.0, twin_gap, 0.0 if twin_bitwise else float("nan")]]

    weights = _h1_weights(grid)

    def sup_final(other_states, other_final, w=weights):
        diff_sup = np.sqrt(
            np.max(((base.states - other_states) ** 2 * w).sum(axis=1))
        )
        diff_fin = np.sqrt(((base.final_coeffs - other_final) ** 2 * w).sum())
        return float(diff_fin), float(diff_sup)

    direction = _unit_h1_direction(grid)
    perturbed_final = {}
    for a in amps:
        traj = integrate(u0 + direction * a, params, scfg, path, store_states=True)
        if traj.blew_up or base.blew_up:
            rows.append(["perturb", a, float("nan"), float("nan")])
            continue
        d_fin, d_sup = sup_final(traj.states, traj.final_coeffs)
        perturbed_final[a] = d_fin
        rows.append(["perturb", a, d_fin, d_sup])

    if do_refine:
        params2 = replace(params, n=2 * params.n)
        grid2 = SpectralGrid(2 * params.n)
        traj2 = integrate(
            u0.on_grid(grid2), params2, scfg, path, store_states=True
        )
        if not (traj2.blew_up or base.blew_up):
            lifted = np.zeros_like(traj2.states)
            lifted[:, : base.states.shape[1]] = base.states
            w2 = _h1_weights(grid2)
            d_sup = float(
                np.sqrt(np.max(((lifted - traj2.states) ** 2 * w2).sum(axis=1)))
            )
            lf = np.zeros_like(traj2.final_coeffs)
            lf[: base.final_coeffs.size] = base.final_coeffs
            d_fin = float(np.sqrt(((lf - traj2.final_coeffs) ** 2 * w2).sum()))
            rows.append(["refine", float(2 * params.n), d_fin, d_sup])

    run_dir = ensure_run_dir(cfg.out_dir)
    write_rows(
        os.path.join(run_dir, "uniqueness.csv"),
        ["check", "param", "final_distance", "sup_distance"],
        rows,
    )
    extra = {
        "status": "completed",
        "twin_bitwise": bool(twin_bitwise),
        "amplitudes": [float(a) for a in amps],
    }
    write_manifest(run_dir, "uniqueness", cfg.raw, ["uniqueness.csv"], extra)
    return {
        "run_dir": run_dir,
        "rows": rows,
        "perturb_final": perturbed_final,
        **extra,
    }


# -- commutator sweep ---------------------------------------------------------


def run_commutators(cfg: RunConfig, command: str = "commutators") -> dict:
    """Mollifier sweep over the configured test class; writes decay tables."""
    cfg.require("model", "outputs")
    sec = cfg.section("commutators")
    label = sec.get("test_class", "h1_critical")
    deltas = tuple(sec.get("deltas", DEFAULT_DELTAS))
    profile = sec.get("profile", "bump")
    seed = sec.get("seed", 0)
    j_max = sec.get("j_max", 320)
    grid = SpectralGrid(j_max)
    rng = np.random.default_rng(seed)
    u = class_field(grid, label, rng)
    v = class_field(grid, label, rng)
    w = class_field(grid, label, rng)
    xi = class_field(grid, label, rng)
    sigma = cfg.sigma_profile()
    report = delta_sweep(
        u, v, w, xi, sigma, deltas=deltas, profile=profile, class_label=label
    )

    run_dir = ensure_run_dir(cfg.out_dir)
    rows = np.column_stack(
        [
            report.deltas,
            report.norm_E1,
            report.norm_E2,
            report.norm_E3,
            report.norm_R,
            report.residual,
        ]
    )
    write_rows(
        os.path.join(run_dir, "commutators.csv"),
        ["delta", "e1", "e2_h1", "e3", "r", "residual"],
        rows,
    )
    write_rows(
        os.path.join(run_dir, "rates.csv"),
        ["quantity", "rate"],
        [[k, v_] for k, v_ in sorted(report.rates.items())],
    )
    extra = {
        "status": "completed",
        "test_class": label,
        "profile": profile,
        "rates": {k: float(v_) for k, v_ in report.rates.items()},
    }
    write_manifest(
        run_dir, command, cfg.raw, ["commutators.csv", "rates.csv"], extra
    )
    return {"run_dir": run_dir, "report": report, **extra}


# -- moment-bound audit -------------------------------------------------------


def build_gronwall_process(section: dict) -> GronwallProcess:
    """Construct the audit input for one of the three presets."""
    preset = section["preset"]
    n_samples = section.get("n_samples", 2000)
    n_steps = section.get("n_steps", 100)
    t_end = section.get("t_end", 1.0)
    noise = section.get("noise_scale", 0.5)
    seed = section.get("seed", 44)
    times = np.linspace(0.0, t_end, n_steps + 1)
    dt = times[1] - times[0]

    if preset == "deterministic":
        xi = np.empty((n_samples, n_steps + 1))
        xi[:, 0] = np.linspace(0.5, 1.5, n_samples)
        for k in range(n_steps):
            xi[:, k + 1] = xi[:, k] * (1.0 + dt)
        zero = np.zeros_like(xi)
        return GronwallProcess(times, xi, zero, times, zero)

    rng = np.random.default_rng(seed)
    xi = np.empty((n_samples, n_steps + 1))
    m = np.zeros((n_samples, n_steps + 1))
    xi[:, 0] = 1.0
    for k in range(n_steps):
        z = rng.standard_normal(n_samples)
        dm = noise * np.sqrt(dt) * z * xi[:, k]
        xi[:, k + 1] = np.maximum(xi[:, k] * (1.0 + dt) + dm, 1e-12)
        m[:, k + 1] = m[:, k] + xi[:, k + 1] - xi[:, k] * (1.0 + dt)
    if preset == "corrupted":
        # break one interior value without touching its compensator
        xi[1, 5] *= 3.0
    return GronwallProcess(times, xi, np.zeros_like(xi), times, m)


def run_gronwall(cfg: RunConfig) -> dict:
    """Audit the pathwise moment bound; a corrupted preset must be rejected."""
    cfg.require("gronwall", "outputs")
    sec = cfg.section("gronwall")
    nu = sec.get("nu", 0.5)
    r = sec.get("r", 0.75)
    proc = build_gronwall_process(sec)
    run_dir = ensure_run_dir(cfg.out_dir)
    try:
        report = gronwall_check(proc, nu=nu, r=r)
    except ValueError as exc:
        extra = {"status": "rejected", "reason": str(exc)}
        write_manifest(run_dir, "gronwall", cfg.raw, [], extra)
        return {"run_dir": run_dir, "report": None, **extra}
    write_rows(
        os.path.join(run_dir, "gronwall.csv"),
        ["lhs", "rhs", "margin", "margin_stderr", "violated", "nu", "r",
         "n_samples"],
        [[report.lhs, report.rhs, report.margin, report.margin_stderr,
          int(report.violated), report.nu, report.r, report.n_samples]],
    )
    extra = {
        "status": "violated" if report.violated else "completed",
        "margin": float(report.margin),
    }
    write_manifest(run_dir, "gronwall", cfg.raw, ["gronwall.csv"], extra)
    return {"run_dir": run_dir, "report": report, **extra}

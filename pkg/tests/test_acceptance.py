"""Acceptance sweep: one test and one printed pass/fail line per criterion.

Each test pins the tolerances it enforces and prints a single summary
line (visible with ``pytest -s``).  Criterion 6 is expected to fail on
the H^1-critical class and is marked as a strict expected failure; the
test prints the full clause-by-clause breakdown before asserting.
"""

import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from schsim.commutators import class_field, delta_sweep
from schsim.config import validate_config
from schsim.diagnostics import (
    holder_structure,
    residual_samples,
    stopping_time_eta,
)
from schsim.dynamics import ModelParams, SigmaProfile
from schsim.ensemble import (
    run_commutators,
    run_converge,
    run_ensemble,
    run_gronwall,
    run_uniqueness,
)
from schsim.paths import sample_path
from schsim.runio import read_columns
from schsim.spectral import FourierField, SpectralGrid, sobolev_norm
from schsim.stepping import StepperConfig, integrate, integrate_batch

PILOT = {"c0": 0.3, "cos": {"1": 0.6, "2": 0.25}, "sin": {"1": 0.4, "3": 0.15}}
SIN_SIGMA = {"preset": "sin", "mean": 0.5, "amp": 0.2}


def report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)


@contextmanager
def worker_env(n: int):
    old = os.environ.get("SCHSIM_WORKERS")
    os.environ["SCHSIM_WORKERS"] = str(n)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("SCHSIM_WORKERS", None)
        else:
            os.environ["SCHSIM_WORKERS"] = old


def pilot_field(grid: SpectralGrid) -> FourierField:
    return FourierField.from_modes(
        grid, c0=0.3, cos={1: 0.6, 2: 0.25}, sin={1: 0.4, 3: 0.15}
    )


def sin_sigma_profile(mean=0.5, amp=0.2) -> SigmaProfile:
    grid = SpectralGrid(2)
    c = np.zeros(grid.n_coeffs)
    c[0] = mean
    c[2] = amp
    return SigmaProfile.from_field(FourierField(grid, c))


# -- session fixtures: run directories reused by the secondary tooling --------


@pytest.fixture(scope="session")
def criterion3_run(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("accept") / "c3")
    data = {
        "schema_version": 1,
        "model": {"epsilon": 0.01, "sigma": SIN_SIGMA, "n": 32},
        "stepper": {"scheme": "euler_maruyama", "dt": 5e-4, "t_end": 0.5,
                    "exponential_linear": True},
        "initial": {"preset": "modes", **PILOT},
        "ensemble": {"n_paths": 2000, "master_seed": 0},
        "outputs": {"directory": out_dir, "record_every": 10},
    }
    cfg = validate_config(data)
    start = time.monotonic()
    with worker_env(8):
        out = run_ensemble(cfg)
    return {"out": out, "elapsed": time.monotonic() - start, "config": data}


@pytest.fixture(scope="session")
def criterion4_run(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("accept") / "c4")
    t_end = 0.25
    dts = [t_end * 2.0 ** (-k) for k in range(8, 14)]
    data = {
        "schema_version": 1,
        "model": {
            "epsilon": 0.0,
            "sigma": {"preset": "constant", "value": 0.25},
            "n": 4,
            "nonlinear_terms": False,
        },
        "stepper": {"scheme": "euler_maruyama", "dt": dts[0], "t_end": t_end},
        "initial": {"preset": "modes", **PILOT},
        "ensemble": {"n_paths": 500, "master_seed": 12},
        "outputs": {"directory": out_dir},
        "converge": {
            "levels": dts,
            "schemes": ["euler_maruyama", "milstein", "heun_stratonovich"],
        },
    }
    cfg = validate_config(data)
    start = time.monotonic()
    with worker_env(8):
        out = run_converge(cfg, "dt")
    return {"out": out, "elapsed": time.monotonic() - start, "config": data}


# -- criteria -----------------------------------------------------------------


def test_criterion_01_deterministic_h1_conservation():
    start = time.monotonic()
    grid = SpectralGrid(64)
    params = ModelParams(epsilon=0.0, sigma=SigmaProfile.constant(grid, 0.0), n=64)
    cfg = StepperConfig("rk4_deterministic", 1e-4, 1.0, record_every=100)
    traj = integrate(pilot_field(grid), params, cfg, store_states=False)
    elapsed = time.monotonic() - start
    h1 = np.sqrt(traj.ledger.h1_sq)
    drift = float(np.max(np.abs(h1 - h1[0])) / h1[0])
    ok = drift <= 1e-8 and elapsed < 30.0
    report(1, ok, f"relative H1 drift {drift:.3e} <= 1e-8 ({elapsed:.1f}s < 30s)")
    assert drift <= 1e-8
    assert elapsed < 30.0


def test_criterion_02_viscous_dissipation_identity():
    start = time.monotonic()
    grid = SpectralGrid(32)
    params = ModelParams(epsilon=0.01, sigma=SigmaProfile.constant(grid, 0.0), n=32)
    cfg = StepperConfig("rk4_deterministic", 1e-4, 0.5, record_every=1)
    traj = integrate(pilot_field(grid), params, cfg, store_states=False)
    elapsed = time.monotonic() - start
    residual = abs(float(residual_samples([traj])[0]))
    h1_0 = float(traj.ledger.h1_sq[0])
    tol = 1e-6 * h1_0
    ok = residual <= tol and elapsed < 60.0
    report(2, ok, f"|energy balance| {residual:.3e} <= {tol:.3e} ({elapsed:.1f}s < 1min)")
    assert residual <= tol
    assert elapsed < 60.0


def test_criterion_03_stochastic_energy_equality(criterion3_run):
    out = criterion3_run["out"]
    elapsed = criterion3_run["elapsed"]
    assert out["status"] == "completed"
    est = out["stats"]["energy_residual"]
    u0 = pilot_field(SpectralGrid(32))
    h1_0 = sobolev_norm(u0, 1) ** 2
    tol = 3.0 * est.stderr + 5.0 * 5e-4 * h1_0
    ok = abs(est.mean) <= tol and elapsed < 600.0
    report(
        3,
        ok,
        f"residual {est.mean:.4f} +/- {est.stderr:.4f} (M=2000), "
        f"|mean| <= {tol:.4f} ({elapsed:.0f}s < 10min)",
    )
    assert abs(est.mean) <= tol
    assert elapsed < 600.0


def test_criterion_04_strong_orders(criterion4_run):
    out = criterion4_run["out"]
    elapsed = criterion4_run["elapsed"]
    rates = out["fitted_rates"]
    ok = (
        0.35 <= rates["euler_maruyama"] <= 0.65
        and 0.85 <= rates["milstein"] <= 1.15
        and 0.85 <= rates["heun_stratonovich"] <= 1.15
        and elapsed < 300.0
    )
    report(
        4,
        ok,
        f"orders EM {rates['euler_maruyama']:.3f} in [0.35,0.65], "
        f"Milstein {rates['milstein']:.3f}, Heun {rates['heun_stratonovich']:.3f} "
        f"in [0.85,1.15] ({elapsed:.0f}s < 5min)",
    )
    assert 0.35 <= rates["euler_maruyama"] <= 0.65
    assert 0.85 <= rates["milstein"] <= 1.15
    assert 0.85 <= rates["heun_stratonovich"] <= 1.15
    assert elapsed < 300.0


def test_criterion_05_galerkin_refinement(tmp_path):
    start = time.monotonic()
    data = {
        "schema_version": 1,
        "model": {"epsilon": 0.01, "sigma": SIN_SIGMA, "n": 16},
        "stepper": {"scheme": "euler_maruyama", "dt": 5e-4, "t_end": 0.25,
                    "exponential_linear": True},
        "initial": {"preset": "modes", **PILOT},
        "ensemble": {"n_paths": 32, "master_seed": 5},
        "outputs": {"directory": str(tmp_path / "c5"), "record_every": 10},
        "converge": {"levels": [16, 32, 64, 128]},
    }
    out = run_converge(validate_config(data), "n")
    elapsed = time.monotonic() - start
    errors = [row[2] for row in out["rows"]]
    factors = [errors[k] / errors[k + 1] for k in range(len(errors) - 1)]
    ok = all(f >= 2.0 for f in factors) and elapsed < 600.0
    report(
        5,
        ok,
        "E sup_t H1 gap factors per doubling "
        + ", ".join(f"{f:.1f}" for f in factors)
        + f" (need >= 2; {elapsed:.0f}s < 10min)",
    )
    assert all(f >= 2.0 for f in factors)
    assert elapsed < 600.0


@pytest.mark.xfail(
    strict=True,
    reason=(
        "on the H^1-critical test class the single-mollifier commutators and "
        "the entropy residual plateau instead of vanishing: a single "
        "multiplier difference contributes O(1) mass near the resolution "
        "scale at critical regularity, so only the double commutator decays; "
        "the printed breakdown records every clause"
    ),
)
def test_criterion_06_commutator_decay():
    start = time.monotonic()
    grid = SpectralGrid(320)
    rng = np.random.default_rng(7)
    u = class_field(grid, "h1_critical", rng)
    v = class_field(grid, "h1_critical", rng)
    w = class_field(grid, "h1_critical", rng)
    xi = class_field(grid, "h1_critical", rng)
    rep = delta_sweep(
        u, v, w, xi, sin_sigma_profile(),
        deltas=(0.2, 0.1, 0.05, 0.025), class_label="h1_critical",
    )
    elapsed = time.monotonic() - start

    quantities = {
        "E1": rep.norm_E1**2,
        "E2": rep.norm_E2**2,
        "E3": rep.norm_E3**2,
        "R": rep.norm_R**2,
        "residual": rep.residual,
    }
    clauses = []
    for name, vals in quantities.items():
        mono = bool(np.all(np.diff(vals) <= 0.02 * vals[:-1]))
        ratio = float(vals[-1] / vals[0])
        clauses.append((name, mono, ratio))
        print(
            f"  {name:8s}: values "
            + " ".join(f"{x:.4g}" for x in vals)
            + f" | monotone(2%)={mono} final/initial={ratio:.4g}"
        )
    slope = float(rep.rates["E1_sq"])
    print(f"  E1 squared-norm fitted slope {slope:.3f} (need >= 0.7)")
    ok = all(m and r <= 0.1 for _, m, r in clauses) and slope >= 0.7
    report(
        6,
        ok,
        "critical-class decay clauses "
        + ", ".join(f"{n}:{'ok' if m and r <= 0.1 else 'fail'}" for n, m, r in clauses)
        + f"; E1 slope {slope:.2f} ({elapsed:.0f}s < 2min)",
    )
    for name, mono, ratio in clauses:
        assert mono, f"{name} is not monotone within 2%"
        assert ratio <= 0.1, f"{name} final/initial {ratio:.3g} > 0.1"
    assert slope >= 0.7
    assert elapsed < 120.0


def test_criterion_07_uniqueness_coupling(tmp_path):
    start = time.monotonic()
    data = {
        "schema_version": 1,
        "model": {"epsilon": 0.01, "sigma": SIN_SIGMA, "n": 32},
        "stepper": {"scheme": "euler_maruyama", "dt": 1e-3, "t_end": 0.25,
                    "exponential_linear": True},
        "initial": {"preset": "modes", **PILOT},
        "outputs": {"directory": str(tmp_path / "c7"), "record_every": 10},
        "uniqueness": {"amplitudes": [1e-3, 1e-4, 1e-5]},
    }
    out = run_uniqueness(validate_config(data))
    elapsed = time.monotonic() - start
    d = out["perturb_final"]
    monotone = d[1e-3] > d[1e-4] > d[1e-5] > 0.0
    ok = out["twin_bitwise"] and monotone and elapsed < 180.0
    report(
        7,
        ok,
        f"twin bitwise={out['twin_bitwise']}; distances "
        f"{d[1e-3]:.3e} > {d[1e-4]:.3e} > {d[1e-5]:.3e} ({elapsed:.0f}s < 3min)",
    )
    assert out["twin_bitwise"]
    assert monotone
    assert elapsed < 180.0


def test_criterion_08_stochastic_gronwall(tmp_path):
    start = time.monotonic()
    good = {
        "schema_version": 1,
        "gronwall": {"preset": "simulated", "n_samples": 10000, "nu": 0.5,
                     "r": 0.75},
        "outputs": {"directory": str(tmp_path / "c8a")},
    }
    out = run_gronwall(validate_config(good))
    bad = {
        "schema_version": 1,
        "gronwall": {"preset": "corrupted", "n_samples": 10000, "nu": 0.5,
                     "r": 0.75},
        "outputs": {"directory": str(tmp_path / "c8b")},
    }
    out_bad = run_gronwall(validate_config(bad))
    elapsed = time.monotonic() - start
    ok = (
        out["status"] == "completed"
        and out["margin"] > 0.0
        and out_bad["status"] == "rejected"
        and elapsed < 60.0
    )
    report(
        8,
        ok,
        f"margin {out['margin']:.3f} > 0 at nu=0.5 r=0.75 (10^4 samples); "
        f"corrupted preset {out_bad['status']} ({elapsed:.0f}s < 1min)",
    )
    assert out["status"] == "completed"
    assert out["margin"] > 0.0
    assert out_bad["status"] == "rejected"
    assert elapsed < 60.0


def test_criterion_09_stopping_time_trend():
    start = time.monotonic()
    grid = SpectralGrid(32)
    params = ModelParams(epsilon=0.01, sigma=sin_sigma_profile(), n=32)
    cfg = StepperConfig("euler_maruyama", 1e-3, 0.25, record_every=5,
                        exponential_linear=True)
    u0 = pilot_field(grid)
    n_paths = 500
    paths = [sample_path(0.0, 0.25, cfg.n_steps, 0, i) for i in range(n_paths)]
    trajs = []
    for s in range(0, n_paths, 64):
        trajs.extend(
            integrate_batch(u0, params, cfg, paths[s : s + 64], store_states=False)
        )
    thresholds = [1.0, 4.0, 16.0, 64.0]
    probs = []
    for r_val in thresholds:
        hits = sum(1 for t in trajs if stopping_time_eta(t, r_val) is not None)
        probs.append(hits / n_paths)
    elapsed = time.monotonic() - start
    monotone = True
    for k in range(len(probs) - 1):
        se = np.sqrt(
            probs[k] * (1 - probs[k]) / n_paths
            + probs[k + 1] * (1 - probs[k + 1]) / n_paths
        )
        if probs[k + 1] > probs[k] + 2.0 * se:
            monotone = False
    ok = monotone and elapsed < 300.0
    report(
        9,
        ok,
        "P(eta_R < T) = "
        + ", ".join(f"{p:.3f}" for p in probs)
        + f" over R = 1,4,16,64 (nonincreasing; {elapsed:.0f}s < 5min)",
    )
    assert monotone
    assert elapsed < 300.0


def test_criterion_10_holder_structure():
    start = time.monotonic()
    grid = SpectralGrid(32)
    params = ModelParams(epsilon=0.01, sigma=sin_sigma_profile(), n=32)
    cfg = StepperConfig("euler_maruyama", 5e-4, 0.5, record_every=2,
                        exponential_linear=True)
    u0 = pilot_field(grid)
    paths = [sample_path(0.0, 0.5, cfg.n_steps, 0, i) for i in range(128)]
    trajs = []
    for s in range(0, 128, 64):
        trajs.extend(
            integrate_batch(u0, params, cfg, paths[s : s + 64], store_states=True)
        )
    fit = holder_structure(trajs, lags=[0.001, 0.002, 0.004, 0.008])
    elapsed = time.monotonic() - start
    ok = 0.85 <= fit.exponent <= 1.3 and elapsed < 300.0
    report(
        10,
        ok,
        f"temporal L2 structure exponent {fit.exponent:.3f} in [0.85, 1.3] "
        f"({elapsed:.0f}s < 5min)",
    )
    assert 0.85 <= fit.exponent <= 1.3
    assert elapsed < 300.0


def test_criterion_11_worker_determinism(tmp_path):
    def run_with(workers: int):
        data = {
            "schema_version": 1,
            "model": {"epsilon": 0.01, "sigma": SIN_SIGMA, "n": 6},
            "stepper": {"scheme": "euler_maruyama", "dt": 1e-3, "t_end": 0.05,
                        "exponential_linear": True},
            "initial": {"preset": "modes", **PILOT},
            "ensemble": {"n_paths": 130, "master_seed": 3},
            "outputs": {"directory": str(tmp_path / f"w{workers}"),
                        "record_every": 5},
        }
        with worker_env(workers):
            return run_ensemble(validate_config(data))

    start = time.monotonic()
    outs = {w: run_with(w) for w in (1, 4, 8)}
    elapsed = time.monotonic() - start
    base = outs[1]["stats"]
    max_diff = 0.0
    for w in (4, 8):
        for name, est in outs[w]["stats"].items():
            max_diff = max(max_diff, abs(est.mean - base[name].mean))
    files_equal = True
    for fname in ("ledger.csv", "stats.csv"):
        blobs = {
            w: open(os.path.join(outs[w]["run_dir"], fname), "rb").read()
            for w in (1, 4, 8)
        }
        if not (blobs[1] == blobs[4] == blobs[8]):
            files_equal = False
    ok = max_diff <= 1e-12 and files_equal
    report(
        11,
        ok,
        f"ensemble means across workers 1/4/8 differ by {max_diff:.1e} "
        f"<= 1e-12 (files bitwise equal: {files_equal}; {elapsed:.0f}s)",
    )
    assert max_diff <= 1e-12
    assert files_equal


def test_criterion_12_figure_generation(criterion3_run, criterion4_run, tmp_path):
    # Imported here so criteria 1-11 stay runnable without the figure package.
    from plotkit.figures import FigureSpec, render

    start = time.monotonic()
    c3_dir = criterion3_run["out"]["run_dir"]
    c4_dir = criterion4_run["out"]["run_dir"]
    # Neither pinned run directory carries a mollifier sweep, so the decay
    # figure draws from a small sweep produced by the same driver.
    comm_data = {
        "schema_version": 1,
        "model": {"epsilon": 0.01, "sigma": SIN_SIGMA, "n": 32},
        "outputs": {"directory": str(tmp_path / "comm")},
        "commutators": {"test_class": "smooth", "deltas": [0.2, 0.1, 0.05],
                        "seed": 1, "j_max": 160},
    }
    comm_out = run_commutators(validate_config(comm_data))

    rendered = {}
    for kind, source in (
        ("energy", c3_dir),
        ("slope_trace", c3_dir),
        ("order_fit", c4_dir),
        ("commutator_decay", comm_out["run_dir"]),
    ):
        out_path = str(tmp_path / f"{kind}.png")
        rendered[kind] = render(FigureSpec(kind, source, out_path))
        assert os.path.getsize(out_path) > 0

    order_gap = max(
        abs(rendered["order_fit"].slopes[scheme] - rate)
        for scheme, rate in criterion4_run["out"]["fitted_rates"].items()
    )
    decay_gap = max(
        abs(rendered["commutator_decay"].slopes[name] - rate)
        for name, rate in comm_out["rates"].items()
    )
    elapsed = time.monotonic() - start
    ok = order_gap <= 1e-9 and decay_gap <= 1e-9
    report(
        12,
        ok,
        f"all four figure kinds rendered; refit slope gaps {order_gap:.1e} "
        f"(order fit) and {decay_gap:.1e} (decay) <= 1e-9 ({elapsed:.0f}s)",
    )
    assert order_gap <= 1e-9
    assert decay_gap <= 1e-9

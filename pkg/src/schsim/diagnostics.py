"""Energy ledgers, Monte Carlo summaries and inequality audits.

The ledger tracks, per recorded time, the squared Sobolev norms of the
state together with trapezoidal accumulators for the dissipation and
the two sigma-weighted integrals that enter the expected-energy
balance, plus the minimum slope (wave-breaking indicator) and the
accumulated squared W^{1,inf} norm (stopping-time budget).

Expectations are Monte Carlo estimates with reported standard errors;
means use exactly rounded compensated summation so the result does not
depend on how path results were grouped by workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import GalerkinSystem

__all__ = [
    "LEDGER_COLUMNS",
    "EnergyLedger",
    "LedgerAccumulator",
    "MCEstimate",
    "GronwallProcess",
    "GronwallReport",
    "HolderFit",
    "energy_residual",
    "residual_samples",
    "moment_curve",
    "holder_structure",
    "stopping_time_eta",
    "gronwall_check",
    "wave_breaking_indicator",
    "ledger_integrands",
]

LEDGER_COLUMNS = (
    "t",
    "h1_sq",
    "hm_sq",
    "diss_accum",
    "sigma_term_a",
    "sigma_term_b",
    "min_slope",
    "w1inf_sq_accum",
)


def fsum(values) -> float:
    """Exactly rounded sum (order-independent by construction)."""
    return math.fsum(float(v) for v in np.ravel(values))


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    n_samples: int

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise ValueError("a Monte Carlo estimate needs at least 2 samples")

    @classmethod
    def from_samples(cls, samples) -> "MCEstimate":
        x = np.asarray(samples, dtype=float).ravel()
        if x.size < 2:
            raise ValueError("a Monte Carlo estimate needs at least 2 samples")
        mean = fsum(x) / x.size
        var = fsum((x - mean) ** 2) / (x.size - 1)
        return cls(mean=mean, stderr=math.sqrt(var / x.size), n_samples=x.size)


@dataclass(frozen=True)
class EnergyLedger:
    """Per-record-time diagnostic rows for one trajectory."""

    data: np.ndarray  # (n_records, len(LEDGER_COLUMNS))
    hm_order: int = 2

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != len(LEDGER_COLUMNS):
            raise ValueError(f"ledger rows must have {len(LEDGER_COLUMNS)} columns")
        t = self.data[:, 0]
        if t.size and np.any(np.diff(t) <= 0.0):
            raise ValueError("ledger times must be strictly increasing")
        self.data.setflags(write=False)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, LEDGER_COLUMNS.index(name)]

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def h1_sq(self) -> np.ndarray:
        return self.column("h1_sq")

    @property
    def hm_sq(self) -> np.ndarray:
        return self.column("hm_sq")

    @property
    def diss_accum(self) -> np.ndarray:
        return self.column("diss_accum")

    @property
    def sigma_term_a(self) -> np.ndarray:
        return self.column("sigma_term_a")

    @property
    def sigma_term_b(self) -> np.ndarray:
        return self.column("sigma_term_b")

    @property
    def min_slope(self) -> np.ndarray:
        return self.column("min_slope")

    @property
    def w1inf_sq_accum(self) -> np.ndarray:
        return self.column("w1inf_sq_accum")


def _pointwise_cols(system: GalerkinSystem, c: np.ndarray, hm_weight: np.ndarray):
    """Instantaneous ledger quantities for a (batch of) working-grid states."""
    grid = system.grid
    q = grid.derivative_coeffs(c)
    u_vals = grid.to_physical(c)
    q_vals = grid.to_physical(q)
    h1w = 1.0 + grid.omega**2
    h1_sq = np.sum(c * c * h1w, axis=-1)
    hm_sq = np.sum(c * c * hm_weight, axis=-1)
    diss = system.params.epsilon * np.sum(q * q * h1w, axis=-1)
    w_a = system.sigma_vals * system.dsigma_vals
    w_b = 0.5 * (system.sigma_vals * system.d2sigma_vals - system.dsigma_vals**2)
    siga = np.mean(w_a * u_vals * q_vals, axis=-1)
    sigb = np.mean(w_b * q_vals * q_vals, axis=-1)
    min_slope = np.min(q_vals, axis=-1)
    w1inf_sq = np.maximum(
        np.max(np.abs(u_vals), axis=-1), np.max(np.abs(q_vals), axis=-1)
    ) ** 2
    return h1_sq, hm_sq, diss, siga, sigb, min_slope, w1inf_sq


def ledger_integrands(system: GalerkinSystem, c: np.ndarray, method: str = "quadrature"):
    """Instantaneous ledger quantities by either evaluation route.

    ``quadrature`` integrates products on the physical grid;
    ``spectral`` reads the same integrals off product Fourier
    coefficients.  Both are exact for band-limited states, so they
    agree to rounding; the duplication exists as an audit.
    """
    grid = system.grid
    q = grid.derivative_coeffs(c)
    if method == "quadrature":
        u_vals = grid.to_physical(c)
        q_vals = grid.to_physical(q)
        dq_vals = grid.to_physical(grid.derivative_coeffs(q))
        h1_sq = np.mean(u_vals**2 + q_vals**2, axis=-1)
        diss = system.params.epsilon * np.mean(q_vals**2 + dq_vals**2, axis=-1)
        w_a = system.sigma_vals * system.dsigma_vals
        w_b = 0.5 * (system.sigma_vals * system.d2sigma_vals - system.dsigma_vals**2)
        siga = np.mean(w_a * u_vals * q_vals, axis=-1)
        sigb = np.mean(w_b * q_vals**2, axis=-1)
    elif method == "spectral":
        h1w = 1.0 + grid.omega**2
        h1_sq = np.sum(c * c * h1w, axis=-1)
        diss = system.params.epsilon * np.sum(q * q * h1w, axis=-1)
        # integral = constant coefficient of the full product
        s = system.params.sigma
        w_a_c = grid.multiply_coeffs(s.sigma.coeffs, s.dsigma.coeffs)
        uq = grid.multiply_coeffs(c, q)
        siga = grid.multiply_coeffs(np.broadcast_to(w_a_c, uq.shape), uq)[..., 0]
        w_b_c = 0.5 * (
            grid.multiply_coeffs(s.sigma.coeffs, s.d2sigma.coeffs)
            - grid.multiply_coeffs(s.dsigma.coeffs, s.dsigma.coeffs)
        )
        qq = grid.multiply_coeffs(q, q)
        sigb = grid.multiply_coeffs(np.broadcast_to(w_b_c, qq.shape), qq)[..., 0]
    else:
        raise ValueError(f"unknown method {method!r}")
    return {"h1_sq": h1_sq, "diss": diss, "sigma_term_a": siga, "sigma_term_b": sigb}


class LedgerAccumulator:
    """Streaming ledger builder for a batch of trajectories.

    ``record`` must be called at strictly increasing times; the time
    integrals are trapezoidal on those record times.
    """

    def __init__(self, system: GalerkinSystem, n_paths: int, hm_order: int = 2):
        if hm_order < 0:
            raise ValueError("hm_order must be nonnegative")
        self.system = system
        self.n_paths = n_paths
        self.hm_order = hm_order
        w2 = system.grid.omega**2
        self.hm_weight = np.zeros_like(w2)
        term = np.ones_like(w2)
        for _ in range(hm_order + 1):
            self.hm_weight += term
            term = term * w2
        self._rows: list[np.ndarray] = []
        self._prev_t: float | None = None
        self._prev = None  # (diss, siga, sigb, w1inf_sq) integrands
        self._acc = np.zeros((4, n_paths))

    def record(self, t: float, c: np.ndarray) -> None:
        if self._prev_t is not None and t <= self._prev_t:
            raise ValueError("record times must be strictly increasing")
        with np.errstate(invalid="ignore", over="ignore"):
            h1, hm, diss, siga, sigb, mslope, w1inf = _pointwise_cols(
                self.system, c, self.hm_weight
            )
            integrands = np.stack([diss, siga, sigb, w1inf])
            if self._prev_t is not None:
                dt = t - self._prev_t
                self._acc += 0.5 * dt * (self._prev + integrands)
        self._prev_t = t
        self._prev = integrands
        row = np.empty((self.n_paths, len(LEDGER_COLUMNS)))
        row[:, 0] = t
        row[:, 1] = h1
        row[:, 2] = hm
        row[:, 3] = self._acc[0]
        row[:, 4] = self._acc[1]
        row[:, 5] = self._acc[2]
        row[:, 6] = mslope
        row[:, 7] = self._acc[3]
        self._rows.append(row)

    def ledgers(self) -> list[EnergyLedger]:
        stacked = np.stack(self._rows, axis=1)  # (n_paths, n_rec, n_cols)
        return [EnergyLedger(stacked[i].copy(), self.hm_order) for i in range(self.n_paths)]


def _window(ledger: EnergyLedger, t_start: float, t_end: float | None):
    times = ledger.times
    i = int(np.searchsorted(times, t_start - 1e-12))
    j = times.size - 1 if t_end is None else int(np.searchsorted(times, t_end - 1e-12))
    if not (0 <= i < times.size and 0 <= j < times.size and i < j):
        raise ValueError("requested window not covered by ledger records")
    return i, j


def residual_samples(trajectories, t_start: float = 0.0,
                     t_end: float | None = None) -> np.ndarray:
    """Per-path residual of the H^1 energy balance (see energy_residual)."""
    samples = []
    for traj in trajectories:
        led = traj.ledger
        i, j = _window(led, t_start, t_end)
        samples.append(
            led.h1_sq[j]
            - led.h1_sq[i]
            + 2.0 * (led.diss_accum[j] - led.diss_accum[i])
            + (led.sigma_term_a[j] - led.sigma_term_a[i])
            + (led.sigma_term_b[j] - led.sigma_term_b[i])
        )
    return np.array(samples)


def energy_residual(trajectories, t_start: float = 0.0, t_end: float | None = None) -> MCEstimate:
    """Monte Carlo residual of the expected H^1 energy balance.

    Per path the balance reads, between the record times nearest
    ``t_start`` and ``t_end``,

        dh1 + 2*d(diss_accum) + d(sigma_term_a) + d(sigma_term_b) = 0

    up to time discretization and truncation tails, with the ledger's
    accumulator columns; the estimate averages the left-hand side.
    """
    return MCEstimate.from_samples(residual_samples(trajectories, t_start, t_end))


def moment_curve(trajectories, p: float) -> MCEstimate:
    """MC estimate of E sup_t ||u||^p_{H^1} from ledger records."""
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    samples = [float(np.max(traj.ledger.h1_sq) ** (p / 2.0)) for traj in trajectories]
    return MCEstimate.from_samples(samples)


@dataclass(frozen=True)
class HolderFit:
    """Log-log fit of the mean squared temporal L^2 increment."""

    exponent: float
    intercept: float
    max_log_residual: float
    lags: np.ndarray
    mean_sq_increments: np.ndarray


def holder_structure(trajectories, lags) -> HolderFit:
    """Fit E||u(t+h) - u(t)||^2_{L^2} ~ h^alpha over the given lags.

    Trajectories must carry recorded states.  Each lag must be a
    multiple of the record spacing.
    """
    lags = np.asarray(sorted(float(h) for h in lags))
    if lags.size < 4:
        raise ValueError("need at least 4 lags for a credible fit")
    first = trajectories[0]
    if first.states is None:
        raise ValueError("holder_structure needs trajectories with stored states")
    times = first.times
    spacing = times[1] - times[0]
    steps = np.rint(lags / spacing).astype(int)
    if np.any(np.abs(steps * spacing - lags) > 1e-9 * spacing) or np.any(steps < 1):
        raise ValueError("each lag must be a positive multiple of the record spacing")
    if steps[-1] >= times.size:
        raise ValueError("largest lag exceeds the trajectory span")
    means = []
    for k in steps:
        acc = []
        for traj in trajectories:
            diff = traj.states[k:] - traj.states[:-k]
            acc.append(np.mean(np.sum(diff * diff, axis=-1)))
        means.append(fsum(acc) / len(acc))
    means = np.asarray(means)
    if np.any(means <= 0.0):
        raise ValueError("degenerate (zero) increments; exponent undefined")
    logs, logh = np.log(means), np.log(lags)
    slope, intercept = np.polyfit(logh, logs, 1)
    resid = float(np.max(np.abs(np.polyval([slope, intercept], logh) - logs)))
    return HolderFit(float(slope), float(intercept), resid, lags, means)


def stopping_time_eta(trajectory, R: float):
    """First recorded time the accumulated squared W^{1,inf} budget tops R.

    Returns None when the budget stays within R up to the final record
    (the stopping time equals the horizon).
    """
    if R <= 0:
        raise ValueError("threshold R must be positive")
    led = trajectory.ledger
    hits = np.nonzero(led.w1inf_sq_accum > R)[0]
    if hits.size == 0:
        return None
    return float(led.times[hits[0]])


def wave_breaking_indicator(trajectory):
    """Time series of the minimum slope min_x u_x over record times."""
    led = trajectory.ledger
    return led.times, led.min_slope


@dataclass(frozen=True)
class GronwallProcess:
    """Sampled paths of (xi, eta, A, M) on a shared time grid.

    ``xi``, ``eta``, ``M`` have shape (n_samples, n_times); ``A`` may
    be shared (n_times,) or per-sample.
    """

    times: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    M: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be a strictly increasing 1-d grid")
        xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        shape = xi.shape
        if shape[1] != t.size:
            raise ValueError("xi must have one column per time")
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), shape)
        a = np.broadcast_to(np.asarray(self.A, dtype=float), shape)
        m = np.broadcast_to(np.asarray(self.M, dtype=float), shape)
        if np.any(xi < 0) or np.any(eta < 0):
            raise ValueError("xi and eta must be nonnegative")
        if np.any(np.abs(a[:, 0]) > 0) or np.any(np.abs(m[:, 0]) > 0):
            raise ValueError("A and M must start at 0")
        if np.any(np.diff(a, axis=1) < 0):
            raise ValueError("A must be nondecreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "M", m)

    @property
    def n_samples(self) -> int:
        return self.xi.shape[0]


@dataclass(frozen=True)
class GronwallReport:
    """Both sides of the stochastic Gronwall bound with MC error."""

    lhs: float
    rhs: float
    margin: float
    margin_stderr: float
    violated: bool
    nu: float
    r: float
    n_samples: int


def gronwall_check(
    proc: GronwallProcess,
    nu: float,
    r: float,
    *,
    inequality_tol: float = 1e-9,
    bootstrap: int = 200,
) -> GronwallReport:
    """Audit the moment bound for processes with d(xi) <= eta dt + xi dA + dM.

    The differential inequality is verified row-wise (left-endpoint
    form) before the two sides of the bound

        (E sup xi^nu)^(1/nu)
            <= (r/(r-nu))^(1/nu) (E exp(r A(T)/(1-r)))^((1-r)/r)
               E(xi(0) + int eta dt)

    are estimated.  The violation flag allows for bootstrap MC error.
    """
    if not (0.0 < nu < r < 1.0):
        raise ValueError("need 0 < nu < r < 1")
    dtv = np.diff(proc.times)
    dxi = np.diff(proc.xi, axis=1)
    bound = (
        proc.eta[:, :-1] * dtv
        + proc.xi[:, :-1] * np.diff(proc.A, axis=1)
        + np.diff(proc.M, axis=1)
    )
    scale = max(1.0, float(np.max(np.abs(proc.xi))))
    bad = dxi > bound + inequality_tol * scale
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"differential inequality fails for sample {i} on step {j}: "
            f"d(xi) = {dxi[i, j]:.6g} > {bound[i, j]:.6g}"
        )
    sup_nu = np.max(proc.xi, axis=1) ** nu
    exp_a = np.exp(r * proc.A[:, -1] / (1.0 - r))
    eta_int = np.trapezoid(proc.eta, proc.times, axis=1)
    front = proc.xi[:, 0] + eta_int

    def sides(idx):
        lhs = (np.mean(sup_nu[idx])) ** (1.0 / nu)
        rhs = (
            (r / (r - nu)) ** (1.0 / nu)
            * np.mean(exp_a[idx]) ** ((1.0 - r) / r)
            * np.mean(front[idx])
        )
        return lhs, rhs

    n = proc.n_samples
    lhs, rhs = sides(np.arange(n))
    rng = np.random.default_rng(20_240_817)
    margins = np.empty(bootstrap)
    for b in range(bootstrap):
        idx = rng.integers(0, n, n)
        lb, rb = sides(idx)
        margins[b] = rb - lb
    margin = rhs - lhs
    margin_stderr = float(np.std(margins))
    return GronwallReport(
        lhs=float(lhs),
        rhs=float(rhs),
        margin=float(margin),
        margin_stderr=margin_stderr,
        violated=bool(margin < -3.0 * margin_stderr),
        nu=nu,
        r=r,
        n_samples=n,
    )

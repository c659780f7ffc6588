"""Friedrichs mollification and commutator diagnostics for transport noise.

For a mollifier J of width delta and the transport operator S f = d_x(sigma f),
the laboratory measures how far mollification is from commuting with the
nonlinear flux and with S:

* ``commutator_E1``: mollification error of the convective flux
  u u_x + d_x K*(u^2 + u_x^2 / 2), taken as a difference over a pair (u, v);
* ``commutator_E2``: J*(sigma w_x) - sigma d_x(w_delta), the first-order
  transport commutator;
* ``commutator_E3``: the second-order (Ito-correction) analogue;
* ``double_commutator_R``: J*(S S w) - 2 S(J * S w) + S S (J * w), the
  double commutator [[S, J*], S];
* ``ito_strat_residual``: the entropy conversion-error functional combining
  E2 and E3 under a C^2 entropy S(r) (default r^2/2).

All assemblies run on an enlarged working grid whose capacity covers every
product exactly, so the reported norms contain mollification error only --
never aliasing or truncation of intermediate products.  Convolution with J
is exact coefficient multiplication by the kernel's cosine transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SigmaProfile
from .spectral import FourierField, SpectralGrid, random_field, sobolev_norm

DEFAULT_DELTAS = (0.2, 0.1, 0.05, 0.025)
MOLLIFIER_PROFILES = ("bump", "gaussian")

# coefficient-decay exponents of the three laboratory test classes
TEST_CLASSES = {"smooth": 4.0, "h1_critical": 1.5, "rough_l2": 1.0}

_quad_cache: dict = {}
_multiplier_cache: dict = {}
_grid_cache: dict = {}


def _profile_values(profile: str, t: np.ndarray) -> np.ndarray:
    """Unnormalized kernel shape on the reference interval |t| <= 1."""
    t = np.asarray(t, dtype=np.float64)
    inside = np.abs(t) < 1.0
    if profile == "bump":
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = np.where(inside, np.exp(-1.0 / np.maximum(1.0 - t * t, 1e-300)), 0.0)
        return v
    if profile == "gaussian":
        # standard deviation delta / 3, truncated at the support edge and
        # shifted so the kernel is continuous there
        return np.where(np.abs(t) <= 1.0,
                        np.maximum(np.exp(-4.5 * t * t) - np.exp(-4.5), 0.0),
                        0.0)
    raise ValueError(
        f"unknown mollifier profile {profile!r}; expected one of {MOLLIFIER_PROFILES}"
    )


def _work_grid(n_modes: int) -> SpectralGrid:
    g = _grid_cache.get(n_modes)
    if g is None:
        g = _grid_cache.setdefault(n_modes, SpectralGrid(n_modes))
    return g


@dataclass(frozen=True)
class Mollifier:
    """Even, unit-mass smoothing kernel of width delta, applied spectrally.

    The kernel is supported in [-delta, delta] with delta <= 1/4 so it fits
    on the circle.  Its cosine transform is computed once per (profile,
    delta, resolution) by Gauss-Legendre quadrature over the support and
    cached; convolution is then exact coefficient multiplication.
    """

    delta: float
    profile: str = "bump"
    n_quad: int = 4096

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.25:
            raise ValueError(f"mollifier width must lie in (0, 0.25], got {self.delta}")
        if self.profile not in MOLLIFIER_PROFILES:
            raise ValueError(
                f"unknown mollifier profile {self.profile!r}; "
                f"expected one of {MOLLIFIER_PROFILES}"
            )
        if self.n_quad < 64:
            raise ValueError(f"quadrature resolution too small: {self.n_quad}")

    def _quadrature(self):
        """Cached (nodes, weight*value, mass) over the support."""
        key = (self.profile, self.delta, self.n_quad)
        hit = _quad_cache.get(key)
        if hit is None:
            t, w = np.polynomial.legendre.leggauss(self.n_quad)
            y = self.delta * t
            wv = self.delta * w * _profile_values(self.profile, t)
            hit = _quad_cache.setdefault(key, (y, wv, float(np.sum(wv))))
        return hit

    def kernel_values(self, x) -> np.ndarray:
        """Normalized kernel J(x), periodically wrapped to [-1/2, 1/2)."""
        _, _, mass = self._quadrature()
        y = np.mod(np.asarray(x, dtype=np.float64) + 0.5, 1.0) - 0.5
        return _profile_values(self.profile, y / self.delta) / mass

    def fourier_multiplier(self, n_modes: int) -> np.ndarray:
        """Cosine transform hat(J)(j) for j = 0..n_modes; hat(J)(0) = 1."""
        key = (self.profile, self.delta, self.n_quad, n_modes)
        m = _multiplier_cache.get(key)
        if m is None:
            y, wv, _ = self._quadrature()
            j = np.arange(n_modes + 1, dtype=np.float64)
            m = np.cos(2.0 * np.pi * np.outer(j, y)) @ wv
            m /= m[0]
            m.flags.writeable = False
            m = _multiplier_cache.setdefault(key, m)
        return m

    def multiplier_slots(self, grid: SpectralGrid) -> np.ndarray:
        """Per-coefficient multiplier in the interleaved cos/sin layout."""
        return self.fourier_multiplier(grid.n_modes)[grid.freqs]


def mollify(f: FourierField, J: Mollifier) -> FourierField:
    """Periodic convolution f * J as exact coefficient multiplication."""
    return FourierField(f.grid, f.coeffs * J.multiplier_slots(f.grid))


def class_field(grid: SpectralGrid, label: str, rng: np.random.Generator,
                amplitude: float = 1.0) -> FourierField:
    """Random test field from one of the decay classes in ``TEST_CLASSES``."""
    if label not in TEST_CLASSES:
        raise ValueError(
            f"unknown test class {label!r}; expected one of {sorted(TEST_CLASSES)}"
        )
    return random_field(grid, TEST_CLASSES[label], rng, amplitude)


# -- working-grid assembly ---------------------------------------------------


def _setup(f: FourierField, sigma: SigmaProfile | None, J: Mollifier):
    """Working grid with exact capacity, multiplier slots and lifted sigma."""
    band = 0 if sigma is None else sigma.band_limit
    W = _work_grid(2 * (f.grid.n_modes + band))
    mult = J.multiplier_slots(W)
    s_c = None if sigma is None else sigma.sigma.on_grid(W).coeffs
    return W, mult, s_c


def commutator_E1(u: FourierField, v: FourierField, J: Mollifier) -> FourierField:
    """Mollification error of the convective flux, differenced over (u, v).

    With F(f) = f f_x + d_x K*(f^2 + f_x^2 / 2), returns
    J*(F(u) - F(v)) - (F(u_delta) - F(v_delta)).
    """
    u._check_same_grid(v)
    W, mult, _ = _setup(u, None, J)

    def flux(c):
        q = W.derivative_coeffs(c)
        press = W.helmholtz_coeffs(
            W.multiply_coeffs(c, c) + 0.5 * W.multiply_coeffs(q, q)
        )
        return W.multiply_coeffs(c, q) + W.derivative_coeffs(press)

    cu = u.on_grid(W).coeffs
    cv = v.on_grid(W).coeffs
    direct = mult * (flux(cu) - flux(cv))
    smoothed = flux(mult * cu) - flux(mult * cv)
    return FourierField(W, direct - smoothed)


def commutator_E2(w: FourierField, sigma: SigmaProfile, J: Mollifier) -> FourierField:
    """First-order transport commutator J*(sigma w_x) - sigma d_x(w_delta)."""
    W, mult, s_c = _setup(w, sigma, J)
    dw = W.derivative_coeffs(w.on_grid(W).coeffs)
    return FourierField(W, mult * W.multiply_coeffs(s_c, dw)
                        - W.multiply_coeffs(s_c, mult * dw))


def commutator_E2_dx(w: FourierField, sigma: SigmaProfile, J: Mollifier) -> FourierField:
    """Spatial derivative of the first-order commutator (exact on the
    working grid); this is the mollification bracket of the transport
    operator acting on w_x, up to sign."""
    e2 = commutator_E2(w, sigma, J)
    return FourierField(e2.grid, e2.grid.derivative_coeffs(e2.coeffs))


def commutator_E3(w: FourierField, sigma: SigmaProfile, J: Mollifier) -> FourierField:
    """Second-order commutator
    -(1/2) J*(sigma d_x(sigma w_x)) + (1/2) sigma d_x(sigma d_x(w_delta))."""
    W, mult, s_c = _setup(w, sigma, J)

    def second(c):
        inner = W.multiply_coeffs(s_c, W.derivative_coeffs(c))
        return W.multiply_coeffs(s_c, W.derivative_coeffs(inner))

    wc = w.on_grid(W).coeffs
    return FourierField(W, -0.5 * mult * second(wc) + 0.5 * second(mult * wc))


def double_commutator_R(xi: FourierField, sigma: SigmaProfile, J: Mollifier) -> FourierField:
    """Double commutator J*(S S xi) - 2 S(J*(S xi)) + S S (J*xi), S f = d_x(sigma f)."""
    if sigma.m_sigma < 2:
        raise ValueError(
            f"double commutator needs sigma with two derivatives "
            f"(m_sigma >= 2), got m_sigma={sigma.m_sigma}"
        )
    W, mult, s_c = _setup(xi, sigma, J)
    sp_c = sigma.dsigma.on_grid(W).coeffs

    def transport(c):
        # product-rule form sigma' f + sigma f_x: applying the derivative
        # before the product keeps rounding noise off the top frequencies
        return (W.multiply_coeffs(sp_c, c)
                + W.multiply_coeffs(s_c, W.derivative_coeffs(c)))

    xc = xi.on_grid(W).coeffs
    t1 = mult * transport(transport(xc))
    t2 = transport(mult * transport(xc))
    t3 = transport(transport(mult * xc))
    return FourierField(W, t1 - 2.0 * t2 + t3)


def double_commutator_R_expanded(xi: FourierField, sigma: SigmaProfile,
                                 J: Mollifier) -> FourierField:
    """Independent assembly of the double commutator from its seven
    expanded terms, grouped into first-order, second-order and zeroth-order
    bundles.  Must agree with ``double_commutator_R`` to rounding; used to
    cross-validate the operator algebra."""
    if sigma.m_sigma < 2:
        raise ValueError(
            f"double commutator needs sigma with two derivatives "
            f"(m_sigma >= 2), got m_sigma={sigma.m_sigma}"
        )
    W, mult, s_c = _setup(xi, sigma, J)
    sp_c = sigma.dsigma.on_grid(W).coeffs
    ssp = W.multiply_coeffs(s_c, sp_c)            # sigma sigma'
    s2 = W.multiply_coeffs(s_c, s_c)              # sigma^2

    xc = xi.on_grid(W).coeffs
    xd = mult * xc                                # xi_delta
    jsx = mult * W.multiply_coeffs(s_c, xc)       # J*(sigma xi)
    d_jsx = W.derivative_coeffs(jsx)

    def d2(c):
        return W.derivative_coeffs(W.derivative_coeffs(c))

    first_order = (2.0 * W.multiply_coeffs(sp_c, d_jsx)
                   + W.derivative_coeffs(mult * W.multiply_coeffs(ssp, xc))
                   - 3.0 * W.multiply_coeffs(ssp, W.derivative_coeffs(xd)))
    second_order = (2.0 * W.multiply_coeffs(s_c, d2(jsx))
                    - d2(mult * W.multiply_coeffs(s2, xc))
                    - W.multiply_coeffs(s2, d2(xd)))
    zeroth_order = W.multiply_coeffs(W.derivative_coeffs(ssp), xd)
    return FourierField(W, -(first_order + second_order - zeroth_order))


def ito_strat_residual(w, sigma: SigmaProfile, J: Mollifier,
                       s_prime=None, s_double=None, times=None) -> float:
    """Entropy conversion-error functional for a C^2 entropy S.

    For a single field, returns

        | int -S'(w_delta_x) d_x E3 + S''(w_delta_x)
              ( |d_x E2|^2 / 2 + d_x(sigma w_delta_x) d_x E2 ) dx |.

    For a sequence of fields with matching ``times``, the pointwise values
    are integrated in time by the trapezoid rule.  The default entropy is
    S(r) = r^2 / 2, i.e. S' = id and S'' = 1.
    """
    if s_prime is None:
        s_prime = lambda r: r
    if s_double is None:
        s_double = lambda r: np.ones_like(r)

    if isinstance(w, FourierField):
        if times is not None:
            raise ValueError("times given with a single field; pass a sequence")
        return _residual_at(w, sigma, J, s_prime, s_double)

    fields = list(w)
    if times is None:
        raise ValueError("a field sequence needs matching times")
    t = np.asarray(times, dtype=np.float64)
    if t.shape != (len(fields),):
        raise ValueError(f"got {len(fields)} fields but {t.shape} times")
    if len(fields) < 2 or np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing with length >= 2")
    vals = np.array([_residual_at(f, sigma, J, s_prime, s_double) for f in fields])
    return float(np.trapezoid(vals, t))


def _residual_at(w: FourierField, sigma: SigmaProfile, J: Mollifier,
                 s_prime, s_double) -> float:
    W, mult, s_c = _setup(w, sigma, J)
    wc = w.on_grid(W).coeffs
    dwd = W.derivative_coeffs(mult * wc)          # d_x(w_delta)

    dw = W.derivative_coeffs(wc)
    e2 = mult * W.multiply_coeffs(s_c, dw) - W.multiply_coeffs(s_c, dwd)

    def second(c):
        inner = W.multiply_coeffs(s_c, W.derivative_coeffs(c))
        return W.multiply_coeffs(s_c, W.derivative_coeffs(inner))

    e3 = -0.5 * mult * second(wc) + 0.5 * second(mult * wc)

    r = W.to_physical(dwd)
    de2 = W.to_physical(W.derivative_coeffs(e2))
    de3 = W.to_physical(W.derivative_coeffs(e3))
    d_sig_dwd = W.to_physical(W.derivative_coeffs(W.multiply_coeffs(s_c, dwd)))
    integrand = (-s_prime(r) * de3
                 + s_double(r) * (0.5 * de2 * de2 + d_sig_dwd * de2))
    return abs(float(W.integrate(integrand)))


# -- delta sweeps ------------------------------------------------------------


def fit_log_rate(deltas, values) -> float:
    """Least-squares slope of log(values) against log(deltas)."""
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(deltas, dtype=np.float64)
    if v.size != d.size or v.size < 2:
        raise ValueError("need matching deltas and values, at least two points")
    if np.any(v <= 0.0):
        return float("nan")
    return float(np.polyfit(np.log(d), np.log(v), 1)[0])


@dataclass(frozen=True)
class CommutatorReport:
    """Measured commutator norms across a decreasing delta sweep.

    ``rates`` holds fitted log-log slopes: for the four field quantities the
    slope of the squared norm against delta, for the residual the slope of
    the value itself.
    """

    deltas: tuple
    norm_E1: np.ndarray
    norm_E2: np.ndarray
    norm_E3: np.ndarray
    norm_R: np.ndarray
    residual: np.ndarray
    rates: dict
    class_label: str = ""

    def __post_init__(self):
        d = tuple(float(x) for x in self.deltas)
        object.__setattr__(self, "deltas", d)
        if len(d) < 2 or np.any(np.diff(d) >= 0.0):
            raise ValueError(f"delta sweep must be strictly decreasing, got {d}")
        for name in ("norm_E1", "norm_E2", "norm_E3", "norm_R", "residual"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != (len(d),):
                raise ValueError(f"{name} has shape {a.shape}, expected ({len(d)},)")
            if np.any(a < 0.0) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite and nonnegative")
            a.flags.writeable = False
            object.__setattr__(self, name, a)


def delta_sweep(u: FourierField, v: FourierField, w: FourierField,
                xi: FourierField, sigma: SigmaProfile,
                deltas=DEFAULT_DELTAS, profile: str = "bump",
                n_quad: int = 4096, class_label: str = "") -> CommutatorReport:
    """Measure all commutator norms over a decreasing delta sweep.

    Norms follow the convergence statements they probe: E1, E3 and R in L2,
    E2 in H1, plus the scalar conversion residual evaluated at w.  The grid
    must resolve the narrowest mollifier: capacity >= 8 / min(delta).
    """
    d = tuple(float(x) for x in deltas)
    if len(d) < 2 or np.any(np.diff(d) >= 0.0):
        raise ValueError(f"delta sweep must be strictly decreasing, got {d}")
    capacity = min(f.grid.n_modes for f in (u, v, w, xi))
    needed = int(np.ceil(8.0 / d[-1]))
    if capacity < needed:
        raise ValueError(
            f"grid capacity {capacity} under-resolves the narrowest mollifier; "
            f"need >= {needed} modes for delta = {d[-1]}"
        )
    cols = {"norm_E1": [], "norm_E2": [], "norm_E3": [], "norm_R": [], "residual": []}
    for dk in d:
        J = Mollifier(dk, profile, n_quad)
        cols["norm_E1"].append(sobolev_norm(commutator_E1(u, v, J), 0))
        cols["norm_E2"].append(sobolev_norm(commutator_E2(w, sigma, J), 1))
        cols["norm_E3"].append(sobolev_norm(commutator_E3(w, sigma, J), 0))
        cols["norm_R"].append(sobolev_norm(double_commutator_R(xi, sigma, J), 0))
        cols["residual"].append(ito_strat_residual(w, sigma, J))
    arrays = {k: np.array(vals) for k, vals in cols.items()}
    rates = {
        "E1_sq": fit_log_rate(d, arrays["norm_E1"] ** 2),
        "E2_sq": fit_log_rate(d, arrays["norm_E2"] ** 2),
        "E3_sq": fit_log_rate(d, arrays["norm_E3"] ** 2),
        "R_sq": fit_log_rate(d, arrays["norm_R"] ** 2),
        "residual": fit_log_rate(d, arrays["residual"]),
    }
    return CommutatorReport(deltas=d, rates=rates, class_label=class_label, **arrays)

"""Galerkin drift and diffusion for the stochastic shallow-water wave model.

The state u_n evolves on span{1, sqrt(2)cos(2 pi j x), sqrt(2)sin(2 pi j x),
j <= n} according to

    du = [ eps u_xx - Pi_n(u u_x + d_x P[u]) + (1/2) Pi_n W2[u] ] dt
         - Pi_n B[u] dW,

with the nonlocal pressure P[u] = K * (u^2 + (1/2) u_x^2), K the inverse of
1 - d_xx, and a position-dependent noise amplitude sigma.  Two noise forms
are supported:

* ``basic``: B[u] = sigma u_x and W2[u] = sigma d_x(sigma u_x);
* ``euler_poincare``: B[u] = sigma u_x + K*(2 sigma_x u + sigma_xx u_x)
  and W2[u] = B[B[u]], the corresponding Ito correction.

The printed correction applies Pi_n only on the outside, so the engine works
on a grid whose capacity exceeds the truncation level by sigma's band limit;
every retained coefficient of every term is then exact in the quadrature
arithmetic, and the inner-projection variant Pi_n B Pi_n B stays available
separately as a measurable diagnostic (``diffusion_derivative_action``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FourierField, SpectralGrid, derivative, helmholtz_solve, multiply

NOISE_FORMS = ("basic", "euler_poincare")


@dataclass(frozen=True)
class SigmaProfile:
    """Noise amplitude sigma with its first two spatial derivatives.

    Profiles must be effectively band-limited: the coefficient mass above
    half the carrying grid's capacity has to be negligible, which is the
    working smoothness proxy for sigma lying in W^(m_sigma+1,infinity).
    """

    sigma: FourierField
    dsigma: FourierField
    d2sigma: FourierField
    m_sigma: int = 3

    @classmethod
    def from_field(cls, f: FourierField, m_sigma: int = 3) -> "SigmaProfile":
        mags = np.abs(f.coeffs)
        scale = mags.sum()
        half = f.grid.freqs > max(1, f.grid.n_modes // 2)
        if scale > 0.0 and mags[half].sum() > 1e-10 * scale + 1e-13:
            raise ValueError(
                "sigma carries coefficient mass above half the grid capacity; "
                "refusing a profile whose derivatives are under-resolved"
            )
        return cls(f, derivative(f), derivative(derivative(f)), m_sigma)

    @classmethod
    def constant(cls, grid: SpectralGrid, value: float, m_sigma: int = 3) -> "SigmaProfile":
        c = np.zeros(grid.n_coeffs)
        c[0] = value
        return cls.from_field(FourierField(grid, c), m_sigma)

    @property
    def band_limit(self) -> int:
        nz = np.abs(self.sigma.coeffs) > 1e-14
        if not nz.any():
            return 0
        return int(self.sigma.grid.freqs[nz].max())

    @property
    def is_zero(self) -> bool:
        return bool(np.all(np.abs(self.sigma.coeffs) <= 1e-300))

    def on_grid(self, grid: SpectralGrid) -> "SigmaProfile":
        if grid.n_modes < self.band_limit:
            raise ValueError(
                f"grid capacity {grid.n_modes} cannot carry sigma "
                f"(band limit {self.band_limit})"
            )
        return SigmaProfile(
            self.sigma.on_grid(grid),
            self.dsigma.on_grid(grid),
            self.d2sigma.on_grid(grid),
            self.m_sigma,
        )


@dataclass(frozen=True)
class ModelParams:
    """Physical and truncation parameters of one Galerkin system."""

    epsilon: float
    sigma: SigmaProfile
    n: int
    noise_form: str = "basic"
    nonlinear_terms: bool = True

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.n < 1:
            raise ValueError(f"truncation level must be >= 1, got {self.n}")
        if self.noise_form not in NOISE_FORMS:
            raise ValueError(
                f"unknown noise form {self.noise_form!r}; expected one of {NOISE_FORMS}"
            )


@dataclass(frozen=True)
class DriftDiffusion:
    """Drift, diffusion and Ito-correction fields evaluated at one state."""

    drift: FourierField
    diffusion: FourierField
    ito_correction: FourierField


class GalerkinSystem:
    """Vectorised evaluation of drift/diffusion on raw coefficient arrays.

    The working grid capacity is n + band_limit(sigma) unless a larger grid
    is supplied; states are carried at working capacity but stay supported
    on frequencies <= n because every right-hand side is projected.
    """

    def __init__(self, params: ModelParams, grid: SpectralGrid | None = None):
        band = params.sigma.band_limit
        if grid is None:
            grid = SpectralGrid(params.n + band)
        if grid.n_modes < params.n + band:
            raise ValueError(
                f"working grid capacity {grid.n_modes} below required "
                f"{params.n + band} (level {params.n} + sigma band {band})"
            )
        self.params = params
        self.grid = grid
        self.n = params.n
        sig = params.sigma.on_grid(grid)
        self.sigma_vals = sig.sigma.values()
        self.dsigma_vals = sig.dsigma.values()
        self.d2sigma_vals = sig.d2sigma.values()
        self.sigma_is_zero = params.sigma.is_zero
        self.proj_mask = (grid.freqs <= params.n).astype(np.float64)
        self.k_mult = 1.0 / (1.0 + grid.omega**2)
        self.euler_poincare = params.noise_form == "euler_poincare"

    # -- raw-array building blocks ------------------------------------------

    def proj(self, c: np.ndarray) -> np.ndarray:
        return c * self.proj_mask

    def deriv(self, c: np.ndarray) -> np.ndarray:
        return self.grid.derivative_coeffs(c)

    def sigma_dx(self, c: np.ndarray) -> np.ndarray:
        """Coefficients of sigma * d_x(field), exact at working capacity."""
        q_vals = self.grid.to_physical(self.deriv(c))
        return self.grid.to_coeffs(self.sigma_vals * q_vals)

    def noise_op(self, c: np.ndarray) -> np.ndarray:
        """B[u] before the outer projection."""
        if self.sigma_is_zero:
            return np.zeros_like(c)
        b = self.sigma_dx(c)
        if self.euler_poincare:
            u_vals = self.grid.to_physical(c)
            q_vals = self.grid.to_physical(self.deriv(c))
            extra = self.grid.to_coeffs(
                2.0 * self.dsigma_vals * u_vals + self.d2sigma_vals * q_vals
            )
            b = b + self.k_mult * extra
        return b

    def pressure_coeffs(self, c: np.ndarray) -> np.ndarray:
        u_vals = self.grid.to_physical(c)
        q_vals = self.grid.to_physical(self.deriv(c))
        g = self.grid.to_coeffs(u_vals * u_vals + 0.5 * q_vals * q_vals)
        return self.k_mult * g

    def ito_correction_coeffs(self, c: np.ndarray) -> np.ndarray:
        if self.sigma_is_zero:
            return np.zeros_like(c)
        return 0.5 * self.proj(self.noise_op(self.noise_op(c)))

    def diffusion_coeffs(self, c: np.ndarray) -> np.ndarray:
        return -self.proj(self.noise_op(c))

    def diffusion_derivative_action_coeffs(self, c: np.ndarray) -> np.ndarray:
        return self.diffusion_coeffs(self.diffusion_coeffs(c))

    def drift_coeffs(self, c: np.ndarray) -> np.ndarray:
        drift = self.ito_correction_coeffs(c)
        if self.params.epsilon > 0.0:
            drift = drift + self.params.epsilon * self.deriv(self.deriv(c))
        if self.params.nonlinear_terms:
            u_vals = self.grid.to_physical(c)
            q = self.deriv(c)
            q_vals = self.grid.to_physical(q)
            transport = self.grid.to_coeffs(u_vals * q_vals)
            g = self.grid.to_coeffs(u_vals * u_vals + 0.5 * q_vals * q_vals)
            drift = drift - self.proj(transport + self.deriv(self.k_mult * g))
        return drift

    def evaluate(self, c: np.ndarray, need_diffusion: bool = True):
        """Shared-intermediate evaluation for steppers.

        Returns (drift, diffusion, ito_correction) raw coefficient arrays;
        diffusion is None when not requested.
        """
        q = self.deriv(c)
        if self.sigma_is_zero:
            corr = np.zeros_like(c)
            b_proj = np.zeros_like(c) if need_diffusion else None
        else:
            q_vals = self.grid.to_physical(q)
            b = self.grid.to_coeffs(self.sigma_vals * q_vals)
            if self.euler_poincare:
                u_vals_ep = self.grid.to_physical(c)
                extra = self.grid.to_coeffs(
                    2.0 * self.dsigma_vals * u_vals_ep + self.d2sigma_vals * q_vals
                )
                b = b + self.k_mult * extra
            corr = 0.5 * self.proj(self.noise_op(b))
            b_proj = -self.proj(b) if need_diffusion else None
        drift = corr
        if self.params.epsilon > 0.0:
            drift = drift + self.params.epsilon * self.deriv(q)
        if self.params.nonlinear_terms:
            u_vals = self.grid.to_physical(c)
            q_vals = self.grid.to_physical(q)
            transport = self.grid.to_coeffs(u_vals * q_vals)
            g = self.grid.to_coeffs(u_vals * u_vals + 0.5 * q_vals * q_vals)
            drift = drift - self.proj(transport + self.deriv(self.k_mult * g))
        return drift, b_proj, corr

    # -- FourierField wrappers ----------------------------------------------

    def lift(self, u: FourierField) -> np.ndarray:
        """State coefficients on the working grid (zero-padded)."""
        return u.on_grid(self.grid).coeffs

    def field(self, c: np.ndarray) -> FourierField:
        return FourierField(self.grid, c)


_system_cache: dict[tuple, GalerkinSystem] = {}


def system_for(p: ModelParams, grid: SpectralGrid | None = None) -> GalerkinSystem:
    key = (
        p.epsilon, p.n, p.noise_form, p.nonlinear_terms,
        p.sigma.sigma.coeffs.tobytes(),
        None if grid is None else (grid.n_modes, grid.n_phys),
    )
    sys = _system_cache.get(key)
    if sys is None:
        sys = GalerkinSystem(p, grid)
        _system_cache[key] = sys
    return sys


def pressure(u: FourierField) -> FourierField:
    """Nonlocal pressure P[u] = K * (u^2 + (1/2) u_x^2), untruncated.

    The result carries every frequency the grid can represent; projection
    to the Galerkin level happens inside drift assembly.
    """
    q = derivative(u)
    g = multiply(u, u) + 0.5 * multiply(q, q)
    return helmholtz_solve(g)


def drift(u: FourierField, p: ModelParams) -> FourierField:
    """Deterministic right-hand side including the Ito correction."""
    sys = system_for(p, None if u.grid.n_modes < p.n + p.sigma.band_limit else u.grid)
    return sys.field(sys.drift_coeffs(sys.lift(u))).on_grid(u.grid)


def diffusion(u: FourierField, p: ModelParams) -> FourierField:
    """Noise amplitude -Pi_n B[u] multiplying dW."""
    sys = system_for(p, None if u.grid.n_modes < p.n + p.sigma.band_limit else u.grid)
    return sys.field(sys.diffusion_coeffs(sys.lift(u))).on_grid(u.grid)


def diffusion_derivative_action(u: FourierField, p: ModelParams) -> FourierField:
    """Composition diffusion(diffusion(u)); keeps the inner projection.

    For constant sigma = s this is s^2 u_xx.  Its gap against the printed
    correction 2 * ito_correction(u) measures the inner-projection effect.
    """
    sys = system_for(p, None if u.grid.n_modes < p.n + p.sigma.band_limit else u.grid)
    return sys.field(sys.diffusion_derivative_action_coeffs(sys.lift(u))).on_grid(u.grid)


def ito_correction(u: FourierField, p: ModelParams) -> FourierField:
    """The dt-term (1/2) Pi_n W2[u] added to the drift by the noise."""
    sys = system_for(p, None if u.grid.n_modes < p.n + p.sigma.band_limit else u.grid)
    return sys.field(sys.ito_correction_coeffs(sys.lift(u))).on_grid(u.grid)


def drift_diffusion(u: FourierField, p: ModelParams) -> DriftDiffusion:
    sys = system_for(p, None if u.grid.n_modes < p.n + p.sigma.band_limit else u.grid)
    d, b, corr = sys.evaluate(sys.lift(u))
    return DriftDiffusion(
        sys.field(d).on_grid(u.grid),
        sys.field(b).on_grid(u.grid),
        sys.field(corr).on_grid(u.grid),
    )

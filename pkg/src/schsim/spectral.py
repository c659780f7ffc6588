"""Orthonormal trigonometric basis on the unit circle.

Fields live on S^1 = R/Z and are represented by coefficients in the
orthonormal real basis

    phi_0      = 1,
    phi_{2j-1} = sqrt(2) cos(2 pi j x),
    phi_{2j}   = sqrt(2) sin(2 pi j x),     j = 1..n_modes,

so a field at truncation capacity n_modes carries 2*n_modes + 1 real
coefficients.  The physical quadrature grid has n_phys >= 3*n_modes + 1
equispaced nodes, which makes pointwise products alias-free: every stored
coefficient of the product of two representable fields is exact, because
the trapezoidal rule on P equispaced nodes integrates trigonometric
polynomials of degree < P exactly.

All coefficient-space operators act on the last axis, so stacked states of
shape (batch, 2*n_modes+1) go through the same code paths as single fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    """Raised when an operation mixes fields from different grids."""


def _default_n_phys(n_modes: int) -> int:
    # smallest even integer >= 3*n_modes + 1; even grids contain x = 1/2,
    # which keeps extrema of low-mode fields on nodes
    p = 3 * n_modes + 1
    return p + (p % 2)


@dataclass(frozen=True)
class SpectralGrid:
    """Precomputed transforms and multipliers for one truncation capacity.

    Parameters
    ----------
    n_modes : highest retained frequency index (capacity).
    n_phys : number of equispaced quadrature nodes; must satisfy
        n_phys >= 3*n_modes + 1 so that quadratic products are alias-free.
    """

    n_modes: int
    n_phys: int = 0
    x: np.ndarray = field(init=False, repr=False, compare=False)
    freqs: np.ndarray = field(init=False, repr=False, compare=False)
    synth: np.ndarray = field(init=False, repr=False, compare=False)
    anal: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_modes < 0:
            raise ValueError(f"n_modes must be nonnegative, got {self.n_modes}")
        if self.n_phys == 0:
            object.__setattr__(self, "n_phys", _default_n_phys(self.n_modes))
        if self.n_phys < 3 * self.n_modes + 1:
            raise ValueError(
                f"n_phys={self.n_phys} under-resolves products at "
                f"n_modes={self.n_modes}; need >= {3 * self.n_modes + 1}"
            )
        x = np.arange(self.n_phys) / self.n_phys
        c = self.n_coeffs
        # per-slot frequency index: [0, 1, 1, 2, 2, ...]
        freqs = np.zeros(c, dtype=np.int64)
        freqs[1::2] = np.arange(1, self.n_modes + 1)
        freqs[2::2] = np.arange(1, self.n_modes + 1)
        synth = np.empty((self.n_phys, c))
        synth[:, 0] = 1.0
        jx = TWO_PI * np.outer(x, np.arange(1, self.n_modes + 1))
        synth[:, 1::2] = np.sqrt(2.0) * np.cos(jx)
        synth[:, 2::2] = np.sqrt(2.0) * np.sin(jx)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "synth", synth)
        object.__setattr__(self, "anal", synth.T / self.n_phys)

    @property
    def n_coeffs(self) -> int:
        return 2 * self.n_modes + 1

    @property
    def omega(self) -> np.ndarray:
        """Angular frequency 2*pi*j per coefficient slot."""
        return TWO_PI * self.freqs

    # -- coefficient-space kernels (batch-safe on the last axis) ------------

    def to_physical(self, c: np.ndarray) -> np.ndarray:
        return c @ self.synth.T

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return values @ self.anal.T

    def derivative_coeffs(self, c: np.ndarray) -> np.ndarray:
        """Exact spatial derivative: (a_j, b_j) -> (w_j b_j, -w_j a_j)."""
        out = np.empty_like(c)
        w = TWO_PI * np.arange(1, self.n_modes + 1)
        out[..., 0] = 0.0
        out[..., 1::2] = w * c[..., 2::2]
        out[..., 2::2] = -w * c[..., 1::2]
        return out

    def project_coeffs(self, c: np.ndarray, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError(f"projection level must be nonnegative, got {n}")
        if n > self.n_modes:
            raise ValueError(
                f"projection level {n} exceeds grid capacity {self.n_modes}"
            )
        return np.where(self.freqs <= n, c, 0.0)

    def multiply_coeffs(self, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
        """Alias-free pointwise product, truncated to grid capacity.

        Every retained coefficient equals the exact coefficient of the true
        product; frequencies above n_modes are dropped, never folded back.
        """
        return self.to_coeffs(self.to_physical(c1) * self.to_physical(c2))

    def helmholtz_coeffs(self, c: np.ndarray) -> np.ndarray:
        """Solve (1 - d_xx) v = c, i.e. multiply slot j by 1/(1+(2 pi j)^2)."""
        return c / (1.0 + self.omega**2)

    def sobolev_sq_coeffs(self, c: np.ndarray, m: int) -> np.ndarray:
        """Squared Sobolev norm sum_{l<=m} ||d^l f||_{L2}^2 (batched)."""
        if m < 0:
            raise ValueError(f"Sobolev order must be nonnegative, got {m}")
        w2 = self.omega**2
        weight = np.ones(self.n_coeffs)
        pw = np.ones(self.n_coeffs)
        for _ in range(m):
            pw = pw * w2
            weight = weight + pw
        return np.einsum("...i,i->...", c * c, weight)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature of physical samples over S^1 (exact below degree n_phys)."""
        return np.sum(values, axis=-1) / self.n_phys

    def quadrature_l2_sq(self, values: np.ndarray) -> np.ndarray:
        return np.sum(values * values, axis=-1) / self.n_phys


@dataclass(frozen=True)
class FourierField:
    """A real field on S^1, stored as orthonormal-basis coefficients."""

    grid: SpectralGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.grid.n_coeffs,):
            raise ValueError(
                f"coefficient vector has shape {c.shape}, "
                f"expected ({self.grid.n_coeffs},)"
            )
        object.__setattr__(self, "coeffs", c)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(grid: SpectralGrid) -> "FourierField":
        return FourierField(grid, np.zeros(grid.n_coeffs))

    @staticmethod
    def from_function(grid: SpectralGrid, fn) -> "FourierField":
        """Quadrature projection of a callable onto the basis."""
        return FourierField(grid, grid.to_coeffs(np.asarray(fn(grid.x), dtype=np.float64)))

    @staticmethod
    def from_modes(grid: SpectralGrid, c0: float = 0.0, cos: dict | None = None,
                   sin: dict | None = None) -> "FourierField":
        """Build a field from plain cos/sin amplitudes.

        ``cos={j: a}`` contributes a*cos(2 pi j x); amplitudes are converted
        to the orthonormal basis internally.
        """
        c = np.zeros(grid.n_coeffs)
        c[0] = c0
        for j, a in (cos or {}).items():
            if not 1 <= j <= grid.n_modes:
                raise ValueError(f"cos mode {j} outside capacity {grid.n_modes}")
            c[2 * j - 1] = a / np.sqrt(2.0)
        for j, b in (sin or {}).items():
            if not 1 <= j <= grid.n_modes:
                raise ValueError(f"sin mode {j} outside capacity {grid.n_modes}")
            c[2 * j] = b / np.sqrt(2.0)
        return FourierField(grid, c)

    # -- arithmetic ----------------------------------------------------------

    def _check_same_grid(self, other: "FourierField"):
        if self.grid is not other.grid and self.grid != other.grid:
            raise GridMismatchError(
                f"fields live on different grids: "
                f"{self.grid.n_modes}/{self.grid.n_phys} vs "
                f"{other.grid.n_modes}/{other.grid.n_phys}"
            )

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check_same_grid(other)
        return FourierField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check_same_grid(other)
        return FourierField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "FourierField":
        return FourierField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return FourierField(self.grid, -self.coeffs)

    # -- evaluation ----------------------------------------------------------

    def values(self) -> np.ndarray:
        """Samples on the physical quadrature grid."""
        return self.grid.to_physical(self.coeffs)

    def on_grid(self, grid: SpectralGrid) -> "FourierField":
        """Transfer to another grid, zero-padding or truncating frequencies."""
        if grid == self.grid:
            return FourierField(grid, self.coeffs.copy())
        c = np.zeros(grid.n_coeffs)
        keep = min(grid.n_modes, self.grid.n_modes)
        c[: 2 * keep + 1] = self.coeffs[: 2 * keep + 1]
        return FourierField(grid, c)


# -- public operations -------------------------------------------------------


def project(f: FourierField, n: int) -> FourierField:
    """Galerkin projection onto frequencies <= n (constant always kept)."""
    return FourierField(f.grid, f.grid.project_coeffs(f.coeffs, n))


def derivative(f: FourierField) -> FourierField:
    """Exact spatial derivative in coefficient space."""
    return FourierField(f.grid, f.grid.derivative_coeffs(f.coeffs))


def multiply(f: FourierField, g: FourierField) -> FourierField:
    """Dealiased pointwise product (exact up to grid capacity)."""
    f._check_same_grid(g)
    return FourierField(f.grid, f.grid.multiply_coeffs(f.coeffs, g.coeffs))


def helmholtz_solve(f: FourierField) -> FourierField:
    """Invert 1 - d_xx via the Fourier multiplier 1/(1+(2 pi j)^2)."""
    return FourierField(f.grid, f.grid.helmholtz_coeffs(f.coeffs))


def sobolev_norm(f: FourierField, m: int) -> float:
    """H^m norm: sqrt(sum_{l<=m} ||d^l f||_{L2}^2)."""
    return float(np.sqrt(f.grid.sobolev_sq_coeffs(f.coeffs, m)))


def inf_and_sup(f: FourierField) -> tuple[float, float]:
    """Min and max over the physical quadrature grid (documented proxy)."""
    v = f.values()
    return float(v.min()), float(v.max())


def random_field(grid: SpectralGrid, decay: float, rng: np.random.Generator,
                 amplitude: float = 1.0, j_min: int = 1) -> FourierField:
    """Gaussian-random coefficients with power-law decay j**(-decay).

    The three laboratory classes are decay = 4 (smooth), 3/2 (H^1-critical)
    and 1 (rough-L^2); the constant slot stays zero.
    """
    c = np.zeros(grid.n_coeffs)
    j = np.arange(1, grid.n_modes + 1, dtype=np.float64)
    scale = np.where(j >= j_min, amplitude * j**(-decay), 0.0)
    c[1::2] = scale * rng.standard_normal(grid.n_modes)
    c[2::2] = scale * rng.standard_normal(grid.n_modes)
    return FourierField(grid, c)

"""Reproducible Brownian driving paths.

Each path owns a counter-based random stream keyed by ``(master_seed,
path_index, level)`` through a splitmix64 finalizer, so the same path
is regenerated bit-for-bit regardless of how many paths are sampled,
in which order, or on how many workers.

``refine`` halves the step by Brownian-bridge interpolation: the two
half-increments of step ``i`` sum to the coarse increment up to
rounding, and the bridge randomness comes from the next ``level`` of
the same path's key, so coarse and fine paths stay coupled.  The
refined path keeps a reference to its parent, which makes ``coarsen``
an exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["BrownianPath", "sample_path", "refine", "coarsen"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(master_seed: int, path_index: int, level: int) -> int:
    """128-bit counter-stream key for one path at one refinement level."""
    k0 = _splitmix64((master_seed ^ (path_index * _GOLDEN)) & _MASK64)
    k1 = _splitmix64(k0 ^ (((level + 1) * _GOLDEN) & _MASK64))
    return (k1 << 64) | k0


def _generator(master_seed: int, path_index: int, level: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, path_index, level)))


@dataclass(frozen=True)
class BrownianPath:
    """One scalar Brownian path on ``[t0, t1]`` stored as increments."""

    t0: float
    t1: float
    increments: np.ndarray
    master_seed: int
    path_index: int
    level: int = 0
    parent: "BrownianPath | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.t1 <= self.t0:
            raise ValueError("path needs t1 > t0")
        if self.increments.ndim != 1 or self.increments.size == 0:
            raise ValueError("increments must be a nonempty 1-d array")
        self.increments.setflags(write=False)

    @property
    def n_steps(self) -> int:
        return self.increments.size

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_steps + 1)

    def values(self) -> np.ndarray:
        """W at the step times, starting from W(t0) = 0."""
        out = np.empty(self.n_steps + 1)
        out[0] = 0.0
        np.cumsum(self.increments, out=out[1:])
        return out

    @property
    def terminal(self) -> float:
        return float(np.sum(self.increments))


def sample_path(
    t0: float,
    t1: float,
    n_steps: int,
    master_seed: int,
    path_index: int,
    level: int = 0,
) -> BrownianPath:
    """Draw a fresh path; same arguments always give the same increments."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    if t1 <= t0:
        raise ValueError("path needs t1 > t0")
    dt = (t1 - t0) / n_steps
    rng = _generator(master_seed, path_index, level)
    increments = np.sqrt(dt) * rng.standard_normal(n_steps)
    return BrownianPath(t0, t1, increments, master_seed, path_index, level)


def refine(path: BrownianPath) -> BrownianPath:
    """Halve the step by conditional (bridge) sampling of midpoints."""
    dt = path.dt
    rng = _generator(path.master_seed, path.path_index, path.level + 1)
    z = np.sqrt(0.25 * dt) * rng.standard_normal(path.n_steps)
    half = 0.5 * path.increments
    fine = np.empty(2 * path.n_steps)
    fine[0::2] = half + z
    fine[1::2] = half - z
    return BrownianPath(
        path.t0,
        path.t1,
        fine,
        path.master_seed,
        path.path_index,
        path.level + 1,
        parent=path,
    )


def coarsen(path: BrownianPath) -> BrownianPath:
    """Undo one refinement exactly (returns the stored parent)."""
    if path.parent is None:
        raise ValueError("path has no recorded parent to coarsen to")
    return path.parent

"""Exact-in-distribution sampling of symmetric stable increments and sheets.

Increments are drawn exactly at grid times (no Euler scheme): the
Chambers-Mallows-Stuck transform in one dimension, a plain Gaussian draw for
alpha = 2, and a subordinated Gaussian for d >= 2 with alpha < 2.  All
randomness flows through counter-based streams keyed by ``(seed, stream_id)``
so replicas are reproducible regardless of how work is scheduled.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .model import ModelParams

_MASK64 = (1 << 64) - 1
_MAGIC = b"ADSHEET1"


def stream_generator(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream_id); draws advance the counter."""
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _standard_symmetric_stable(alpha: float, rng: np.random.Generator, size) -> np.ndarray:
    """Symmetric stable variates with characteristic function exp(-|u|^alpha)."""
    if alpha == 2.0:
        return np.sqrt(2.0) * rng.standard_normal(size)
    u = (rng.random(size) - 0.5) * np.pi
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(u)
    s = np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
    t = (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return s * t


def _one_sided_stable(beta: float, rng: np.random.Generator, size) -> np.ndarray:
    """Positive stable variates with Laplace transform exp(-s^beta), 0 < beta < 1."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"one-sided index must lie in (0, 1), got {beta!r}")
    u = rng.random(size) * np.pi
    w = rng.standard_exponential(size)
    a = np.sin(beta * u) / np.sin(u) ** (1.0 / beta)
    return a * (np.sin((1.0 - beta) * u) / w) ** ((1.0 - beta) / beta)


def sample_increment(params: ModelParams, dt: float, rng: np.random.Generator,
                     size: int | None = None) -> np.ndarray:
    """One (or ``size``) increments of duration ``dt``.

    The returned vectors have characteristic function
    ``exp(-dt * c * |lam|**alpha)``.  Shape is ``(d,)`` for a single draw and
    ``(size, d)`` otherwise.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    d, alpha, c = params.d, params.alpha, params.c
    n = 1 if size is None else int(size)
    if alpha == 2.0:
        out = np.sqrt(2.0 * c * dt) * rng.standard_normal((n, d))
    elif d == 1:
        out = (c * dt) ** (1.0 / alpha) * _standard_symmetric_stable(alpha, rng, (n, 1))
    else:
        # X = sqrt(A) Z with A one-sided (alpha/2)-stable scaled so that
        # E exp(i lam . X) = exp(-dt c |lam|^alpha)
        scale = (dt * c * 2.0 ** (alpha / 2.0)) ** (2.0 / alpha)
        a = scale * _one_sided_stable(alpha / 2.0, rng, n)
        out = np.sqrt(a)[:, None] * rng.standard_normal((n, d))
    return out[0] if size is None else out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0, dt, 2dt, ..., t_max with m = steps cells."""

    t_max: float
    steps: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.t_max / self.steps

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class SheetSample:
    """p independent stable paths sampled at shared grid times.

    ``positions`` has shape (p, steps + 1, d) with positions[:, 0] == 0.
    ``seed``/``stream_id`` record the RNG provenance; the sample is a pure
    function of (params, grid, seed, stream_id).
    """

    params: ModelParams
    grid: TimeGrid
    positions: np.ndarray
    seed: int
    stream_id: int

    def path(self, j: int) -> np.ndarray:
        """Positions of path j; shape (steps + 1,) when d == 1 else (steps+1, d)."""
        pos = self.positions[j]
        return pos[:, 0] if self.params.d == 1 else pos

    def left_values(self, j: int, cells: int | None = None) -> np.ndarray:
        """Left-endpoint values X_j(k dt), k = 0..cells-1 (default all cells)."""
        m = self.grid.steps if cells is None else int(cells)
        return self.positions[j, :m]


def simulate_sheet(params: ModelParams, grid: TimeGrid, seed: int,
                   stream_id: int = 0) -> SheetSample:
    """Sample the p paths by cumulative sums of exact increments."""
    rng = stream_generator(seed, stream_id)
    m = grid.steps
    positions = np.zeros((params.p, m + 1, params.d))
    for j in range(params.p):
        inc = sample_increment(params, grid.dt, rng, size=m)
        np.cumsum(inc, axis=0, out=positions[j, 1:])
    return SheetSample(params=params, grid=grid, positions=positions,
                       seed=int(seed), stream_id=int(stream_id))


# binary dump: fixed little-endian header, float64 body in path-major order
_HEADER = struct.Struct("<8sIIdddIQQ")


def save_sheet(sheet: SheetSample, path) -> None:
    p = sheet.params
    header = _HEADER.pack(
        _MAGIC, p.d, p.p, p.alpha, p.c,
        sheet.grid.t_max, sheet.grid.steps,
        sheet.seed & _MASK64, sheet.stream_id & _MASK64,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(sheet.positions, dtype="<f8").tobytes())


def load_sheet(path) -> SheetSample:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, d, p, alpha, c, t_max, steps, seed, stream_id = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a sheet dump (bad magic {magic!r})")
        body = np.frombuffer(fh.read(), dtype="<f8")
    expected = p * (steps + 1) * d
    if body.size != expected:
        raise ValueError(f"{path}: body has {body.size} floats, expected {expected}")
    params = ModelParams(d=d, p=p, alpha=alpha, c=c)
    grid = TimeGrid(t_max=t_max, steps=steps)
    positions = body.reshape(p, steps + 1, d).astype(float)
    return SheetSample(params=params, grid=grid, positions=positions,
                       seed=int(seed), stream_id=int(stream_id))

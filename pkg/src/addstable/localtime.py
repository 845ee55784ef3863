"""Local-time estimation from sheet samples.

Two estimators are provided: an occupation histogram (exact mass bookkeeping,
one value per spatial cell) and a smoothed estimator driven by a compactly
band-limited probability density.  Spatial grids always carry an odd number of
bins per axis so the origin sits at a cell center.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .stablesim import SheetSample


class OutOfGridError(ValueError):
    """A sheet value fell outside the spatial grid."""


def _as_time_box(sheet: SheetSample, time_box) -> tuple[float, ...]:
    p = sheet.params.p
    if np.isscalar(time_box):
        box = (float(time_box),) * p
    else:
        box = tuple(float(t) for t in time_box)
    if len(box) != p:
        raise ValueError(f"time box needs {p} entries, got {len(box)}")
    dt = sheet.grid.dt
    for t in box:
        if not 0 < t <= sheet.grid.t_max + 1e-9 * sheet.grid.t_max:
            raise ValueError(f"time box entry {t} outside the sheet horizon")
        k = t / dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ValueError(f"time box entry {t} does not align with dt={dt}")
    return box


@dataclass(frozen=True)
class SpatialGrid:
    """Symmetric cubic grid; ``bins`` is odd so cell ``bins//2`` is centred at 0."""

    half_width: float
    bins: int
    d: int = 1

    def __post_init__(self):
        if self.bins < 1 or self.bins % 2 == 0:
            raise ValueError(f"bins must be a positive odd integer, got {self.bins}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def cell_width(self) -> float:
        return 2.0 * self.half_width / self.bins

    @property
    def cell_volume(self) -> float:
        return self.cell_width ** self.d

    def axis_centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * self.cell_width - self.half_width

    def axis_index(self, coords) -> np.ndarray:
        return np.floor((np.asarray(coords) + self.half_width) / self.cell_width).astype(np.int64)

    @classmethod
    def for_sheet(cls, sheet: SheetSample, time_box, bin_width: float,
                  pad: float = 0.0) -> "SpatialGrid":
        """Auto-sized grid covering the sheet's reachable range plus ``pad``.

        The per-axis reach is bounded by the sum over paths of each path's
        maximum excursion, which covers every time tuple in the box.
        """
        box = _as_time_box(sheet, time_box)
        dt = sheet.grid.dt
        reach = 0.0
        for j, t in enumerate(box):
            m = max(1, int(round(t / dt)))
            reach += float(np.abs(sheet.positions[j, :m]).max())
        half_min = reach + pad + bin_width
        k = int(math.ceil(half_min / bin_width))
        bins = 2 * k + 1
        return cls(half_width=bins * bin_width / 2.0, bins=bins, d=sheet.params.d)


@dataclass(frozen=True)
class LocalTimeField:
    """Estimated occupation density per cell; units time^p / space^d."""

    grid: SpatialGrid
    values: np.ndarray
    time_box: tuple[float, ...]
    dt: float

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_volume

    def value_at(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = self.grid.axis_index(x)
        if np.any(idx < 0) or np.any(idx >= self.grid.bins):
            raise OutOfGridError(f"point {x} outside the grid")
        return float(self.values[tuple(idx)])

    def origin_value(self) -> float:
        return self.value_at(np.zeros(self.grid.d))


def _chunk_size(nsteps) -> int:
    # keep outer-sum chunks near 4e6 entries
    rest = 1
    for m in nsteps[1:]:
        rest *= m
    return max(1, int(4e6 // max(1, rest)))


def occupation_histogram(sheet: SheetSample, sgrid: SpatialGrid, time_box) -> LocalTimeField:
    """Histogram of the field values over all time tuples in the box.

    Every tuple contributes ``dt^p / cell_volume`` to the cell containing
    ``X_1(s_1) + ... + X_p(s_p)``, so total mass is exactly the box volume.
    Cost grows like ``steps^p``; p <= 3 is enforced.
    """
    params = sheet.params
    if params.p > 3:
        raise ValueError("occupation histogram supports p <= 3")
    box = _as_time_box(sheet, time_box)
    dt = sheet.grid.dt
    nsteps = [max(0, int(round(t / dt))) for t in box]
    bins = sgrid.bins
    counts = np.zeros(bins ** params.d, dtype=np.int64)

    if min(nsteps) > 0:
        axis_vectors = [
            [sheet.positions[j, : nsteps[j], i] for j in range(params.p)]
            for i in range(params.d)
        ]
        chunk = _chunk_size(nsteps)
        for start in range(0, nsteps[0], chunk):
            stop = min(nsteps[0], start + chunk)
            flat = None
            for i in range(params.d):
                total = None
                for j in range(params.p):
                    shape = [1] * params.p
                    shape[j] = -1
                    v = axis_vectors[i][j]
                    part = v[start:stop] if j == 0 else v
                    term = part.reshape(shape)
                    total = term if total is None else total + term
                idx = sgrid.axis_index(total)
                bad = (idx < 0) | (idx >= bins)
                if bad.any():
                    where = np.argwhere(bad)[0]
                    pt = np.array([
                        sum(axis_vectors[k][j][(start + where[0]) if j == 0 else where[j]]
                            for j in range(params.p))
                        for k in range(params.d)
                    ])
                    raise OutOfGridError(
                        f"sheet value {pt} at time cell {tuple(where)} outside grid "
                        f"of half-width {sgrid.half_width:g}"
                    )
                flat = idx if flat is None else flat * bins + idx
            counts += np.bincount(flat.ravel(), minlength=bins ** params.d)

    values = counts.reshape((bins,) * params.d).astype(float)
    values *= dt ** params.p / sgrid.cell_volume
    return LocalTimeField(grid=sgrid, values=values, time_box=box, dt=dt)


@dataclass(frozen=True)
class Mollifier:
    """Band-limited probability density used to smooth local times.

    The base density is ``(4 pi)^(-d) prod_k (2 sin x_k / x_k)^2``; its Fourier
    transform is the tent ``prod_k (2 - |lam_k|)_+ / 2`` supported in
    ``[-2, 2]^d``, so the scaled copy has transform support ``[-2/eps, 2/eps]^d``.
    """

    eps: float
    d: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def normalizer(self) -> float:
        return (4.0 * math.pi) ** self.d

    @staticmethod
    def _axis_density(u):
        # (2 sin u / u)^2 / (4 pi), smooth at u = 0
        s = np.sinc(np.asarray(u, dtype=float) / np.pi)
        return s * s / np.pi

    def h(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            return self._axis_density(x)
        return np.prod(self._axis_density(x), axis=-1)

    def h_eps(self, x) -> np.ndarray:
        return self.eps ** (-self.d) * self.h(np.asarray(x, dtype=float) / self.eps)

    def hhat(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        tent = np.maximum(0.0, 2.0 - np.abs(lam)) / 2.0
        if self.d == 1 and (lam.ndim == 0 or lam.shape[-1] != 1):
            return tent
        return np.prod(tent, axis=-1)

    def hhat_eps(self, lam) -> np.ndarray:
        return self.hhat(self.eps * np.asarray(lam, dtype=float))


def mollified_local_time(sheet: SheetSample, eps: float, x, time_box) -> float:
    """Riemann sum of the scaled density along the field, times ``dt^p``.

    Integrating the smoothing kernel against the occupation density equals
    integrating it along the field, which is what a time-grid sum computes.
    """
    params = sheet.params
    box = _as_time_box(sheet, time_box)
    dt = sheet.grid.dt
    nsteps = [max(0, int(round(t / dt))) for t in box]
    if min(nsteps) == 0:
        return 0.0
    mol = Mollifier(eps=eps, d=params.d)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.d,):
        raise ValueError(f"x must be a point in R^{params.d}")

    total = 0.0
    chunk = _chunk_size(nsteps)
    axis_vectors = [
        [sheet.positions[j, : nsteps[j], i] for j in range(params.p)]
        for i in range(params.d)
    ]
    for start in range(0, nsteps[0], chunk):
        stop = min(nsteps[0], start + chunk)
        dens = None
        for i in range(params.d):
            diff = None
            for j in range(params.p):
                shape = [1] * params.p
                shape[j] = -1
                v = axis_vectors[i][j]
                part = v[start:stop] if j == 0 else v
                term = part.reshape(shape)
                diff = term if diff is None else diff + term
            f = Mollifier._axis_density((diff - x[i]) / eps) / eps
            dens = f if dens is None else dens * f
        total += float(dens.sum())
    return total * dt ** params.p


def sup_local_time(field: LocalTimeField) -> tuple[np.ndarray, float]:
    """(argmax cell center, max value) over the field's cells."""
    flat = int(np.argmax(field.values))
    idx = np.unravel_index(flat, field.values.shape)
    centers = field.grid.axis_centers()
    argmax = np.array([centers[i] for i in idx])
    return argmax, float(field.values[idx])


def pair_count_in_interval(x1: np.ndarray, x2: np.ndarray, lo: float, hi: float) -> int:
    """Number of pairs (i, j) with x1[i] + x2[j] in [lo, hi); d=1, p=2 helper."""
    s = np.sort(np.asarray(x2, dtype=float))
    x1 = np.asarray(x1, dtype=float)
    hi_idx = np.searchsorted(s, hi - x1, side="left")
    lo_idx = np.searchsorted(s, lo - x1, side="left")
    return int((hi_idx - lo_idx).sum())


def field_to_csv(field: LocalTimeField, path) -> None:
    """Cell centers and values, one row per cell."""
    centers = field.grid.axis_centers()
    d = field.grid.d
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + ["value"])
        for flat, v in enumerate(field.values.ravel()):
            idx = np.unravel_index(flat, field.values.shape)
            writer.writerow([f"{centers[i]:.12g}" for i in idx] + [f"{v:.12g}"])


def field_summary(field: LocalTimeField) -> dict:
    argmax, vmax = sup_local_time(field)
    return {
        "mass": field.mass(),
        "max": vmax,
        "argmax": [float(v) for v in argmax],
        "time_box": [float(t) for t in field.time_box],
        "bins": field.grid.bins,
        "cell_width": field.grid.cell_width,
    }

"""Monte Carlo campaigns: scaling checks, tail-rate fits, iterated-logarithm
traces, and the intersection identity for two-parameter fields.

Every campaign draws replica r from the counter-based stream
``(seed, stream_base + r)``, so results are bit-reproducible for a fixed
configuration no matter how replicas are sharded over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .localtime import SpatialGrid, occupation_histogram, sup_local_time
from .model import ModelParams, ldp_rate_constant, lil_constant
from .stablesim import TimeGrid, simulate_sheet


class TailFitError(ValueError):
    """Not enough exceedances to fit a tail slope."""


# ---------------------------------------------------------------------------
# batched field statistics (d = 1 fast paths with a general fallback)


def _rowwise_interval_counts(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """For each row r: sum_i #{j : values[r, j] in [lo[r, i], hi[r, i])}.

    Rows are packed into one sorted array with per-row offsets so a single
    searchsorted call serves the whole batch.
    """
    rows = values.shape[0]
    svals = np.sort(values, axis=1)
    all_min = min(svals.min(), lo.min())
    all_max = max(svals.max(), hi.max())
    span = 2.0 * (all_max - all_min) + 1.0
    offset = (np.arange(rows) * span)[:, None]
    flat = (svals + offset).ravel()
    hi_idx = np.searchsorted(flat, (hi + offset).ravel(), side="left")
    lo_idx = np.searchsorted(flat, (lo + offset).ravel(), side="left")
    return (hi_idx - lo_idx).reshape(rows, -1).sum(axis=1)


def _cell_index(values: np.ndarray, width: float) -> np.ndarray:
    # cells are [k w - w/2, k w + w/2); matches the odd-bin spatial grids
    return np.floor(values / width + 0.5).astype(np.int64)


def _pair_sup_count(x1: np.ndarray, x2: np.ndarray, width: float) -> int:
    sums = np.add.outer(x1, x2).ravel()
    idx = _cell_index(sums, width)
    idx -= idx.min()
    return int(np.bincount(idx).max())


@dataclass
class FieldSamples:
    """Per-replica origin local times (and optionally sup values)."""

    origin: np.ndarray
    sup: np.ndarray | None
    t: float
    dt: float
    bin_width: float
    meta: dict = field(default_factory=dict)


def sample_field_statistics(params: ModelParams, t: float, n_samples: int,
                            seed: int, *, steps: int = 400, stream_base: int = 0,
                            x: float = 0.0, want_sup: bool = False,
                            chunk: int = 512) -> FieldSamples:
    """Estimate the origin local time over [0, t]^p for ``n_samples`` sheets.

    The histogram bin width is tied to the time step, ``dt^(1/alpha)``, which
    makes the whole discrete construction self-similar under time scaling.
    """
    grid = TimeGrid(t, steps)
    dt = grid.dt
    width = dt ** (1.0 / params.alpha)
    fast = params.d == 1 and params.p in (1, 2)
    origin = np.empty(n_samples)
    sup = np.empty(n_samples) if want_sup else None
    center = float(_cell_index(np.array([x]), width)[0]) * width
    for start in range(0, n_samples, chunk):
        stop = min(n_samples, start + chunk)
        if fast:
            m = grid.steps
            vals = np.empty((stop - start, params.p, m))
            for i, r in enumerate(range(start, stop)):
                sheet = simulate_sheet(params, grid, seed, stream_base + r)
                vals[i] = sheet.positions[:, :m, 0]
            if params.p == 1:
                lo = center - width / 2.0
                hi = center + width / 2.0
                counts = ((vals[:, 0] >= lo) & (vals[:, 0] < hi)).sum(axis=1)
            else:
                lo = center - vals[:, 0] - width / 2.0
                hi = center - vals[:, 0] + width / 2.0
                counts = _rowwise_interval_counts(vals[:, 1], lo, hi)
            origin[start:stop] = counts * dt ** params.p / width
            if want_sup:
                for i in range(stop - start):
                    if params.p == 1:
                        idx = _cell_index(vals[i, 0], width)
                        cmax = int(np.bincount(idx - idx.min()).max())
                    else:
                        cmax = _pair_sup_count(vals[i, 0], vals[i, 1], width)
                    sup[start + i] = cmax * dt ** params.p / width
        else:
            for r in range(start, stop):
                sheet = simulate_sheet(params, grid, seed, stream_base + r)
                sgrid = SpatialGrid.for_sheet(sheet, t, width)
                fld = occupation_histogram(sheet, sgrid, t)
                origin[r] = fld.value_at(np.full(params.d, x))
                if want_sup:
                    sup[r] = sup_local_time(fld)[1]
    return FieldSamples(origin=origin, sup=sup, t=t, dt=dt, bin_width=width,
                        meta={"seed": seed, "stream_base": stream_base,
                              "steps": steps})


# ---------------------------------------------------------------------------
# scaling law


@dataclass
class ScalingReport:
    t1: float
    t2: float
    exponent: float
    n_samples: int
    ks_origin: tuple[float, float]
    ks_sup: tuple[float, float] | None
    seed: int
    meta: dict = field(default_factory=dict)


def scaling_check(params: ModelParams, t1: float, t2: float, n_samples: int,
                  seed: int, *, steps: int = 400, exponent_shift: float = 0.0,
                  include_sup: bool = True,
                  samples: tuple[FieldSamples, FieldSamples] | None = None) -> ScalingReport:
    """Two-sample KS test of rescaled local-time samples at two horizons.

    Under the self-similarity exponent ``(alpha p - d) / alpha`` the rescaled
    samples share one law; a deliberately shifted exponent is the negative
    control.
    """
    if samples is None:
        s1 = sample_field_statistics(params, t1, n_samples, seed, steps=steps,
                                     stream_base=0, want_sup=include_sup)
        s2 = sample_field_statistics(params, t2, n_samples, seed, steps=steps,
                                     stream_base=n_samples, want_sup=include_sup)
    else:
        s1, s2 = samples
    expo = (params.alpha * params.p - params.d) / params.alpha + exponent_shift
    y1 = t1 ** (-expo) * s1.origin
    y2 = t2 ** (-expo) * s2.origin
    ks = stats.ks_2samp(y1, y2)
    ks_origin = (float(ks.statistic), float(ks.pvalue))
    ks_sup = None
    if include_sup and s1.sup is not None and s2.sup is not None:
        ks2 = stats.ks_2samp(t1 ** (-expo) * s1.sup, t2 ** (-expo) * s2.sup)
        ks_sup = (float(ks2.statistic), float(ks2.pvalue))
    return ScalingReport(t1=t1, t2=t2, exponent=expo, n_samples=len(s1.origin),
                         ks_origin=ks_origin, ks_sup=ks_sup, seed=seed,
                         meta={"steps": steps, "exponent_shift": exponent_shift})


# ---------------------------------------------------------------------------
# tail rate fit


@dataclass
class TailFit:
    """Exponential tail fit of empirical exceedance probabilities.

    The regression is log P{Y >= t} against u = t^(alpha/d); under the limit
    theorem the slope approaches minus the rate constant.
    """

    thresholds: np.ndarray
    exceed_counts: np.ndarray
    n_samples: int
    regressors: np.ndarray
    log_prob: np.ndarray
    wilson_low: np.ndarray
    wilson_high: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    kappa_theory: float | None = None

    @property
    def slope_ratio(self) -> float | None:
        if self.kappa_theory is None:
            return None
        return -self.slope / self.kappa_theory


def _wilson_interval(count: np.ndarray, n: int, z: float = 1.959963984540054):
    phat = count / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half


def fit_tail_slope(samples: np.ndarray, tail_exponent: float, *,
                   thresholds: np.ndarray | None = None, min_exceed: int = 20,
                   n_thresholds: int = 12,
                   kappa_theory: float | None = None) -> TailFit:
    """Least-squares tail fit; raises :class:`TailFitError` when fewer than 4
    thresholds keep at least ``min_exceed`` exceedances."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    ordered = np.sort(samples)
    if thresholds is None:
        lo = float(np.quantile(samples, 0.9))
        if lo <= 0:
            positive = ordered[ordered > 0]
            if positive.size == 0:
                raise TailFitError("all samples are zero; nothing to fit")
            lo = float(positive[int(0.5 * positive.size)])
        if n <= min_exceed:
            raise TailFitError(f"need more than {min_exceed} samples, got {n}")
        hi = float(ordered[-min_exceed])
        if hi <= lo:
            raise TailFitError(
                f"no usable threshold range: 90th percentile {lo:.4g} already "
                f"beyond the {min_exceed}-exceedance level {hi:.4g}"
            )
        thresholds = np.geomspace(lo, hi, n_thresholds)
    thresholds = np.asarray(thresholds, dtype=float)
    counts = n - np.searchsorted(ordered, thresholds, side="left")
    usable = counts >= min_exceed
    if usable.sum() < 4:
        raise TailFitError(
            f"only {int(usable.sum())} thresholds kept >= {min_exceed} "
            f"exceedances: {thresholds[usable].tolist()}"
        )
    thr = thresholds[usable]
    cnt = counts[usable]
    u = thr ** tail_exponent
    log_p = np.log(cnt / n)
    slope, intercept = np.polyfit(u, log_p, 1)
    fitted = slope * u + intercept
    ss_res = float(((log_p - fitted) ** 2).sum())
    ss_tot = float(((log_p - log_p.mean()) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    w_lo, w_hi = _wilson_interval(cnt, n)
    return TailFit(thresholds=thr, exceed_counts=cnt, n_samples=n,
                   regressors=u, log_prob=log_p, wilson_low=w_lo,
                   wilson_high=w_hi, slope=float(slope),
                   intercept=float(intercept), r_squared=r_squared,
                   kappa_theory=kappa_theory)


def tail_ldp_fit(params: ModelParams, n_samples: int, seed: int, *,
                 steps: int = 400, thresholds: np.ndarray | None = None,
                 rho_hat: float | None = None, min_exceed: int = 20,
                 n_thresholds: int = 12,
                 samples: np.ndarray | None = None) -> TailFit:
    """Tail fit of simulated origin local times over the unit box."""
    if samples is None:
        samples = sample_field_statistics(params, 1.0, n_samples, seed,
                                          steps=steps).origin
    kappa = ldp_rate_constant(params, rho_hat) if rho_hat is not None else None
    return fit_tail_slope(samples, params.alpha / params.d,
                          thresholds=thresholds, min_exceed=min_exceed,
                          n_thresholds=n_thresholds, kappa_theory=kappa)


# ---------------------------------------------------------------------------
# iterated-logarithm trace (declared diagnostic, never a hard gate)


@dataclass
class LilTrace:
    checkpoints: np.ndarray
    per_path: np.ndarray
    running_max: np.ndarray
    c_lil: float | None
    bracket: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> float:
        return float(self.running_max[-1])

    def within_bracket(self) -> bool | None:
        if self.c_lil is None:
            return None
        lo, hi = self.bracket
        return lo * self.c_lil <= self.final <= hi * self.c_lil


def lil_tracker(params: ModelParams, x: float, horizon: float, n_paths: int,
                seed: int, *, dt: float = 0.25, n_checkpoints: int = 24,
                rho_hat: float | None = None,
                bracket: tuple[float, float] = (0.05, 20.0)) -> LilTrace:
    """Track the normalized local time R(t) along geometric checkpoints.

    R(t) = t^(-(alpha p - d)/alpha) (log log t)^(-d/alpha) eta(t); the
    running max across paths is reported against the theoretical constant.
    """
    if horizon < math.e ** math.e:
        raise ValueError("horizon must be at least e^e so log log t > 0")
    steps_total = int(round(horizon / dt))
    grid = TimeGrid(horizon, steps_total)
    dt = grid.dt
    t0 = max(math.e ** math.e, 20.0 * dt)
    raw = np.geomspace(t0, horizon, n_checkpoints)
    mks = np.unique(np.clip(np.round(raw / dt).astype(int), 1, steps_total))
    checkpoints = mks * dt
    width = dt ** (1.0 / params.alpha)
    expo = (params.alpha * params.p - params.d) / params.alpha
    center = float(_cell_index(np.array([x]), width)[0]) * width

    fast = params.d == 1 and params.p == 2
    per_path = np.empty((n_paths, len(mks)))
    for r in range(n_paths):
        sheet = simulate_sheet(params, grid, seed, r)
        if fast:
            v1 = sheet.positions[0, :steps_total, 0]
            v2 = sheet.positions[1, :steps_total, 0]
            for k, mk in enumerate(mks):
                s = np.sort(v2[:mk])
                hi = np.searchsorted(s, center + width / 2.0 - v1[:mk], side="left")
                lo = np.searchsorted(s, center - width / 2.0 - v1[:mk], side="left")
                eta = float((hi - lo).sum()) * dt ** 2 / width
                t = checkpoints[k]
                per_path[r, k] = t ** (-expo) * math.log(math.log(t)) ** (-params.d / params.alpha) * eta
        else:
            for k, mk in enumerate(mks):
                box = mk * dt
                sgrid = SpatialGrid.for_sheet(sheet, box, width)
                fld = occupation_histogram(sheet, sgrid, box)
                eta = fld.value_at(np.full(params.d, x))
                t = checkpoints[k]
                per_path[r, k] = t ** (-expo) * math.log(math.log(t)) ** (-params.d / params.alpha) * eta
    running_max = np.maximum.accumulate(per_path.max(axis=0))
    c = lil_constant(params, rho_hat) if rho_hat is not None else None
    return LilTrace(checkpoints=checkpoints, per_path=per_path,
                    running_max=running_max, c_lil=c, bracket=bracket,
                    meta={"dt": dt, "seed": seed, "n_paths": n_paths,
                          "horizon": horizon, "x": x})


# ---------------------------------------------------------------------------
# intersection identity for p = 2


@dataclass
class IdentityReport:
    ks_stat: float
    p_value: float
    mean_additive: float
    se_additive: float
    mean_intersection: float
    se_intersection: float
    dependent: bool
    n_samples: int
    meta: dict = field(default_factory=dict)

    def means_compatible(self, n_sigma: float = 3.0) -> bool:
        gap = abs(self.mean_additive - self.mean_intersection)
        return gap <= n_sigma * math.hypot(self.se_additive, self.se_intersection)


def _mutual_intersection_samples(params: ModelParams, n_samples: int, seed: int,
                                 *, steps: int, stream_base: int,
                                 dependent: bool) -> np.ndarray:
    """dt^2/w^d times the cell-count inner product of two path histograms."""
    grid = TimeGrid(1.0, steps)
    dt = grid.dt
    width = dt ** (1.0 / params.alpha)
    out = np.empty(n_samples)
    for r in range(n_samples):
        sheet = simulate_sheet(params, grid, seed, stream_base + r)
        m = grid.steps
        y1 = sheet.positions[0, :m]
        y2 = y1 if dependent else sheet.positions[1, :m]
        i1 = _cell_index(y1, width)
        i2 = _cell_index(y2, width)
        lo = np.minimum(i1.min(axis=0), i2.min(axis=0))
        i1 = i1 - lo
        i2 = i2 - lo
        hi = np.maximum(i1.max(axis=0), i2.max(axis=0)) + 1
        flat1 = np.zeros(m, dtype=np.int64)
        flat2 = np.zeros(m, dtype=np.int64)
        for axis in range(params.d):
            flat1 = flat1 * hi[axis] + i1[:, axis]
            flat2 = flat2 * hi[axis] + i2[:, axis]
        ncells = int(np.prod(hi))
        c1 = np.bincount(flat1, minlength=ncells)
        c2 = np.bincount(flat2, minlength=ncells)
        out[r] = float(np.dot(c1, c2)) * dt ** 2 / width ** params.d
    return out


def intersection_identity_check(params: ModelParams, n_samples: int, seed: int, *,
                                steps: int = 400,
                                dependent: bool = False) -> IdentityReport:
    """KS comparison of the additive-field origin local time against the
    mutual intersection local time built from two independent paths.

    With ``dependent=True`` the second path is a copy of the first, which
    breaks the identity and serves as the negative control.
    """
    if params.p != 2:
        raise ValueError("the intersection identity requires p = 2")
    a = sample_field_statistics(params, 1.0, n_samples, seed, steps=steps,
                                stream_base=0).origin
    b = _mutual_intersection_samples(params, n_samples, seed, steps=steps,
                                     stream_base=n_samples, dependent=dependent)
    ks = stats.ks_2samp(a, b)
    return IdentityReport(
        ks_stat=float(ks.statistic), p_value=float(ks.pvalue),
        mean_additive=float(a.mean()),
        se_additive=float(a.std(ddof=1) / math.sqrt(len(a))),
        mean_intersection=float(b.mean()),
        se_intersection=float(b.std(ddof=1) / math.sqrt(len(b))),
        dependent=dependent, n_samples=n_samples,
        meta={"steps": steps, "seed": seed},
    )

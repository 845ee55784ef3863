"""Variational constants by projected gradient ascent on the unit sphere.

Four related problems share one ascent engine:

* the frequency-side correlation functional whose supremum bounds the local
  time's exponential moment rate (``solve_rho``),
* its lattice analogue for finitely supported weights (``solve_rho_lattice``),
* the periodized analogue on the scaled lattice ``2 pi Z^d / M``
  (``solve_rho_M``), whose normalization ``M^-d rho_M`` converges to
  ``(2 pi)^-d rho``,
* a Gagliardo-Nirenberg-type spatial constant for p = 2 (``solve_m_psi``)
  tied to rho through ``M = (2 pi)^(-d a/(2a-d)) rho^(a/(2a-d))``.

A shift-kernel operator supplies certified lower bounds for the first
problem, and an exact brute-force tuple sum provides the moment side of the
lattice limit theorem at small n.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .model import ModelParams, q, rho_upper_bound
from .moments import perm_prefix_sum_dp_batch
from .stablesim import stream_generator


class LatticeTailError(ValueError):
    """The kernel has not decayed below tolerance at the truncation cutoff."""


class BudgetError(ValueError):
    """An exact enumeration would exceed the configured cost budget."""


# ---------------------------------------------------------------------------
# grids and grid functions


@dataclass(frozen=True)
class UniformGrid:
    """Symmetric uniform grid on [-L, L]^d with an odd node count per axis."""

    half_width: float
    spacing: float
    d: int = 1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("grids are supported for d in {1, 2}")
        if not (self.half_width > 0 and self.spacing > 0):
            raise ValueError("half_width and spacing must be positive")

    @property
    def nodes_per_axis(self) -> int:
        return 2 * int(round(self.half_width / self.spacing)) + 1

    @property
    def cell(self) -> float:
        return self.spacing ** self.d

    def axis_coords(self) -> np.ndarray:
        n = self.nodes_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    def coords(self) -> np.ndarray:
        ax = self.axis_coords()
        if self.d == 1:
            return ax
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    def refined(self) -> "UniformGrid":
        return UniformGrid(2.0 * self.half_width, 0.5 * self.spacing, self.d)


@dataclass
class GridFunction:
    """Real values on a symmetric uniform grid with quadrature-weighted norms."""

    grid: UniformGrid
    values: np.ndarray

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.cell * float((self.values ** 2).sum()))

    def lq_norm(self, qexp: float) -> float:
        return (self.grid.cell * float(np.abs(self.values) ** qexp).sum()) ** (1.0 / qexp)

    def normalized_l2(self) -> "GridFunction":
        return GridFunction(self.grid, self.values / self.l2_norm())

    def is_even(self, tol: float = 1e-8) -> bool:
        flipped = self.values[tuple(slice(None, None, -1) for _ in range(self.values.ndim))]
        scale = float(np.abs(self.values).max()) or 1.0
        return bool(np.abs(self.values - flipped).max() <= tol * scale)


@dataclass
class VariationalSolution:
    """Best value found, with the ascent record needed to audit it."""

    value: float
    grid: object
    iterations: int
    grad_norm: float
    history: list
    converged: bool
    maximizer: np.ndarray
    restarts: int
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# correlations (transform-based with a direct fallback kept for tests)


def _flip(a: np.ndarray) -> np.ndarray:
    return a[tuple(slice(None, None, -1) for _ in range(a.ndim))]


def correlate_full(a: np.ndarray, b: np.ndarray, method: str = "fft") -> np.ndarray:
    """Cross-correlation c[l] = sum_j a[j + l] b[j] on the full lag range.

    Output axis length is ``len(a) + len(b) - 1`` per axis with the lag
    ``l = 0`` located at index ``len(b) - 1``.
    """
    if method == "fft":
        return fftconvolve(a, _flip(b), mode="full")
    out = np.zeros(tuple(na + nb - 1 for na, nb in zip(a.shape, b.shape)))
    for idx in np.ndindex(out.shape):
        lag = tuple(i - (nb - 1) for i, nb in zip(idx, b.shape))
        sa, sb = [], []
        for axis, l in enumerate(lag):
            lo = max(0, -l)
            hi = min(b.shape[axis], a.shape[axis] - l)
            if hi <= lo:
                break
            sb.append(slice(lo, hi))
            sa.append(slice(lo + l, hi + l))
        else:
            out[idx] = float((a[tuple(sa)] * b[tuple(sb)]).sum())
    return out


def _lag_weighted_shift_sum(w_lags: np.ndarray, a: np.ndarray, method: str = "fft") -> np.ndarray:
    """C[j] = sum_l w[l] a[j + l] for a full-lag array w; C has a's shape."""
    out = correlate_full(w_lags, a, method=method)
    n = a.shape
    sl = tuple(slice(nk - 1, 2 * nk - 1) for nk in n)
    return _flip(out[sl])


def _center_lags(full: np.ndarray, n_axis: tuple[int, ...]) -> np.ndarray:
    """Slice a full-lag array down to lags within the original grid box."""
    sl = []
    for full_len, n in zip(full.shape, n_axis):
        center = (n - 1) // 2
        zero = (full_len - 1) // 2
        sl.append(slice(zero - center, zero + center + 1))
    return full[tuple(sl)]


# ---------------------------------------------------------------------------
# ascent engine


@dataclass
class AscentOutcome:
    f: np.ndarray
    value: float
    history: list
    iterations: int
    grad_norm: float
    converged: bool


def ascend_on_sphere(value_and_grad, f0: np.ndarray, weight: float, *,
                     nonneg: bool = True, max_iter: int = 5000,
                     grad_tol: float = 1e-7, step0: float = 0.5,
                     armijo: float = 1e-4, min_step: float = 1e-14) -> AscentOutcome:
    """Projected gradient ascent on the unit sphere of the weighted L2 norm.

    Backtracking line search keeps the objective history nondecreasing; with
    ``nonneg`` the iterates are clipped to the nonnegative cone before the
    sphere projection.
    """

    def project(f):
        if nonneg:
            f = np.maximum(f, 0.0)
        nrm = math.sqrt(weight * float((f * f).sum()))
        if nrm == 0.0:
            raise ValueError("cannot project the zero function onto the sphere")
        return f / nrm

    f = project(np.asarray(f0, dtype=float))
    value, grad = value_and_grad(f)
    history = [value]
    step = step0
    gnorm = math.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        radial = weight * float((grad * f).sum())
        tangent = grad - radial * f
        gnorm = math.sqrt(weight * float((tangent * tangent).sum()))
        if gnorm <= grad_tol:
            converged = True
            break
        moved = False
        while step >= min_step:
            cand = project(f + step * tangent)
            cval, cgrad = value_and_grad(cand)
            if cval >= value + armijo * step * gnorm * gnorm:
                f, value, grad = cand, cval, cgrad
                history.append(value)
                step = min(step * 1.8, 1e8)
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return AscentOutcome(f=f, value=value, history=history,
                         iterations=iterations, grad_norm=gnorm, converged=converged)


def _multistart(value_and_grad, starts, weight, *, nonneg=True, workers: int = 1,
                **kwargs) -> tuple[AscentOutcome, list[AscentOutcome]]:
    def run(f0):
        return ascend_on_sphere(value_and_grad, f0, weight, nonneg=nonneg, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(f0) for f0 in starts]
    # reduction independent of scheduling: max value, first index on ties
    best = max(range(len(outcomes)), key=lambda i: (outcomes[i].value, -i))
    return outcomes[best], outcomes


def _corr_power_objective(sq: np.ndarray, p: int, hd: float, method: str = "fft"):
    """Value/gradient closure for f -> hd * sum_lags (hd * corr(f sq, f sq))^p."""

    def value_and_grad(f):
        a = f * sq
        b = hd * correlate_full(a, a, method=method)
        bpow = b ** (p - 1)
        value = hd * float((bpow * b).sum())
        carry = _lag_weighted_shift_sum(bpow, a, method=method)
        grad = (2.0 * p * hd * hd) * sq * carry
        return value, grad

    return value_and_grad


# ---------------------------------------------------------------------------
# continuum problem


DEFAULT_RHO_GRID = UniformGrid(40.0, 0.05, 1)


def _decaying_starts(grid_shape, coords_norm, restarts: int, seed: int, half_width: float):
    starts = [np.exp(-coords_norm)]
    for rid in range(1, restarts):
        rng = stream_generator(seed, rid)
        scale = rng.uniform(0.3, max(0.6, half_width / 2.0))
        starts.append((0.05 + rng.random(grid_shape)) * np.exp(-coords_norm / scale))
    return starts


def solve_rho(params: ModelParams, grid: UniformGrid | None = None, *,
              restarts: int = 10, seed: int = 0, workers: int = 1,
              max_iter: int = 5000, grad_tol: float = 1e-7,
              method: str = "fft") -> VariationalSolution:
    """Maximize the p-th power of the weighted autocorrelation over the unit
    sphere of nonnegative grid functions.

    With ``a = f sqrt(Q)`` the objective is the quadrature sum of
    ``(sum_gamma a(lam+gamma) a(gamma))^p`` over all lags; the best of
    ``restarts`` deterministic ascent runs is returned.  The value never
    exceeds the kernel-power integral bound (reported in ``meta``).
    """
    if params.d not in (1, 2):
        raise ValueError("grid solver supports d in {1, 2}")
    if grid is None:
        grid = DEFAULT_RHO_GRID if params.d == 1 else UniformGrid(8.0, 0.25, 2)
    coords = grid.coords()
    sq = np.sqrt(q(params, coords))
    hd = grid.cell
    vg = _corr_power_objective(sq, params.p, hd, method=method)
    norm = np.abs(coords) if params.d == 1 else np.sqrt((coords ** 2).sum(axis=-1))
    starts = [sq.copy()] + _decaying_starts(sq.shape, norm, restarts - 1, seed,
                                            grid.half_width)
    best, outcomes = _multistart(vg, starts, hd, nonneg=True, workers=workers,
                                 max_iter=max_iter, grad_tol=grad_tol)
    upper = rho_upper_bound(params)
    return VariationalSolution(
        value=best.value, grid=grid, iterations=best.iterations,
        grad_norm=best.grad_norm, history=best.history, converged=best.converged,
        maximizer=best.f, restarts=len(starts),
        meta={"upper_bound": upper,
              "restart_values": [o.value for o in outcomes]},
    )


def apply_shift_kernel(params: ModelParams, f: GridFunction, g: GridFunction,
                       method: str = "fft") -> np.ndarray:
    """T g(lam) = sqrt(Q)(lam) * hd * sum_gamma f(gamma - lam) sqrt(Q) g(gamma)."""
    grid = f.grid
    sq = np.sqrt(q(params, grid.coords()))
    u = sq * g.values
    full = correlate_full(f.values, u, method=method)
    sl = []
    for nk in u.shape:
        center = (nk - 1) // 2
        sl.append(slice(nk - 1 - center, nk + center))
    v = _flip(full[tuple(sl)])
    return sq * grid.cell * v


def rho_lower_bound_pair(params: ModelParams, f: GridFunction,
                         g: GridFunction) -> float:
    """Certified lower bound ⟨g, Tg⟩^p for the correlation supremum.

    ``f`` must be even and nonnegative with unit Lq norm (q conjugate to p)
    and ``g`` must have unit L2 norm; both are renormalized defensively.
    """
    if f.grid != g.grid:
        raise ValueError("f and g must live on the same grid")
    if float(f.values.min()) < -1e-12:
        raise ValueError("f must be nonnegative")
    if not f.is_even():
        raise ValueError("f must be even")
    qexp = params.p / (params.p - 1) if params.p > 1 else math.inf
    if params.p == 1:
        fn = GridFunction(f.grid, f.values / float(np.abs(f.values).max()))
    else:
        fn = GridFunction(f.grid, f.values / f.lq_norm(qexp))
    gn = g.normalized_l2()
    tg = apply_shift_kernel(params, fn, gn)
    inner = f.grid.cell * float((gn.values * tg).sum())
    return inner ** params.p


def best_lower_bound_pair(params: ModelParams, grid: UniformGrid, *,
                          rounds: int = 25, power_steps: int = 4,
                          seed: int = 0) -> tuple[float, GridFunction, GridFunction]:
    """Alternating ascent over (f, g): power iteration on the shift kernel for
    g, then the Hölder-optimal f for the current g."""
    p = params.p
    qexp = p / (p - 1)
    coords = grid.coords()
    norm = np.abs(coords) if grid.d == 1 else np.sqrt((coords ** 2).sum(axis=-1))
    sq = np.sqrt(q(params, coords))
    hd = grid.cell
    rng = stream_generator(seed, 0)

    f = GridFunction(grid, np.exp(-norm))
    f = GridFunction(grid, f.values / f.lq_norm(qexp))
    g = GridFunction(grid, 0.05 + rng.random(sq.shape))
    g = g.normalized_l2()

    best = (-math.inf, f, g)
    for _ in range(rounds):
        for _ in range(power_steps):
            tg = apply_shift_kernel(params, f, g)
            nrm = math.sqrt(hd * float((tg * tg).sum()))
            if nrm == 0.0:
                break
            g = GridFunction(grid, tg / nrm)
        tg = apply_shift_kernel(params, f, g)
        value = (hd * float((g.values * tg).sum())) ** p
        if value > best[0]:
            best = (value, f, g)
        u = sq * g.values
        corr = hd * correlate_full(u, u)
        h_center = _center_lags(corr, u.shape)
        fv = np.maximum(h_center, 0.0) ** (p - 1)
        f = GridFunction(grid, fv)
        f = GridFunction(grid, f.values / f.lq_norm(qexp))
    return best


# ---------------------------------------------------------------------------
# lattice problems


@dataclass(frozen=True)
class LatticeModel:
    """Even, finitely supported weights, a kernel vanishing at infinity, and
    the power of the inner correlation sum."""

    support: np.ndarray
    weights: np.ndarray
    qfun: object
    power: int = 2

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=np.int64))
        if support.ndim != 2:
            raise ValueError("support must have shape (k, d)")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (support.shape[0],):
            raise ValueError("weights must match the support")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if int(self.power) != self.power or self.power < 1:
            raise ValueError("power must be a positive integer")
        table = {tuple(x): w for x, w in zip(support, weights)}
        for x, w in table.items():
            mirror = tuple(-v for v in x)
            if mirror not in table or abs(table[mirror] - w) > 1e-12 * max(1.0, abs(w)):
                raise ValueError("weights must be even: pi(-x) == pi(x)")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "power", int(self.power))

    @property
    def d(self) -> int:
        return self.support.shape[1]

    @classmethod
    def from_pairs(cls, pairs: dict, qfun, power: int = 2) -> "LatticeModel":
        keys = [(k,) if np.isscalar(k) else tuple(k) for k in pairs]
        return cls(support=np.array(keys, dtype=np.int64),
                   weights=np.array(list(pairs.values()), dtype=float),
                   qfun=qfun, power=power)


def _shift_slices(shape, shift):
    """Per-axis slices (dst, src) so that dst picks s(y) and src picks s(y + shift)."""
    dst, src = [], []
    for n, a in zip(shape, shift):
        a = int(a)
        lo = max(0, -a)
        hi = min(n, n - a)
        if hi <= lo:
            return None
        dst.append(slice(lo, hi))
        src.append(slice(lo + a, hi + a))
    return tuple(dst), tuple(src)


def _lattice_objective(sq: np.ndarray, support: np.ndarray, weights: np.ndarray, p: int):
    shape = sq.shape

    def value_and_grad(f):
        s = f * sq
        value = 0.0
        carry = np.zeros(shape)
        for shift, w in zip(support, weights):
            if w == 0.0:
                continue
            sl = _shift_slices(shape, shift)
            if sl is None:
                continue
            dst, src = sl
            b = float((s[dst] * s[src]).sum())
            value += w * b ** p
            coeff = w * p * b ** (p - 1)
            # d/df(mu) uses both s(mu + x) and s(mu - x)
            carry[dst] += coeff * s[src]
            carry[src] += coeff * s[dst]
        return value, sq * carry

    return value_and_grad


def _lattice_box(cutoff: int, d: int) -> np.ndarray:
    ax = np.arange(-cutoff, cutoff + 1)
    if d == 1:
        return ax[:, None]
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack(mesh, axis=-1)


def solve_rho_lattice(model: LatticeModel, cutoff: int, *, restarts: int = 8,
                      seed: int = 0, workers: int = 1, tail_tol: float = 0.1,
                      max_iter: int = 5000, grad_tol: float = 1e-9) -> VariationalSolution:
    """Maximize sum_x pi(x) (sum_y sqrt(Q(x+y) Q(y)) f(x+y) f(y))^p over unit
    l2 functions supported on the box |y|_inf <= cutoff."""
    box = _lattice_box(cutoff, model.d)
    qvals = np.asarray(model.qfun(box), dtype=float)
    if np.any(qvals < 0):
        raise ValueError("kernel must be nonnegative")
    edge = np.abs(box).max(axis=-1) == cutoff
    edge_max = float(qvals[edge].max()) if edge.any() else 0.0
    if edge_max > tail_tol:
        raise LatticeTailError(
            f"kernel is {edge_max:.4g} at the cutoff boundary, above the "
            f"declared tolerance {tail_tol:g}; increase the cutoff"
        )
    shape = qvals.shape
    sq = np.sqrt(qvals)
    vg = _lattice_objective(sq, model.support, model.weights, model.power)
    peak = np.zeros(shape)
    peak[np.unravel_index(int(np.argmax(qvals)), shape)] = 1.0
    starts = [peak, sq + 1e-6]
    for rid in range(2, restarts):
        rng = stream_generator(seed, rid)
        starts.append(0.05 + rng.random(shape))
    best, outcomes = _multistart(vg, starts[:max(1, restarts)], 1.0, nonneg=True,
                                 workers=workers, max_iter=max_iter,
                                 grad_tol=grad_tol)
    return VariationalSolution(
        value=best.value, grid={"cutoff": int(cutoff), "d": model.d},
        iterations=best.iterations, grad_norm=best.grad_norm,
        history=best.history, converged=best.converged, maximizer=best.f,
        restarts=len(starts[:max(1, restarts)]),
        meta={"edge_kernel": edge_max,
              "restart_values": [o.value for o in outcomes]},
    )


def solve_rho_m(params: ModelParams, m_period: float, *, cutoff: int | None = None,
                freq_reach: float = 40.0, restarts: int = 6, seed: int = 0,
                workers: int = 1, max_iter: int = 5000,
                grad_tol: float = 1e-8) -> VariationalSolution:
    """Periodized constant: the correlation-power functional on the lattice
    with the kernel sampled at frequencies 2 pi x / M, summed over every lag.

    ``meta["normalized"]`` holds M^-d times the value, the quantity that
    approaches (2 pi)^-d times the continuum constant as M grows.
    """
    if params.d not in (1, 2):
        raise ValueError("grid solver supports d in {1, 2}")
    if cutoff is None:
        cutoff = int(math.ceil(m_period * freq_reach / (2.0 * math.pi)))
    box = _lattice_box(cutoff, params.d)
    freqs = (2.0 * math.pi / m_period) * box.astype(float)
    sq = np.sqrt(q(params, freqs))
    vg = _corr_power_objective(sq, params.p, 1.0)
    freq_norm = np.sqrt((freqs ** 2).sum(axis=-1))
    starts = [sq.copy()] + _decaying_starts(sq.shape, freq_norm, restarts - 1,
                                            seed, 4.0)
    best, outcomes = _multistart(vg, starts, 1.0, nonneg=True, workers=workers,
                                 max_iter=max_iter, grad_tol=grad_tol)
    return VariationalSolution(
        value=best.value, grid={"period": m_period, "cutoff": int(cutoff)},
        iterations=best.iterations, grad_norm=best.grad_norm,
        history=best.history, converged=best.converged, maximizer=best.f,
        restarts=len(starts),
        meta={"normalized": best.value / m_period ** params.d,
              "restart_values": [o.value for o in outcomes]},
    )


def rho_m_trend(params: ModelParams, m_values, *, rho_hat: float,
                freq_reach: float = 40.0, restarts: int = 6, seed: int = 0,
                workers: int = 1) -> list[dict]:
    """Normalized periodized constants along an M-sequence against the
    continuum reference (2 pi)^-d rho_hat."""
    reference = (2.0 * math.pi) ** (-params.d) * rho_hat
    rows = []
    for m_period in m_values:
        sol = solve_rho_m(params, float(m_period), freq_reach=freq_reach,
                          restarts=restarts, seed=seed, workers=workers)
        normalized = sol.meta["normalized"]
        rows.append({
            "M": float(m_period),
            "rho_M": sol.value,
            "normalized": normalized,
            "reference": reference,
            "relative_gap": abs(normalized - reference) / reference,
        })
    return rows


# ---------------------------------------------------------------------------
# spatial constant for p = 2


DEFAULT_MPSI_GRID = UniformGrid(20.0, 0.05, 1)


def _mpsi_objective(params: ModelParams, grid: UniformGrid, quartic_scale: float,
                    pad: int = 8):
    # the transform is zero-padded so the frequency sum resolves scales below
    # 2 pi / (n h); otherwise functions spread across the box get a spurious
    # near-zero kinetic term through the DC bin
    n = grid.nodes_per_axis
    h = grid.spacing
    hd = grid.cell
    d = grid.d
    big = pad * n
    freq_axis = 2.0 * math.pi * np.fft.fftfreq(big, d=h)
    if d == 1:
        psi_mesh = params.c * np.abs(freq_axis) ** params.alpha
    else:
        mesh = np.meshgrid(*([freq_axis] * d), indexing="ij")
        psi_mesh = params.c * np.sqrt(sum(m * m for m in mesh)) ** params.alpha
    freq_cell = (2.0 * math.pi / (big * h)) ** d
    ck = freq_cell * hd * hd * psi_mesh
    pad_shape = (big,) * d
    src = tuple(slice(0, n) for _ in range(d))

    def value_and_grad(g):
        spec = np.fft.fftn(g, s=pad_shape)
        kinetic = float((ck * (spec.real ** 2 + spec.imag ** 2)).sum())
        quartic_sq = hd * float((g ** 4).sum())
        quartic = math.sqrt(quartic_sq)
        value = quartic_scale * quartic - kinetic
        grad_kin = 2.0 * (big ** d) * np.fft.ifftn(ck * spec).real[src]
        grad_quart = 2.0 * hd * g ** 3 / quartic if quartic > 0 else np.zeros_like(g)
        return value, quartic_scale * grad_quart - grad_kin

    return value_and_grad


def solve_m_psi(params: ModelParams, grid: UniformGrid | None = None, *,
                quartic_scale: float = 1.0, restarts: int = 8, seed: int = 0,
                workers: int = 1, max_iter: int = 5000,
                grad_tol: float = 1e-8) -> VariationalSolution:
    """Maximize ``scale * (integral of g^4)^(1/2) - integral of psi |g^|^2``
    over unit-L2 spatial grid functions; g^ is the discrete transform scaled
    to approximate the continuum transform.

    Requires p = 2 and d < 2 alpha (otherwise the supremum is infinite).
    """
    if params.p != 2:
        raise ValueError("the spatial constant is defined for p = 2")
    if not params.d < 2.0 * params.alpha:
        raise ValueError("finiteness requires d < 2 * alpha")
    if grid is None:
        grid = DEFAULT_MPSI_GRID if params.d == 1 else UniformGrid(6.0, 0.2, 2)
    coords = grid.coords()
    norm = np.abs(coords) if grid.d == 1 else np.sqrt((coords ** 2).sum(axis=-1))
    vg = _mpsi_objective(params, grid, quartic_scale)
    starts = []
    widths = np.geomspace(0.25, max(1.0, grid.half_width / 4.0), max(1, restarts // 2))
    for w in widths:
        starts.append(np.exp(-(norm / w) ** 2))
    for rid in range(len(starts), restarts):
        rng = stream_generator(seed, rid)
        starts.append((0.05 + rng.random(norm.shape)) * np.exp(-norm / rng.uniform(0.5, 3.0)))
    best, outcomes = _multistart(vg, starts, grid.cell, nonneg=False,
                                 workers=workers, max_iter=max_iter,
                                 grad_tol=grad_tol)
    return VariationalSolution(
        value=best.value, grid=grid, iterations=best.iterations,
        grad_norm=best.grad_norm, history=best.history, converged=best.converged,
        maximizer=best.f, restarts=len(starts),
        meta={"quartic_scale": quartic_scale,
              "restart_values": [o.value for o in outcomes]},
    )


def m_psi_from_rho(params: ModelParams, rho: float) -> float:
    """Value the spatial constant must take given the correlation constant,
    for p = 2 and d < 2 alpha."""
    a, d = params.alpha, params.d
    expo = a / (2.0 * a - d)
    return (2.0 * math.pi) ** (-d * expo) * rho ** expo


# ---------------------------------------------------------------------------
# exact lattice moment sums


def discrete_moment_bruteforce(model: LatticeModel, n: int, *,
                               budget: float = 1e9, chunk: int = 4096) -> float:
    """S_n: the exact tuple sum of weight products times the normalized
    permutation prefix-sum kernel raised to the model power.

    Cost grows like |support|^n * 2^n * n; exceeding ``budget`` raises
    :class:`BudgetError` with the estimate.
    """
    k = model.support.shape[0]
    cost = (k ** n) * (2 ** n) * n
    if cost > budget:
        raise BudgetError(
            f"exact enumeration needs ~{cost:.3g} kernel operations, above the "
            f"budget {budget:.3g}"
        )
    idx = np.stack(np.meshgrid(*([np.arange(k)] * n), indexing="ij"), axis=-1)
    idx = idx.reshape(-1, n)
    xs = model.support[idx].astype(float)
    wts = model.weights[idx].prod(axis=1)
    scale = math.factorial(n)
    total = 0.0
    for start in range(0, xs.shape[0], chunk):
        stop = min(xs.shape[0], start + chunk)
        vals = perm_prefix_sum_dp_batch(xs[start:stop], model.qfun)
        total += float((wts[start:stop] * (vals / scale) ** model.power).sum())
    return total

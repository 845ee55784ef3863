"""Model parameterization and closed-form theoretical constants.

The driving process is an isotropic symmetric stable law in R^d with
characteristic exponent ``psi(lam) = c * |lam|**alpha``.  The additive field
is built from ``p`` independent copies; its occupation density exists exactly
when ``d < alpha * p``, and every constructor here enforces that condition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class ExistenceError(ValueError):
    """The occupation density does not exist for the requested parameters."""


class TruncationWarning(UserWarning):
    """A truncated frequency integral has a tail estimate above 1%."""


@dataclass(frozen=True)
class ModelParams:
    """Dimension, number of time parameters, stable index and scale.

    Invariants: ``0 < alpha <= 2`` and ``d < alpha * p`` (local-time
    existence).  ``c`` is the scale in ``psi(lam) = c|lam|^alpha``.
    """

    d: int
    p: int
    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", int(self.p))
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha!r}")
        if not self.c > 0.0:
            raise ValueError(f"c must be positive, got {self.c!r}")
        if not self.d < self.alpha * self.p:
            raise ExistenceError(
                "local-time existence requires d < alpha*p, got "
                f"d={self.d}, alpha*p={self.alpha * self.p:g}"
            )


def _norms(params: ModelParams, lam) -> np.ndarray:
    """Euclidean norms of frequency points.

    Arrays whose last axis has length ``d`` are read as points in R^d;
    anything else is accepted elementwise when ``d == 1``.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim >= 1 and lam.shape[-1] == params.d:
        return np.sqrt(np.sum(lam * lam, axis=-1))
    if params.d == 1:
        return np.abs(lam)
    raise ValueError(f"expected points in R^{params.d}, got shape {lam.shape}")


def psi(params: ModelParams, lam):
    """Characteristic exponent ``c |lam|^alpha`` (even, alpha-homogeneous)."""
    return params.c * _norms(params, lam) ** params.alpha


def q(params: ModelParams, lam):
    """Resolvent kernel ``1 / (1 + psi(lam))``, with values in (0, 1]."""
    return 1.0 / (1.0 + psi(params, lam))


def q_function(params: ModelParams):
    """Vectorized kernel closure suitable for the moment routines."""
    return lambda lam: q(params, lam)


def _sphere_area(d: int) -> float:
    # surface area of the unit sphere in R^d
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def rho_upper_bound(params: ModelParams, truncation: float | None = None,
                    rel_tail_target: float = 1e-3) -> float:
    """Integral of ``(1 + psi)^(-p)`` over R^d, an upper bound for the
    variational constant.

    The radial integral is truncated at ``truncation`` (auto-sized so that the
    analytic tail bound ``omega * c^-p * L^(d-alpha*p) / (alpha*p - d)`` stays
    below ``rel_tail_target`` of the value) and the remainder beyond the cut
    is integrated by an adaptive rule.  A tail bound above 1% raises a
    :class:`TruncationWarning`.
    """
    d, p, alpha, c = params.d, params.p, params.alpha, params.c
    omega = _sphere_area(d)

    def radial(r):
        return omega * r ** (d - 1) * (1.0 + c * r ** alpha) ** (-p)

    def tail_bound(L):
        return omega * c ** (-p) * L ** (d - alpha * p) / (alpha * p - d)

    def main_part(L):
        split = min(1.0, L / 2.0)
        lo, _ = integrate.quad(radial, 0.0, split, epsabs=0.0, epsrel=1e-11, limit=200)
        hi, _ = integrate.quad(radial, split, L, epsabs=0.0, epsrel=1e-11, limit=200)
        return lo + hi

    if truncation is None:
        L = max(16.0, (1.0 / c) ** (1.0 / alpha) * 16.0)
        value = main_part(L)
        while tail_bound(L) > rel_tail_target * value and L < 1e12:
            L *= 4.0
            value = main_part(L)
    else:
        L = float(truncation)
        value = main_part(L)

    remainder, _ = integrate.quad(radial, L, np.inf, epsabs=0.0, epsrel=1e-9, limit=200)
    bound = tail_bound(L)
    if bound > 0.01 * (value + remainder):
        warnings.warn(
            f"truncation tail estimate {bound:.3g} exceeds 1% of the value "
            f"{value + remainder:.6g} (L={L:g})",
            TruncationWarning,
        )
    return value + remainder


def ldp_rate_constant(params: ModelParams, rho: float) -> float:
    """Magnitude of the exponential tail rate for the origin local time in
    ``t^(alpha/d)`` coordinates, as a function of the variational constant."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    d, p, alpha = params.d, params.p, params.alpha
    return (
        (2.0 * math.pi) ** alpha
        * (d / alpha)
        * (1.0 - d / (alpha * p)) ** ((alpha * p - d) / d)
        * rho ** (-alpha / d)
    )


def lil_constant(params: ModelParams, rho: float) -> float:
    """Almost-sure limsup constant in the iterated-logarithm normalization."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    d, p, alpha = params.d, params.p, params.alpha
    return (
        (2.0 * math.pi) ** (-d)
        * (alpha / d) ** (d / alpha)
        * (1.0 - d / (alpha * p)) ** (-(p - d / alpha))
        * rho
    )


@dataclass(frozen=True)
class TheoreticalConstants:
    """Variational constant together with the two limit constants it drives."""

    rho: float
    kappa_ldp: float
    c_lil: float

    @classmethod
    def from_rho(cls, params: ModelParams, rho: float) -> "TheoreticalConstants":
        return cls(
            rho=float(rho),
            kappa_ldp=ldp_rate_constant(params, rho),
            c_lil=lil_constant(params, rho),
        )

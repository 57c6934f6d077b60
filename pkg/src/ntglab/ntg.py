"""The normal-truncated-gamma (NtG) conjugate prior family.

A joint prior on a location vector ``mu`` in R^p and a precision
``lambda > 0`` whose density is

    C * kappa0^{p/2} * lambda^{alpha0 + p/2 - 1}
      * exp(-lambda * (beta0 + kappa0 * ||mu - mu0||^2 / 2)) * {lambda > eps0},

i.e. a Gaussian in ``mu`` given ``lambda`` and a gamma-shaped ``lambda``
density truncated to ``(eps0, inf)``.  The family is conjugate for the
Gaussian location-scale model (``x | mu, lambda ~ N(mu, I_p/lambda)``,
``s | lambda ~ chi^2_m / lambda``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import log_gamma, upper_incomplete_gamma, ConvergenceError

__all__ = [
    "NtGParams",
    "LocationScale",
    "normalizing_constant",
    "prior_density",
    "posterior_update",
    "marginal_mu_density",
    "marginal_lambda_density",
    "marginal_obs_density",
    "sample_prior",
]


def _upper_gamma0(a: float, x: float) -> float:
    # Gamma(a, x) extended continuously to x = 0 for a > 0.
    if x == 0.0:
        if a <= 0:
            raise ValueError("Gamma(a, 0) diverges for a <= 0")
        return math.exp(log_gamma(a))
    return upper_incomplete_gamma(a, x)


@dataclass(frozen=True)
class NtGParams:
    """Hyper-parameters (p, mu0, kappa0, alpha0, beta0, eps0) of an NtG prior.

    Propriety requires exactly one of:
      * eps0 = 0, alpha0 > 0, beta0 > 0   (plain normal-gamma),
      * eps0 > 0, beta0 > 0               (truncated normal-gamma),
      * eps0 > 0, alpha0 < 0, beta0 = 0   (Pareto-type tail).
    """

    p: int
    mu0: np.ndarray
    kappa0: float
    alpha0: float
    beta0: float
    eps0: float

    def __post_init__(self) -> None:
        mu0 = np.asarray(self.mu0, dtype=float)
        if mu0.ndim != 1 or mu0.size != self.p:
            raise ValueError(f"mu0 must be a length-{self.p} vector")
        mu0 = mu0.copy()
        mu0.flags.writeable = False
        object.__setattr__(self, "mu0", mu0)
        if self.p < 1:
            raise ValueError(f"dimension must be >= 1, got {self.p}")
        if not self.kappa0 > 0:
            raise ValueError(f"kappa0 must be positive, got {self.kappa0}")
        if self.beta0 < 0 or self.eps0 < 0:
            raise ValueError("beta0 and eps0 must be nonnegative")
        proper = (
            (self.eps0 == 0 and self.alpha0 > 0 and self.beta0 > 0)
            or (self.eps0 > 0 and self.beta0 > 0)
            or (self.eps0 > 0 and self.alpha0 < 0 and self.beta0 == 0)
        )
        if not proper:
            raise ValueError(
                "improper hyper-parameters: need (eps0=0, alpha0>0, beta0>0) "
                "or (eps0>0, beta0>0) or (eps0>0, alpha0<0, beta0=0); got "
                f"alpha0={self.alpha0}, beta0={self.beta0}, eps0={self.eps0}"
            )


@dataclass(frozen=True)
class LocationScale:
    """A parameter point: mean vector and precision lambda = 1/sigma^2."""

    mu: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        mu = mu.copy()
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        if not self.lam > 0:
            raise ValueError(f"precision must be positive, got {self.lam}")


def normalizing_constant(params: NtGParams) -> float:
    """The scaling constant C of the prior density.

    ``(2 pi)^{-p/2} beta0^{alpha0} / Gamma(alpha0, beta0 * eps0)`` when
    beta0 > 0, and ``(2 pi)^{-p/2} (-alpha0) eps0^{-alpha0}`` when beta0 = 0.
    """
    pref = (2.0 * math.pi) ** (-0.5 * params.p)
    if params.beta0 > 0:
        return (
            pref
            * params.beta0 ** params.alpha0
            / _upper_gamma0(params.alpha0, params.beta0 * params.eps0)
        )
    return pref * (-params.alpha0) * params.eps0 ** (-params.alpha0)


def prior_density(params: NtGParams, point: LocationScale) -> float:
    """Joint prior density at (mu, lambda); zero for lambda <= eps0."""
    if point.mu.size != params.p:
        raise ValueError("dimension mismatch between params and point")
    if point.lam <= params.eps0:
        return 0.0
    d2 = float(np.sum((point.mu - params.mu0) ** 2))
    c = normalizing_constant(params)
    return (
        c
        * params.kappa0 ** (0.5 * params.p)
        * point.lam ** (params.alpha0 + 0.5 * params.p - 1.0)
        * math.exp(-point.lam * (params.beta0 + 0.5 * params.kappa0 * d2))
    )


def posterior_update(params: NtGParams, x: np.ndarray, s: float, m: int) -> NtGParams:
    """Conjugate update after observing (x, s) with m scale degrees of freedom.

    mu1 = (x + kappa0 mu0)/(1 + kappa0), kappa1 = 1 + kappa0,
    alpha1 = alpha0 + (p+m)/2,
    beta1 = beta0 + s/2 + kappa0/(1+kappa0) * ||x - mu0||^2 / 2.
    The truncation point eps0 is unchanged.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != params.p:
        raise ValueError(f"x must be a length-{params.p} vector")
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    kap = params.kappa0
    mu1 = (x + kap * params.mu0) / (1.0 + kap)
    alpha1 = params.alpha0 + 0.5 * (params.p + m)
    beta1 = (
        params.beta0
        + 0.5 * s
        + 0.5 * kap / (1.0 + kap) * float(np.sum((x - params.mu0) ** 2))
    )
    updated = NtGParams(
        p=params.p, mu0=mu1, kappa0=1.0 + kap, alpha0=alpha1, beta0=beta1,
        eps0=params.eps0,
    )
    # Conjugacy closure: valid inputs cannot leave the proper region.
    assert updated.alpha0 > params.alpha0 and updated.beta0 > params.beta0
    return updated


def marginal_mu_density(params: NtGParams, mu: np.ndarray) -> float:
    """Marginal prior density of the location vector.

    ``C kappa0^{p/2} Gamma(alpha0 + p/2, eps0 * b) / b^{alpha0 + p/2}`` with
    ``b = beta0 + kappa0 ||mu - mu0||^2 / 2``.  When beta0 = 0 the density
    has an integrable singularity at mu = mu0; that point returns +inf.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size != params.p:
        raise ValueError(f"mu must be a length-{params.p} vector")
    b = params.beta0 + 0.5 * params.kappa0 * float(np.sum((mu - params.mu0) ** 2))
    if b == 0.0:
        return math.inf
    if not math.isfinite(b):
        return 0.0
    shape = params.alpha0 + 0.5 * params.p
    c = normalizing_constant(params)
    return (
        c
        * params.kappa0 ** (0.5 * params.p)
        * _upper_gamma0(shape, params.eps0 * b)
        / b ** shape
    )


def marginal_lambda_density(params: NtGParams, lam: float) -> float:
    """Marginal prior density of the precision; zero for lambda <= eps0."""
    if lam <= params.eps0 or lam <= 0:
        return 0.0
    c = normalizing_constant(params)
    return (
        c
        * (2.0 * math.pi) ** (0.5 * params.p)
        * lam ** (params.alpha0 - 1.0)
        * math.exp(-lam * params.beta0)
    )


def marginal_obs_density(params: NtGParams, m: int, x: np.ndarray, s: float) -> float:
    """Marginal density of the observables (x, s) under the hierarchical model.

    ``C / (2^{m/2} Gamma(m/2)) * (kappa0/(1+kappa0))^{p/2} * s^{m/2-1}
    * Gamma(alpha1, eps0 * beta1) / beta1^{alpha1}`` with alpha1, beta1 from
    the conjugate update.
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    updated = posterior_update(params, x, s, m)
    alpha1, beta1 = updated.alpha0, updated.beta0
    c = normalizing_constant(params)
    return (
        c
        / (2.0 ** (0.5 * m) * math.exp(log_gamma(0.5 * m)))
        * (params.kappa0 / (1.0 + params.kappa0)) ** (0.5 * params.p)
        * s ** (0.5 * m - 1.0)
        * _upper_gamma0(alpha1, params.eps0 * beta1)
        / beta1 ** alpha1
    )


def _lambda_survival(params: NtGParams, t: float) -> float:
    # P(lambda > t) under the prior, for t >= eps0.
    if params.beta0 > 0:
        num = _upper_gamma0(params.alpha0, params.beta0 * t)
        den = _upper_gamma0(params.alpha0, params.beta0 * params.eps0)
        return num / den
    return (t / params.eps0) ** params.alpha0


def _sample_lambda(params: NtGParams, u: float) -> float:
    # Inverse-CDF draw of the precision from a uniform u in (0, 1).
    if params.beta0 == 0.0:
        # Closed-form inverse: survival (t/eps0)^{alpha0} with alpha0 < 0.
        return params.eps0 * u ** (1.0 / params.alpha0)
    # Bisection on the survival function over an expanding bracket.
    lo = params.eps0
    hi = max(2.0 * params.eps0, params.eps0 + 1.0)
    it = 0
    while _lambda_survival(params, hi) > u:
        lo, hi = hi, 2.0 * hi
        it += 1
        if it > 2000:
            raise ConvergenceError(
                "precision inverse-CDF bracket expansion failed",
                partial=(lo, hi),
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _lambda_survival(params, mid) > u:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, mid):
            break
    else:
        raise ConvergenceError(
            "precision inverse-CDF bisection did not converge",
            partial=(lo, hi),
        )
    return 0.5 * (lo + hi)


def sample_prior(params: NtGParams, rng: np.random.Generator) -> LocationScale:
    """Draw (mu, lambda) from the prior; deterministic for a given generator.

    The precision is drawn by inverse CDF from its marginal, then
    ``mu | lambda ~ N(mu0, I_p / (kappa0 * lambda))``.
    """
    u = rng.random()
    lam = _sample_lambda(params, u)
    mu = params.mu0 + rng.standard_normal(params.p) / math.sqrt(params.kappa0 * lam)
    return LocationScale(mu=mu, lam=lam)

"""Seeded synthetic series with known scaling, used as oracles and fixtures."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .series import ReturnPanel, ReturnSeries

KINDS = ("gaussian_iid", "binomial_cascade", "correlated_pair")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    length: int
    seed: int = 0
    p: float = 0.7
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        if self.length < 6:
            raise ConfigurationError("length must be >= 6")
        if self.kind == "binomial_cascade":
            m = int(self.length).bit_length() - 1
            if self.length != 2**m or m < 8:
                raise ConfigurationError(f"cascade length must be 2**m with m >= 8, got {self.length}")
            if not 0.5 < self.p < 1:
                raise ConfigurationError(f"cascade multiplier must lie in (0.5, 1), got {self.p}")
        if self.kind == "correlated_pair" and not -1 <= self.rho <= 1:
            raise ConfigurationError(f"rho must lie in [-1, 1], got {self.rho}")


def gaussian_iid(length: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(length)


def binomial_cascade(length: int, p: float = 0.7, seed: int = 0) -> np.ndarray:
    """Sign-randomised increments of a binomial multiplicative measure.

    At every dyadic split one half receives fraction p of the parent mass and
    the other 1 - p, with the side drawn at random. Values are rescaled to
    unit mean magnitude.
    """
    m = int(length).bit_length() - 1
    rng = np.random.default_rng(seed)
    mu = np.ones(1)
    for _ in range(m):
        left = np.where(rng.random(mu.size) < 0.5, p, 1.0 - p)
        mu = np.column_stack([mu * left, mu * (1.0 - left)]).ravel()
    signs = np.where(rng.random(length) < 0.5, -1.0, 1.0)
    return signs * mu * length


def correlated_pair(length: int, rho: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    z = np.random.default_rng(seed).standard_normal((2, length))
    return z[0], rho * z[0] + np.sqrt(1.0 - rho * rho) * z[1]


def generate(spec: GeneratorSpec):
    """ReturnSeries for single-series kinds, a pair of them for ``correlated_pair``."""
    times = tuple(range(spec.length))
    if spec.kind == "gaussian_iid":
        return ReturnSeries("gauss", times, gaussian_iid(spec.length, spec.seed))
    if spec.kind == "binomial_cascade":
        return ReturnSeries("cascade", times, binomial_cascade(spec.length, spec.p, spec.seed))
    x, y = correlated_pair(spec.length, spec.rho, spec.seed)
    return ReturnSeries("x", times, x), ReturnSeries("y", times, y)


def weekdays(start_year: int, n_years: int) -> list[dt.date]:
    day = dt.date(start_year, 1, 1)
    end = dt.date(start_year + n_years, 1, 1)
    out = []
    while day < end:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def synthetic_panel(
    n_assets: int = 5,
    n_years: int = 3,
    seed: int = 0,
    start_year: int = 2015,
    p: float = 0.65,
    vol: float = 0.01,
) -> ReturnPanel:
    """Daily weekday panel with a common factor and cascade-modulated volatility.

    Each asset gets its own drift, factor loading and idiosyncratic noise;
    a shared binomial cascade scales the volatility so the panel shows fat
    tails and multifractal cross-correlation.
    """
    if n_assets < 1:
        raise ConfigurationError("n_assets must be >= 1")
    rng = np.random.default_rng(seed)
    dates = weekdays(start_year, n_years)
    length = len(dates)
    size = 1 << max(8, (length - 1).bit_length())
    envelope = np.abs(binomial_cascade(size, p, seed=int(rng.integers(2**31))))[:length]
    envelope = np.sqrt(envelope / envelope.mean())
    drift = rng.uniform(-2e-4, 8e-4, n_assets)
    beta = rng.uniform(0.5, 1.5, n_assets)
    factor = rng.standard_normal(length)
    idio = rng.standard_normal((length, n_assets)) * rng.uniform(0.5, 1.2, n_assets)
    values = drift + vol * envelope[:, None] * (factor[:, None] * beta + idio)
    names = tuple(f"A{k + 1}" for k in range(n_assets))
    return ReturnPanel(names, tuple(dates), values)

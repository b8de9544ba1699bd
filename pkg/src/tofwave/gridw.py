"""Uniform grids, the algebraic weight eta, weighted norms and perturbations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .errors import NonFiniteField


@dataclass(frozen=True)
class Grid:
    """Nodes x_j = -L + j h on [-L, L], h = 2L/(N-1)."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError("grid needs at least 16 points")
        if not self.half_width > 0:
            raise ValueError("half width must be positive")

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def N(self) -> int:
        return self.n_points

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        # symmetric construction keeps x_j = -x_{N-1-j} exactly
        j = np.arange(self.n_points)
        x = -self.half_width + j * self.h
        return 0.5 * (x - x[::-1])


@dataclass(frozen=True)
class WeightedNormSpec:
    k: float
    sobolev_order: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("weight exponent must be nonnegative")
        if self.sobolev_order not in (0, 1, 2):
            raise ValueError("Sobolev order must be 0, 1 or 2")


@dataclass(frozen=True)
class RateParams:
    m: float
    k: float
    mu: float

    def __post_init__(self):
        if not self.m > 4.5:
            raise ValueError("need m > 9/2")
        if self.mu <= 0 or self.m + self.mu > self.k:
            raise ValueError("need mu > 0 and m + mu <= k")

    @property
    def m_star(self) -> float:
        return m_star(self.m)


def weight_eta(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(x * x + 1.0)


def weight_power(x, k: float):
    """eta(x)^k computed as (1 + x^2)^(k/2)."""
    x = np.asarray(x, dtype=float)
    return np.power(1.0 + x * x, 0.5 * k)


def derivative(v: np.ndarray, h: float) -> np.ndarray:
    """Centered differences inside, one-sided at both ends."""
    return np.gradient(v, h, axis=0)


def weighted_norm(v, spec: WeightedNormSpec, grid: Grid) -> float:
    """Discrete H^l_k norm: sum over j <= l of the trapezoidal integral of eta^2k |d^j v|^2."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != grid.N:
        raise ValueError("field does not match grid")
    if not np.all(np.isfinite(v)):
        raise NonFiniteField("field contains non-finite values")
    w2 = weight_power(grid.x, 2.0 * spec.k)
    total = 0.0
    d = v
    for j in range(spec.sobolev_order + 1):
        if j > 0:
            d = derivative(d, grid.h)
        sq = d * d if d.ndim == 1 else np.sum(d * d, axis=-1)
        total += trapezoid(w2 * sq, dx=grid.h)
    return math.sqrt(total)


def l2_norm(v, grid: Grid) -> float:
    v = np.asarray(v, dtype=float)
    sq = v * v if v.ndim == 1 else np.sum(v * v, axis=-1)
    return math.sqrt(trapezoid(sq, dx=grid.h))


def algebraic_perturbation(k_decay: float, amplitude: float, seed_shape: str, grid: Grid,
                           wavenumber: float = 0.5) -> np.ndarray:
    """amplitude * eta^(-k_decay) times (1, 0) (plain) or a rotating unit vector (modulated).

    The field itself is bounded by amplitude * eta^(-k_decay); its derivative by
    amplitude * (k_decay + wavenumber) * eta^(-k_decay).
    """
    if not k_decay > 0:
        raise ValueError("decay exponent must be positive")
    x = grid.x
    env = amplitude * weight_power(x, -k_decay)
    if seed_shape == "plain":
        return np.stack([env, np.zeros_like(env)], axis=-1)
    if seed_shape == "modulated":
        th = wavenumber * x
        return np.stack([env * np.cos(th), env * np.sin(th)], axis=-1)
    raise ValueError(f"unknown seed shape {seed_shape!r}")


def m_star(m: float) -> float:
    if not m > 0:
        raise ValueError("m must be positive")
    fl = math.floor(m)
    q = m - fl
    return fl + max(0.0, 2.0 * q - 1.0)


def write_field_csv(path, grid: Grid, v) -> None:
    v = np.asarray(v, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "v1", "v2"])
        for xi, (a, b) in zip(grid.x, v):
            w.writerow([repr(float(xi)), repr(float(a)), repr(float(b))])


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:3]

"""Coupling vectors, the exponential weight they define, and quadrature grids.

The weight is rho(z) = exp(-z^2/2 + sum_k t_k z^k) for a finite set of
couplings t_k.  Everything downstream (moment tables, tau values, skew
products) integrates against rho on a symmetric truncated interval, so the
grid builder has to pick a radius large enough that the discarded tail is
below tolerance for every integrand degree the caller will use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.special import eval_legendre, roots_legendre

from .errors import NonIntegrableWeight, ToleranceUnreachable

__all__ = [
    "CouplingVector",
    "QuadratureGrid",
    "weight_eval",
    "build_quadrature",
    "cumulative_weighted_moment",
    "cumulative_integral",
    "widen_grid",
]


@dataclass(frozen=True)
class CouplingVector:
    """Finite map k -> t_k with an optional even-parity restriction.

    Entries are stored as a sorted tuple of (k, t_k) pairs with exact zeros
    dropped, so equal vectors compare and hash equal.
    """

    entries: tuple[tuple[int, float], ...] = ()
    parity_even_only: bool = False

    def __post_init__(self):
        cleaned = []
        seen = set()
        for k, v in self.entries:
            k = int(k)
            v = float(v)
            if k < 1:
                raise ValueError(f"coupling index must be a positive integer, got {k}")
            if k in seen:
                raise ValueError(f"duplicate coupling index {k}")
            seen.add(k)
            if v != 0.0:
                cleaned.append((k, v))
        cleaned.sort()
        if self.parity_even_only and any(k % 2 for k, _ in cleaned):
            raise ValueError("parity_even_only vector has a nonzero odd-index coupling")
        object.__setattr__(self, "entries", tuple(cleaned))

    @classmethod
    def from_mapping(cls, m: Mapping[int, float] | None, parity_even_only: bool = False):
        m = m or {}
        return cls(tuple((int(k), float(v)) for k, v in m.items()), parity_even_only)

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)

    def get(self, k: int) -> float:
        return dict(self.entries).get(k, 0.0)

    def max_index(self) -> int:
        """Largest index with a nonzero coupling; 0 if none."""
        return self.entries[-1][0] if self.entries else 0

    @property
    def integrable(self) -> bool:
        """Whether the weight's tail is suppressible.

        Highest nonzero index K >= 4 requires K even with t_K < 0.  K = 3 is
        admitted (tail handled by truncation; the grid builder rejects it if
        no radius brackets the target).  K <= 2 requires t_2 < 1/2.
        """
        K = self.max_index()
        if K >= 4:
            return K % 2 == 0 and self.get(K) < 0.0
        return self.get(2) < 0.5

    def exponent(self, z):
        """-z^2/2 + sum_k t_k z^k, vectorized over z."""
        z = np.asarray(z, dtype=float)
        out = -0.5 * z * z
        for k, v in self.entries:
            out = out + v * z**k
        return out

    def shifted(self, delta: Mapping[int, float]) -> "CouplingVector":
        """New vector with delta added entrywise; parity flag is dropped if broken."""
        d = self.as_dict()
        for k, dv in delta.items():
            d[int(k)] = d.get(int(k), 0.0) + float(dv)
        even = self.parity_even_only and all(int(k) % 2 == 0 for k in delta)
        return CouplingVector.from_mapping(d, parity_even_only=even)

    def to_json(self) -> str:
        return json.dumps({"t": {str(k): v for k, v in self.entries}})

    @classmethod
    def from_json(cls, text: str, parity_even_only: bool = False):
        data = json.loads(text)
        return cls.from_mapping({int(k): float(v) for k, v in data.get("t", {}).items()},
                                parity_even_only)


def weight_eval(z, t: CouplingVector):
    """rho(z) = exp(exponent).  Overflow saturates to inf silently."""
    with np.errstate(over="ignore"):
        return np.exp(t.exponent(z))


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on [-R, R] with cached weight values.

    nodes/weights are flat arrays over all panels in left-to-right order;
    the panel structure (uniform width, p points each) is kept so cumulative
    integrals can be done panel-spectrally.
    """

    couplings: CouplingVector
    nodes: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    radius: float
    target_tol: float
    panels: int
    points_per_panel: int

    def __post_init__(self):
        for name in ("nodes", "weights", "rho"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def integrate(self, fvals: np.ndarray) -> float:
        """Plain quadrature sum of f(nodes) against the bare measure dz."""
        return float(self.weights @ fvals)

    def integrate_weighted(self, fvals: np.ndarray) -> float:
        """Quadrature of f against rho(z) dz."""
        return float(self.weights @ (fvals * self.rho))


def _radius_for(t: CouplingVector, tol: float, max_degree: int) -> float:
    """Largest |z| beyond which z^d * rho is below tol relative to its peak.

    Solves F(z) = F(z*) + log(tol) for the decay function
    F(z) = exponent(z) + d*log(max(|z|,1)), bisecting outward from R0 = 10.
    d = 0 reduces to the bare-weight rule.
    """
    d = int(max_degree)
    tgt_gap = math.log(tol)

    def F(z):
        z = np.asarray(z, dtype=float)
        return t.exponent(z) + d * np.log(np.maximum(np.abs(z), 1.0))

    bracket = 10.0
    for _ in range(40):
        zs = np.linspace(-bracket, bracket, 8193)
        Fs = F(zs)
        fmax = float(Fs.max())
        target = fmax + tgt_gap
        if float(F(bracket)) < target and float(F(-bracket)) < target:
            zstar = float(zs[int(Fs.argmax())])

            def crossing(lo, hi):
                # F(lo) >= target > F(hi); bisect for the boundary.
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if float(F(mid)) >= target:
                        lo = mid
                    else:
                        hi = mid
                    if abs(hi - lo) < 1e-12 * max(1.0, abs(hi)):
                        break
                return hi

            right = crossing(max(zstar, 0.0), bracket)
            left = crossing(min(zstar, 0.0), -bracket)
            return max(abs(left), abs(right))
        bracket *= 2.0
    raise NonIntegrableWeight(
        f"no radius suppresses the tail of {t.as_dict()} at degree {d}")


def _panel_nodes(radius: float, panels: int, p: int):
    edges = np.linspace(-radius, radius, panels + 1)
    ref_x, ref_w = roots_legendre(p)
    half = radius / panels
    mids = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mids[:, None] + half * ref_x[None, :]).ravel()
    weights = np.tile(half * ref_w, panels)
    return nodes, weights


def build_quadrature(t: CouplingVector, tol: float = 1e-12, *,
                     max_degree: int = 0, points_per_panel: int = 24) -> QuadratureGrid:
    """Composite Gauss-Legendre grid whose panel count has converged.

    Doubles the panel count until int(rho) (and the max_degree moment, when
    one was requested) moves by less than tol relatively.  `max_degree`
    widens the radius so that high moments keep full accuracy; the default
    0 is the bare-weight rule.
    """
    if not t.integrable:
        raise NonIntegrableWeight(f"weight for couplings {t.as_dict()} has a divergent tail")
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    radius = _radius_for(t, tol, max_degree)
    deg = 2 * (int(max_degree) // 2)  # even companion moment for the convergence test

    def convergence_values(panels):
        nodes, weights = _panel_nodes(radius, panels, points_per_panel)
        rho = weight_eval(nodes, t)
        vals = [float(weights @ rho)]
        if deg > 0:
            vals.append(float(weights @ (nodes**deg * rho)))
        return nodes, weights, rho, vals

    panels = 8
    _, _, _, prev = convergence_values(panels)
    while panels <= 4096:
        panels *= 2
        nodes, weights, rho, cur = convergence_values(panels)
        if all(abs(c - p) <= tol * abs(c) for c, p in zip(cur, prev)):
            return QuadratureGrid(t, nodes, weights, rho, radius, tol,
                                  panels, points_per_panel)
        prev = cur
    raise ToleranceUnreachable(
        f"panel doubling stalled at {panels} panels for tol {tol}")


def widen_grid(grid: QuadratureGrid, radius_tol: float,
               max_degree: int = 0) -> QuadratureGrid:
    """Same grid geometry pushed out to a more suppressed tail radius.

    Panel count grows with the radius so panel width never exceeds the width
    that already converged.  Useful when slightly shifted weights will be
    integrated on this grid: the extra margin keeps their tails negligible.
    """
    radius = _radius_for(grid.couplings, radius_tol, max_degree)
    if radius <= grid.radius:
        return grid
    panels = int(np.ceil(grid.panels * radius / grid.radius))
    nodes, weights = _panel_nodes(radius, panels, grid.points_per_panel)
    rho = weight_eval(nodes, grid.couplings)
    return QuadratureGrid(grid.couplings, nodes, weights, rho, radius,
                          grid.target_tol, panels, grid.points_per_panel)


@lru_cache(maxsize=8)
def _cumulative_matrix(p: int) -> np.ndarray:
    """Matrix M with (M f)_j = int_{-1}^{xi_j} f on the p-point reference panel.

    Built from the Legendre expansion of f at the Gauss nodes:
    c_k = (2k+1)/2 * sum_i w_i P_k(xi_i) f_i and
    int_{-1}^{xi} P_k = (P_{k+1}(xi) - P_{k-1}(xi)) / (2k+1) for k >= 1.
    """
    xi, w = roots_legendre(p)
    P = np.stack([eval_legendre(k, xi) for k in range(p + 1)])  # (p+1, p)
    coeff = ((2 * np.arange(p) + 1) / 2.0)[:, None] * P[:p] * w[None, :]  # (p, p): k,i
    anti = np.empty((p, p))  # k, j -> int_{-1}^{xi_j} P_k
    anti[0] = xi + 1.0
    for k in range(1, p):
        anti[k] = (P[k + 1] - P[k - 1]) / (2 * k + 1)
    return anti.T @ coeff  # (j, i)


def cumulative_integral(grid: QuadratureGrid, fvals: np.ndarray):
    """Cumulative integral int_{-R}^{x_i} f at every node, plus the total.

    f is given by its values at grid.nodes.  Within each panel the integral
    is spectral; panel totals are prefix-summed.
    """
    p = grid.points_per_panel
    panels = grid.panels
    half = grid.radius / panels
    F = np.asarray(fvals, dtype=float).reshape(panels, p)
    M = _cumulative_matrix(p)
    inner = half * F @ M.T  # (panels, p): cumulative within each panel
    _, ref_w = roots_legendre(p)
    totals = half * F @ ref_w
    offsets = np.concatenate(([0.0], np.cumsum(totals)[:-1]))
    cum = (inner + offsets[:, None]).ravel()
    return cum, float(totals.sum())


def cumulative_weighted_moment(grid: QuadratureGrid, j: int) -> np.ndarray:
    """G_j(x) = int sgn(y - x) y^j rho(y) dy at every grid node.

    Computed as (total j-th moment) - 2 * (cumulative integral up to x);
    G_j(-R) ~ +mu_j and G_j(+R) ~ -mu_j to quadrature tolerance.
    """
    if j < 0:
        raise ValueError("moment degree must be non-negative")
    f = grid.nodes**j * grid.rho
    cum, total = cumulative_integral(grid, f)
    return total - 2.0 * cum

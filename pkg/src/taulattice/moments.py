"""Moment matrices, Pfaffians, and the two tau-sequences.

The unitary-ensemble tau_n is the determinant of the (n x n) Hankel matrix
of ordinary moments; the orthogonal-ensemble tau_{2n} is the Pfaffian of
the skew moment matrix built from the half-line products
m[i][j] = (1/2) int x^i G_j(x) rho(x) dx with G_j the signed cumulative
moment.  Coupling derivatives of tau are central finite differences
evaluated on a grid frozen at the base couplings, so a perturbed weight is
always integrated on the geometry chosen for the base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .couplings import (CouplingVector, QuadratureGrid, build_quadrature,
                        cumulative_integral, weight_eval, widen_grid)
from .errors import IllConditioned, OddDimension
from .numdiff import mixed_derivative

__all__ = [
    "SymmetricMomentTable",
    "SkewMomentMatrix",
    "symmetric_moment_table",
    "skew_moment_matrix",
    "skew_matrix_on_grid",
    "pfaffian",
    "tau_unitary",
    "tau_orthogonal",
    "tau_coupling_derivative",
]

# Radius suppression used whenever a frozen grid must absorb small coupling
# shifts: the extra tail margin costs ~10% more nodes and nothing else.
_SHIFT_RADIUS_TOL = 1e-20


def _moment_vector(grid: QuadratureGrid, t: CouplingVector, max_degree: int) -> np.ndarray:
    rho = weight_eval(grid.nodes, t)
    powers = grid.nodes[None, :] ** np.arange(max_degree + 1)[:, None]
    return powers @ (grid.weights * rho)


@dataclass(frozen=True)
class SymmetricMomentTable:
    """mu_0..mu_max of z^k against rho, with the couplings that made them."""

    mu: np.ndarray
    couplings: CouplingVector

    def __post_init__(self):
        arr = np.asarray(self.mu, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "mu", arr)
        if arr[0] <= 0:
            raise ValueError("mu_0 must be positive")

    @property
    def max_degree(self) -> int:
        return len(self.mu) - 1

    def hankel(self, n: int) -> np.ndarray:
        if 2 * (n - 1) > self.max_degree:
            raise ValueError(f"table holds degrees <= {self.max_degree}, need {2 * (n - 1)}")
        idx = np.arange(n)
        return self.mu[idx[:, None] + idx[None, :]]


def symmetric_moment_table(t: CouplingVector, max_degree: int, tol: float = 1e-12,
                           *, grid: QuadratureGrid | None = None) -> SymmetricMomentTable:
    """Moments mu_k, k <= max_degree, to tol relative accuracy.

    Degrees above 40 are refused: Hankel conditioning makes them useless in
    double precision, and lattice evolution is the intended route to larger n.
    """
    if not 0 <= max_degree <= 40:
        raise ValueError(f"max_degree must lie in [0, 40], got {max_degree}")
    if grid is None:
        grid = build_quadrature(t, tol, max_degree=max_degree)
    mu = _moment_vector(grid, t, max_degree)
    if t.parity_even_only:
        mu[1::2] = 0.0
    return SymmetricMomentTable(mu, t)


def skew_matrix_on_grid(grid: QuadratureGrid, t: CouplingVector, size: int) -> np.ndarray:
    """Raw skew product values on a caller-supplied grid (t may differ from
    the couplings the grid was built for, if its radius allows)."""
    rho = weight_eval(grid.nodes, t)
    powers = grid.nodes[None, :] ** np.arange(size)[:, None]
    G = np.empty((size, len(grid.nodes)))
    for j in range(size):
        cum, total = cumulative_integral(grid, powers[j] * rho)
        G[j] = total - 2.0 * cum
    m = 0.5 * (powers * (grid.weights * rho)[None, :]) @ G.T
    m = 0.5 * (m - m.T)  # exact antisymmetry; quadrature asymmetry is O(tol)
    np.fill_diagonal(m, 0.0)
    return m


@dataclass(frozen=True)
class SkewMomentMatrix:
    """Dense antisymmetric matrix of skew products of monomials."""

    m: np.ndarray
    couplings: CouplingVector

    def __post_init__(self):
        arr = np.asarray(self.m, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("skew moment matrix must be square")
        arr.setflags(write=False)
        object.__setattr__(self, "m", arr)

    @property
    def size(self) -> int:
        return self.m.shape[0]


def skew_moment_matrix(t: CouplingVector, size: int, tol: float = 1e-12,
                       *, grid: QuadratureGrid | None = None) -> SkewMomentMatrix:
    """Skew products m[i][j] = <x^i, y^j> for i, j < size (size even)."""
    if size % 2 or size <= 0:
        raise ValueError(f"size must be a positive even integer, got {size}")
    if grid is None:
        grid = build_quadrature(t, tol, max_degree=size + 2)
    return SkewMomentMatrix(skew_matrix_on_grid(grid, t, size), t)


def pfaffian(m) -> float:
    """Pfaffian of an even-dimensional antisymmetric matrix.

    Skew-symmetric elimination with partial pivoting; the sign convention
    makes pf of the canonical block matrix diag([[0,1],[-1,0]], ...) equal +1.
    """
    A = m.m if isinstance(m, SkewMomentMatrix) else np.asarray(m, dtype=float)
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("pfaffian needs a square matrix")
    n = A.shape[0]
    if n % 2:
        raise OddDimension(f"pfaffian undefined for odd dimension {n}")
    if n == 0:
        return 1.0
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A + A.T).max()) > 1e-12 * scale:
        raise ValueError("matrix is not antisymmetric")
    A = 0.5 * (A - A.T)
    pf = 1.0
    for k in range(0, n - 2, 2):
        kp = k + 1 + int(np.abs(A[k + 1:, k]).argmax())
        if A[kp, k] == 0.0:
            return 0.0
        if kp != k + 1:
            A[[k + 1, kp]] = A[[kp, k + 1]]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        pivot = A[k, k + 1]
        pf *= pivot
        tau = A[k + 2:, k] / A[k + 1, k]
        col = A[k + 2:, k + 1].copy()
        A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf * A[n - 2, n - 1]


def tau_unitary(t: CouplingVector, n: int, tol: float = 1e-12, *,
                table: SymmetricMomentTable | None = None) -> float:
    """Determinant of the n x n Hankel moment matrix; tau_0 = 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0
    if table is None:
        table = symmetric_moment_table(t, 2 * (n - 1), tol)
    H = table.hankel(n)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(f"Hankel matrix of order {n} is not positive definite") from exc
    return float(np.prod(np.diag(L)) ** 2)


def tau_orthogonal(t: CouplingVector, two_n: int, tol: float = 1e-12, *,
                   matrix: SkewMomentMatrix | None = None) -> float:
    """Pfaffian of the leading 2n x 2n skew moment matrix; tau_0 = 1."""
    if two_n < 0 or two_n % 2:
        raise ValueError(f"two_n must be a non-negative even integer, got {two_n}")
    if two_n == 0:
        return 1.0
    if matrix is None:
        matrix = skew_moment_matrix(t, two_n, tol)
    return pfaffian(matrix.m[:two_n, :two_n])


def tau_coupling_derivative(ensemble: str, n: int, t: CouplingVector,
                            multi_index: dict, step: float = 5e-3, *,
                            check_tol: float | None = None,
                            grid: QuadratureGrid | None = None,
                            tol: float = 1e-12) -> float:
    """Mixed coupling derivative of tau_n by central FD with one Richardson level.

    ensemble is "unitary" or "orthogonal" (n is the matrix size subscript in
    both cases, even for orthogonal).  multi_index maps coupling index ->
    derivative order, total order <= 4.  The quadrature grid is frozen at
    the base couplings with extra radius margin so that every shifted weight
    is evaluated on the same geometry.
    """
    if ensemble not in ("unitary", "orthogonal"):
        raise ValueError(f"unknown ensemble {ensemble!r}")
    orders = {int(k): int(p) for k, p in multi_index.items() if int(p) != 0}
    if any(p < 0 for p in orders.values()):
        raise ValueError("derivative orders must be non-negative")
    if sum(orders.values()) > 4:
        raise ValueError("total derivative order must be <= 4")
    if ensemble == "orthogonal" and n % 2:
        raise ValueError("orthogonal tau is defined for even sizes only")
    if grid is None:
        deg = max((2 * (n - 1) if ensemble == "unitary" else n) + 2, 2)
        grid = build_quadrature(t, tol, max_degree=deg)
        grid = widen_grid(grid, _SHIFT_RADIUS_TOL, deg)

    def tau_at(shift: dict) -> float:
        ts = t.shifted(shift)
        if ensemble == "unitary":
            if n == 0:
                return 1.0
            mu = _moment_vector(grid, ts, 2 * (n - 1))
            idx = np.arange(n)
            H = mu[idx[:, None] + idx[None, :]]
            try:
                L = np.linalg.cholesky(H)
            except np.linalg.LinAlgError as exc:
                raise IllConditioned("shifted Hankel matrix lost positivity") from exc
            return float(np.prod(np.diag(L)) ** 2)
        if n == 0:
            return 1.0
        return pfaffian(skew_matrix_on_grid(grid, ts, n))

    steps = {k: float(step) for k in orders}
    val = mixed_derivative(lambda s: tau_at(s), orders, steps, check_tol=check_tol)
    return float(val)

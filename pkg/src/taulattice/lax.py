"""Lax representations of the lattice flows.

Two shapes live here.  The tridiagonal form (diagonal a_n, off-diagonal
b_n) encodes three-term recurrences of orthogonal polynomials for an even
weight deformed by couplings.  The banded skew form stores the window
w^l_n, -K_neg <= l <= K_pos, of the multiplication operator written in a
skew-orthonormal polynomial basis; its dense embedding interleaves the
band into a 2N x 2N matrix with unit entries on part of the superdiagonal.

Both have closed-form initial data at zero couplings (Gaussian ensembles),
and both can be rebuilt from moment data, which is what the consistency
oracles exercise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .couplings import (CouplingVector, build_quadrature, cumulative_integral,
                        weight_eval, widen_grid)
from .errors import IllConditioned, SingularMinor, StructureViolation
from .moments import (SkewMomentMatrix, SymmetricMomentTable, skew_matrix_on_grid,
                      skew_moment_matrix, tau_coupling_derivative, tau_orthogonal)
from .report import IdentityReport

__all__ = [
    "TodaLax",
    "PfaffLax",
    "SkewOrthoBasis",
    "gue_lax_init",
    "goe_lax_init",
    "toda_lax_from_moments",
    "skew_orthonormal_basis",
    "pfaff_lax_from_basis",
    "pfaff_entries_from_tau",
    "skew_hermite_map_check",
    "hermite_map_coeffs",
    "c_coeff",
    "nu_values",
    "sqrt_ratio_product",
]


def c_coeff(n) -> np.ndarray | float:
    """sqrt(2n(2n-1)), the site-dependent factor of the Gaussian skew window."""
    n = np.asarray(n, dtype=float)
    out = np.sqrt(2.0 * n * (2.0 * n - 1.0))
    return float(out) if out.ndim == 0 else out


def nu_values(count: int) -> np.ndarray:
    """Skew norms sqrt(pi) (2n)! / 4^n for n = 0..count-1, by stable recursion."""
    nu = np.empty(count)
    nu[0] = math.sqrt(math.pi)
    for m in range(count - 1):
        nu[m + 1] = nu[m] * (2 * m + 1) * (m + 1) / 2.0
    return nu


def sqrt_ratio_product(start: int, count: int) -> float:
    """sqrt of prod_{i=start}^{start+count-1} 2i/(2i-1); 1.0 for count <= 0.

    Each factor is barely above 1, so this form never overflows where the
    equivalent factorial ratio would.
    """
    if count <= 0:
        return 1.0
    acc = 1.0
    for i in range(start, start + count):
        acc *= 2.0 * i / (2.0 * i - 1.0)
    return math.sqrt(acc)


@dataclass(frozen=True)
class TodaLax:
    """Tridiagonal Lax data: diagonal a (N sites), off-diagonal b (N-1), b > 0."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or b.ndim != 1 or len(b) != len(a) - 1:
            raise ValueError("need len(b) == len(a) - 1")
        if np.any(b <= 0):
            raise ValueError("off-diagonal entries must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_sites(self) -> int:
        return len(self.a)

    def matrix(self) -> np.ndarray:
        L = np.diag(self.a)
        idx = np.arange(self.n_sites - 1)
        L[idx, idx + 1] = self.b
        L[idx + 1, idx] = self.b
        return L


def gue_lax_init(n_sites: int) -> TodaLax:
    """a_n = 0, b_n = sqrt(n): the zero-coupling Gaussian recurrence."""
    return TodaLax(np.zeros(n_sites), np.sqrt(np.arange(1.0, n_sites)))


def toda_lax_from_moments(table: SymmetricMomentTable, n_sites: int) -> TodaLax:
    """Recurrence coefficients from the Cholesky factor of the Hankel matrix.

    Needs moments through degree 2*n_sites.  With H = L L^T,
    b_{n+1} = L[n+1,n+1]/L[n,n] and a_{n+1} = L[n+1,n]/L[n,n] - L[n,n-1]/L[n-1,n-1].
    """
    H = table.hankel(n_sites + 1)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(
            f"Hankel matrix of order {n_sites + 1} lost positivity") from exc
    d = np.diag(L)
    sub = np.diag(L, -1)
    b = d[1:n_sites] / d[:n_sites - 1]
    ratios = sub / d[:-1]
    a = np.empty(n_sites)
    a[0] = ratios[0]
    a[1:] = ratios[1:n_sites] - ratios[:n_sites - 1]
    return TodaLax(a, b)


@dataclass(frozen=True)
class PfaffLax:
    """Banded window of the skew-basis multiplication operator.

    w[l + k_neg, n - 1] holds w^l_n for -k_neg <= l <= k_pos, 1 <= n <= n_sites.
    """

    w: np.ndarray
    k_neg: int
    k_pos: int

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != self.k_neg + self.k_pos + 1:
            raise ValueError(
                f"window array must have {self.k_neg + self.k_pos + 1} rows")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n_sites(self) -> int:
        return self.w.shape[1]

    def get(self, ell: int, n: int) -> float:
        if not -self.k_neg <= ell <= self.k_pos:
            raise IndexError(f"band index {ell} outside [-{self.k_neg}, {self.k_pos}]")
        if not 1 <= n <= self.n_sites:
            raise IndexError(f"site {n} outside [1, {self.n_sites}]")
        return float(self.w[ell + self.k_neg, n - 1])

    def to_json(self) -> str:
        entries = {}
        for row, ell in enumerate(range(-self.k_neg, self.k_pos + 1)):
            for col in range(self.n_sites):
                entries[f"{ell},{col + 1}"] = self.w[row, col]
        return json.dumps({"N": self.n_sites, "Kpos": self.k_pos, "w": entries})

    @classmethod
    def from_json(cls, text: str) -> "PfaffLax":
        data = json.loads(text)
        n_sites, k_pos = int(data["N"]), int(data["Kpos"])
        ells = [int(key.split(",")[0]) for key in data["w"]]
        k_neg = -min(ells) if ells else 0
        w = np.zeros((k_neg + k_pos + 1, n_sites))
        for key, value in data["w"].items():
            ell, n = (int(part) for part in key.split(","))
            w[ell + k_neg, n - 1] = float(value)
        return cls(w, k_neg, k_pos)


def goe_lax_init(n_sites: int, k_pos: int, k_neg: int = 6) -> PfaffLax:
    """Closed-form window at zero couplings.

    w^0_n = c_n/2, w^{-1}_n = 1/2, w^{-2}_n = -c_n/2, deeper negatives vanish,
    and w^k_n for k >= 1 is 2 sqrt(prod_{i=n}^{n+k-1} 2i/(2i-1)).
    """
    if k_neg < 2:
        raise ValueError("window must reach at least two steps below the diagonal")
    w = np.zeros((k_neg + k_pos + 1, n_sites))
    sites = np.arange(1.0, n_sites + 1)
    c = c_coeff(sites)
    w[k_neg - 2] = -0.5 * c
    w[k_neg - 1] = 0.5
    w[k_neg] = 0.5 * c
    for k in range(1, k_pos + 1):
        w[k_neg + k] = [2.0 * sqrt_ratio_product(n, k) for n in range(1, n_sites + 1)]
    return PfaffLax(w, k_neg, k_pos)


def _parity_hermite_coeffs(count: int) -> np.ndarray:
    """Monomial coefficients of the monic polynomials with z P_k = P_{k+1} + (k/2) P_{k-1}."""
    C = np.zeros((count, count))
    C[0, 0] = 1.0
    if count > 1:
        C[1, 1] = 1.0
    for k in range(1, count - 1):
        C[k + 1, 1:] = C[k, :-1]
        C[k + 1] -= 0.5 * k * C[k - 1]
    return C


@dataclass(frozen=True)
class SkewOrthoBasis:
    """Monic polynomial pairs (Q_{2n}, Q_{2n+1}) with skew-diagonal Gram.

    mono_coeffs[i] are monomial coefficients of Q_i; h[n] is the pair
    product <Q_{2n}, Q_{2n+1}>.  work_coeffs stores the same rows in the
    scaled parity-Hermite basis actually used during orthogonalization.
    """

    mono_coeffs: np.ndarray
    h: np.ndarray
    work_coeffs: np.ndarray
    couplings: CouplingVector

    def __post_init__(self):
        for name in ("mono_coeffs", "h", "work_coeffs"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.h <= 0):
            raise ValueError("pair products must be positive")

    @property
    def n_pairs(self) -> int:
        return len(self.h)

    def normalized_work(self) -> np.ndarray:
        scale = np.repeat(np.sqrt(self.h), 2)
        return self.work_coeffs / scale[:, None]


def _skew_gram(coeff_rows: np.ndarray, t: CouplingVector, grid) -> np.ndarray:
    """<f_i, f_j> for polynomials given by coefficient rows, by quadrature."""
    dim = coeff_rows.shape[1]
    powers = grid.nodes[None, :] ** np.arange(dim)[:, None]
    fvals = coeff_rows @ powers
    rho = weight_eval(grid.nodes, t)
    G = np.empty_like(fvals)
    for j in range(len(fvals)):
        cum, total = cumulative_integral(grid, fvals[j] * rho)
        G[j] = total - 2.0 * cum
    F = 0.5 * (fvals * (grid.weights * rho)[None, :]) @ G.T
    return 0.5 * (F - F.T)


def _working_gram(t: CouplingVector, n_pairs: int, tol: float, grid=None) -> tuple:
    """Skew Gram of the scaled parity-Hermite basis, by direct quadrature.

    The scaling P_k / sqrt(nu_{k//2}) keeps every entry O(k!-free); building
    the Gram from the monomial skew matrix by congruence would cancel
    catastrophically instead.
    """
    dim = 2 * n_pairs
    if grid is None:
        grid = build_quadrature(t, tol, max_degree=dim + 2)
    C = _parity_hermite_coeffs(dim)
    scale = np.repeat(np.sqrt(nu_values(n_pairs)), 2)
    Cs = C / scale[:, None]
    F = _skew_gram(Cs, t, grid)
    return F, Cs, grid


def skew_orthonormal_basis(m: SkewMomentMatrix, n_pairs: int, *,
                           tol: float = 1e-12, grid=None) -> SkewOrthoBasis:
    """Skew Gram-Schmidt producing monic pairs with <Q_{2n}, Q_{2n+1}> = h_n.

    The odd member of each pair is pinned by removing its z^{2n} monomial
    component, which fixes the in-pair gauge freedom Q_{2n+1} += c Q_{2n}.
    """
    dim = 2 * n_pairs
    if m.size < dim:
        raise ValueError(f"skew matrix of size {m.size} cannot support {n_pairs} pairs")
    F, Cs, grid = _working_gram(m.couplings, n_pairs, tol, grid)
    root_nu = np.repeat(np.sqrt(nu_values(n_pairs)), 2)
    W = np.zeros((dim, dim))
    h = np.empty(n_pairs)
    for n in range(n_pairs):
        for i in (2 * n, 2 * n + 1):
            # monic start: f_i carries leading coefficient 1/sqrt(nu), undo it
            q = np.zeros(dim)
            q[i] = root_nu[i]
            for p in range(n):
                # remove the pair-p component; the product is antisymmetric,
                # so <Q_2p, q> fixes the odd coefficient and vice versa
                prods = F @ q
                alpha = W[2 * p] @ prods / h[p]
                beta = W[2 * p + 1] @ prods / h[p]
                q = q + beta * W[2 * p] - alpha * W[2 * p + 1]
            W[i] = q
        # gauge pin: strip the even partner's leading working mode
        gamma = W[2 * n + 1, 2 * n] / W[2 * n, 2 * n]
        W[2 * n + 1] -= gamma * W[2 * n]
        h[n] = W[2 * n] @ F @ W[2 * n + 1]
        if not h[n] > tol * max(1.0, abs(F).max()):
            raise SingularMinor(f"pair product h_{n} = {h[n]:.3e} is not positive")
    mono = W @ Cs
    return SkewOrthoBasis(mono, h, W, m.couplings)


def _z_transfer(n_pairs: int) -> np.ndarray:
    """Multiplication by z in the scaled parity-Hermite basis (rows: input mode)."""
    dim = 2 * n_pairs
    nu = nu_values(n_pairs + 1)
    root = np.sqrt(nu)
    Z = np.zeros((dim, dim + 1))
    for k in range(dim):
        Z[k, k + 1] = root[(k + 1) // 2] / root[k // 2]
        if k >= 1:
            Z[k, k - 1] = 0.5 * k * root[(k - 1) // 2] / root[k // 2]
    return Z[:, :dim]


def pfaff_lax_from_basis(basis: SkewOrthoBasis, n_sites: int, k_pos: int,
                         k_neg: int = 6, *, check_tol: float = 1e-6) -> PfaffLax:
    """Read the banded window off the multiplication operator in the normalized basis.

    Requires n_sites + max(k_pos, k_neg) <= basis.n_pairs so every extracted
    entry sits inside the representable block.  Raises StructureViolation if
    the operator's fixed pattern (unit entries, vanishing upper fringe) is
    not reproduced to check_tol.
    """
    n_pairs = basis.n_pairs
    if n_sites + max(k_pos, k_neg) > n_pairs or n_sites >= n_pairs:
        raise ValueError("basis too small for the requested window")
    Wn = basis.normalized_work()
    M = Wn @ _z_transfer(n_pairs)
    L = solve_triangular(Wn.T, M.T, lower=False).T
    # row 2*n_pairs - 1 of L is truncation-corrupted; nothing below reads it
    scale = max(1.0, float(np.abs(L[: 2 * n_pairs - 1]).max()))
    dim = 2 * n_pairs - 1
    for i in range(dim):
        fringe = L[i, i + 2:]
        if len(fringe) and float(np.abs(fringe).max()) > check_tol * scale:
            raise StructureViolation(
                f"row {i} has weight beyond the superdiagonal: {np.abs(fringe).max():.3e}")
    for n in range(1, n_sites + 1):
        if abs(L[2 * n - 2, 2 * n - 1] - 1.0) > check_tol:
            raise StructureViolation(
                f"unit superdiagonal entry at pair {n} reads {L[2 * n - 2, 2 * n - 1]:.6f}")
    if basis.couplings.parity_even_only:
        # even weight: the operator only connects opposite-parity modes
        ii, jj = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
        board = (jj <= ii + 1) & ((ii + jj) % 2 == 0)
        worst = float(np.abs(L[:dim, :dim][board]).max())
        if worst > check_tol * scale:
            raise StructureViolation(
                f"parity-forbidden entry of size {worst:.3e} in the operator")
    w = np.zeros((k_neg + k_pos + 1, n_sites))
    for n in range(1, n_sites + 1):
        w[k_neg, n - 1] = L[2 * n - 1, 2 * n]
        for k in range(1, k_pos + 1):
            w[k_neg + k, n - 1] = L[2 * (n + k) - 2, 2 * n - 1]
        for k in range(1, k_neg + 1):
            w[k_neg - k, n - 1] = L[2 * n + 2 * k - 3, 2 * n - 2]
    return PfaffLax(w, k_neg, k_pos)


def pfaff_entries_from_tau(t: CouplingVector, n_pairs: int, step: float = 5e-3,
                           *, tol: float = 1e-12) -> dict:
    """w^0, w^1, w^{-1} at sites 1..n_pairs from Pfaffian tau-ratios.

    An independent route to the window: tau values and their first/second
    coupling derivatives, all on one widened frozen grid.
    """
    tau = {0: 1.0}
    d11 = {}
    d2 = {}
    top = 2 * n_pairs + 2
    grid = build_quadrature(t, tol, max_degree=top + 2)
    grid = widen_grid(grid, 1e-20, top + 2)
    for size in range(2, top + 1, 2):
        matrix = SkewMomentMatrix(skew_matrix_on_grid(grid, t, size), t)
        tau[size] = tau_orthogonal(t, size, tol, matrix=matrix)
        if size <= 2 * n_pairs:
            d11[size] = tau_coupling_derivative("orthogonal", size, t, {1: 2},
                                                step, grid=grid)
            d2[size] = tau_coupling_derivative("orthogonal", size, t, {2: 1},
                                               step, grid=grid)
    out = {}
    for n in range(1, n_pairs + 1):
        lo, mid, hi = tau[2 * n - 2], tau[2 * n], tau[2 * n + 2]
        out[(0, n)] = math.sqrt(lo * hi) / mid
        out[(1, n)] = d11[2 * n] / math.sqrt(lo * hi)
        term_mid = (d2[2 * n] - d11[2 * n]) / (2.0 * mid)
        prev = 2 * n - 2
        if prev == 0:
            term_prev = 0.0
        else:
            term_prev = (d2[prev] + d11[prev]) / (2.0 * tau[prev])
        out[(-1, n)] = term_mid - term_prev
    return out


def hermite_map_coeffs(n_pairs: int) -> np.ndarray:
    """Closed-form zero-coupling pair basis: Q_{2n} = P_{2n} and
    Q_{2n+1} = P_{2n+1} - n P_{2n-1}, P monic parity-Hermite."""
    dim = 2 * n_pairs
    C = _parity_hermite_coeffs(dim)
    Q = C.copy()
    for n in range(1, n_pairs):
        Q[2 * n + 1] -= n * C[2 * n - 1]
    return Q


def skew_hermite_map_check(n_pairs: int, *, tol: float = 1e-9) -> IdentityReport:
    """Verify the closed-form pair basis is skew-orthogonal at zero coupling.

    Builds Q from hermite_map_coeffs and checks <Q_{2n}, Q_{2m+1}> =
    nu_n delta_{mn} (and zero same-parity pairings) by quadrature; the
    residual is the largest violation of the nu-scaled Gram.
    """
    t0 = CouplingVector.from_mapping({})
    dim = 2 * n_pairs
    grid = build_quadrature(t0, 1e-12, max_degree=dim + 2)
    nu = nu_values(n_pairs)
    Qs = hermite_map_coeffs(n_pairs) / np.repeat(np.sqrt(nu), 2)[:, None]
    S = _skew_gram(Qs, t0, grid)
    expected = np.zeros_like(S)
    for n in range(n_pairs):
        expected[2 * n, 2 * n + 1] = 1.0
        expected[2 * n + 1, 2 * n] = -1.0
    residual = float(np.abs(S - expected).max())
    meta = {"n_pairs": n_pairs, "<Q0,Q1>": float(S[0, 1] * nu[0])}
    if n_pairs >= 2:
        meta["<Q2,Q1>"] = float(S[2, 1] * math.sqrt(nu[1] * nu[0]))
        meta["<Q2,Q3>"] = float(S[2, 3] * nu[1])
    return IdentityReport.from_residual(
        "skew-map-orthogonality", residual, tol, meta=meta)

"""Randomized invariants; anything numpy-heavy draws a seed from hypothesis
and generates the arrays with default_rng so shrinking stays cheap."""

import numpy as np
from hypothesis import given, settings, strategies as st

from taulattice import (CouplingVector, HydroChainField, PfaffLax,
                        TensorPoint, VolterraState, evolve_volterra,
                        hydro_chain_rhs, nijenhuis, nijenhuis_closed_form,
                        pfaff_chain_rhs, pfaff_commutator_rhs, pfaffian,
                        spatial_derivative, symmetric_moment_table)

couplings = st.dictionaries(
    st.integers(min_value=1, max_value=8),
    st.floats(min_value=-0.5, max_value=0.5, allow_nan=False),
    max_size=4)


@given(couplings)
def test_coupling_vector_json_round_trip(mapping):
    cv = CouplingVector.from_mapping(mapping)
    assert CouplingVector.from_json(cv.to_json()) == cv
    assert all(v != 0.0 for _, v in cv.entries)


@given(st.integers(min_value=1, max_value=4), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_pfaffian_squares_to_determinant(half_dim, seed):
    rng = np.random.default_rng(seed)
    n = 2 * half_dim
    a = rng.normal(size=(n, n))
    m = a - a.T
    pf = pfaffian(m)
    assert abs(pf * pf - np.linalg.det(m)) < 1e-9 * max(abs(pf * pf), 1.0)


@given(st.floats(min_value=-0.2, max_value=0.2),
       st.floats(min_value=-0.1, max_value=0.0))
@settings(max_examples=15, deadline=None)
def test_even_weight_has_no_odd_moments(t2, t4):
    t = CouplingVector.from_mapping({2: t2, 4: t4})
    mu = symmetric_moment_table(t, 10).mu
    assert np.max(np.abs(mu[1::2])) < 1e-10 * np.max(mu[::2])


@given(st.floats(min_value=-0.3, max_value=0.2))
@settings(max_examples=15, deadline=None)
def test_moment_mass_stable_under_tolerance(t2):
    t = CouplingVector.from_mapping({2: t2})
    coarse = symmetric_moment_table(t, 0, tol=1e-9).mu[0]
    fine = symmetric_moment_table(t, 0, tol=1e-13).mu[0]
    assert abs(coarse - fine) < 1e-8 * fine


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_nijenhuis_antisymmetric_and_tabulated(seed):
    rng = np.random.default_rng(seed)
    W = 9
    u = rng.uniform(-2.0, 2.0, 2 * W + 1)
    u[W] = rng.uniform(0.5, 2.0)
    pt = TensorPoint(u, W)
    i, j, k = rng.integers(-5, 6, size=3)
    a = nijenhuis(int(i), int(j), int(k), pt)
    assert abs(a + nijenhuis(int(i), int(k), int(j), pt)) < 1e-13
    assert abs(a - nijenhuis_closed_form(int(i), int(j), int(k), pt)) < 1e-11


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_banded_chain_agrees_with_commutator(seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.3, 2.0, (9, 14))
    w[:2] *= 1e-2
    state = PfaffLax(w, k_neg=4, k_pos=4)
    chain = pfaff_chain_rhs(state)[:, :8]
    comm = pfaff_commutator_rhs(state)[:, :8]
    assert np.max(np.abs(chain - comm)) < 1e-11 * np.max(np.abs(chain))


@given(st.floats(min_value=0.01, max_value=0.15),
       st.integers(min_value=16, max_value=28))
@settings(max_examples=10, deadline=None)
def test_extrapolating_ghosts_agree_on_scaling_family(horizon, n_sites):
    # both closures reproduce B_n = n/(1-2t) exactly, so they must agree
    state = VolterraState(np.arange(1.0, n_sites + 1.0))
    runs = {}
    for policy in ("scaled", "linear"):
        res = evolve_volterra(state, 2, [horizon], h=2e-3, ghost=policy)
        runs[policy] = res.states[-1].B[:res.stats["n_evolve"]]
    scale = np.max(runs["scaled"])
    assert np.max(np.abs(runs["scaled"] - runs["linear"])) < 1e-9 * scale


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_nonnegative_rows_ignore_the_negative_half(seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(0.25, 2.25, 41)
    base = HydroChainField.initial(x, 4, 5)
    du_base, _ = hydro_chain_rhs(base)
    u = base.u.copy()
    u[:base.k_neg] = rng.uniform(-1.5, 1.5, (base.k_neg, len(x)))
    du_pert, _ = hydro_chain_rhs(HydroChainField(x, u, base.v, base.k_neg))
    assert np.array_equal(du_pert[base.k_neg:], du_base[base.k_neg:])
    assert not np.array_equal(du_pert[base.k_neg - 1], du_base[base.k_neg - 1])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_v_equation_closure_source_cancels(seed):
    # the literal source u0 d/dx(u0/(2 u0)) differentiates a constant
    rng = np.random.default_rng(seed)
    x = np.linspace(0.5, 1.5, 41)
    dx = x[1] - x[0]
    u0 = rng.uniform(0.2, 3.0, len(x))
    term = u0 * spatial_derivative(u0 * (1.0 / (2.0 * u0)), dx)
    assert np.max(np.abs(term)) < 1e-11

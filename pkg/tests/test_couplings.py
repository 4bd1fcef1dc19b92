import json
import math

import numpy as np
import pytest

from taulattice import CouplingVector, build_quadrature
from taulattice.couplings import cumulative_integral, weight_eval, widen_grid
from taulattice.errors import NonIntegrableWeight

SQRT_2PI = math.sqrt(2.0 * math.pi)


def test_zero_entries_dropped_and_equal():
    a = CouplingVector.from_mapping({2: 0.0, 4: -0.1})
    b = CouplingVector.from_mapping({4: -0.1})
    assert a == b
    assert hash(a) == hash(b)
    assert a.as_dict() == {4: -0.1}


def test_json_round_trip():
    t = CouplingVector.from_mapping({1: 0.2, 3: -0.05})
    back = CouplingVector.from_json(t.to_json())
    assert back == t
    parsed = json.loads(t.to_json())
    assert parsed == {"t": {"1": 0.2, "3": -0.05}}


def test_bad_indices_rejected():
    with pytest.raises(ValueError):
        CouplingVector.from_mapping({0: 1.0})
    with pytest.raises(ValueError):
        CouplingVector(((2, 0.1), (2, 0.2)))
    with pytest.raises(ValueError):
        CouplingVector.from_mapping({3: 0.1}, parity_even_only=True)


def test_integrable_classification():
    ok = [{}, {2: 0.4}, {2: -3.0}, {4: -0.01}, {3: 0.2}, {6: -1.0, 5: 2.0}]
    bad = [{2: 0.5}, {2: 0.7}, {4: 0.01}, {5: 0.1}, {6: 1e-8}]
    for m in ok:
        assert CouplingVector.from_mapping(m).integrable, m
    for m in bad:
        assert not CouplingVector.from_mapping(m).integrable, m


def test_exponent_and_shift():
    t = CouplingVector.from_mapping({1: 0.3, 2: -0.1})
    z = np.array([-1.0, 0.0, 2.0])
    expect = -0.5 * z**2 + 0.3 * z - 0.1 * z**2
    assert np.allclose(t.exponent(z), expect, atol=0, rtol=1e-15)
    shifted = t.shifted({1: -0.3})
    assert shifted.as_dict() == {2: -0.1}


def test_quadrature_gaussian_mass(t0):
    grid = build_quadrature(t0, 1e-12)
    mass = grid.integrate_weighted(np.ones_like(grid.nodes))
    assert abs(mass - SQRT_2PI) < 1e-12 * SQRT_2PI


def test_quadrature_high_moment(t0):
    # degree-12 Gaussian moment is 11!! = 10395 times the mass
    grid = build_quadrature(t0, 1e-12, max_degree=12)
    m12 = grid.integrate_weighted(grid.nodes**12)
    assert abs(m12 / SQRT_2PI - 10395.0) < 1e-9 * 10395.0


def test_quadrature_rejects_divergent_weight():
    with pytest.raises(NonIntegrableWeight):
        build_quadrature(CouplingVector.from_mapping({4: 0.1}))


def test_widen_grid_preserves_values(t0):
    grid = build_quadrature(t0, 1e-12, max_degree=8)
    wide = widen_grid(grid, 1e-20, 8)
    assert wide.radius > grid.radius
    a = grid.integrate_weighted(grid.nodes**8)
    b = wide.integrate_weighted(wide.nodes**8)
    assert abs(a - b) < 1e-11 * abs(a)


def test_cumulative_integral_matches_error_function(t0):
    grid = build_quadrature(t0, 1e-12)
    f = weight_eval(grid.nodes, t0)
    cum, total = cumulative_integral(grid, f)
    assert abs(total - SQRT_2PI) < 1e-12 * SQRT_2PI
    for i in (len(cum) // 3, len(cum) // 2, 4 * len(cum) // 5):
        x = grid.nodes[i]
        exact = SQRT_2PI * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
        assert abs(cum[i] - exact) < 1e-10 * SQRT_2PI
    assert np.all(np.diff(cum) >= -1e-13)

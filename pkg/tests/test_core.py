import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bassprice.core import (AdoptionState, MarketParams, ParameterError, adoption_potential,
                            arrival_rate, epoch_start, floor_count, icbrt)


def test_arrival_rate_at_zero_price_and_zero_adoption():
    params = MarketParams(100, 0.3, 0.5)
    assert arrival_rate(params, 0.0, 0.0) == pytest.approx(30.0)


def test_arrival_rate_halfway():
    # 10 * e^-1 * (0.5 + 0.25) * 0.5
    params = MarketParams(10, 0.5, 0.5)
    assert arrival_rate(params, 1.0, 0.5) == pytest.approx(3.75 / math.e, rel=1e-15)


def test_arrival_rate_vanishes_when_market_saturated():
    assert arrival_rate(MarketParams(50, 0.2, 0.7), 0.3, 1.0) == 0.0


def test_arrival_rate_is_vectorised():
    params = MarketParams(10, 0.4, 0.4, phi=1.0)
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(arrival_rate(params, np.zeros(5), x),
                               10 * adoption_potential(0.4, 0.4, x))


@pytest.mark.parametrize("p", [-0.1, math.inf, math.nan])
def test_arrival_rate_rejects_bad_price(p):
    with pytest.raises(ParameterError):
        arrival_rate(MarketParams(10, 0.3, 0.3), p, 0.1)


@pytest.mark.parametrize("x", [-1e-9, 1.01])
def test_arrival_rate_rejects_bad_adoption(x):
    with pytest.raises(ParameterError):
        arrival_rate(MarketParams(10, 0.3, 0.3), 0.0, x)


@pytest.mark.parametrize("kw", [dict(m=0, alpha=0.3, beta=0.1), dict(m=10, alpha=0.0, beta=0.1),
                                dict(m=10, alpha=0.3, beta=-0.1),
                                dict(m=10, alpha=0.7, beta=0.5, phi=1.0),
                                dict(m=2.5, alpha=0.3, beta=0.1)])
def test_market_params_validation(kw):
    with pytest.raises(ParameterError):
        MarketParams(**kw)


def test_with_beta_widens_phi():
    p = MarketParams(10, 0.5, 0.5).with_beta(2.0)
    assert p.beta == 2.0 and p.phi == 2.5


def test_adoption_state():
    s = AdoptionState(3, 12, 0.5)
    assert s.x == 0.25
    with pytest.raises(ParameterError):
        AdoptionState(13, 12)


def test_floor_count():
    assert floor_count(2.999) == 2
    assert floor_count(0.0) == 0
    with pytest.raises(ParameterError):
        floor_count(-0.5)


def test_epoch_start_exact_where_float_fails():
    # m^(2/3) for m = 10**6 is exactly 10**4
    assert epoch_start(10 ** 6, 1) == 10 ** 4
    assert epoch_start(10 ** 6, 2) == 2 * 10 ** 4
    assert epoch_start(1000, 3) == 400


@given(st.integers(min_value=0, max_value=10 ** 30))
def test_icbrt_is_floor_cube_root(n):
    c = icbrt(n)
    assert c ** 3 <= n < (c + 1) ** 3

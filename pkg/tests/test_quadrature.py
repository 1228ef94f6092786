import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from matterwave.errors import ConvergenceError
from matterwave.quadrature import oscillatory_quad


@given(st.floats(0.0, 200.0))
def test_linear_phase_closed_form(q):
    res = oscillatory_quad([lambda x: np.ones_like(x)], lambda x: q * x, -1.0, 1.0)
    assert res.values[0] == pytest.approx(2 * np.sinc(q / np.pi), abs=1e-10)


def test_quadratic_phase_is_fresnel_integral():
    t = 7.3
    res = oscillatory_quad([lambda x: np.ones_like(x)], lambda x: 0.5 * np.pi * x * x, 0.0, t)
    s, c = special.fresnel(t)
    assert res.values[0] == pytest.approx(c + 1j * s, abs=1e-10)


def test_moments_share_panels():
    res = oscillatory_quad([lambda x: np.ones_like(x), lambda x: x, lambda x: x * x], lambda x: 3 * x, 0.0, 1.0)
    exact = [
        (np.exp(3j) - 1) / 3j,
        np.exp(3j) / 3j + (np.exp(3j) - 1) / 9,
    ]
    assert res.values[0] == pytest.approx(exact[0], abs=1e-11)
    assert res.values[1] == pytest.approx(exact[1], abs=1e-11)


def test_log_singular_wall_phase():
    # phi = c log(1/(1-x)) near x = 1: int_0^1 e^{-i c log(1-x)} dx = 1 / (1 - i c)
    c = 5.0
    res = oscillatory_quad([lambda x: np.ones_like(x)], lambda x: -c * np.log1p(-x), 0.0, 1.0, singular=(False, True))
    assert res.values[0] == pytest.approx(1 / (1 - 1j * c), abs=1e-9)
    assert res.end_cutoffs[1] > 0 and res.error < 1e-9


def test_panel_budget_enforced():
    with pytest.raises(ConvergenceError):
        oscillatory_quad([lambda x: np.ones_like(x)], lambda x: 1e9 * x, 0.0, 1.0, max_panels=1000)
    with pytest.raises(ValueError):
        oscillatory_quad([lambda x: np.ones_like(x)], lambda x: x, 1.0, 0.0)

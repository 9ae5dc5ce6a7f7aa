import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from offload_adoption.special import beta_pdf, betainc_reg


@pytest.mark.parametrize("a,b", [(1, 1), (1, 3), (5, 2), (2, 2), (0.5, 0.5), (0.3, 4.0), (30, 40)])
def test_betainc_matches_scipy_on_grid(a, b):
    for x in np.linspace(0, 1, 101):
        assert betainc_reg(a, b, float(x)) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0, 1))
def test_betainc_property_against_scipy(a, b, x):
    assert abs(betainc_reg(a, b, x) - special.betainc(a, b, x)) < 1e-11


@pytest.mark.parametrize("a,b,x", [(5, 2, 0.3), (1, 3, 0.7), (2, 2, 0.41)])
def test_betainc_equals_integral_of_pdf(a, b, x):
    area, _ = integrate.quad(lambda t: beta_pdf(a, b, t), 0, x, epsabs=1e-13)
    assert betainc_reg(a, b, x) == pytest.approx(area, abs=1e-11)


def test_betainc_closed_forms_and_clamping():
    # I_x(1, 3) = 1 - (1 - x)^3
    for x in (0.1, 0.5, 0.9):
        assert betainc_reg(1, 3, x) == pytest.approx(1 - (1 - x) ** 3, abs=1e-14)
    assert betainc_reg(2, 3, -0.5) == 0.0
    assert betainc_reg(2, 3, 1.5) == 1.0
    with pytest.raises(ValueError):
        betainc_reg(0, 1, 0.5)


def test_beta_pdf_endpoints():
    assert beta_pdf(1, 3, 0.0) == pytest.approx(3.0)
    assert beta_pdf(2, 3, 0.0) == 0.0
    assert math.isinf(beta_pdf(0.5, 2, 0.0))
    assert beta_pdf(5, 2, 0.6) == pytest.approx(special.gamma(7) / (special.gamma(5) * special.gamma(2)) * 0.6**4 * 0.4)

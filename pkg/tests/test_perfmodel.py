import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempest.perfmodel import intra_warp_speedup, residual_tail_fraction, tail_fraction_from_work, tail_speedup


def test_worked_values():
    assert intra_warp_speedup(4, 100, 0.1, 1000) == pytest.approx(7.9208, abs=1e-4)
    assert tail_fraction_from_work(0.01, 336) == pytest.approx(0.7724, abs=1e-3)
    assert tail_speedup(1, 336, 0.7724) == pytest.approx(4.35, abs=0.01)
    assert residual_tail_fraction(0.77, 2) == pytest.approx(0.626, abs=1e-3)


def test_no_overhead_full_warp():
    assert intra_warp_speedup(32, 0, 0.5, 10) == 1.0


def test_guards():
    with pytest.raises(ValueError):
        intra_warp_speedup(1, 1, 0.1, 0)
    for f in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            tail_fraction_from_work(f, 336)


@settings(max_examples=500)
@given(st.floats(0.5, 1.0), st.floats(1.0, 2000.0), st.floats(0.0, 0.999), st.floats(0.0, 1.0))
def test_tail_speedup_bounded(o, phi, l_imb, kc):
    assert tail_speedup(o, phi, l_imb, kc) <= o * phi * (1 + 1e-12)


@settings(max_examples=300)
@given(st.floats(0.01, 0.99), st.floats(1.0, 50.0), st.floats(0.01, 10.0))
def test_residual_decreasing_in_theta(l_imb, theta, step):
    assert residual_tail_fraction(l_imb, theta + step) < residual_tail_fraction(l_imb, theta)
    if theta > 1:
        assert residual_tail_fraction(l_imb, theta) < l_imb


def test_tail_fraction_grows_with_skew():
    vals = [tail_fraction_from_work(f, 336) for f in (0.001, 0.01, 0.1, 1.0)]
    assert vals == sorted(vals) and vals[-1] == 1.0

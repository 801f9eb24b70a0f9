import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmss.analytic import (METRIC, bogoliubov, evolve_analytic, tmsv_amplitudes, tpi_map,
                           vacuum_correlations, vacuum_moments)
from tmss.errors import UnsupportedRegime
from tmss.evolution import grid_config
from tmss.model import ModelParams, model_from_ratio

phases = st.floats(-math.pi, math.pi)


@st.composite
def models(draw):
    a = draw(st.floats(0.05, 3.0))
    r = draw(st.floats(1.01, 6.0))
    return ModelParams(a * cmath.exp(1j * draw(phases)), r * a * cmath.exp(1j * draw(phases)))


def test_identity_at_zero():
    assert np.allclose(bogoliubov(ModelParams(1, 2), 0.0).M, np.eye(3), atol=1e-15)


def test_cavity_row_at_tpi():
    m = ModelParams(0.4 + 0.3j, 1.1 - 0.2j)
    M = bogoliubov(m, m.T_pi).M
    assert np.allclose(M[0], [-1, 0, 0], atol=1e-12)


def test_quarter_period_row():
    xi1, xi2 = cmath.exp(0.3j), 2 * cmath.exp(-1.1j)
    m = ModelParams(xi1, xi2)
    M = bogoliubov(m, math.pi / 2 / m.theta).M
    s3 = math.sqrt(3)
    assert np.allclose(M[0], [0, -xi2.conjugate() / s3, xi1 / s3], atol=1e-12)


@given(models(), st.floats(0, 20))
@settings(max_examples=200)
def test_metric_preserved(m, t):
    assert bogoliubov(m, t).metric_defect() <= 1e-12 * max(1.0, abs(m.xi2 / m.theta) ** 4)


@given(models(), st.floats(0, 5), st.floats(0, 5))
@settings(max_examples=50)
def test_group_property(m, t1, t2):
    lhs = bogoliubov(m, t1 + t2).M
    rhs = bogoliubov(m, t2).M @ bogoliubov(m, t1).M
    assert np.allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(lhs).max() ** 2))


def test_tpi_map_examples():
    A, B = tpi_map(ModelParams(1.0, 2.0))
    assert A == pytest.approx(5 / 3, abs=1e-12)
    assert B == pytest.approx(4 / 3, abs=1e-12)
    assert A * A - abs(B) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert A == pytest.approx(math.cosh(ModelParams(1.0, 2.0).epsilon), abs=1e-12)


@given(models())
def test_tpi_map_properties(m):
    A, B = tpi_map(m)
    # atanh near 1 amplifies rounding by ~A^2
    assert A == pytest.approx(math.cosh(m.epsilon), rel=1e-14 * A * A + 1e-12)
    assert A * A - abs(B) ** 2 == pytest.approx(1.0, abs=1e-12 * A * A)
    M = bogoliubov(m, m.T_pi).M
    # c2(T) = B c1^+(0) - A c2(0) and c1^+(T) = A c1^+(0) - B* c2(0)
    assert M[1, 2] == pytest.approx(B, abs=1e-10 * A)
    assert M[1, 1] == pytest.approx(-A, abs=1e-10 * A)
    assert M[2, 2] == pytest.approx(A, abs=1e-10 * A)
    assert M[2, 1] == pytest.approx(-B.conjugate(), abs=1e-10 * A)


def test_tmsv_amplitudes_examples():
    t = tmsv_amplitudes(1.5, 10)
    assert t.prefactor == pytest.approx(5 / 13)
    assert t.amplitudes[0] ** 2 == pytest.approx(0.147929, abs=1e-6)
    t2 = tmsv_amplitudes(2.0, 60)
    assert t2.q == pytest.approx(0.8)
    assert 1 - np.sum(np.abs(t2.amplitudes) ** 2) <= 1e-11
    n = np.arange(61)
    assert np.sum(n * np.abs(t2.amplitudes) ** 2) == pytest.approx(16 / 9, abs=1e-8)
    with pytest.raises(UnsupportedRegime):
        tmsv_amplitudes(1.0, 5)


@given(st.floats(1.01, 10.0), st.integers(0, 80))
def test_tmsv_tail_bound(r, nmax):
    t = tmsv_amplitudes(r, nmax)
    assert np.sum(np.abs(t.amplitudes) ** 2) + t.tail == pytest.approx(1.0, abs=1e-9)


def test_vacuum_moments_examples():
    m = ModelParams(1.0, 2.0)
    assert vacuum_moments(m, 0.0) == (0.0, 0.0, 0.0)
    n_cav, _, _ = vacuum_moments(m, math.pi / 2 / m.theta)
    assert n_cav == pytest.approx(1 / 3)
    n_cav, n_1, n_2 = vacuum_moments(m, m.T_pi)
    assert n_cav == pytest.approx(0.0, abs=1e-15)
    assert n_1 == pytest.approx(16 / 9) and n_2 == pytest.approx(16 / 9)
    assert n_1 == pytest.approx(abs(tpi_map(m)[1]) ** 2)


@given(models(), st.floats(0, 10))
def test_vacuum_constant_of_motion(m, t):
    n_cav, n_1, n_2 = vacuum_moments(m, t)
    assert n_2 - n_1 + n_cav == pytest.approx(0.0, abs=1e-12 * max(1.0, n_1))
    c = vacuum_correlations(m, t)
    assert (c["n_cav"], c["n_1"], c["n_2"]) == pytest.approx((n_cav, n_1, n_2), abs=1e-12 * max(1, n_1))


def test_metric_matrix():
    assert np.array_equal(METRIC, np.diag([1.0, 1.0, -1.0]))


def test_evolve_analytic_at_tpi():
    m = model_from_ratio(2.0)
    ts = evolve_analytic(m, grid_config(m.theta, 0.0, t_max=m.T_pi, n_outputs=11), target=(2.0, 0.0))
    last = ts.records[-1]
    assert last.zeta12 <= 1e-10
    assert last.fidelity_tmsv == pytest.approx(1.0, abs=1e-10)
    assert ts.records[0].zeta12 is None
    with pytest.raises(UnsupportedRegime):
        evolve_analytic(m.with_kappa(0.1), grid_config(m.theta))

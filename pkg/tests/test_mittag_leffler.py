"""Mittag-Leffler evaluation against closed forms and a high-precision oracle."""

import math

import numpy as np
import pytest

from fracspec import MLParams, mittag_leffler
from fracspec.fraccalc import ml, recip_gamma

from oracles import ml_reference


def test_exponential_case():
    # E_1(z) = e^z
    assert ml(1.0, 1.0) == pytest.approx(math.e, rel=1e-12, abs=0)


def test_beta_only_term_at_zero():
    # z = 0 leaves only the k = 0 term, 1/Gamma(beta)
    assert ml(0.5, 0.0, 1.5) == pytest.approx(1.0 / math.gamma(1.5), rel=1e-14)


def test_erfc_oracle_point():
    # E_{1/2}(z) = exp(z^2) erfc(-z); erfc from the C library is independent
    # of the series/integral evaluation paths under test
    assert ml(0.5, -1.0) == pytest.approx(math.e * math.erfc(1.0), rel=1e-12)


@pytest.mark.parametrize("x", np.linspace(0.0, 5.0, 21).tolist())
def test_erfc_identity_on_segment(x):
    expected = math.exp(x * x) * math.erfc(x)
    assert ml(0.5, -x) == pytest.approx(expected, rel=1e-11)


def test_exponential_identity_segment():
    zs = np.linspace(-30.0, 30.0, 101)
    worst = max(abs(ml(1.0, z) - math.exp(z)) / math.exp(z) for z in zs)
    assert worst <= 1e-12


@pytest.mark.parametrize(
    "alpha,beta,z",
    [
        # curated so the exact-series reference stays feasible
        # (cancellation size |z|**(1/alpha) <= ~650)
        (0.3, 1.3, -2.0),
        (0.3, 0.4, -5.0),
        (0.5, 1.5, -12.0),
        (0.5, 2.5, -20.0),
        (0.7, 1.7, -25.0),
        (0.7, 2.7, 6.0),
        (0.9, 1.0, -30.0),
        (0.95, 0.4, -25.0),
        (0.96, 2.0, -12.0),
        (0.999, 2.0, -39.0),
        (1.0, 2.0, -25.0),
        (0.6, 1.6, 25.0),
        (0.9, 1.0, 39.0),
        (0.95, 1.0, 45.0),
    ],
)
def test_against_extended_precision_reference(alpha, beta, z):
    assert ml(alpha, z, beta) == pytest.approx(ml_reference(alpha, beta, z), rel=5e-12)


def test_deep_negative_axis_via_independent_erfc():
    # beyond the feasible series range, alpha = 1/2 still has the scaled
    # erfc identity; mpmath's erfc is an independent implementation
    import mpmath

    for z in (-39.0, -45.0, -300.0, -2000.0):
        with mpmath.workdps(60):
            expected = float(mpmath.exp(mpmath.mpf(z) ** 2) * mpmath.erfc(mpmath.mpf(-z)))
        assert ml(0.5, z) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 0.9])
@pytest.mark.parametrize("beta", [1.0, 1.5])
def test_branch_agreement_near_switch(alpha, beta):
    # the algebraic asymptotic (used below -40) and the kernel-integral route
    # (used above) must agree where both are valid
    from fracspec.fraccalc import _algebraic_tail, _ml_negative_robust

    for z in (-41.0, -55.0):
        asym = _algebraic_tail(alpha, beta, z, 1e-12)
        robust = _ml_negative_robust(alpha, beta, z, 1e-12)
        assert asym == pytest.approx(robust, rel=5e-11)


def test_monotone_decreasing_on_negative_axis():
    # E_alpha(-s) strictly decreasing in s >= 0 with values in (0, 1]
    for alpha in (0.3, 0.5, 0.7, 0.9):
        s = np.concatenate([np.linspace(0.0, 30.0, 40), np.geomspace(31.0, 2000.0, 15)])
        vals = np.array([ml(alpha, -si) for si in s])
        assert vals[0] == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.diff(vals) < 0.0)
        assert np.all(vals > 0.0) and np.all(vals <= 1.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        MLParams(0.0, 1.0)
    with pytest.raises(ValueError):
        MLParams(1.2, 1.0)
    with pytest.raises(ValueError):
        MLParams(0.5, -1.0)
    with pytest.raises(ValueError):
        MLParams(0.5, 1.0, tol=1.5)
    with pytest.raises(ValueError):
        mittag_leffler(MLParams(0.5, 1.0), math.inf)


def test_overflow_signalled():
    # z**(1/alpha) far beyond the double range must raise, not return inf
    with pytest.raises(OverflowError):
        ml(0.3, 50.0)
    with pytest.raises(OverflowError):
        ml(0.5, 1.0e6)


def test_recip_gamma_poles_and_reflection():
    assert recip_gamma(0.0) == 0.0
    assert recip_gamma(-3.0) == 0.0
    assert recip_gamma(0.5) == pytest.approx(1.0 / math.gamma(0.5), rel=1e-15)
    # reflection branch: Gamma(-0.5) = -2 sqrt(pi)
    assert recip_gamma(-0.5) == pytest.approx(-1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-13)

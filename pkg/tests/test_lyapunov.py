import math

import numpy as np
import pytest

from cflab.integrator import integrate
from cflab.lyapunov import (
    LyapunovReport,
    check_spectrum_symmetry,
    lyapunov_spectrum,
    mean_winding,
)

TAU = 2 * math.pi


@pytest.fixture(scope="module")
def sin_report(sin_sc):
    return lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 100.0, 0.5, sin_sc.options)


def test_sin_attractor_spectrum(sin_report):
    assert np.allclose(sin_report.exponents, [-TAU, 0.0], atol=1e-2)
    assert sin_report.r_bar == pytest.approx(-TAU, abs=1e-3)
    assert check_spectrum_symmetry(sin_report, 1e-2).passed


def test_sum_equals_n_rbar(sin_report, cot_sc):
    # det V = e^{n r}, so the exponents add up to n * rbar
    assert np.sum(sin_report.exponents) == pytest.approx(sin_report.r_bar, abs=1e-6)
    rep = lyapunov_spectrum(cot_sc.system, np.zeros(4), 100.0, 0.5, cot_sc.options)
    assert np.sum(rep.exponents) == pytest.approx(2 * rep.r_bar, abs=1e-6)


def test_lee_translation_has_zero_spectrum(lee_sc):
    rep = lyapunov_spectrum(lee_sc.system, [0.2, 0.4], 50.0, 0.5, lee_sc.options)
    assert np.allclose(rep.exponents, 0.0, atol=1e-12)
    assert rep.r_bar == 0.0


def test_corrupted_report_fails_symmetry(sin_report):
    bad = LyapunovReport(sin_report.exponents + np.array([0.0, 0.5]), sin_report.r_bar,
                         sin_report.residuals, sin_report.horizon, sin_report.renorm_dt)
    check = check_spectrum_symmetry(bad, 1e-2)
    assert not check.passed
    assert check.residuals[0] == pytest.approx(0.5, abs=1e-2)


def test_renormalisation_interval_does_not_matter(sin_sc):
    a = lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 100.0, 0.5, sin_sc.options)
    b = lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 100.0, 0.25, sin_sc.options)
    assert np.max(np.abs(a.exponents - b.exponents)) <= 2e-3


def test_preconditions(sin_sc):
    with pytest.raises(ValueError):
        lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 10.0, 0.5)
    with pytest.raises(ValueError):
        lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 100.3, 0.5)
    with pytest.raises(ValueError):
        lyapunov_spectrum(sin_sc.system, [0.0, 0.5], 100.0, 0.0)


def test_report_dict(sin_report):
    d = sin_report.to_dict()
    assert set(d) >= {"exponents", "r_bar", "residuals"}
    assert len(d["exponents"]) == 2


def test_mean_winding(sin_sc):
    tr = integrate(sin_sc.system, [0.0, 0.5], 10.0, sin_sc.options)
    assert mean_winding(tr) == pytest.approx(-TAU, abs=1e-9)

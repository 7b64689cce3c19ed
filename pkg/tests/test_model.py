import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from optosim.errors import ValidationError
from optosim.model import (
    TWO_PI,
    PhysicalParams,
    PulseEnvelope,
    coupling_gain,
    drive_amplitude,
    gain_grid,
    integrated_gain,
    paper_preset,
    steps_for_gain,
    thermal_occupation,
)


def test_preset_values(paper):
    assert paper.omega_m == pytest.approx(TWO_PI * 3.7e9)
    assert paper.gamma_a == pytest.approx(TWO_PI * 0.26e9)
    assert paper.gamma_b == pytest.approx(TWO_PI * 37e3)
    assert paper.chi0 == pytest.approx(TWO_PI * 910e3)
    assert paper.Delta == -paper.omega_m
    assert (paper.N_ph, paper.tau, paper.n_b0) == (8.2e6, 0.04e-6, 0.7)


@pytest.mark.parametrize("field,value", [("gamma_a", -1.0), ("gamma_a", 0.0), ("omega_m", 0.0),
                                         ("tau", 0.0), ("n_b0", -0.1), ("gamma_b", -1.0),
                                         ("N_ph", math.nan)])
def test_invalid_params(paper, field, value):
    with pytest.raises(ValidationError):
        paper.replace(**{field: value})


def test_drive_amplitude_midpulse(paper, square):
    expected = math.sqrt(2 * (TWO_PI * 0.26e9) * 8.2e6) / math.sqrt(4e-8)
    assert drive_amplitude(paper, square, paper.tau / 2) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kind", ["square", "gaussian"])
def test_drive_zero_after_pulse(paper, kind):
    env = PulseEnvelope(kind=kind)
    assert drive_amplitude(paper, env, 1.0001 * paper.tau) == 0


def test_drive_zero_photons(paper, square):
    p = paper.replace(N_ph=0.0)
    t = np.linspace(0, p.tau, 11)
    assert np.all(drive_amplitude(p, square, t) == 0)
    assert np.all(coupling_gain(p, square, t) == 0)


@pytest.mark.parametrize("form", ["adiabatic", "literal"])
def test_gain_constant_and_chi_scaling(paper_scaled, square, form):
    t = np.linspace(0.01, 0.99, 7) * paper_scaled.tau
    G = coupling_gain(paper_scaled, square, t, form)
    assert np.allclose(G, G[0], rtol=1e-14) and G[0] > 0
    G2 = coupling_gain(paper_scaled.replace(chi0=2 * paper_scaled.chi0), square, t, form)
    power = 2 if form == "adiabatic" else 1
    assert np.allclose(G2, 2**power * G, rtol=1e-12)


def test_adiabatic_gain_range(paper_scaled, square):
    # the pulse-end gain lies in the range spanned by the figures
    r, _ = integrated_gain(paper_scaled, square, paper_scaled.tau)
    assert 0.6 < r < 1.5


def test_integrated_gain_origin(paper_scaled, square):
    assert integrated_gain(paper_scaled, square, 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("frac", [0.1, 0.5, 1.0])
def test_square_closed_form_matches_quadrature(paper_scaled, square, frac):
    t = frac * paper_scaled.tau
    G = float(coupling_gain(paper_scaled, square, 0.5 * paper_scaled.tau))
    r, N = integrated_gain(paper_scaled, square, t)
    assert r == pytest.approx(G * t, rel=1e-12)
    assert N == pytest.approx(math.expm1(2 * G * t) / (2 * G), rel=1e-12)
    rq, Nq = integrated_gain(paper_scaled, square, t, method="quad")
    assert abs(rq - r) <= 1e-10 * max(1.0, r)
    assert abs(Nq - N) <= 1e-10 * N


def test_zero_gain_normalisation_is_time(paper_scaled, square):
    p = paper_scaled.replace(chi0=0.0)
    r, N = integrated_gain(p, square, 7.5)
    assert r == 0 and N == pytest.approx(7.5, rel=1e-14)


def test_gain_monotone_gaussian(paper_scaled):
    env = PulseEnvelope(kind="gaussian", width=0.15)
    ts = np.linspace(0, paper_scaled.tau, 9)
    rs, Ns = zip(*(integrated_gain(paper_scaled, env, t) for t in ts))
    assert all(np.diff(rs) >= 0) and all(np.diff(Ns) > 0)


def test_gain_grid_consistency(paper_scaled, square):
    dt = 0.01
    n = int(round(paper_scaled.tau / dt))
    g = gain_grid(paper_scaled, square, dt, n)
    k = n // 2
    r, N = integrated_gain(paper_scaled, square, k * dt)
    assert g.r[k] == pytest.approx(r, rel=1e-12)
    # midpoint rule: O(dt^2) from the closed form
    assert g.N[k] == pytest.approx(N, rel=1e-4)
    assert g.N[0] == 0 and np.all(np.diff(g.N) > 0)


def test_steps_for_gain(paper_scaled, square):
    dt = 0.01
    n = int(round(paper_scaled.tau / dt))
    g = gain_grid(paper_scaled, square, dt, n)
    idx = steps_for_gain(g, [0.0, 0.3, 0.6])
    assert idx[0] == 0
    assert np.allclose(g.r[idx], [0.0, 0.3, 0.6], atol=g.r[1])
    with pytest.raises(ValidationError):
        steps_for_gain(g, [5.0])


def test_thermal_occupation_examples(paper):
    assert thermal_occupation(20.0, paper.omega_m) == pytest.approx(112, abs=0.5)
    assert thermal_occupation(0.2, paper.omega_m) == pytest.approx(0.7, abs=0.01)
    assert thermal_occupation(0.0, paper.omega_m) == 0.0


@given(st.sampled_from(["square", "gaussian", "tabulated"]), st.floats(0.05, 0.4),
       st.floats(0.3, 0.7), st.floats(1e-9, 1e3))
def test_envelope_normalised(kind, width, center, tau):
    samples = ()
    if kind == "tabulated":
        samples = tuple(1.0 + np.sin(np.linspace(0, 3, 17)) ** 2)
    env = PulseEnvelope(kind=kind, width=width, center=center, samples=samples)
    f = lambda t: env.value(t, tau) ** 2  # noqa: E731
    pts = np.linspace(0, tau, 17)[1:-1] if kind == "tabulated" else None
    val, _ = integrate.quad(f, 0, tau, points=pts, epsabs=0, epsrel=1e-12, limit=400)
    assert abs(val - 1.0) < 1e-8


rates = st.floats(1e-3, 1e12)


@given(rates, rates, st.floats(0, 1e9), st.floats(0, 1e9), st.floats(-1e12, 1e12),
       st.floats(0, 200), st.floats(1e-12, 1e-3))
def test_scaling_round_trip(wm, ga, gb, chi, delta, n, tau):
    p = PhysicalParams(omega_m=wm, gamma_a=ga, gamma_b=gb, chi0=chi, Delta=delta, n_b0=n,
                       n_th_a=0.0, n_th_b=n, N_ph=1e6, tau=tau)
    q = p.scaled().to_physical()
    for f in ("omega_m", "gamma_a", "gamma_b", "chi0", "Delta", "tau"):
        a, b = getattr(p, f), getattr(q, f)
        assert abs(a - b) <= 1e-12 * abs(a) + 1e-300
    assert p.scaled().gamma_a == 1.0


def test_literal_gain_form_differs(paper_scaled, square):
    a = integrated_gain(paper_scaled, square, paper_scaled.tau, "adiabatic")[0]
    b = integrated_gain(paper_scaled, square, paper_scaled.tau, "literal")[0]
    assert a != b and b > 0


def test_paper_preset_thermal_arguments():
    p = paper_preset(n_th_b=112.0, n_b0=0.5)
    assert p.n_th_b == 112.0 and p.n_b0 == 0.5

"""Per-trajectory positive-P and truncated-Wigner stochastic equations.

This module is the readable reference for a single trajectory; the batch
kernels in :mod:`optosim.kernels` implement the same arithmetic.  All inputs
are in scaled units (:class:`~optosim.model.ScaledParams`).

Complex arrays returned by the drift and noise routines follow state order:
``(alpha, alpha_plus, beta, beta_plus)`` for positive-P and
``(alpha, beta)`` for Wigner.

Normals are consumed in blocks of eight.  Positive-P step: 0-1 nonlinear
pair, 2-3 daggered nonlinear pair, 4-5 cavity bath, 6-7 mechanical bath.
Wigner step: 0-1 cavity input, 2-3 mechanical input.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import DivergenceError, ValidationError
from .model import drive_amplitude, integrated_gain

SCHEMES = ("euler_maruyama", "rotating_euler")
REPRESENTATIONS = ("positive_p", "wigner")
# "printed": mechanical force chi0 |alpha|^2; "weyl": chi0 (|alpha|^2 - 1/2), the
# exact Weyl symbol of a+a, which removes a static displacement chi0 / (2 omega_m)
WIGNER_DRIFTS = ("printed", "weyl")
EM_STIFFNESS_BOUND = 0.1


@dataclass(frozen=True)
class PPState:
    alpha: complex
    alpha_plus: complex
    beta: complex
    beta_plus: complex
    out_raw: complex = 0j
    out_raw_plus: complex = 0j
    t: float = 0.0

    def intracavity(self):
        return np.array([self.alpha, self.alpha_plus, self.beta, self.beta_plus])


@dataclass(frozen=True)
class WignerState:
    alpha: complex
    beta: complex
    out_raw: complex = 0j
    t: float = 0.0

    def intracavity(self):
        return np.array([self.alpha, self.beta])


@dataclass(frozen=True)
class IntegratorConfig:
    """Time grid and stepping options; ``dt`` is in units of 1/gamma_a.

    ``checkpoints`` are step indices at which moments are recorded.
    """

    dt: float
    n_steps: int
    checkpoints: tuple = field(default=())
    divergence_threshold: float = 1e6
    scheme: str = "rotating_euler"
    gain_form: str = "adiabatic"
    wigner_drift: str = "printed"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if int(self.n_steps) < 1:
            raise ValidationError("n_steps must be >= 1")
        if self.wigner_drift not in WIGNER_DRIFTS:
            raise ValidationError(f"unknown wigner_drift {self.wigner_drift!r}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if not self.divergence_threshold > 0:
            raise ValidationError("divergence_threshold must be > 0")
        ck = tuple(int(k) for k in self.checkpoints)
        if list(ck) != sorted(set(ck)):
            raise ValidationError("checkpoints must be strictly increasing")
        if ck and (ck[0] < 0 or ck[-1] > self.n_steps):
            raise ValidationError("checkpoints must lie within [0, n_steps]")
        object.__setattr__(self, "checkpoints", ck)
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def for_times(cls, params, dt, times, **kw):
        """Grid covering the pulse with checkpoints at the nearest steps to ``times``."""
        n_steps = max(1, int(round(params.tau / dt)))
        ck = sorted({int(round(t / dt)) for t in times})
        if ck and (ck[0] < 0 or ck[-1] > n_steps):
            raise ValidationError("checkpoint times must lie within [0, tau]")
        return cls(dt=dt, n_steps=n_steps, checkpoints=tuple(ck), **kw)

    def checkpoint_times(self):
        return np.asarray(self.checkpoints, dtype=float) * self.dt

    def validate(self, params):
        if self.checkpoints and self.checkpoints[-1] * self.dt > params.tau * (1 + 1e-12) + self.dt:
            raise ValidationError("checkpoints extend beyond the pulse")
        if self.scheme == "euler_maruyama":
            fast = max(params.omega_m, abs(params.Delta))
            if self.dt * fast > EM_STIFFNESS_BOUND:
                raise ValidationError(
                    f"dt*max(omega_m,|Delta|) = {self.dt * fast:.3g} exceeds "
                    f"{EM_STIFFNESS_BOUND} for euler_maruyama"
                )


class Noise(NamedTuple):
    """Increments for one step plus the raw cavity-input realisation."""

    dW: np.ndarray
    a_in: complex
    a_in_plus: complex


def _cnormal(x, y, var):
    return math.sqrt(0.5 * var) * (x + 1j * y)


def _normals(rng, n=8, batch=None):
    if batch is None:
        return np.asarray(rng.standard_normal(n), dtype=float)
    return np.asarray(rng.standard_normal((n, batch)), dtype=float)


def pp_drift(s: PPState, t, params, env):
    E = complex(drive_amplitude(params, env, t))
    chi = params.chi0
    q = s.beta + s.beta_plus
    n = s.alpha * s.alpha_plus
    return np.array([
        E - (1j * params.Delta + 1j * chi * q + params.gamma_a) * s.alpha,
        E.conjugate() + (1j * params.Delta + 1j * chi * q - params.gamma_a) * s.alpha_plus,
        -(1j * params.omega_m + params.gamma_b) * s.beta - 1j * chi * n,
        (1j * params.omega_m - params.gamma_b) * s.beta_plus + 1j * chi * n,
    ])


def pp_noise(s: PPState, t, dt, params, rng, batch=None) -> Noise:
    """Positive-P increments for one step of length ``dt``.

    The nonlinear pair shares a principal square root
    ``sqrt(-i chi0 alpha dt / 2)`` so that <dWa dWb> = -i chi0 alpha dt while
    <dWa^2> = <dWb^2> = 0; the daggered pair uses +i chi0 alpha_plus and
    fresh normals.  With ``batch`` set, ``batch`` independent draws for the
    same state are returned along a trailing axis.
    """
    xi = _normals(rng, batch=batch)
    sq = cmath.sqrt(-0.5j * params.chi0 * s.alpha * dt)
    sqp = cmath.sqrt(0.5j * params.chi0 * s.alpha_plus * dt)
    wa = sq * (xi[0] + 1j * xi[1])
    wb = sq * (xi[0] - 1j * xi[1])
    wap = sqp * (xi[2] + 1j * xi[3])
    wbp = sqp * (xi[2] - 1j * xi[3])
    za = _cnormal(xi[4], xi[5], dt)
    zb = _cnormal(xi[6], xi[7], dt)
    a_in = math.sqrt(params.n_th_a) * za
    b_in = math.sqrt(params.n_th_b) * zb
    ka = math.sqrt(2.0 * params.gamma_a)
    kb = math.sqrt(2.0 * params.gamma_b)
    dW = np.array([
        wa + ka * a_in,
        wap + ka * a_in.conjugate(),
        wb + kb * b_in,
        wbp + kb * b_in.conjugate(),
    ])
    return Noise(dW, a_in, a_in.conjugate())


def _weyl_shift(form):
    if form not in WIGNER_DRIFTS:
        raise ValidationError(f"unknown wigner_drift {form!r}")
    return 0.5 if form == "weyl" else 0.0


def wigner_drift(s: WignerState, t, params, env, form="printed"):
    E = complex(drive_amplitude(params, env, t))
    chi = params.chi0
    shift = _weyl_shift(form)
    return np.array([
        E - (1j * params.Delta + 1j * chi * 2.0 * s.beta.real + params.gamma_a) * s.alpha,
        -(1j * params.omega_m + params.gamma_b) * s.beta - 1j * chi * (abs(s.alpha) ** 2 - shift),
    ])


def wigner_noise(t, dt, params, rng, batch=None) -> Noise:
    """Wigner increments with the vacuum half quantum in the bath noise."""
    xi = _normals(rng, batch=batch)
    za = _cnormal(xi[0], xi[1], dt)
    zb = _cnormal(xi[2], xi[3], dt)
    a_in = math.sqrt(params.n_th_a + 0.5) * za
    dW = np.array([
        math.sqrt(2.0 * params.gamma_a) * a_in,
        math.sqrt(2.0 * params.gamma_b) * math.sqrt(params.n_th_b + 0.5) * zb,
    ])
    return Noise(dW, a_in, a_in.conjugate())


def sample_initial(representation, params, rng):
    """Vacuum cavity and thermal mirror with occupation ``n_b0``."""
    xi = _normals(rng)
    if representation == "positive_p":
        b = _cnormal(xi[0], xi[1], params.n_b0)
        return PPState(0j, 0j, b, b.conjugate())
    if representation == "wigner":
        return WignerState(_cnormal(xi[0], xi[1], 0.5), _cnormal(xi[2], xi[3], params.n_b0 + 0.5))
    raise ValidationError(f"unknown representation {representation!r}")


def linear_factors(rate, dt):
    """Propagator pieces for dx = -rate x dt: (exp(-rate dt), phi, h).

    ``phi`` integrates a constant source exactly; ``h`` rotates the
    remaining increment by the full step and damps it by half a step.
    """
    e = cmath.exp(-rate * dt)
    phi = dt if rate == 0 else (1.0 - e) / rate
    h = cmath.exp(complex(-0.5 * rate.real * dt, -rate.imag * dt))
    return e, phi, h


def rotate_to_frame(state, t, omega_m):
    """Frame rotating at the mechanical frequency.

    Returns ``(alpha_r, alpha_r_plus, beta_r, beta_r_plus)``; for a Wigner
    state the plus components are complex conjugates.
    """
    ph = cmath.exp(-1j * omega_m * t)
    if isinstance(state, PPState):
        ap, bp = state.alpha_plus, state.beta_plus
    else:
        ap, bp = state.alpha.conjugate(), state.beta.conjugate()
    return (state.alpha * ph, ap * ph.conjugate(), state.beta * ph.conjugate(), bp * ph)


def accumulate_output(old, new, dt, noise: Noise, params, weight):
    """Add one step of the filtered output integral to ``new``.

    ``weight`` is e^{r} at the step midpoint; the intracavity amplitude
    enters by the trapezoid rule, the input noise with the phase of the
    step start (where it is injected).  Returns the updated state.
    """
    t = old.t
    ka = math.sqrt(2.0 * params.gamma_a)
    ph0 = cmath.exp(-1j * params.omega_m * t)
    ph1 = cmath.exp(-1j * params.omega_m * (t + dt))
    s = weight * (ka * 0.5 * (old.alpha * ph0 + new.alpha * ph1) * dt - noise.a_in * ph0)
    if isinstance(old, PPState):
        sp = weight * (
            ka * 0.5 * (old.alpha_plus * ph0.conjugate() + new.alpha_plus * ph1.conjugate()) * dt
            - noise.a_in_plus * ph0.conjugate()
        )
        return replace(new, out_raw=old.out_raw + s, out_raw_plus=old.out_raw_plus + sp)
    return replace(new, out_raw=old.out_raw + s)


def _check_finite(values, threshold, t):
    for v in values:
        if not (cmath.isfinite(v) and abs(v) <= threshold):
            raise DivergenceError(f"trajectory diverged at t={t:.6g}", time=t)


def step(state, cfg: IntegratorConfig, params, env, rng, weight=None, noise=None):
    """Advance one Ito step, including the output-mode integral.

    ``noise`` may be supplied to replay a realisation; otherwise it is drawn
    from ``rng``.  ``weight`` defaults to e^{r(t + dt/2)}.
    """
    dt, t = cfg.dt, state.t
    tm = t + 0.5 * dt
    if weight is None:
        weight = math.exp(integrated_gain(params, env, min(tm, params.tau), cfg.gain_form)[0])
    E = complex(drive_amplitude(params, env, tm))
    chi = params.chi0
    La = complex(params.gamma_a, params.Delta)
    Lb = complex(params.gamma_b, params.omega_m)

    if isinstance(state, PPState):
        if noise is None:
            noise = pp_noise(state, t, dt, params, rng)
        dWa, dWap, dWb, dWbp = noise.dW
        a, ap, b, bp = state.alpha, state.alpha_plus, state.beta, state.beta_plus
        q = b + bp
        fa = -1j * chi * q * a
        fap = 1j * chi * q * ap
        fb = -1j * chi * a * ap
        fbp = -fb
        if cfg.scheme == "rotating_euler":
            ea, pa, ha = linear_factors(La, dt)
            eap, pap, hap = linear_factors(La.conjugate(), dt)
            eb, _, hb = linear_factors(Lb, dt)
            ebp, _, hbp = linear_factors(Lb.conjugate(), dt)
            a1 = ea * a + pa * E + ha * (fa * dt + dWa)
            ap1 = eap * ap + pap * E.conjugate() + hap * (fap * dt + dWap)
            b1 = eb * b + hb * (fb * dt + dWb)
            bp1 = ebp * bp + hbp * (fbp * dt + dWbp)
        else:
            a1 = a + (E - La * a + fa) * dt + dWa
            ap1 = ap + (E.conjugate() - La.conjugate() * ap + fap) * dt + dWap
            b1 = b + (-Lb * b + fb) * dt + dWb
            bp1 = bp + (-Lb.conjugate() * bp + fbp) * dt + dWbp
        new = replace(state, alpha=a1, alpha_plus=ap1, beta=b1, beta_plus=bp1, t=t + dt)
        _check_finite((a1, ap1, b1, bp1), cfg.divergence_threshold, t + dt)
    else:
        if noise is None:
            noise = wigner_noise(t, dt, params, rng)
        dWa, dWb = noise.dW
        a, b = state.alpha, state.beta
        fa = -1j * chi * 2.0 * b.real * a
        fb = -1j * chi * (abs(a) ** 2 - _weyl_shift(cfg.wigner_drift))
        if cfg.scheme == "rotating_euler":
            ea, pa, ha = linear_factors(La, dt)
            eb, _, hb = linear_factors(Lb, dt)
            a1 = ea * a + pa * E + ha * (fa * dt + dWa)
            b1 = eb * b + hb * (fb * dt + dWb)
        else:
            a1 = a + (E - La * a + fa) * dt + dWa
            b1 = b + (-Lb * b + fb) * dt + dWb
        new = replace(state, alpha=a1, beta=b1, t=t + dt)
        _check_finite((a1, b1), cfg.divergence_threshold, t + dt)
    return accumulate_output(state, new, dt, noise, params, weight)

"""Physical parameters, pulse envelopes and the optomechanical gain functions.

Rates are angular (rad/s) and times are seconds in :class:`PhysicalParams`.
Integration happens in :class:`ScaledParams`, where every rate is divided by
the cavity decay rate and time is measured in units of ``1/gamma_a``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ValidationError

HBAR = 1.05457182e-34  # J s
K_B = 1.38064900e-23  # J / K
TWO_PI = 2.0 * math.pi

GAIN_FORMS = ("adiabatic", "literal")


def _check_params(p, *, require_positive_tau=True):
    if not p.gamma_a > 0:
        raise ValidationError(f"gamma_a must be > 0, got {p.gamma_a!r}")
    if not p.omega_m > 0:
        raise ValidationError(f"omega_m must be > 0, got {p.omega_m!r}")
    for name in ("gamma_b", "chi0", "n_b0", "n_th_a", "n_th_b", "N_ph"):
        v = getattr(p, name)
        if not (np.isfinite(v) and v >= 0):
            raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
    if not np.isfinite(p.Delta):
        raise ValidationError("Delta must be finite")
    if require_positive_tau and not p.tau > 0:
        raise ValidationError(f"tau must be > 0, got {p.tau!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Model parameters in SI units (angular rates)."""

    omega_m: float
    gamma_a: float
    gamma_b: float
    chi0: float
    Delta: float
    n_b0: float
    n_th_a: float
    n_th_b: float
    N_ph: float
    tau: float

    def __post_init__(self):
        _check_params(self)

    def scaled(self) -> "ScaledParams":
        u = self.gamma_a
        return ScaledParams(
            omega_m=self.omega_m / u,
            gamma_a=1.0,
            gamma_b=self.gamma_b / u,
            chi0=self.chi0 / u,
            Delta=self.Delta / u,
            n_b0=self.n_b0,
            n_th_a=self.n_th_a,
            n_th_b=self.n_th_b,
            N_ph=self.N_ph,
            tau=self.tau * u,
            rate_unit=u,
        )

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless parameters; ``rate_unit`` is the SI rate used for scaling.

    ``gamma_a`` is 1 for anything produced by :meth:`PhysicalParams.scaled`,
    but low-level routines read it from the record so that limiting cases
    (e.g. an undamped cavity) can be constructed directly.
    """

    omega_m: float
    gamma_a: float
    gamma_b: float
    chi0: float
    Delta: float
    n_b0: float
    n_th_a: float
    n_th_b: float
    N_ph: float
    tau: float
    rate_unit: float = 1.0

    def to_physical(self) -> PhysicalParams:
        u = self.rate_unit
        return PhysicalParams(
            omega_m=self.omega_m * u,
            gamma_a=self.gamma_a * u,
            gamma_b=self.gamma_b * u,
            chi0=self.chi0 * u,
            Delta=self.Delta * u,
            n_b0=self.n_b0,
            n_th_a=self.n_th_a,
            n_th_b=self.n_th_b,
            N_ph=self.N_ph,
            tau=self.tau / u,
        )

    def replace(self, **changes) -> "ScaledParams":
        return dataclasses.replace(self, **changes)


def paper_preset(n_th_b=0.7, n_b0=0.7) -> PhysicalParams:
    """Si optomechanical-crystal parameters with a blue-detuned square pulse."""
    omega_m = TWO_PI * 3.7e9
    return PhysicalParams(
        omega_m=omega_m,
        gamma_a=TWO_PI * 0.26e9,
        gamma_b=TWO_PI * 37e3,
        chi0=TWO_PI * 910e3,
        Delta=-omega_m,
        n_b0=n_b0,
        n_th_a=0.0,
        n_th_b=n_th_b,
        N_ph=8.2e6,
        tau=0.04e-6,
    )


@dataclass(frozen=True)
class PulseEnvelope:
    """Pulse shape on ``[0, tau]``, normalised so that the integral of |eps|^2 is 1.

    ``center`` and ``width`` of the gaussian kind are fractions of ``tau``.
    ``samples`` of the tabulated kind sit on a uniform grid spanning the
    pulse and are linearly interpolated; their overall scale is irrelevant.
    """

    kind: str = "square"
    center: float = 0.5
    width: float = 0.2
    samples: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("square", "gaussian", "tabulated"):
            raise ValidationError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ValidationError("gaussian width must be > 0")
        if self.kind == "tabulated":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2 or not np.all(np.isfinite(s)):
                raise ValidationError("tabulated envelope needs >= 2 finite samples")
            if not np.any(s != 0):
                raise ValidationError("tabulated envelope is identically zero")
            object.__setattr__(self, "samples", tuple(float(x) for x in s))

    def _norm2(self, tau):
        if self.kind == "square":
            return tau
        if self.kind == "gaussian":
            c, w = self.center * tau, self.width * tau
            return 0.5 * w * math.sqrt(math.pi) * (
                special.erf((tau - c) / w) + special.erf(c / w)
            )
        s = np.asarray(self.samples)
        h = tau / (s.size - 1)
        # exact integral of the squared piecewise-linear interpolant
        return float(h * np.sum(s[:-1] ** 2 + s[:-1] * s[1:] + s[1:] ** 2) / 3.0)

    def value(self, t, tau):
        """eps(t); zero outside ``[0, tau]``."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= tau)
        if self.kind == "square":
            raw = np.ones_like(t)
        elif self.kind == "gaussian":
            c, w = self.center * tau, self.width * tau
            raw = np.exp(-((t - c) ** 2) / (2.0 * w * w))
        else:
            s = np.asarray(self.samples)
            grid = np.linspace(0.0, tau, s.size)
            raw = np.interp(t, grid, s)
        out = np.where(inside, raw / math.sqrt(self._norm2(tau)), 0.0)
        return out if out.ndim else float(out)


def drive_amplitude(params, env: PulseEnvelope, t):
    """E(t) = sqrt(2 gamma_a N_ph) eps(t), in the unit system of ``params``."""
    e0 = math.sqrt(2.0 * params.gamma_a * params.N_ph)
    return e0 * env.value(t, params.tau)


def coupling_gain(params, env: PulseEnvelope, t, form="adiabatic"):
    """Effective optomechanical gain G(t).

    ``adiabatic`` is chi0^2 E^2 / (gamma_a (Delta^2 + gamma_a^2)), the Stokes
    amplification rate of the mechanical mode.  ``literal`` takes the
    square root of chi0^2 E / (gamma_a (Delta^2 + gamma_a^2)) evaluated in
    units of gamma_a and converts the result back.
    """
    u = params.gamma_a
    E = drive_amplitude(params, env, t)
    if form == "adiabatic":
        return params.chi0**2 * E**2 / (u * (params.Delta**2 + u**2))
    if form == "literal":
        x, e, d = params.chi0 / u, np.asarray(E) / u, params.Delta / u
        return u * np.sqrt(x * x * e / (d * d + 1.0))
    raise ValidationError(f"unknown gain form {form!r}")


def _r_quad(params, env, t, form):
    val, _ = integrate.quad(
        lambda s: coupling_gain(params, env, s, form), 0.0, t,
        epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return val


def integrated_gain(params, env: PulseEnvelope, t, form="adiabatic", method="auto"):
    """Return ``(r(t), N(t))`` with r the integrated gain and N = int_0^t e^{2r}.

    ``method="auto"`` uses the closed form for a square pulse and adaptive
    quadrature otherwise; ``method="quad"`` forces quadrature.
    """
    t = float(t)
    if t < 0:
        raise ValueError("t must be >= 0")
    t = min(t, params.tau)
    if env.kind == "square" and method == "auto":
        G = float(coupling_gain(params, env, 0.5 * params.tau, form))
        r = G * t
        N = t if G == 0 else math.expm1(2.0 * G * t) / (2.0 * G)
        return r, N
    if t == 0:
        return 0.0, 0.0
    r = _r_quad(params, env, t, form)
    N, _ = integrate.quad(
        lambda s: math.exp(2.0 * _r_quad(params, env, s, form)), 0.0, t,
        epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return r, N


@dataclass(frozen=True)
class GainGrid:
    """Per-step factors for a uniform grid ``t_n = n dt``.

    ``drive`` and ``weight`` are evaluated at step midpoints; ``N`` is the
    running midpoint-rule sum of ``weight**2 dt`` so that it matches the
    discrete output-mode accumulation exactly.  ``r`` is at the nodes.
    """

    dt: float
    drive: np.ndarray
    weight: np.ndarray
    r: np.ndarray
    N: np.ndarray


def gain_grid(params, env, dt, n_steps, form="adiabatic") -> GainGrid:
    n_steps = int(n_steps)
    t_half = 0.5 * dt * np.arange(2 * n_steps + 1)
    G = np.asarray(coupling_gain(params, env, t_half, form), dtype=float)
    if env.kind == "square":
        r_half = float(coupling_gain(params, env, 0.5 * params.tau, form)) * np.minimum(
            t_half, params.tau
        )
    else:
        r_half = integrate.cumulative_simpson(G, x=t_half, initial=0.0)
    r_nodes = r_half[0::2]
    r_mid = r_half[1::2]
    drive = np.asarray(drive_amplitude(params, env, t_half[1::2]), dtype=complex)
    weight = np.exp(r_mid)
    N = np.concatenate([[0.0], np.cumsum(weight**2 * dt)])
    return GainGrid(dt=dt, drive=drive, weight=weight, r=r_nodes, N=N)


def thermal_occupation(T, omega):
    """Bose-Einstein occupation of a mode at angular frequency ``omega``."""
    if T < 0 or omega <= 0:
        raise ValueError("need T >= 0 and omega > 0")
    if T == 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (K_B * T))


def optical_reference_phase(params):
    """Phase of the steady-state intracavity field E/(gamma_a + i Delta) for real E."""
    return -math.atan2(params.Delta, params.gamma_a)


def steps_for_gain(grid: GainGrid, r_values):
    """Grid indices whose node gain ``r`` is closest to each requested value."""
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    if r_values.size and (r_values.min() < 0 or r_values.max() > grid.r[-1] + 1e-12):
        raise ValidationError(
            f"requested r outside the reachable range [0, {grid.r[-1]:.4g}]"
        )
    idx = np.searchsorted(grid.r, r_values)
    idx = np.clip(idx, 1, grid.r.size - 1)
    left = grid.r[idx - 1]
    right = grid.r[idx]
    idx = np.where(np.abs(r_values - left) <= np.abs(right - r_values), idx - 1, idx)
    return sorted({int(i) for i in idx})

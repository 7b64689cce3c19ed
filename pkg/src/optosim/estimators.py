"""Quadrature covariances and entanglement / EPR-steering witnesses.

Quadratures use the hbar = 1/2 convention, ``X = (e^{-i th} a + e^{i th} a+)/2``,
so the vacuum variance is 1/4.  Covariances are ordered
``(X_m, P_m, X_c, P_c)``: mechanics first, then the output pulse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ensemble import EnsembleResult, MomentAccumulator, batch_standard_error
from .errors import (
    DegenerateGain,
    NormalizationNonpositive,
    OrderingTagMissing,
    ZeroConditioningVariance,
)
from .kernels import PAIRS, SET_SIZE
from .model import optical_reference_phase
from .sde import REPRESENTATIONS

VACUUM = 0.25
_PAIR_INDEX = {p: 4 + m for m, p in enumerate(PAIRS)}
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class ModeMoments:
    """First and second raw moments of ``(b, b+, c, c+)``.

    ``b`` is the mechanical variable and ``c`` the optical one (the output
    pulse amplitude or the intracavity field).  ``vacuum_output`` marks a
    checkpoint with zero output-mode normalisation, where the optical mode
    is replaced by vacuum.
    """

    mean: np.ndarray
    second: np.ndarray
    representation: str | None
    vacuum_output: bool = False


def _unpack(vec14):
    mean = np.array(vec14[:4], dtype=complex)
    second = np.empty((4, 4), dtype=complex)
    for (i, j), m in _PAIR_INDEX.items():
        second[i, j] = second[j, i] = vec14[m]
    return mean, second


def checkpoint_moments(acc: MomentAccumulator, k, N_k, representation) -> ModeMoments:
    """Output-mode moments at checkpoint ``k``, normalised by ``sqrt(N_k)``."""
    mean, second = _unpack(acc.means()[k, :SET_SIZE])
    if N_k > 0:
        s = np.array([1.0, 1.0, 1.0 / math.sqrt(N_k), 1.0 / math.sqrt(N_k)])
        return ModeMoments(mean * s, second * np.outer(s, s), representation)
    return ModeMoments(mean, second, representation, vacuum_output=True)


def intracavity_moment_set(acc: MomentAccumulator, k, representation) -> ModeMoments:
    """Moments of ``(beta, beta+, alpha, alpha+)`` at checkpoint ``k``."""
    mean, second = _unpack(acc.means()[k, SET_SIZE:])
    perm = [2, 3, 0, 1]
    return ModeMoments(mean[perm], second[np.ix_(perm, perm)], representation)


INTRACAVITY_MOMENTS = ("a", "b", "ada", "bdb", "aa", "bb", "ab", "abd")


def intracavity_moments(acc: MomentAccumulator, k, representation) -> dict:
    """Normally ordered intracavity moments at checkpoint ``k``.

    Keys: ``a``, ``b``, ``ada`` (a+a), ``bdb``, ``aa``, ``bb``, ``ab``, ``abd`` (a b+).
    Wigner moments are symmetrically ordered, so the number operators lose 1/2.
    """
    _check_tag(representation)
    mean, M = _unpack(acc.means()[k, SET_SIZE:])  # (alpha, alpha+, beta, beta+)
    shift = 0.5 if representation == "wigner" else 0.0
    return {
        "a": mean[0], "b": mean[2],
        "ada": M[0, 1] - shift, "bdb": M[2, 3] - shift,
        "aa": M[0, 0], "bb": M[2, 2], "ab": M[0, 2], "abd": M[0, 3],
    }


@dataclass(frozen=True)
class QuadCovariance:
    matrix: np.ndarray  # real symmetric 4x4 over (X_m, P_m, X_c, P_c)
    mean: np.ndarray
    representation: str
    imag: np.ndarray  # imaginary parts before taking the real part (diagnostic)
    theta: float = 0.0
    phi: float = math.pi / 2

    def __post_init__(self):
        for a in (self.matrix, self.mean, self.imag):
            a.setflags(write=False)


def _check_tag(representation):
    if representation is None:
        raise OrderingTagMissing("moments carry no representation tag")
    if representation not in REPRESENTATIONS:
        raise OrderingTagMissing(f"unknown representation {representation!r}")


def _rows(angle):
    return np.array([np.exp(-1j * angle), np.exp(1j * angle)]) / 2


def quad_covariance(moments: ModeMoments, representation=None, theta=0.0, phi=math.pi / 2,
                    optical_reference=0.0) -> QuadCovariance:
    """Quantum-ordered covariance of ``(X_m^phi, P_m^phi, X_c^theta, P_c^theta)``.

    ``theta`` is measured from ``optical_reference``; ``P`` is the quadrature
    at angle + pi/2.  Positive-P variances gain 1/4 on the same-mode diagonal;
    Wigner moments are used as they are.
    """
    rep = representation or moments.representation
    _check_tag(rep)
    th = theta + optical_reference
    T = np.zeros((4, 4), dtype=complex)
    T[0, 0:2] = _rows(phi)
    T[1, 0:2] = _rows(phi + math.pi / 2)
    T[2, 2:4] = _rows(th)
    T[3, 2:4] = _rows(th + math.pi / 2)
    K = moments.second - np.outer(moments.mean, moments.mean)
    C = T @ K @ T.T
    C = 0.5 * (C + C.T)
    cov = C.real.copy()
    if rep == "positive_p":
        cov[np.diag_indices(4)] += VACUUM
    mean = (T @ moments.mean).real
    imag = C.imag.copy()
    if moments.vacuum_output:
        cov[2:, :] = 0.0
        cov[:, 2:] = 0.0
        cov[2, 2] = cov[3, 3] = VACUUM
        mean[2:] = 0.0
        imag[2:, :] = 0.0
        imag[:, 2:] = 0.0
    return QuadCovariance(cov, mean, rep, imag, theta, phi)


# witnesses ---------------------------------------------------------------


class Entanglement(NamedTuple):
    value: float
    g: float
    g_p: float  # gain actually used on the P branch (-g or +g)
    degenerate: bool


def _ent_value(V, gx, gp, normalization):
    num = (V[0, 0] + 2 * gx * V[0, 2] + gx * gx * V[2, 2]
           + V[1, 1] + 2 * gp * V[1, 3] + gp * gp * V[3, 3])
    if normalization == "absolute":
        den = 0.5 * (1.0 + abs(gx * gp))
    else:
        den = 0.5 * (1.0 + gx * gp)
        if den <= 0:
            raise NormalizationNonpositive(f"1 + g_x g_p = {2 * den:g} <= 0")
    return num / den


def entanglement_at(cov: QuadCovariance, gx, gp, normalization="absolute"):
    """Entanglement witness at fixed gains."""
    return float(_ent_value(cov.matrix, gx, gp, normalization))


def optimal_gain(cov: QuadCovariance):
    """Closed-form optimal weighting ``g``; ``None`` when degenerate."""
    V = cov.matrix
    c = 2.0 * V[0, 2]
    a = -c
    b = 2.0 * (V[2, 2] - V[0, 0])
    if abs(a) <= _GAIN_EPS * max(1.0, abs(b)):
        return None
    disc = b * b - 4 * a * c
    assert disc >= 0, "discriminant b^2 + 4a^2 cannot be negative"
    return (-b + math.sqrt(disc)) / (2 * a)


def entanglement_witness(cov: QuadCovariance, normalization="absolute", strict=False):
    """Optimised entanglement witness ``(value, g, g_p, degenerate)``.

    The witness is evaluated at ``g_x = g, g_p = -g`` and at ``g_p = +g``;
    the smaller value is kept and ``g_p`` reports the branch.  With
    ``normalization="absolute"`` the denominator is ``(1 + |g_x g_p|)/2``,
    for which ``g`` is the exact minimiser.  ``"literal"`` uses
    ``(1 + g_x g_p)/2`` and raises :class:`NormalizationNonpositive` when no
    branch has a positive denominator.
    """
    g = optimal_gain(cov)
    if g is None:
        if strict:
            raise DegenerateGain("cross covariance <X_m, X_c> vanishes")
        return Entanglement(entanglement_at(cov, 0.0, 0.0), 0.0, 0.0, True)
    best = None
    err = None
    for gp in (-g, g):
        try:
            v = _ent_value(cov.matrix, g, gp, normalization)
        except NormalizationNonpositive as e:
            err = e
            continue
        if best is None or v < best[0]:
            best = (v, gp)
    if best is None:
        raise err
    return Entanglement(float(best[0]), float(g), float(best[1]), False)


class Steering(NamedTuple):
    value: float
    g_x: float
    g_p: float


def _steer(V, i, j):
    # infer quadratures (i, i+1) from measurements on (j, j+1)
    vx, vp = V[j, j], V[j + 1, j + 1]
    if not (vx > 0 and vp > 0):
        raise ZeroConditioningVariance("conditioning quadrature variance is not positive")
    gx = -V[i, j] / vx
    gp = -V[i + 1, j + 1] / vp
    inf_x = V[i, i] + 2 * gx * V[i, j] + gx * gx * vx
    inf_p = V[i + 1, i + 1] + 2 * gp * V[i + 1, j + 1] + gp * gp * vp
    prod = inf_x * inf_p
    value = 4.0 * math.sqrt(prod) if prod >= 0 else math.nan
    return Steering(value, float(gx), float(gp))


def steer_m_given_c(cov: QuadCovariance) -> Steering:
    """Inferred mechanical uncertainty product given optical measurements."""
    return _steer(cov.matrix, 0, 2)


def steer_c_given_m(cov: QuadCovariance) -> Steering:
    """Inferred optical uncertainty product given mechanical measurements."""
    return _steer(cov.matrix, 2, 0)


# reports ------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessReport:
    r: float
    t: float  # seconds
    t_scaled: float
    representation: str
    delta_ent: float
    delta_ent_err: float
    g_ent: float
    gp_ent: float
    E_m_c: float
    E_m_c_err: float
    gx_mc: float
    gp_mc: float
    E_c_m: float
    E_c_m_err: float
    gx_cm: float
    gp_cm: float
    delta_ent_g0: float
    delta_ent_g0_err: float
    degenerate_gain: bool = False

    @property
    def entangled(self):
        return self.delta_ent + 2 * self.delta_ent_err < 1

    @property
    def steers_m(self):
        """Optical pulse steers the mechanics (``E_m|c`` below 1 beyond 2 sigma)."""
        return self.E_m_c + 2 * self.E_m_c_err < 1

    @property
    def steers_c(self):
        return self.E_c_m + 2 * self.E_c_m_err < 1


def _safe_steer(fn, cov):
    # a small batch can sample a non-positive positive-P variance; report nan
    try:
        return fn(cov)
    except ZeroConditioningVariance:
        return Steering(math.nan, math.nan, math.nan)


def _witnesses(cov, normalization):
    ent = entanglement_witness(cov, normalization)
    return (ent, _safe_steer(steer_m_given_c, cov), _safe_steer(steer_c_given_m, cov),
            entanglement_at(cov, 0.0, 0.0))


def witness_vs_r(result: EnsembleResult, params=None, env=None, theta=0.0, phi=math.pi / 2,
                 optical_reference=None, normalization="absolute"):
    """One :class:`WitnessReport` per checkpoint of ``result``.

    Values come from the pooled moments; errors from evaluating every
    witness per batch.  A steering witness whose conditioning variance is
    not positive is reported as nan instead of raising.  ``params`` and ``env`` default to those stored in the
    result (``env`` is accepted for call-site symmetry; ``r`` is already
    tabulated per checkpoint).
    """
    p = result.params if params is None else params
    if hasattr(p, "scaled"):
        p = p.scaled()
    ref = optical_reference_phase(p) if optical_reference is None else optical_reference
    rep = result.representation
    total = result.total
    reports = []
    for k in range(result.checkpoint_steps.size):
        N_k = float(result.N[k])

        def ev(acc):
            cov = quad_covariance(checkpoint_moments(acc, k, N_k, rep), rep, theta, phi, ref)
            return _witnesses(cov, normalization)

        ent, smc, scm, g0 = ev(total)
        per = [ev(b) for b in result.batches]
        err = batch_standard_error(
            [[e.value, m.value, c.value, z] for e, m, c, z in per]
        )
        t_s = float(result.times[k])
        reports.append(WitnessReport(
            r=float(result.r[k]), t=t_s / p.rate_unit, t_scaled=t_s, representation=rep,
            delta_ent=ent.value, delta_ent_err=float(err[0]), g_ent=ent.g, gp_ent=ent.g_p,
            E_m_c=smc.value, E_m_c_err=float(err[1]), gx_mc=smc.g_x, gp_mc=smc.g_p,
            E_c_m=scm.value, E_c_m_err=float(err[2]), gx_cm=scm.g_x, gp_cm=scm.g_p,
            delta_ent_g0=g0, delta_ent_g0_err=float(err[3]), degenerate_gain=ent.degenerate,
        ))
    return reports

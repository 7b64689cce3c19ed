"""Dense master-equation reference on a truncated two-mode Fock space.

In the frame rotating at the laser frequency the Hamiltonian reads

    H = Delta a+a + omega_m b+b + chi0 a+a (b + b+) + i E(t) (a+ - a)

and each mode couples to a thermal bath at amplitude rate ``gamma``.  The
density matrix is stored as a ``(d, d)`` array with ``d = dim_a * dim_b``
and basis index ``i_a * dim_b + i_b``.  The Liouvillian is applied on the
fly with sparse operators, and time stepping is classic RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import StepSizeError, TruncationError, ValidationError
from .model import PhysicalParams, drive_amplitude

TRUNCATION_TOL = 1e-6
TRACE_TOL = 1e-6


@dataclass(frozen=True)
class FockConfig:
    dim_a: int
    dim_b: int
    dt_me: float = 2e-3
    t_final: float = 1.0

    def __post_init__(self):
        if self.dim_a < 2 or self.dim_b < 2:
            raise ValidationError("Fock dimensions must be >= 2")
        if not self.dt_me > 0 or self.t_final < 0:
            raise ValidationError("need dt_me > 0 and t_final >= 0")


@dataclass
class DensityState:
    rho: np.ndarray
    dim_a: int
    dim_b: int
    t: float = 0.0

    def trace(self):
        return np.trace(self.rho)

    def check(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
        """Return a list of violated invariants (empty when valid)."""
        bad = []
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > herm_tol:
            bad.append(f"hermiticity {herm:.2e}")
        tr = abs(self.trace() - 1.0)
        if tr > trace_tol:
            bad.append(f"trace {tr:.2e}")
        ev = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min()
        if ev < -eig_tol:
            bad.append(f"eigenvalue {ev:.2e}")
        return bad


def destroy(n):
    return sparse.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr")


class Operators:
    """Sparse two-mode operators for given truncation dimensions."""

    def __init__(self, dim_a, dim_b):
        self.dim_a, self.dim_b = dim_a, dim_b
        ia = sparse.identity(dim_a, format="csr")
        ib = sparse.identity(dim_b, format="csr")
        self.a = sparse.kron(destroy(dim_a), ib, format="csr")
        self.b = sparse.kron(ia, destroy(dim_b), format="csr")
        self.ad = self.a.conj().T.tocsr()
        self.bd = self.b.conj().T.tocsr()
        self.na = (self.ad @ self.a).tocsr()
        self.nb = (self.bd @ self.b).tocsr()


def _scaled(params):
    return params.scaled() if isinstance(params, PhysicalParams) else params


class Liouvillian:
    """``drho/dt`` for fixed parameters; the drive enters through ``E(t)``."""

    def __init__(self, ops: Operators, params, env):
        p = _scaled(params)
        self.ops, self.p, self.env = ops, p, env
        o = ops
        H0 = p.Delta * o.na + p.omega_m * o.nb + p.chi0 * (o.na @ (o.b + o.bd))
        # anti-Hermitian part of the effective Hamiltonian from the dissipators
        loss = (p.gamma_a * ((p.n_th_a + 1) * o.na + p.n_th_a * (o.a @ o.ad))
                + p.gamma_b * ((p.n_th_b + 1) * o.nb + p.n_th_b * (o.b @ o.bd)))
        self.H0eff = (H0 - 1j * loss).tocsr()
        self.H1 = (1j * (o.ad - o.a)).tocsr()
        self.jumps = []
        for rate, J in ((2 * p.gamma_a * (p.n_th_a + 1), o.a), (2 * p.gamma_a * p.n_th_a, o.ad),
                        (2 * p.gamma_b * (p.n_th_b + 1), o.b), (2 * p.gamma_b * p.n_th_b, o.bd)):
            if rate > 0:
                self.jumps.append((rate, J))

    def drive(self, t):
        return float(np.real(drive_amplitude(self.p, self.env, t)))

    def __call__(self, rho, t):
        E = self.drive(t)
        Heff = self.H0eff + E * self.H1 if E != 0 else self.H0eff
        X = Heff @ rho
        out = -1j * (X - (Heff @ rho.conj().T).conj().T)
        for rate, J in self.jumps:
            out += rate * (J @ (J @ rho.conj().T).conj().T)
        return out


def liouvillian_apply(rho: DensityState, t, params, env):
    """Right-hand side of the master equation at time ``t``."""
    ops = Operators(rho.dim_a, rho.dim_b)
    return Liouvillian(ops, params, env)(rho.rho, t)


def thermal_state(dim, n):
    if n == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        x = n / (n + 1.0)
        p = x ** np.arange(dim)
        p /= p.sum()
    return np.diag(p).astype(complex)


def initial_state(fc: FockConfig, n_b0) -> DensityState:
    """Vacuum cavity times a truncated, renormalised thermal mirror."""
    rho_a = thermal_state(fc.dim_a, 0.0)
    rho_b = thermal_state(fc.dim_b, n_b0)
    return DensityState(np.kron(rho_a, rho_b), fc.dim_a, fc.dim_b, 0.0)


ME_MOMENTS = ("a", "b", "ada", "bdb", "aa", "bb", "ab", "abd")


@dataclass(frozen=True)
class MEResult:
    times: np.ndarray
    moments: dict  # name -> complex array over checkpoints (normally ordered)
    covariance: np.ndarray  # (n_ck, 4, 4) over (X_b, P_b, X_a, P_a)
    top_population: np.ndarray  # (n_ck, 2) populations of the top Fock levels
    final: DensityState


def expectations(rho, ops: Operators):
    o = ops
    ev = lambda A: np.sum((A @ rho).diagonal())  # noqa: E731
    return {
        "a": ev(o.a), "b": ev(o.b), "ada": ev(o.na), "bdb": ev(o.nb),
        "aa": ev(o.a @ o.a), "bb": ev(o.b @ o.b), "ab": ev(o.a @ o.b), "abd": ev(o.a @ o.bd),
    }


def quadrature_covariance(rho, ops: Operators, theta=0.0, phi=0.0):
    """Symmetrised covariance of ``(X_b^phi, P_b^phi, X_a^theta, P_a^theta)``."""
    o = ops
    qs = []
    for op, ang in ((o.b, phi), (o.a, theta)):
        for s in (ang, ang + math.pi / 2):
            e = np.exp(-1j * s)
            qs.append((e * op + np.conj(e) * op.conj().T) / 2)
    mean = np.array([np.sum((q @ rho).diagonal()).real for q in qs])
    C = np.empty((4, 4))
    for i, qi in enumerate(qs):
        for j, qj in enumerate(qs):
            C[i, j] = 0.5 * np.sum(((qi @ qj + qj @ qi) @ rho).diagonal()).real - mean[i] * mean[j]
    return C


def top_populations(rho, fc: FockConfig):
    p = np.real(np.diag(rho)).reshape(fc.dim_a, fc.dim_b)
    return p[-1, :].sum(), p[:, -1].sum()


def evolve_me(rho0: DensityState, fc: FockConfig, params, env, checkpoints=None,
              check_truncation=True) -> MEResult:
    """RK4 evolution to ``fc.t_final`` with moment extraction at ``checkpoints``.

    ``checkpoints`` are times (scaled units); by default only ``t_final``.
    Raises :class:`TruncationError` if a top Fock level holds more than
    1e-6 population at a checkpoint, and :class:`StepSizeError` if the state
    stops being finite with unit trace and nonnegative populations.
    """
    ops = Operators(fc.dim_a, fc.dim_b)
    L = Liouvillian(ops, params, env)
    n_steps = int(round(fc.t_final / fc.dt_me))
    h = fc.t_final / n_steps if n_steps else 0.0
    times = np.array([fc.t_final] if checkpoints is None else sorted(checkpoints), dtype=float)
    ck_steps = [int(round(t / h)) if h else 0 for t in times]
    if any(s < 0 or s > n_steps for s in ck_steps):
        raise ValidationError("checkpoints must lie within [0, t_final]")
    rho = np.array(rho0.rho, dtype=complex)
    t = rho0.t
    records = {k: [] for k in ME_MOMENTS}
    covs, tops = [], []
    want = iter(ck_steps)
    nxt = next(want, None)

    def record():
        # RK4 keeps the trace exactly, so an unstable step shows up as overflow
        if not np.all(np.isfinite(rho)) or not abs(np.trace(rho) - 1.0) <= TRACE_TOL:
            raise StepSizeError(f"state is not a unit-trace matrix at t={t:.4g}; reduce dt_me")
        if np.max(np.abs(np.diag(rho).imag)) > TRACE_TOL or np.real(np.diag(rho)).min() < -TRACE_TOL:
            raise StepSizeError(f"populations left [0, 1] at t={t:.4g}; reduce dt_me")
        top = top_populations(rho, fc)
        if check_truncation and max(top) > TRUNCATION_TOL:
            raise TruncationError(
                f"top Fock level population {max(top):.2e} exceeds {TRUNCATION_TOL:g} at t={t:.4g}"
            )
        for k, v in expectations(rho, ops).items():
            records[k].append(v)
        covs.append(quadrature_covariance(rho, ops))
        tops.append(top)

    for n in range(n_steps + 1):
        while nxt is not None and nxt == n:
            record()
            nxt = next(want, None)
        if n == n_steps or nxt is None:
            break
        k1 = L(rho, t)
        k2 = L(rho + 0.5 * h * k1, t + 0.5 * h)
        k3 = L(rho + 0.5 * h * k2, t + 0.5 * h)
        k4 = L(rho + h * k3, t + h)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = rho0.t + (n + 1) * h
    return MEResult(
        times=times,
        moments={k: np.array(v) for k, v in records.items()},
        covariance=np.array(covs),
        top_population=np.array(tops),
        final=DensityState(rho, fc.dim_a, fc.dim_b, t),
    )

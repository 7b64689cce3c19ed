"""Batch trajectory kernels.

``integrate_batch`` runs many independent trajectories and returns, for each
trajectory and checkpoint, the 28 complex monomials listed in
:data:`MONOMIALS`.  Two implementations exist: a numba kernel that loops
over trajectories in parallel, and a numpy kernel vectorised across
trajectories.  They share the counter-based RNG and draw identical noise.
"""

import cmath

import numpy as np

from . import _accel
from ._accel import njit, prange
from .rng import BLOCK, block_np, fill_block

# set 0: (beta_r, beta_r_plus, S, S_plus) in the mechanical rotating frame,
# S the unnormalised output integral; set 1: (alpha, alpha_plus, beta, beta_plus)
SET_SIZE = 14
N_MONO = 2 * SET_SIZE
PAIRS = [(i, j) for i in range(4) for j in range(i, 4)]
MONOMIALS = []
for _set in ("out", "cav"):
    MONOMIALS += [f"{_set}:{i}" for i in range(4)]
    MONOMIALS += [f"{_set}:{i}{j}" for i, j in PAIRS]

SCHEME_CODES = {"euler_maruyama": 0, "rotating_euler": 1}


def linear_factor_table(p, dt):
    """Precomputed propagators, see :func:`optosim.sde.linear_factors`."""
    La = complex(p.gamma_a, p.Delta)
    Lb = complex(p.gamma_b, p.omega_m)
    out = []
    for L in (La, La.conjugate(), Lb, Lb.conjugate()):
        e = cmath.exp(-L * dt)
        phi = dt if L == 0 else (1.0 - e) / L
        h = cmath.exp(complex(-0.5 * L.real * dt, -L.imag * dt))
        out += [e, phi, h]
    return np.array(out, dtype=np.complex128)


def param_vector(p, weyl_shift=0.0):
    return np.array(
        [p.gamma_a, p.Delta, p.omega_m, p.gamma_b, p.chi0, p.n_b0, p.n_th_a, p.n_th_b, weyl_shift],
        dtype=np.float64,
    )


@njit(cache=True)
def _record(out, z0, z1, z2, z3):
    out[0] = z0
    out[1] = z1
    out[2] = z2
    out[3] = z3
    out[4] = z0 * z0
    out[5] = z0 * z1
    out[6] = z0 * z2
    out[7] = z0 * z3
    out[8] = z1 * z1
    out[9] = z1 * z2
    out[10] = z1 * z3
    out[11] = z2 * z2
    out[12] = z2 * z3
    out[13] = z3 * z3


@njit(cache=True)
def _bad(z, th2):
    m = z.real * z.real + z.imag * z.imag
    return not (m <= th2)


@njit(parallel=True, cache=True)
def _pp_numba(keys, pv, drive, weight, rot, ck, dt, scheme, thresh, fac, mom, div):
    ga, Delta, wm, gb, chi, nb0, nta, ntb = pv[0], pv[1], pv[2], pv[3], pv[4], pv[5], pv[6], pv[7]
    ka = np.sqrt(2.0 * ga)
    kb = np.sqrt(2.0 * gb)
    sa = np.sqrt(nta)
    sb = np.sqrt(ntb)
    th2 = thresh * thresh
    La = complex(ga, Delta)
    Lb = complex(gb, wm)
    ea, pa, ha = fac[0], fac[1], fac[2]
    eap, pap, hap = fac[3], fac[4], fac[5]
    eb, hb = fac[6], fac[8]
    ebp, hbp = fac[9], fac[11]
    nsteps = drive.size
    nck = ck.size
    sdt = np.sqrt(0.5 * dt)
    for i in prange(keys.size):
        xi = np.empty(BLOCK)
        key = keys[i]
        fill_block(key, 0, xi, 2)
        s0 = np.sqrt(0.5 * nb0)
        a = 0j
        ap = 0j
        b = s0 * complex(xi[0], xi[1])
        bp = b.conjugate()
        S = 0j
        Sp = 0j
        kc = 0
        if nck > 0 and ck[0] == 0:
            _record(mom[i, 0, 0:14], b, bp, S, Sp)
            _record(mom[i, 0, 14:28], a, ap, b, bp)
            kc = 1
        for n in range(nsteps):
            if kc >= nck:
                break
            fill_block(key, n + 1, xi)
            E = drive[n]
            sq = np.sqrt(-0.5j * chi * a * dt)
            sqp = np.sqrt(0.5j * chi * ap * dt)
            wa = sq * complex(xi[0], xi[1])
            wb = sq * complex(xi[0], -xi[1])
            wap = sqp * complex(xi[2], xi[3])
            wbp = sqp * complex(xi[2], -xi[3])
            a_in = sa * sdt * complex(xi[4], xi[5])
            b_in = sb * sdt * complex(xi[6], xi[7])
            dWa = wa + ka * a_in
            dWap = wap + ka * a_in.conjugate()
            dWb = wb + kb * b_in
            dWbp = wbp + kb * b_in.conjugate()
            q = b + bp
            fa = -1j * chi * q * a
            fap = 1j * chi * q * ap
            fb = -1j * chi * a * ap
            if scheme == 1:
                a1 = ea * a + pa * E + ha * (fa * dt + dWa)
                ap1 = eap * ap + pap * E.conjugate() + hap * (fap * dt + dWap)
                b1 = eb * b + hb * (fb * dt + dWb)
                bp1 = ebp * bp + hbp * (-fb * dt + dWbp)
            else:
                a1 = a + (E - La * a + fa) * dt + dWa
                ap1 = ap + (E.conjugate() - La.conjugate() * ap + fap) * dt + dWap
                b1 = b + (-Lb * b + fb) * dt + dWb
                bp1 = bp + (-Lb.conjugate() * bp - fb) * dt + dWbp
            r0 = rot[n]
            r1 = rot[n + 1]
            w = weight[n]
            S += w * (ka * 0.5 * (a * r0 + a1 * r1) * dt - a_in * r0)
            Sp += w * (
                ka * 0.5 * (ap * r0.conjugate() + ap1 * r1.conjugate()) * dt
                - a_in.conjugate() * r0.conjugate()
            )
            a, ap, b, bp = a1, ap1, b1, bp1
            if _bad(a, th2) or _bad(ap, th2) or _bad(b, th2) or _bad(bp, th2):
                div[i] = 1
                for k in range(nck):
                    for m in range(28):
                        mom[i, k, m] = 0j
                break
            if n + 1 == ck[kc]:
                rc = rot[n + 1]
                _record(mom[i, kc, 0:14], b * rc.conjugate(), bp * rc, S, Sp)
                _record(mom[i, kc, 14:28], a, ap, b, bp)
                kc += 1


@njit(parallel=True, cache=True)
def _wigner_numba(keys, pv, drive, weight, rot, ck, dt, scheme, thresh, fac, mom, div):
    ga, Delta, wm, gb, chi, nb0, nta, ntb = pv[0], pv[1], pv[2], pv[3], pv[4], pv[5], pv[6], pv[7]
    shift = pv[8]
    ka = np.sqrt(2.0 * ga)
    ca = np.sqrt(nta + 0.5)
    cb = np.sqrt(2.0 * gb) * np.sqrt(ntb + 0.5)
    th2 = thresh * thresh
    La = complex(ga, Delta)
    Lb = complex(gb, wm)
    ea, pa, ha = fac[0], fac[1], fac[2]
    eb, hb = fac[6], fac[8]
    nsteps = drive.size
    nck = ck.size
    sdt = np.sqrt(0.5 * dt)
    for i in prange(keys.size):
        xi = np.empty(BLOCK)
        key = keys[i]
        fill_block(key, 0, xi, 4)
        a = np.sqrt(0.25) * complex(xi[0], xi[1])
        b = np.sqrt(0.5 * (nb0 + 0.5)) * complex(xi[2], xi[3])
        S = 0j
        kc = 0
        if nck > 0 and ck[0] == 0:
            _record(mom[i, 0, 0:14], b, b.conjugate(), S, S.conjugate())
            _record(mom[i, 0, 14:28], a, a.conjugate(), b, b.conjugate())
            kc = 1
        for n in range(nsteps):
            if kc >= nck:
                break
            fill_block(key, n + 1, xi, 4)
            E = drive[n]
            a_in = ca * sdt * complex(xi[0], xi[1])
            dWa = ka * a_in
            dWb = cb * sdt * complex(xi[2], xi[3])
            fa = -1j * chi * 2.0 * b.real * a
            fb = -1j * chi * (a.real * a.real + a.imag * a.imag - shift)
            if scheme == 1:
                a1 = ea * a + pa * E + ha * (fa * dt + dWa)
                b1 = eb * b + hb * (fb * dt + dWb)
            else:
                a1 = a + (E - La * a + fa) * dt + dWa
                b1 = b + (-Lb * b + fb) * dt + dWb
            r0 = rot[n]
            r1 = rot[n + 1]
            S += weight[n] * (ka * 0.5 * (a * r0 + a1 * r1) * dt - a_in * r0)
            a, b = a1, b1
            if _bad(a, th2) or _bad(b, th2):
                div[i] = 1
                for k in range(nck):
                    for m in range(28):
                        mom[i, k, m] = 0j
                break
            if n + 1 == ck[kc]:
                rc = rot[n + 1]
                br = b * rc.conjugate()
                _record(mom[i, kc, 0:14], br, br.conjugate(), S, S.conjugate())
                _record(mom[i, kc, 14:28], a, a.conjugate(), b, b.conjugate())
                kc += 1


# numpy twins -------------------------------------------------------------


def _record_np(out, zs):
    out[:, 0:4] = np.stack(zs, axis=1)
    for m, (i, j) in enumerate(PAIRS):
        out[:, 4 + m] = zs[i] * zs[j]


def _pp_numpy(keys, pv, drive, weight, rot, ck, dt, scheme, thresh, fac, mom, div):
    ga, Delta, wm, gb, chi, nb0, nta, ntb = pv[:8]
    n = keys.size
    ka, kb = np.sqrt(2.0 * ga), np.sqrt(2.0 * gb)
    sa, sb = np.sqrt(nta), np.sqrt(ntb)
    sdt = np.sqrt(0.5 * dt)
    La, Lb = complex(ga, Delta), complex(gb, wm)
    ea, pa, ha, eap, pap, hap, eb, _, hb, ebp, _, hbp = fac
    xi = block_np(keys, 0, 2)
    a = np.zeros(n, complex)
    ap = np.zeros(n, complex)
    b = np.sqrt(0.5 * nb0) * (xi[0] + 1j * xi[1])
    bp = b.conj()
    S = np.zeros(n, complex)
    Sp = np.zeros(n, complex)
    alive = np.ones(n, bool)
    kc = 0
    if ck.size and ck[0] == 0:
        _record_np(mom[:, 0, 0:14], (b, bp, S, Sp))
        _record_np(mom[:, 0, 14:28], (a, ap, b, bp))
        kc = 1
    for s in range(drive.size):
        if kc >= ck.size:
            break
        xi = block_np(keys, s + 1)
        E = drive[s]
        sq = np.sqrt(-0.5j * chi * a * dt)
        sqp = np.sqrt(0.5j * chi * ap * dt)
        wa = sq * (xi[0] + 1j * xi[1])
        wb = sq * (xi[0] - 1j * xi[1])
        wap = sqp * (xi[2] + 1j * xi[3])
        wbp = sqp * (xi[2] - 1j * xi[3])
        a_in = sa * sdt * (xi[4] + 1j * xi[5])
        b_in = sb * sdt * (xi[6] + 1j * xi[7])
        dWa = wa + ka * a_in
        dWap = wap + ka * a_in.conj()
        dWb = wb + kb * b_in
        dWbp = wbp + kb * b_in.conj()
        q = b + bp
        fa = -1j * chi * q * a
        fap = 1j * chi * q * ap
        fb = -1j * chi * a * ap
        if scheme == 1:
            a1 = ea * a + pa * E + ha * (fa * dt + dWa)
            ap1 = eap * ap + pap * np.conj(E) + hap * (fap * dt + dWap)
            b1 = eb * b + hb * (fb * dt + dWb)
            bp1 = ebp * bp + hbp * (-fb * dt + dWbp)
        else:
            a1 = a + (E - La * a + fa) * dt + dWa
            ap1 = ap + (np.conj(E) - np.conj(La) * ap + fap) * dt + dWap
            b1 = b + (-Lb * b + fb) * dt + dWb
            bp1 = bp + (-np.conj(Lb) * bp - fb) * dt + dWbp
        r0, r1, w = rot[s], rot[s + 1], weight[s]
        S = S + w * (ka * 0.5 * (a * r0 + a1 * r1) * dt - a_in * r0)
        Sp = Sp + w * (
            ka * 0.5 * (ap * np.conj(r0) + ap1 * np.conj(r1)) * dt - a_in.conj() * np.conj(r0)
        )
        a, ap, b, bp = a1, ap1, b1, bp1
        th2 = thresh * thresh
        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~((np.abs(a) ** 2 <= th2) & (np.abs(ap) ** 2 <= th2)
                    & (np.abs(b) ** 2 <= th2) & (np.abs(bp) ** 2 <= th2))
        newly = bad & alive
        if newly.any():
            div[newly] = 1
            alive &= ~bad
            for arr in (a, ap, b, bp, S, Sp):
                arr[~alive] = 0j
        if s + 1 == ck[kc]:
            rc = rot[s + 1]
            _record_np(mom[:, kc, 0:14], (b * np.conj(rc), bp * rc, S, Sp))
            _record_np(mom[:, kc, 14:28], (a, ap, b, bp))
            kc += 1
    mom[~alive] = 0j


def _wigner_numpy(keys, pv, drive, weight, rot, ck, dt, scheme, thresh, fac, mom, div):
    ga, Delta, wm, gb, chi, nb0, nta, ntb, shift = pv
    n = keys.size
    ka = np.sqrt(2.0 * ga)
    ca = np.sqrt(nta + 0.5)
    cb = np.sqrt(2.0 * gb) * np.sqrt(ntb + 0.5)
    sdt = np.sqrt(0.5 * dt)
    La, Lb = complex(ga, Delta), complex(gb, wm)
    ea, pa, ha, eb, hb = fac[0], fac[1], fac[2], fac[6], fac[8]
    xi = block_np(keys, 0, 4)
    a = np.sqrt(0.25) * (xi[0] + 1j * xi[1])
    b = np.sqrt(0.5 * (nb0 + 0.5)) * (xi[2] + 1j * xi[3])
    S = np.zeros(n, complex)
    alive = np.ones(n, bool)
    kc = 0
    if ck.size and ck[0] == 0:
        _record_np(mom[:, 0, 0:14], (b, b.conj(), S, S.conj()))
        _record_np(mom[:, 0, 14:28], (a, a.conj(), b, b.conj()))
        kc = 1
    for s in range(drive.size):
        if kc >= ck.size:
            break
        xi = block_np(keys, s + 1, 4)
        E = drive[s]
        a_in = ca * sdt * (xi[0] + 1j * xi[1])
        dWa = ka * a_in
        dWb = cb * sdt * (xi[2] + 1j * xi[3])
        fa = -1j * chi * 2.0 * b.real * a
        fb = -1j * chi * (a.real * a.real + a.imag * a.imag - shift)
        if scheme == 1:
            a1 = ea * a + pa * E + ha * (fa * dt + dWa)
            b1 = eb * b + hb * (fb * dt + dWb)
        else:
            a1 = a + (E - La * a + fa) * dt + dWa
            b1 = b + (-Lb * b + fb) * dt + dWb
        S = S + weight[s] * (ka * 0.5 * (a * rot[s] + a1 * rot[s + 1]) * dt - a_in * rot[s])
        a, b = a1, b1
        th2 = thresh * thresh
        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~((np.abs(a) ** 2 <= th2) & (np.abs(b) ** 2 <= th2))
        newly = bad & alive
        if newly.any():
            div[newly] = 1
            alive &= ~bad
            for arr in (a, b, S):
                arr[~alive] = 0j
        if s + 1 == ck[kc]:
            br = b * np.conj(rot[s + 1])
            _record_np(mom[:, kc, 0:14], (br, br.conj(), S, S.conj()))
            _record_np(mom[:, kc, 14:28], (a, a.conj(), b, b.conj()))
            kc += 1
    mom[~alive] = 0j


_KERNELS = {
    ("positive_p", "numba"): _pp_numba,
    ("wigner", "numba"): _wigner_numba,
    ("positive_p", "numpy"): _pp_numpy,
    ("wigner", "numpy"): _wigner_numpy,
}


def integrate_batch(representation, keys, params, grid, cfg, backend=None):
    """Integrate one trajectory per key.

    Returns ``(moments, diverged)`` with ``moments`` of shape
    ``(n, n_checkpoints, 28)`` and ``diverged`` a uint8 flag per trajectory
    (diverged rows of ``moments`` are zero).
    """
    backend = backend or _accel.backend_name()
    if backend == "numba" and not _accel.HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")
    kern = _KERNELS[(representation, backend)]
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    ck = np.asarray(cfg.checkpoints, dtype=np.int64)
    n_steps = min(cfg.n_steps, grid.drive.size)
    t = cfg.dt * np.arange(n_steps + 1)
    rot = np.exp(-1j * params.omega_m * t)
    mom = np.zeros((keys.size, ck.size, N_MONO), dtype=np.complex128)
    div = np.zeros(keys.size, dtype=np.uint8)
    kern(
        keys, param_vector(params, 0.5 if cfg.wigner_drift == "weyl" else 0.0),
        np.ascontiguousarray(grid.drive[:n_steps], dtype=np.complex128),
        np.ascontiguousarray(grid.weight[:n_steps], dtype=np.float64),
        rot, ck, float(cfg.dt), SCHEME_CODES[cfg.scheme], float(cfg.divergence_threshold),
        linear_factor_table(params, cfg.dt), mom, div,
    )
    return mom, div

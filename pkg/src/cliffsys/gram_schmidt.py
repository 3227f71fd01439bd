"""Orthogonalization by polarization chains, its derivative, and transport.

ogs produces, for a tuple close enough to a Clifford system, the unique
nearby Clifford system characterized by the filtration fixed point: the
k-th output is the polarization of the alternating-sector part of the k-th
input with respect to the previously produced elements. ofgs is the floating
variant: the first component is kept, the ratios are orthogonalized one
level down, and the result is reassembled.

dogs is the directional derivative of ogs, computed forward-mode through the
recursion with the integral representation of the polarization derivative.

parallel_transport integrates the horizontal lift H' = X(t) H of a path of
systems, with X the minimal lift of the path velocity; pt_gs / pt_fgs run it
along the orthogonalized segment between two systems.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    PolarizationDomain,
    Singular,
    SystemViolation,
)
from .geometry import (
    Ad,
    Ad_f,
    CliffordSystem,
    FPair,
    FloatingSystem,
    connection_apply,
    connection_apply_floating,
    connection_data_gs,
    elem_inv,
    elem_scale,
    fixed_point_predicate,
    is_matrix,
    residual_norm,
    symmetrize,
)
from .formal import pol_formal
from .matrices import frobenius, pol_matrix, spectrum


@dataclass
class GSResult:
    system: tuple
    residuals: dict
    ok: bool


def _alt_part(x, produced):
    for qh in produced:
        x = symmetrize(x, qh, 1)
    return x


def ogs(a) -> tuple:
    """Polarization chain orthogonalization.

    Stage k takes the all-alternating sector of a_k with respect to the
    already produced elements and polarizes it. Domain failures at stage k
    surface as PolarizationDomain(k, reason).
    """
    out = []
    for k, ak in enumerate(a, start=1):
        s = _alt_part(ak, out)
        try:
            if is_matrix(s):
                qk = pol_matrix(s)
            else:
                qk = pol_formal(s)
        except DomainError as e:
            raise PolarizationDomain(k, str(e)) from e
        out.append(qk)
    return tuple(out)


def ofgs(a) -> tuple:
    """Floating orthogonalization: keep a_1, orthogonalize the ratios.

    Output components are q~_i a_1 where q~ = ogs(a_i a_1^{-1}, i >= 2);
    the first component is exactly a_1.
    """
    try:
        a1_inv = elem_inv(a[0])
    except DomainError as e:
        raise Singular("first component is not invertible") from e
    ratios = tuple(ai @ a1_inv for ai in a[1:])
    qt = ogs(ratios)
    return (a[0],) + tuple(q @ a[0] for q in qt)


def check_thm_3_6(a, q, floating: bool = False, tol: float = 1e-8) -> GSResult:
    """Score a candidate output q against input a.

    Residuals: "CP" (q is a system of the right kind), "LGS" (the filtration
    fixed point of q relative to a), "NSp" (smallest real part over the
    spectra of a_k q_k^{-1}; positive means the numerical-range condition
    holds; None on the exact backend).
    """
    if floating:
        sys_obj = FloatingSystem(q)
        cp = sys_obj.validate()
        _, lgs = fixed_point_predicate("fgs", a, sys_obj, tol=tol)
    else:
        sys_obj = CliffordSystem(q)
        cp = sys_obj.validate()
        _, lgs = fixed_point_predicate("gs", a, sys_obj, tol=tol)
    nsp = None
    if is_matrix(q[0]):
        margins = []
        for k in range(len(q)):
            rep = spectrum(a[k] @ elem_inv(q[k]))
            margins.append(min(ev.real for ev in rep.eigenvalues))
        nsp = min(margins)
    exact = not is_matrix(q[0])
    ok = (cp == 0.0 and lgs == 0.0) if exact else (cp <= tol and lgs <= tol)
    if nsp is not None:
        ok = ok and nsp > 0
    return GSResult(system=tuple(q), residuals={"CP": cp, "LGS": lgs, "NSp": nsp},
                    ok=ok)


# derivative ---------------------------------------------------------------

def _pol_derivative(s, ds, nodes: int = 256):
    """d pol(S; dS) by averaging M^{-1}(dS cos^2 + S dS S sin^2)M^{-1},
    M(t) = cos^2 t - S^2 sin^2 t, over a period."""
    d = s.shape[0]
    eye = np.eye(d)
    s2 = s @ s
    sds_s = s @ ds @ s
    acc = np.zeros_like(s)
    for i in range(nodes):
        t = 2 * np.pi * i / nodes
        c2 = np.cos(t) ** 2
        s2t = np.sin(t) ** 2
        m = c2 * eye - s2t * s2
        rhs = c2 * ds + s2t * sds_s
        inner = np.linalg.solve(m, rhs)
        acc += np.linalg.solve(m.T, inner.T).T
    return acc / nodes


def dogs(a, da, nodes: int = 256) -> tuple:
    """Directional derivative of ogs at a in direction da (matrix backend).

    Forward mode: the sector projections are differentiated in both slots
    (the base elements move too), the polarization via its integral kernel.
    """
    if not is_matrix(a[0]):
        raise DomainError("dogs needs the matrix backend")
    q: list = []
    dq: list = []
    for k in range(len(a)):
        s = a[k]
        ds = da[k]
        for h in range(k):
            qh = q[h]
            dqh = dq[h]
            qh_inv = -qh  # skew-involution
            dqh_inv = -(qh_inv @ dqh @ qh_inv)
            conj = qh_inv @ s @ qh
            dconj = dqh_inv @ s @ qh + qh_inv @ ds @ qh + qh_inv @ s @ dqh
            s, ds = 0.5 * (s - conj), 0.5 * (ds - dconj)
        try:
            qk = pol_matrix(s)
        except DomainError as e:
            raise PolarizationDomain(k + 1, str(e)) from e
        dq.append(_pol_derivative(s, ds, nodes))
        q.append(qk)
    return tuple(dq)


# transport ------------------------------------------------------------------

def _path_derivative(path_eval, t, d):
    """Five-point fourth-order derivative of a tuple-valued path on [0, 1]."""
    if t - 2 * d >= -1e-12 and t + 2 * d <= 1 + 1e-12:
        pts = [(t - 2 * d, 1), (t - d, -8), (t + d, 8), (t + 2 * d, -1)]
    elif t - 2 * d < 0:
        pts = [(t, -25), (t + d, 48), (t + 2 * d, -36),
               (t + 3 * d, 16), (t + 4 * d, -3)]
    else:
        pts = [(t, 25), (t - d, -48), (t - 2 * d, 36),
               (t - 3 * d, -16), (t - 4 * d, 3)]
    acc = None
    for u, w in pts:
        f = path_eval(min(max(u, 0.0), 1.0))
        term = tuple(w * x for x in f)
        acc = term if acc is None else tuple(a + b for a, b in zip(acc, term))
    return tuple(x / (12 * d) for x in acc)


def parallel_transport(path, steps: int = 100, floating: bool = False,
                       check_tol: float = 1e-6):
    """Integrate the horizontal conjugator along a path of systems.

    path: callable on [0, 1] returning a tuple of matrices. Returns
    (H, residual): H conjugates path(0) onto path(1) up to the reported
    residual; for floating=True H is an FPair and Ad_f is the action.
    Fourth-order in 1/steps (RK4 with matching finite differences). Points
    failing the system relations beyond check_tol raise SystemViolation.
    """
    cache: dict = {}
    scale = 4 * steps

    def evc(t):
        key = round(t * scale)
        if abs(key / scale - t) <= 1e-12:
            if key not in cache:
                cache[key] = path(key / scale)
            return cache[key]
        return path(t)

    f0 = evc(0.0)
    n = len(f0)
    dim = f0[0].shape[0]
    data = connection_data_gs(n)
    h = 1.0 / steps
    d_fd = h / 2

    def x_at(t):
        f = evc(t)
        fdot = _path_derivative(evc, t, d_fd)
        if floating:
            sys_obj = FloatingSystem(f)
            return connection_apply_floating(data, fdot, sys_obj)
        return connection_apply(data, fdot, CliffordSystem(f))

    def check(t):
        f = evc(t)
        sys_obj = FloatingSystem(f) if floating else CliffordSystem(f)
        res = sys_obj.validate()
        if res > check_tol:
            raise SystemViolation(t, res)

    eye = np.eye(dim)
    hcur = FPair(eye.copy(), eye.copy()) if floating else eye.copy()

    def deriv(t, hval):
        x = x_at(t)
        if floating:
            return x * hval
        return x @ hval

    def axpy(hval, c, k):
        if floating:
            return hval + k.scale(c)
        return hval + c * k

    check(0.0)
    for i in range(steps):
        t = i * h
        k1 = deriv(t, hcur)
        k2 = deriv(t + h / 2, axpy(hcur, h / 2, k1))
        k3 = deriv(t + h / 2, axpy(hcur, h / 2, k2))
        k4 = deriv(t + h, axpy(hcur, h, k3))
        if floating:
            incr = (k1 + k2.scale(2) + k3.scale(2) + k4).scale(h / 6)
            hcur = hcur + incr
        else:
            hcur = hcur + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        check(min((i + 1) * h, 1.0))
    f1 = evc(1.0)
    if floating:
        moved = Ad_f(FPair(hcur.x, hcur.y), f0)
    else:
        moved = Ad(hcur, f0)
    res = max(frobenius(m - b) for m, b in zip(moved, f1))
    return hcur, res


def _lerp(a, b, t):
    return tuple((1 - t) * x + t * y for x, y in zip(a, b))


def pt_gs(r, q, steps: int = 100):
    """Transport along the orthogonalized segment from q to r.

    Both ends Clifford; the path is ogs of the straight segment, so the ends
    are fixed and (Ad H) q recovers r up to the returned residual.
    """
    path = lambda t: ogs(_lerp(q, r, t))
    return parallel_transport(path, steps=steps, floating=False)


def pt_fgs(r, q, steps: int = 100):
    """Floating variant of pt_gs: FPair conjugator with Ad_f action."""
    path = lambda t: ofgs(_lerp(q, r, t))
    return parallel_transport(path, steps=steps, floating=True)

"""Dense real matrix backend.

Everything here works on square numpy arrays. The two analytic kernels are the
inverse square root (Denman-Beavers, with independent quadrature route) and the
polarization pol(H) = H(-H^2)^{-1/2} (algebraic route via the inverse square
root, with independent quadrature route). Spectral guards are explicit: an
operation whose integral representation needs the spectrum off a ray or off the
real axis refuses inputs that violate the condition by less than a margin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NoConvergence,
    NodeSingular,
    Singular,
    SpectralConditionViolated,
)


def frobenius(a) -> float:
    return float(np.linalg.norm(a, "fro"))


def mat_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse with a defensive residual check.

    The residual bound ``|a x - 1|_F <= 1e-10 |a|_F d`` rejects numerically
    singular inputs that np.linalg.solve happens to push through.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    eye = np.eye(d)
    try:
        x = np.linalg.solve(a, eye)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from None
    res = frobenius(a @ x - eye)
    if not np.isfinite(res) or res > 1e-10 * max(frobenius(a), 1.0) * d:
        raise Singular(f"inverse residual {res:.3e}")
    return x


@dataclass
class SpectrumReport:
    eigenvalues: list = field(default_factory=list)
    min_real_axis_distance: float = 0.0
    min_left_halfplane_margin: float = 0.0

    # min_real_axis_distance: smallest |Im(lambda)|; positive means the
    # spectrum avoids the real axis entirely.
    # min_left_halfplane_margin: smallest Re(lambda); positive means the
    # spectrum lies in the open right half plane.


def spectrum(a: np.ndarray) -> SpectrumReport:
    a = np.asarray(a, dtype=float)
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    vals = sorted(vals, key=lambda z: (z.real, z.imag))
    return SpectrumReport(
        eigenvalues=list(vals),
        min_real_axis_distance=float(min(abs(z.imag) for z in vals)),
        min_left_halfplane_margin=float(min(z.real for z in vals)),
    )


def _negative_ray_distance(vals) -> float:
    """Distance from the eigenvalue set to the closed ray (-inf, 0]."""
    dist = np.inf
    for z in vals:
        if z.real >= 0.0:
            d = abs(z)
        else:
            d = abs(z.imag)
        dist = min(dist, d)
    return float(dist)


def inv_sqrt_matrix(s: np.ndarray, guard_margin: float = 1e-6,
                    max_iter: int = 100) -> np.ndarray:
    """Principal S^{-1/2} by the Denman-Beavers iteration.

    Requires the spectrum of S to stay at least guard_margin away from the
    closed negative real ray; the principal branch is then well defined and
    the iteration converges quadratically. Determinantal scaling keeps badly
    scaled inputs in range.
    """
    s = np.asarray(s, dtype=float)
    d = s.shape[0]
    rep = spectrum(s)
    if _negative_ray_distance(rep.eigenvalues) < guard_margin:
        raise SpectralConditionViolated(
            f"spectrum within {guard_margin} of the negative real ray")
    y = s.copy()
    z = np.eye(d)
    eye = np.eye(d)
    for _ in range(max_iter):
        # scaling factor gamma = |det(y) det(z)|^{-1/(2d)}
        sign_y, logdet_y = np.linalg.slogdet(y)
        sign_z, logdet_z = np.linalg.slogdet(z)
        if sign_y != 0 and sign_z != 0:
            gamma = np.exp(-(logdet_y + logdet_z) / (2.0 * d))
        else:
            gamma = 1.0
        y = gamma * y
        z = gamma * z
        y_next = 0.5 * (y + mat_inverse(z))
        z_next = 0.5 * (z + mat_inverse(y))
        delta = frobenius(y_next - y)
        y, z = y_next, z_next
        if delta <= 1e-14 * max(frobenius(y), 1.0):
            break
    else:
        raise NoConvergence("Denman-Beavers did not settle")
    x = z  # z -> s^{-1/2}
    res_sq = frobenius(x @ s @ x - eye)
    res_comm = frobenius(x @ s - s @ x)
    scale = max(frobenius(s), 1.0)
    if res_sq > 1e-9 * scale or res_comm > 1e-9 * scale:
        raise NoConvergence(
            f"inverse square root residuals {res_sq:.3e}, {res_comm:.3e}")
    return x


def inv_sqrt_quadrature(s: np.ndarray, nodes: int = 256) -> np.ndarray:
    """S^{-1/2} = (1/2pi) int_0^{2pi} (cos^2 t + S sin^2 t)^{-1} dt.

    Periodic trapezoid rule; exponentially accurate for spectra away from the
    negative ray. Independent of the Denman-Beavers route on purpose.
    """
    s = np.asarray(s, dtype=float)
    d = s.shape[0]
    eye = np.eye(d)
    acc = np.zeros_like(s)
    for k in range(nodes):
        t = 2.0 * np.pi * k / nodes
        m = (np.cos(t) ** 2) * eye + (np.sin(t) ** 2) * s
        try:
            acc += mat_inverse(m)
        except Singular:
            raise NodeSingular(t) from None
    return acc / nodes


def pol_matrix(h: np.ndarray, guard_margin: float = 1e-6) -> np.ndarray:
    """pol(H) = H (-H^2)^{-1/2}; defined when Sp(H) avoids the real axis.

    The result is the skew-involution commuting with H whose "ratio"
    H pol(H)^{-1} has right-half-plane spectrum.
    """
    h = np.asarray(h, dtype=float)
    rep = spectrum(h)
    if rep.min_real_axis_distance < guard_margin:
        raise SpectralConditionViolated(
            f"spectrum within {guard_margin} of the real axis")
    x = inv_sqrt_matrix(-h @ h, guard_margin=guard_margin * guard_margin)
    q = h @ x
    eye = np.eye(h.shape[0])
    res = frobenius(q @ q + eye)
    if res > 1e-9 * max(frobenius(h) ** 2, 1.0):
        raise NoConvergence(f"polarization residual {res:.3e}")
    return q


def pol_quadrature(h: np.ndarray, nodes: int = 64) -> np.ndarray:
    """pol(H) = (1/2pi) int_0^{2pi} (-sin t + H cos t)(cos t + H sin t)^{-1} dt."""
    h = np.asarray(h, dtype=float)
    d = h.shape[0]
    eye = np.eye(d)
    acc = np.zeros_like(h)
    for k in range(nodes):
        t = 2.0 * np.pi * k / nodes
        num = -np.sin(t) * eye + np.cos(t) * h
        den = np.cos(t) * eye + np.sin(t) * h
        try:
            acc += num @ mat_inverse(den)
        except Singular:
            raise NodeSingular(t) from None
    return acc / nodes


# Real 4x4 host algebra: left multiplication by the quaternions i, j, k on
# coordinates (a, b, c, d) of a + bi + cj + dk. Three anticommuting
# skew-involutions, enough to host rank <= 3 systems.

L_I = np.array([[0., -1., 0., 0.],
                [1., 0., 0., 0.],
                [0., 0., 0., -1.],
                [0., 0., 1., 0.]])
L_J = np.array([[0., 0., -1., 0.],
                [0., 0., 0., 1.],
                [1., 0., 0., 0.],
                [0., -1., 0., 0.]])
L_K = np.array([[0., 0., 0., -1.],
                [0., 0., -1., 0.],
                [0., 1., 0., 0.],
                [1., 0., 0., 0.]])

_GENS = (L_I, L_J, L_K)


def cl(v) -> np.ndarray:
    """Embed a vector of R^2 or R^3 as v[0] L_i + v[1] L_j (+ v[2] L_k).

    cl(u) cl(v) + cl(v) cl(u) = -2 <u, v> I, so orthonormal frames map to
    Clifford systems and the classical procedures are the commutative shadow.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] not in (2, 3):
        raise ValueError("cl expects a vector of length 2 or 3")
    out = np.zeros((4, 4))
    for x, g in zip(v, _GENS):
        out = out + float(x) * g
    return out


def clifford_gens(n: int) -> tuple:
    """The first n of (L_i, L_j, L_k) as a concrete Clifford system."""
    if not 1 <= n <= 3:
        raise ValueError("matrix host supports n <= 3")
    return tuple(g.copy() for g in _GENS[:n])


def clifford_residual(mats, tol: float = 0.0) -> float:
    """Max Frobenius residual of C_i C_j + C_j C_i + 2 delta_ij over all pairs."""
    n = len(mats)
    d = mats[0].shape[0]
    eye = np.eye(d)
    worst = 0.0
    for i in range(n):
        for j in range(i, n):
            lhs = mats[i] @ mats[j] + mats[j] @ mats[i]
            if i == j:
                lhs = lhs + 2.0 * eye
            worst = max(worst, frobenius(lhs))
    return worst


def floating_residual(mats) -> float:
    """Max residual of Q_i Q_k^{-1} Q_j + Q_j Q_k^{-1} Q_i + 2 delta_ij Q_k."""
    n = len(mats)
    worst = 0.0
    for k in range(n):
        inv_k = mat_inverse(mats[k])
        for i in range(n):
            for j in range(i, n):
                if i == k or j == k:
                    continue
                lhs = mats[i] @ inv_k @ mats[j] + mats[j] @ inv_k @ mats[i]
                if i == j:
                    lhs = lhs + 2.0 * mats[k]
                worst = max(worst, frobenius(lhs))
    return worst

"""Systems, sector decompositions, tangent spaces, and connections.

Backend-generic: an "element" is either a FormalElement (exact) or a square
numpy array (floating point). The few operations that differ (inverse, scalar
scaling, residual measurement) go through the small dispatch helpers at the
top; everything else is written once.

The objects:

  CliffordSystem   tuple (Q_1..Q_n) with Q_i Q_j + Q_j Q_i = -2 delta_ij.
  FloatingSystem   tuple whose ratios Q_i Q_k^{-1} (i != k) form a Clifford
                   system; the anchor k is bookkeeping only, nothing below
                   depends on it.
  FPair            pair (X, Y) acting as A |-> X A Y (the second slot is
                   opposite-algebra valued; product (X,Y)(X',Y') = (XX', Y'Y)).

The decomposition (R/Q)_j^iota splits R_j Q_j^{-1} into the 2^n conjugation
sectors of the base system; the floating variant splits along the ratio
elements into 2^{n-1} class sectors. Connections are weighted recombinations
of those components, with weight data validated against (CL1)/(CL2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DomainError,
    EtaNotSPD,
    NonPositiveWeight,
    NotInvolution,
    NotTangent,
)
from .formal import FormalElement
from .matrices import frobenius, mat_inverse
from .series import TPoly


# dispatch helpers -----------------------------------------------------------

def is_matrix(x) -> bool:
    return isinstance(x, np.ndarray)


def elem_inv(x):
    if is_matrix(x):
        return mat_inverse(x)
    return x.inverse()


def elem_one(x):
    if is_matrix(x):
        return np.eye(x.shape[0])
    return FormalElement.one(x.ctx)


def elem_scale(c, x):
    if is_matrix(x):
        return float(c) * x
    return x * c


def elem_mul(a, b):
    return a @ b


def residual_norm(x) -> float:
    """Diagnostic size of an element: Frobenius norm, or max |coefficient|."""
    if is_matrix(x):
        return frobenius(x)
    if not x.terms:
        return 0.0
    return float(max(abs(c) for c in x.terms.values()))


def is_zero(x, tol: float = 0.0) -> bool:
    if is_matrix(x):
        return frobenius(x) <= tol
    return not x


# systems ---------------------------------------------------------------------

@dataclass
class CliffordSystem:
    els: tuple

    def __post_init__(self):
        self.els = tuple(self.els)
        self._inv = {}

    @property
    def n(self) -> int:
        return len(self.els)

    def __getitem__(self, i):
        return self.els[i]

    def __iter__(self):
        return iter(self.els)

    def inv(self, i):
        if i not in self._inv:
            self._inv[i] = elem_inv(self.els[i])
        return self._inv[i]

    def validate(self) -> float:
        worst = 0.0
        one = elem_one(self.els[0])
        for i in range(self.n):
            for j in range(i, self.n):
                lhs = self.els[i] @ self.els[j] + self.els[j] @ self.els[i]
                if i == j:
                    lhs = lhs + elem_scale(2, one)
                worst = max(worst, residual_norm(lhs))
        return worst


@dataclass
class FloatingSystem:
    els: tuple
    anchor: int = 1

    def __post_init__(self):
        self.els = tuple(self.els)
        if not 1 <= self.anchor <= len(self.els):
            raise ValueError("anchor out of range")
        self._inv = {}

    @property
    def n(self) -> int:
        return len(self.els)

    def __getitem__(self, i):
        return self.els[i]

    def __iter__(self):
        return iter(self.els)

    def inv(self, i):
        if i not in self._inv:
            self._inv[i] = elem_inv(self.els[i])
        return self._inv[i]

    def ratios(self, anchor: int | None = None) -> list:
        """G_h = Q_h Q_k^{-1} for h != k, in ascending h order."""
        k = self.anchor if anchor is None else anchor
        ki = self.inv(k - 1)
        return [self.els[h] @ ki for h in range(self.n) if h != k - 1]

    def ratio_positions(self, anchor: int | None = None) -> list:
        k = self.anchor if anchor is None else anchor
        return [h + 1 for h in range(self.n) if h != k - 1]

    def validate(self) -> float:
        worst = 0.0
        for k in range(self.n):
            ki = self.inv(k)
            for i in range(self.n):
                if i == k:
                    continue
                for j in range(i, self.n):
                    if j == k:
                        continue
                    lhs = (self.els[i] @ ki @ self.els[j]
                           + self.els[j] @ ki @ self.els[i])
                    if i == j:
                        lhs = lhs + elem_scale(2, self.els[k])
                    worst = max(worst, residual_norm(lhs))
        return worst


# pairs -----------------------------------------------------------------------

@dataclass
class FPair:
    """(X, Y) acting by A |-> X A Y; composition (X,Y)(X',Y') = (XX', Y'Y)."""
    x: object
    y: object

    def __mul__(self, other: "FPair") -> "FPair":
        return FPair(self.x @ other.x, other.y @ self.y)

    def __add__(self, other: "FPair") -> "FPair":
        return FPair(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "FPair") -> "FPair":
        return FPair(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "FPair":
        return FPair(-self.x, -self.y)

    def scale(self, c) -> "FPair":
        return FPair(elem_scale(c, self.x), elem_scale(c, self.y))

    def exp(self) -> "FPair":
        if is_matrix(self.x):
            from scipy.linalg import expm
            return FPair(expm(self.x), expm(self.y))
        return FPair(self.x.exp(), self.y.exp())

    def inverse(self) -> "FPair":
        return FPair(elem_inv(self.x), elem_inv(self.y))

    def residual(self) -> float:
        return max(residual_norm(self.x), residual_norm(self.y))


def pair_delta(x) -> FPair:
    """Infinitesimal diagonal: X |-> (X, -X); ad_f of it is ad X."""
    return FPair(x, -x)


def pair_group_delta(g) -> FPair:
    """Group diagonal: g |-> (g, g^{-1}); Ad_f of it is Ad g."""
    return FPair(g, elem_inv(g))


def pair_nabla(p: FPair):
    """nabla(X, Y) = (X - Y)/2; section of pair_delta."""
    return elem_scale(Fraction(1, 2), p.x - p.y)


def ad(x, q) -> tuple:
    return tuple(x @ qi - qi @ x for qi in q)


def Ad(g, q) -> tuple:
    gi = elem_inv(g)
    return tuple(g @ qi @ gi for qi in q)


def ad_f(p: FPair, q) -> tuple:
    return tuple(p.x @ qi + qi @ p.y for qi in q)


def Ad_f(p: FPair, q) -> tuple:
    return tuple(p.x @ qi @ p.y for qi in q)


# symmetrization and decomposition ---------------------------------------------

def involution_parity(q, tol: float = 1e-8):
    """+1 when q^2 = 1, -1 when q^2 = -1; NotInvolution otherwise."""
    sq = q @ q
    one = elem_one(q)
    if is_zero(sq - one, tol if is_matrix(q) else 0.0):
        return 1
    if is_zero(sq + one, tol if is_matrix(q) else 0.0):
        return -1
    raise NotInvolution("base does not square to +-1")


def symmetrize(r, q, parity: int):
    """Conjugation-sector projection: (r + (-1)^parity q^{-1} r q)/2."""
    involution_parity(q)
    conj = elem_inv(q) @ r @ q
    if parity % 2 == 0:
        return elem_scale(Fraction(1, 2), r + conj)
    return elem_scale(Fraction(1, 2), r - conj)


def sector_split(x, bases) -> dict:
    """All iterated-symmetrization components at once.

    Returns {mask: component} where bit h of mask is the parity used for
    bases[h]; the components sum to x.
    """
    comps = {0: x}
    for h, q in enumerate(bases):
        qi = elem_inv(q)
        nxt = {}
        for mask, c in comps.items():
            conj = qi @ c @ q
            half = Fraction(1, 2)
            nxt[mask] = elem_scale(half, c + conj)
            nxt[mask | (1 << h)] = elem_scale(half, c - conj)
        comps = nxt
    return comps


def decomp(r_tuple, q: CliffordSystem, j: int, iota_mask: int,
           side: str = "left"):
    """(R/Q)_j^iota (side="left") or (Q\\R)_j^iota (side="right").

    Left: sector iota of R_j Q_j^{-1}. Right: sector iota of Q_j^{-1} R_j.
    They are connected by (Q\\R)_j^iota = (-1)^(iota_j) (R/Q)_j^iota.
    """
    if side == "left":
        z = r_tuple[j - 1] @ q.inv(j - 1)
    elif side == "right":
        z = q.inv(j - 1) @ r_tuple[j - 1]
    else:
        raise ValueError("side must be 'left' or 'right'")
    return sector_split(z, list(q))[iota_mask]


def full_mask(n: int) -> int:
    return (1 << n) - 1


def class_rep(iota_mask: int, n: int, anchor: int) -> int:
    """Canonical representative of {iota, ~iota}: anchor bit cleared."""
    if iota_mask >> (anchor - 1) & 1:
        return iota_mask ^ full_mask(n)
    return iota_mask


def decomp_floating(r_tuple, q: FloatingSystem, j: int, iota_mask: int,
                    side: str = "left", anchor: int | None = None):
    """Class letter (R/Q)_j^{f iota} or (Q\\R)_j^{f iota}.

    The class {iota, complement} determines the letter; any representative may
    be passed. Anchor only selects which ratio elements do the splitting; the
    result is anchor-independent.
    """
    n = q.n
    k = q.anchor if anchor is None else anchor
    rep = class_rep(iota_mask, n, k)
    ratios = q.ratios(k)
    positions = q.ratio_positions(k)
    z = r_tuple[j - 1] @ q.inv(j - 1)
    comps = sector_split(z, ratios)
    mask = 0
    for bit, h in enumerate(positions):
        if rep >> (h - 1) & 1:
            mask |= 1 << bit
    left = comps[mask]
    if side == "left":
        return left
    if side == "right":
        # (Q\R)_j^{f iota} = Q_j^{-1} (R/Q)_j^{f iota} Q_j
        return q.inv(j - 1) @ left @ q.els[j - 1]
    raise ValueError("side must be 'left' or 'right'")


# tangency ----------------------------------------------------------------------

def is_tangent(q, r_tuple, tol: float = 1e-8):
    """(ok, residual) for the derivative of the defining relations.

    Clifford: R_i Q_j + R_j Q_i + Q_i R_j + Q_j R_i = 0 for all i <= j.
    Floating: derivative of the three-term ratio relations.
    """
    worst = 0.0
    if isinstance(q, FloatingSystem):
        n = q.n
        for k in range(n):
            ki = q.inv(k)
            dki = -(ki @ r_tuple[k] @ ki)
            for i in range(n):
                if i == k:
                    continue
                for j in range(i, n):
                    if j == k:
                        continue
                    lhs = (r_tuple[i] @ ki @ q[j] + q[i] @ dki @ q[j]
                           + q[i] @ ki @ r_tuple[j]
                           + r_tuple[j] @ ki @ q[i] + q[j] @ dki @ q[i]
                           + q[j] @ ki @ r_tuple[i])
                    if i == j:
                        lhs = lhs + elem_scale(2, r_tuple[k])
                    worst = max(worst, residual_norm(lhs))
    else:
        n = q.n
        for i in range(n):
            for j in range(i, n):
                lhs = (r_tuple[i] @ q[j] + r_tuple[j] @ q[i]
                       + q[i] @ r_tuple[j] + q[j] @ r_tuple[i])
                worst = max(worst, residual_norm(lhs))
    exact = not is_matrix(r_tuple[0])
    ok = worst == 0.0 if exact else worst <= tol
    return ok, worst


def split_floating_tangent(q: FloatingSystem, r_tuple, tol: float = 1e-8) -> FPair:
    """Normalized pair lift of a tangent tuple: ad_f(pair, q) = r_tuple.

    Writing Z_i = R_i Q_i^{-1} and W = Q_k Y Q_k^{-1}, the equations
    X Q_i + Q_i Y = R_i become g_i^{-1}(W) - W = Z_i - Z_k per ratio sector,
    which pins every nonzero sector of W; the zero sector is fixed by the
    normalization that X - Q_k Y Q_k^{-1} has no zero-sector part.
    """
    ok, res = is_tangent(q, r_tuple, tol)
    if not ok:
        raise NotTangent(f"tuple is not tangent (residual {res:.3e})")
    n = q.n
    k = q.anchor
    ratios = q.ratios()
    z = [r_tuple[i] @ q.inv(i) for i in range(n)]
    zk_sectors = sector_split(z[k - 1], ratios)
    positions = q.ratio_positions()
    w = elem_scale(Fraction(1, 2), zk_sectors[0])
    half = Fraction(1, 2)
    for mask in range(1, 1 << (n - 1)):
        bit = (mask & -mask).bit_length() - 1
        i = positions[bit]  # smallest position in the sector's support
        u = elem_scale(half, z[k - 1] - z[i - 1])
        w = w + sector_split(u, ratios)[mask]
    y = q.inv(k - 1) @ w @ q.els[k - 1]
    x = z[k - 1] - w
    pair = FPair(x, y)
    recon = ad_f(pair, tuple(q))
    worst = max(residual_norm(a - b) for a, b in zip(recon, r_tuple))
    exact = not is_matrix(r_tuple[0])
    if (worst != 0.0) if exact else (worst > 10 * tol):
        raise NotTangent(f"pair reconstruction failed (residual {worst:.3e})")
    return pair


# connection data -----------------------------------------------------------------

def _coeff_is_zero(c) -> bool:
    return not c


def _coeff_sum(cs):
    total = None
    for c in cs:
        total = c if total is None else total + c
    return total


@dataclass
class ConnectionData:
    """Weights omega_j^iota subject to (CL1) and (CL2).

    (CL1): omega_j^iota = 0 whenever iota_j = 0 (only stored entries matter).
    (CL2): sum_j omega_j^iota = 1 for every iota != 0.
    Coefficients are Fraction or TPoly.
    """
    n: int
    omega: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (j, mask), c in self.omega.items():
            if not 1 <= j <= self.n or not 0 <= mask < (1 << self.n):
                raise ValueError("weight index out of range")
            if not _coeff_is_zero(c):
                clean[(j, mask)] = c
        self.omega = clean
        self.validate()

    def validate(self):
        for (j, mask), c in self.omega.items():
            if not mask >> (j - 1) & 1:
                raise ValueError(f"(CL1) violated at j={j}, iota={mask:0b}")
        for mask in range(1, 1 << self.n):
            cs = [self.omega[(j, mask)] for j in range(1, self.n + 1)
                  if (j, mask) in self.omega]
            total = _coeff_sum(cs)
            if total is None or total != 1:
                raise ValueError(f"(CL2) violated at iota={mask:0b}")

    def weight(self, j: int, mask: int):
        return self.omega.get((j, mask), Fraction(0))

    def to_json_obj(self):
        rows = []
        for (j, mask) in sorted(self.omega):
            c = self.omega[(j, mask)]
            if isinstance(c, TPoly):
                cval = ["/".join((str(x.numerator), str(x.denominator)))
                        for x in c.coeffs]
            else:
                cval = f"{c.numerator}/{c.denominator}"
            rows.append({"j": j,
                         "iota": "".join("1" if mask >> h & 1 else "0"
                                         for h in range(self.n)),
                         "c": cval})
        return {"n": self.n, "omega": rows}

    @classmethod
    def from_json_obj(cls, obj, t_order: int | None = None):
        n = int(obj["n"])
        omega = {}
        for row in obj["omega"]:
            mask = 0
            for h, b in enumerate(row["iota"]):
                if b == "1":
                    mask |= 1 << h
            c = row["c"]
            if isinstance(c, list):
                omega[(int(row["j"]), mask)] = TPoly(
                    [Fraction(x) for x in c],
                    t_order if t_order is not None else len(c) - 1)
            else:
                omega[(int(row["j"]), mask)] = Fraction(c)
        return cls(n, omega)


def _min_supp(mask: int) -> int:
    return (mask & -mask).bit_length()


def _max_supp(mask: int) -> int:
    return mask.bit_length()


def connection_data_gs(n: int) -> ConnectionData:
    """All weight on the lowest index of the sector support."""
    omega = {}
    for mask in range(1, 1 << n):
        omega[(_min_supp(mask), mask)] = Fraction(1)
    return ConnectionData(n, omega)


def connection_data_gs_reverse(n: int) -> ConnectionData:
    """All weight on the highest index; the t -> infinity closure point."""
    omega = {}
    for mask in range(1, 1 << n):
        omega[(_max_supp(mask), mask)] = Fraction(1)
    return ConnectionData(n, omega)


def connection_data_sy(n: int) -> ConnectionData:
    """Democratic weights iota_j / |iota|."""
    omega = {}
    for mask in range(1, 1 << n):
        size = mask.bit_count()
        for j in range(1, n + 1):
            if mask >> (j - 1) & 1:
                omega[(j, mask)] = Fraction(1, size)
    return ConnectionData(n, omega)


def connection_data_weighted(weights) -> ConnectionData:
    """omega_j^iota = w_j iota_j / sum_h w_h iota_h for positive rational w."""
    w = [x if isinstance(x, Fraction) else Fraction(x) for x in weights]
    if any(x <= 0 for x in w):
        raise NonPositiveWeight(str(weights))
    n = len(w)
    omega = {}
    for mask in range(1, 1 << n):
        denom = sum(w[j - 1] for j in range(1, n + 1) if mask >> (j - 1) & 1)
        for j in range(1, n + 1):
            if mask >> (j - 1) & 1:
                omega[(j, mask)] = w[j - 1] / denom
    return ConnectionData(n, omega)


def connection_data_gs_t(n: int, t) -> ConnectionData:
    """The weight family w = (1, t, ..., t^{n-1}).

    Written in the normalized form omega_j^iota = t^{j-m} / (1 + sum t^{h-m})
    with m the lowest support index, which is regular at t = 0 (giving the
    lowest-index data) and equals the democratic data at t = 1. Accepts an
    exact rational t or a TPoly for series-in-t weights.
    """
    series = isinstance(t, TPoly)
    if not series:
        t = t if isinstance(t, Fraction) else Fraction(t)
    omega = {}
    for mask in range(1, 1 << n):
        m = _min_supp(mask)
        supp = [h for h in range(1, n + 1) if mask >> (h - 1) & 1]
        if series:
            denom = TPoly.const(1, t.order)
            for h in supp:
                if h != m:
                    denom = denom + _tpow(t, h - m)
            dinv = denom.inverse()
            for j in supp:
                omega[(j, mask)] = _tpow(t, j - m) * dinv
        else:
            denom = sum((t ** (h - m) for h in supp), Fraction(0))
            if denom == 0:
                raise ValueError(f"degenerate weights at t={t}")
            for j in supp:
                omega[(j, mask)] = t ** (j - m) / denom
    return ConnectionData(n, omega)


def _tpow(t: TPoly, k: int) -> TPoly:
    out = TPoly.const(1, t.order)
    for _ in range(k):
        out = out * t
    return out


# connection application -------------------------------------------------------------

def _apply_weight(c, comp):
    if isinstance(c, TPoly):
        if is_matrix(comp):
            raise DomainError("series weights need the formal backend")
        return FormalElement.from_tpoly(c, comp.ctx) @ comp
    return elem_scale(c, comp)


def connection_apply(data: ConnectionData, r_tuple, q: CliffordSystem):
    """Pi^omega_Q R = (1/2) sum_{j,iota} omega_j^iota (R/Q)_j^iota.

    Satisfies (CN1) Pi_Q Q = 0 (the zero sector carries no weight) and (Conn)
    Pi_Q((ad' Q) X) = X on normalized X; all valid data agree on tangent
    reconstructions, which is what makes the minimal lift well defined.
    """
    if data.n != q.n:
        raise ValueError("rank mismatch")
    bases = list(q)
    out = None
    for j in range(1, q.n + 1):
        z = r_tuple[j - 1] @ q.inv(j - 1)
        comps = sector_split(z, bases)
        for mask in range(1, 1 << q.n):
            c = data.weight(j, mask)
            if _coeff_is_zero(c):
                continue
            term = _apply_weight(c, comps[mask])
            out = term if out is None else out + term
    if out is None:
        out = elem_scale(0, q[0])
    return elem_scale(Fraction(1, 2), out)


def connection_apply_floating(data: ConnectionData, r_tuple,
                              q: FloatingSystem) -> FPair:
    """Floating connection value as a pair.

    Pi^{f omega}_Q R = ( (1/2) sum omega_j^iota (R/Q)_j^{f iota},
                         (1/2) sum omega_j^iota (Q\\R)_j^{f iota} ).

    With these halves the reconstruction identity ad_f(Pi(r), q) = r holds
    exactly on tangent data, and Pi applied to Q itself gives (1/2, 1/2);
    fixed-point conditions are therefore always used in the residual form
    Pi(A - Q) = 0.
    """
    if data.n != q.n:
        raise ValueError("rank mismatch")
    n = q.n
    k = q.anchor
    ratios = q.ratios()
    positions = q.ratio_positions()
    fm = full_mask(n)
    left = None
    right = None
    for j in range(1, n + 1):
        z = r_tuple[j - 1] @ q.inv(j - 1)
        comps = sector_split(z, ratios)
        cls_weight = {}
        for mask in range(1 << n):
            rep = class_rep(mask, n, k)
            c = data.weight(j, mask)
            if _coeff_is_zero(c):
                continue
            cls_weight[rep] = cls_weight.get(rep, Fraction(0)) + c
        for rep, c in cls_weight.items():
            if _coeff_is_zero(c):
                continue
            smask = 0
            for bit, h in enumerate(positions):
                if rep >> (h - 1) & 1:
                    smask |= 1 << bit
            lcomp = comps[smask]
            rcomp = q.inv(j - 1) @ lcomp @ q.els[j - 1]
            lterm = _apply_weight(c, lcomp)
            rterm = _apply_weight(c, rcomp)
            left = lterm if left is None else left + lterm
            right = rterm if right is None else right + rterm
    if left is None:
        left = elem_scale(0, q[0])
        right = elem_scale(0, q[0])
    half = Fraction(1, 2)
    return FPair(elem_scale(half, left), elem_scale(half, right))


def connection_eta(eta, q, r_tuple, floating: bool = False):
    """Connection from a symmetric positive definite eta.

    Exact diagonal eta reduces to the weighted data with w = diag(eta). A
    non-diagonal eta is handled on the matrix backend by the orthogonal
    change of tuple Q'_a = sum_h U_{ha} Q_h that diagonalizes eta (the
    connection value is invariant under that rewriting); exactness on the
    formal backend is only available for diagonal eta.
    """
    n = q.n
    eta_rows = [[Fraction(x) if not isinstance(x, float) else x
                 for x in row] for row in eta]
    for i in range(n):
        for j in range(n):
            if eta_rows[i][j] != eta_rows[j][i]:
                raise EtaNotSPD("eta is not symmetric")
    diagonal = all(i == j or not eta_rows[i][j]
                   for i in range(n) for j in range(n))
    if diagonal:
        w = [eta_rows[i][i] for i in range(n)]
        if any(x <= 0 for x in w):
            raise EtaNotSPD("diagonal entries must be positive")
        data = connection_data_weighted(w)
        if floating:
            return connection_apply_floating(data, r_tuple, q)
        return connection_apply(data, r_tuple, q)
    if not is_matrix(q[0]):
        raise DomainError("non-diagonal eta needs the matrix backend")
    em = np.array([[float(x) for x in row] for row in eta_rows])
    vals, vecs = np.linalg.eigh(em)
    if min(vals) <= 0:
        raise EtaNotSPD(f"eigenvalues {vals}")
    qp = tuple(sum(vecs[h, a] * q[h] for h in range(n)) for a in range(n))
    rp = tuple(sum(vecs[h, a] * r_tuple[h] for h in range(n))
               for a in range(n))
    data = connection_data_weighted([Fraction(v).limit_denominator(10 ** 12)
                                     for v in vals])
    if floating:
        qf = FloatingSystem(qp, anchor=q.anchor if isinstance(q, FloatingSystem) else 1)
        return connection_apply_floating(data, rp, qf)
    return connection_apply(data, rp, CliffordSystem(qp))


def minimal_lift(q, r_tangent, tol: float = 1e-8):
    """(ad' Q)^{-1} on tangent tuples, via the lowest-index data.

    Any valid weight data gives the same value on tangent inputs, so the
    choice here is arbitrary; tangency is enforced first.
    """
    ok, res = is_tangent(q, r_tangent, tol)
    if not ok:
        raise NotTangent(f"residual {res:.3e}")
    data = connection_data_gs(q.n)
    if isinstance(q, FloatingSystem):
        return connection_apply_floating(data, r_tangent, q)
    return connection_apply(data, r_tangent, q)


# fixed-point predicates ----------------------------------------------------------

def lemma_mtc_residual(a_tuple, q) -> float:
    acc = None
    for i in range(q.n):
        term = a_tuple[i] @ q[i] - q[i] @ a_tuple[i]
        acc = term if acc is None else acc + term
    return residual_norm(acc)


def lemma_mti_residual(a_tuple, q) -> float:
    one = elem_one(q[0])
    n = q.n
    s1 = None
    s2 = None
    for i in range(n):
        qi = q.inv(i)
        t1 = a_tuple[i] @ qi
        t2 = qi @ a_tuple[i]
        s1 = t1 if s1 is None else s1 + t1
        s2 = t2 if s2 is None else s2 + t2
    return max(residual_norm(s1 - elem_scale(n, one)),
               residual_norm(s2 - elem_scale(n, one)))


def fixed_point_predicate(kind: str, a_tuple, q, weights=None, eta=None,
                          tol: float = 1e-8):
    """(ok, residual) for the closed-form fixed point conditions.

    kinds: gs, fgs, sy, fsy, w, fw, eta, feta. Each is the hands-on form of
    "the connection residual vanishes" for the matching weight data; the
    equivalence is exercised in the test suite.
    """
    one = elem_one(q[0])
    n = q.n
    worst = 0.0
    if kind == "gs":
        for k in range(1, n + 1):
            acc = a_tuple[k - 1]
            for h in range(1, k + 1):
                acc = symmetrize(acc, q[h - 1], 1)
            worst = max(worst, residual_norm(acc))
    elif kind == "fgs":
        # A_1 pinned; for k >= 2 the all-alternating projection onto the
        # ratio elements G_2..G_k must kill the ratio A_k Q_1^{-1}. This is
        # exactly the plain "gs" condition one level down, where the inputs
        # are the ratios and the bases are the orthogonalized ratios.
        worst = residual_norm(a_tuple[0] - q[0])
        inv1 = q.inv(0)
        for k in range(2, n + 1):
            acc = a_tuple[k - 1] @ inv1
            for h in range(2, k + 1):
                g = q[h - 1] @ inv1
                acc = symmetrize(acc, g, 1)
            worst = max(worst, residual_norm(acc))
    elif kind == "sy":
        worst = lemma_mtc_residual(a_tuple, q)
    elif kind == "fsy":
        worst = lemma_mti_residual(a_tuple, q)
    elif kind == "w":
        w = [Fraction(x) for x in weights]
        acc = None
        for i in range(n):
            term = elem_scale(w[i], a_tuple[i] @ q[i] - q[i] @ a_tuple[i])
            acc = term if acc is None else acc + term
        worst = residual_norm(acc)
    elif kind == "fw":
        w = [Fraction(x) for x in weights]
        total = sum(w, Fraction(0))
        s1 = None
        s2 = None
        for i in range(n):
            qi = q.inv(i)
            t1 = elem_scale(w[i], a_tuple[i] @ qi)
            t2 = elem_scale(w[i], qi @ a_tuple[i])
            s1 = t1 if s1 is None else s1 + t1
            s2 = t2 if s2 is None else s2 + t2
        worst = max(residual_norm(s1 - elem_scale(total, one)),
                    residual_norm(s2 - elem_scale(total, one)))
    elif kind == "eta":
        acc = None
        for i in range(n):
            for j in range(n):
                c = eta[i][j]
                if not c:
                    continue
                term = elem_scale(c, a_tuple[j] @ q[i] - q[i] @ a_tuple[j])
                acc = term if acc is None else acc + term
        worst = residual_norm(acc)
    elif kind == "feta":
        trace = sum((eta[i][i] for i in range(n)), Fraction(0))
        s1 = None
        s2 = None
        for i in range(n):
            qi = q.inv(i)
            for j in range(n):
                c = eta[i][j]
                if not c:
                    continue
                t1 = elem_scale(c, a_tuple[j] @ qi)
                t2 = elem_scale(c, qi @ a_tuple[j])
                s1 = t1 if s1 is None else s1 + t1
                s2 = t2 if s2 is None else s2 + t2
        worst = max(residual_norm(s1 - elem_scale(trace, one)),
                    residual_norm(s2 - elem_scale(trace, one)))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    exact = not is_matrix(q[0])
    ok = worst == 0.0 if exact else worst <= tol
    return ok, worst

"""Exact formal backend.

The working ring is the free unital algebra over Q (the rationals) generated
by n anticommuting skew-involutions Q_1..Q_n (degree 0), one central parameter
t (optional), and "letters" r_(j,iota) of degree 1. A letter stands for the
iota-component of the j-th perturbation ratio: it is free against other
letters, and commutes with the generators up to sign,

    r_(j,iota) Q_h = (-1)^(iota_h) Q_h r_(j,iota),

which is exactly how a conjugation-sector component behaves. Everything is
truncated: words keep at most deg_cap letters (plus t-powers when t carries
weight 1) and at most t_cap powers of t.

Normal form: every monomial is written as  t^p * (letters, in order) * Q^kappa
with kappa a subset mask and the Q-factors ascending. mono_mul computes the
sign picked up by reordering.

Bit conventions: iota and kappa masks use bit (h-1) for index h, so iota_1 is
the least significant bit. Table/serialization order follows letter_index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    BadDecomposition,
    BadLeadingTerm,
    NonNilpotentArgument,
    RelationViolation,
    SingularLeadingTerm,
)
from .series import TPoly


@dataclass(frozen=True)
class Context:
    """Shared truncation data for a family of elements."""
    n: int
    deg_cap: int = 3
    t_cap: int = 0
    t_weight: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need n >= 1")
        if self.t_weight not in (0, 1):
            raise ValueError("t carries weight 0 or 1")


# A word is (tpow, rletters, qmask); rletters is a tuple of (j, iota_mask).
WORD_ONE = (0, (), 0)


def _inv_count(k1: int, k2: int) -> int:
    """Inversions between ascending generator lists of masks k1, k2."""
    total = 0
    m = k2
    while m:
        low = m & -m
        l = low.bit_length() - 1
        total += (k1 >> (l + 1)).bit_count()
        m ^= low
    return total


def mono_mul(w1, w2, ctx: Context):
    """Product of two normal-form words. Returns (sign, word) or None.

    None means the product fell past the truncation caps.
    """
    t1, let1, q1 = w1
    t2, let2, q2 = w2
    tpow = t1 + t2
    if ctx.t_cap >= 0 and tpow > ctx.t_cap:
        return None
    deg = len(let1) + len(let2) + ctx.t_weight * tpow
    if deg > ctx.deg_cap:
        return None
    sign = 1
    # move Q^q1 to the right, past the letters of w2
    if q1:
        for (_, iota) in let2:
            if (q1 & iota).bit_count() & 1:
                sign = -sign
    # merge the two Q parts
    if q1 and q2:
        if (_inv_count(q1, q2) + (q1 & q2).bit_count()) & 1:
            sign = -sign
    return sign, (tpow, let1 + let2, q1 ^ q2)


def letter_index(j: int, iota_mask: int, n: int) -> int:
    """1-based position of the letter (j, iota) in table order.

    Letters are grouped by j; within a group, iota counts in binary with
    iota_1 as the most significant digit. At n=2 this is the order
    (1,00),(1,01),(1,10),(1,11),(2,00),...
    """
    rev = 0
    for h in range(n):
        if iota_mask >> h & 1:
            rev |= 1 << (n - 1 - h)
    return (j - 1) * (1 << n) + rev + 1


def letter_from_index(idx: int, n: int):
    j, rev = divmod(idx - 1, 1 << n)
    mask = 0
    for h in range(n):
        if rev >> (n - 1 - h) & 1:
            mask |= 1 << h
    return j + 1, mask


def _mask_bits(mask: int, n: int) -> str:
    return "".join("1" if mask >> h & 1 else "0" for h in range(n))


def _bits_mask(bits: str) -> int:
    mask = 0
    for h, b in enumerate(bits):
        if b == "1":
            mask |= 1 << h
    return mask


class FormalElement:
    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: Context, terms=None):
        self.ctx = ctx
        self.terms = {}
        if terms:
            for w, c in terms.items():
                if c:
                    self.terms[w] = c

    # construction -----------------------------------------------------

    @classmethod
    def zero(cls, ctx):
        return cls(ctx)

    @classmethod
    def scalar(cls, c, ctx):
        c = c if isinstance(c, Fraction) else Fraction(c)
        return cls(ctx, {WORD_ONE: c}) if c else cls(ctx)

    @classmethod
    def one(cls, ctx):
        return cls.scalar(1, ctx)

    @classmethod
    def q_gen(cls, i: int, ctx):
        if not 1 <= i <= ctx.n:
            raise ValueError("generator index out of range")
        return cls(ctx, {(0, (), 1 << (i - 1)): Fraction(1)})

    @classmethod
    def q_mask(cls, mask: int, ctx):
        return cls(ctx, {(0, (), mask): Fraction(1)})

    @classmethod
    def letter(cls, j: int, iota_mask: int, ctx):
        if not 1 <= j <= ctx.n or not 0 <= iota_mask < (1 << ctx.n):
            raise ValueError("letter index out of range")
        return cls(ctx, {(0, ((j, iota_mask),), 0): Fraction(1)})

    @classmethod
    def t_var(cls, ctx):
        if ctx.t_cap < 1:
            raise ValueError("context has no t variable")
        return cls(ctx, {(1, (), 0): Fraction(1)})

    @classmethod
    def from_tpoly(cls, tp: TPoly, ctx):
        terms = {}
        for p, c in enumerate(tp.coeffs):
            if c and p <= ctx.t_cap:
                terms[(p, (), 0)] = c
        return cls(ctx, terms)

    def copy(self):
        return FormalElement(self.ctx, dict(self.terms))

    # ring operations ----------------------------------------------------

    def _check(self, other):
        if self.ctx != other.ctx:
            raise ValueError("mixed contexts")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FormalElement.scalar(other, self.ctx)
        self._check(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            s = out.get(w, Fraction(0)) + c
            if s:
                out[w] = s
            else:
                out.pop(w, None)
        return FormalElement(self.ctx, out)

    __radd__ = __add__

    def __neg__(self):
        return FormalElement(self.ctx, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FormalElement.scalar(other, self.ctx)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        """Scalar multiple; use @ for the ring product."""
        if isinstance(c, FormalElement):
            raise TypeError("use @ for the ring product")
        c = c if isinstance(c, Fraction) else Fraction(c)
        if not c:
            return FormalElement(self.ctx)
        return FormalElement(self.ctx, {w: c * v for w, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = c if isinstance(c, Fraction) else Fraction(c)
        return self * (Fraction(1) / c)

    def __matmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        self._check(other)
        ctx = self.ctx
        out = {}
        # bucket the right factor by letter count so deep words skip early
        by_deg = {}
        for w, c in other.terms.items():
            by_deg.setdefault(len(w[1]) + ctx.t_weight * w[0], []).append((w, c))
        for w1, c1 in self.terms.items():
            d1 = len(w1[1]) + ctx.t_weight * w1[0]
            for d2, bucket in by_deg.items():
                if d1 + d2 > ctx.deg_cap:
                    continue
                for w2, c2 in bucket:
                    r = mono_mul(w1, w2, ctx)
                    if r is None:
                        continue
                    sign, w = r
                    c = c1 * c2 if sign > 0 else -c1 * c2
                    s = out.get(w, Fraction(0)) + c
                    if s:
                        out[w] = s
                    else:
                        out.pop(w, None)
        return FormalElement(ctx, out)

    def __rmatmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = FormalElement.scalar(other, self.ctx)
        if not isinstance(other, FormalElement):
            return NotImplemented
        return self.ctx == other.ctx and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def __hash__(self):
        raise TypeError("unhashable")

    # structure ----------------------------------------------------------

    def letter_degree(self, w) -> int:
        return len(w[1]) + self.ctx.t_weight * w[0]

    def min_degree(self) -> int:
        """Smallest filtration degree present; deg_cap+1 when zero."""
        if not self.terms:
            return self.ctx.deg_cap + 1
        return min(self.letter_degree(w) for w in self.terms)

    def degree_part(self, d: int):
        return FormalElement(
            self.ctx,
            {w: c for w, c in self.terms.items() if self.letter_degree(w) == d})

    def head(self):
        """Strict scalar head: no letters, no t. A member of the 2^n-dim base."""
        return FormalElement(
            self.ctx, {w: c for w, c in self.terms.items()
                       if not w[1] and w[0] == 0})

    def positive_part(self):
        return FormalElement(
            self.ctx, {w: c for w, c in self.terms.items()
                       if w[1] or w[0] != 0})

    def t_coefficient(self, p: int):
        """Element multiplying t^p (with the t factor stripped)."""
        out = {}
        for (tp, let, q), c in self.terms.items():
            if tp == p:
                out[(0, let, q)] = c
        ctx0 = Context(self.ctx.n, self.ctx.deg_cap, 0, 0)
        return FormalElement(ctx0, out)

    def eval_t(self, tval):
        """Substitute a rational value for t."""
        tval = tval if isinstance(tval, Fraction) else Fraction(tval)
        out = {}
        ctx0 = Context(self.ctx.n, self.ctx.deg_cap, 0, 0)
        for (tp, let, q), c in self.terms.items():
            w = (0, let, q)
            s = out.get(w, Fraction(0)) + c * tval ** tp
            if s:
                out[w] = s
            else:
                out.pop(w, None)
        return FormalElement(ctx0, out)

    def in_context(self, ctx2: Context):
        """The same element viewed in a compatible (wider) context."""
        if ctx2.n != self.ctx.n:
            raise ValueError("generator count differs")
        out = {}
        for (tp, let, q), c in self.terms.items():
            if tp > ctx2.t_cap or len(let) + ctx2.t_weight * tp > ctx2.deg_cap:
                raise ValueError("term does not fit the target truncation")
            out[(tp, let, q)] = c
        return FormalElement(ctx2, out)

    # analytic-style operations -------------------------------------------

    def _head_matrix(self):
        """Left-multiplication matrix of the head on the Q^kappa basis."""
        n = self.ctx.n
        dim = 1 << n
        cols = [[Fraction(0)] * dim for _ in range(dim)]
        for w, c in self.head().terms.items():
            _, _, q1 = w
            for kappa in range(dim):
                r = mono_mul((0, (), q1), (0, (), kappa), self.ctx)
                sign, (_, _, qout) = r
                cols[kappa][qout] += c if sign > 0 else -c
        # rows[i][j] = coefficient of basis i in head * basis j
        return [[cols[j][i] for j in range(dim)] for i in range(dim)]

    def inverse(self):
        """Two-sided inverse. Needs an invertible head."""
        n = self.ctx.n
        dim = 1 << n
        mat = self._head_matrix()
        rhs = [Fraction(0)] * dim
        rhs[0] = Fraction(1)
        sol = _solve_fraction(mat, rhs)
        if sol is None:
            raise SingularLeadingTerm("head is not invertible")
        y0 = FormalElement(
            self.ctx,
            {(0, (), kappa): c for kappa, c in enumerate(sol) if c})
        # x = head + rest; y0 head = 1, so z := 1 - y0 x is nilpotent
        z = FormalElement.one(self.ctx) - (y0 @ self)
        acc = FormalElement.one(self.ctx)
        term = FormalElement.one(self.ctx)
        cap = self.ctx.deg_cap + self.ctx.t_cap + 1
        for _ in range(cap):
            term = term @ z
            if not term:
                break
            acc = acc + term
        return acc @ y0

    def exp(self):
        if self.head():
            raise NonNilpotentArgument("exp needs a degree >= 1 argument")
        acc = FormalElement.one(self.ctx)
        term = FormalElement.one(self.ctx)
        k = 0
        cap = self.ctx.deg_cap + self.ctx.t_cap + 1
        while True:
            k += 1
            if k > cap:
                break
            term = (term @ self) / k
            if not term:
                break
            acc = acc + term
        return acc

    def inv_sqrt(self):
        """(1 + T)^{-1/2} for T of degree >= 1."""
        if self.head() != FormalElement.one(self.ctx):
            raise BadLeadingTerm("inverse square root needs head 1")
        t = self - 1
        acc = FormalElement.one(self.ctx)
        term = FormalElement.one(self.ctx)
        coeff = Fraction(1)
        cap = self.ctx.deg_cap + self.ctx.t_cap + 1
        for r in range(1, cap + 1):
            coeff = coeff * (Fraction(-1, 2) - (r - 1)) / r
            term = term @ t
            if not term:
                break
            acc = acc + term * coeff
        return acc

    # serialization --------------------------------------------------------

    def to_entries(self, max_degree=None):
        n = self.ctx.n
        rows = []
        for (tp, let, q), c in self.terms.items():
            d = len(let) + self.ctx.t_weight * tp
            if max_degree is not None and d > max_degree:
                continue
            rows.append({
                "t": tp,
                "r": [[j, _mask_bits(m, n)] for j, m in let],
                "q": _mask_bits(q, n),
                "c": f"{c.numerator}/{c.denominator}",
            })
        rows.sort(key=lambda e: (len(e["r"]), e["t"], e["r"], e["q"]))
        return rows

    @classmethod
    def from_entries(cls, rows, ctx):
        terms = {}
        for e in rows:
            let = tuple((int(j), _bits_mask(b)) for j, b in e.get("r", []))
            w = (int(e.get("t", 0)), let, _bits_mask(e.get("q", "0" * ctx.n)))
            terms[w] = Fraction(e["c"])
        return cls(ctx, terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for (tp, let, q), c in sorted(
                self.terms.items(),
                key=lambda item: (len(item[0][1]), item[0][0], item[0][1], item[0][2])):
            parts = [str(c)]
            if tp:
                parts.append(f"t^{tp}" if tp > 1 else "t")
            for j, m in let:
                parts.append(f"r({j},{_mask_bits(m, self.ctx.n)})")
            if q:
                parts.append("".join(
                    f"Q{h + 1}" for h in range(self.ctx.n) if q >> h & 1))
            bits.append("*".join(parts))
        return " + ".join(bits)


def _solve_fraction(mat, rhs):
    """Gaussian elimination over Fraction. Returns None when singular."""
    dim = len(rhs)
    a = [list(row) + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(dim):
        piv = next((r for r in range(col, dim) if a[r][col]), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(dim):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][dim] for r in range(dim)]


# spec-level operation names ------------------------------------------------

def exp_formal(x: FormalElement) -> FormalElement:
    return x.exp()


def inv_sqrt_formal(x: FormalElement) -> FormalElement:
    return x.inv_sqrt()


def pol_formal(a: FormalElement, base: int | None = None) -> FormalElement:
    """a (-a^2)^{-1/2} for a whose head is a skew-involution.

    When base = k is given, the head must be exactly Q_k (the staged
    orthogonalization uses that form); otherwise any head with head^2 = -1
    is accepted.
    """
    h0 = a.head()
    if h0 @ h0 != FormalElement.scalar(-1, a.ctx):
        raise BadDecomposition("head does not square to -1")
    if base is not None and h0 != FormalElement.q_gen(base, a.ctx):
        raise BadDecomposition(f"head is not the stated base Q_{base}")
    return a @ (-(a @ a)).inv_sqrt()


class CoeffTable:
    """Expansion coefficients of an n-tuple around the generator base.

    Every component decomposes into words  letters * Q^kappa * Q_k; the entry
    at (k, letters, kappa) is that word's coefficient in the k-th component.
    The kappa = 0 slice at n = 2 is the P_r^[k] matrix family, indexed by
    letter_index. Entries are Fractions, or TPoly when the source carried a
    weight-0 parameter t.
    """

    def __init__(self, n: int, max_r: int, entries: dict, t_order: int = 0):
        self.n = n
        self.max_r = max_r
        self.t_order = t_order
        self.entries = dict(entries)

    def coeff(self, k: int, letters=(), kappa: int = 0):
        zero = TPoly.const(0, self.t_order) if self.t_order else Fraction(0)
        return self.entries.get((k, tuple(letters), kappa), zero)

    def dense(self, k: int, r: int):
        """P_r^[k]: nested lists over the full letter enumeration, kappa=0."""
        m = self.n * (1 << self.n)

        def build(prefix, depth):
            if depth == 0:
                return self.coeff(k, prefix)
            return [build(prefix + (letter_from_index(i, self.n),), depth - 1)
                    for i in range(1, m + 1)]

        if r == 0:
            return [self.coeff(k, ())]
        return build((), r)

    def kappa_support(self):
        """Entry keys with kappa != 0; empty for results of (vL) operations."""
        return sorted((k, let, q) for (k, let, q), c in self.entries.items()
                      if q and c != 0)

    def eval_t(self, tval):
        if not self.t_order:
            return self
        out = {key: c.eval(tval) for key, c in self.entries.items()}
        return CoeffTable(self.n, self.max_r, out, 0)

    def _ser_coeff(self, c):
        if isinstance(c, TPoly):
            return [f"{x.numerator}/{x.denominator}" for x in c.coeffs]
        return f"{c.numerator}/{c.denominator}"

    def to_json_obj(self):
        tables = {}
        for (k, let, q), c in self.entries.items():
            key = f"{k},{len(let)}"
            tables.setdefault(key, []).append({
                "r": [[j, _mask_bits(mm, self.n)] for j, mm in let],
                "q": _mask_bits(q, self.n),
                "c": self._ser_coeff(c),
            })
        for rows in tables.values():
            rows.sort(key=lambda e: (e["r"], e["q"]))
        return {"n": self.n, "max_r": self.max_r, "t_order": self.t_order,
                "tables": tables}

    @classmethod
    def from_json_obj(cls, obj):
        n = int(obj["n"])
        t_order = int(obj.get("t_order", 0))
        entries = {}
        for key, rows in obj["tables"].items():
            k = int(key.split(",")[0])
            for e in rows:
                let = tuple((int(j), _bits_mask(b)) for j, b in e.get("r", []))
                q = _bits_mask(e.get("q", "0" * n))
                c = e["c"]
                if isinstance(c, list):
                    val = TPoly([Fraction(x) for x in c], t_order)
                else:
                    val = Fraction(c)
                entries[(k, let, q)] = val
        return cls(n, int(obj.get("max_r", 0)), entries, t_order)

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_json_obj(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, CoeffTable):
            return NotImplemented
        keys = set(self.entries) | set(other.entries)
        return (self.n == other.n and self.t_order == other.t_order and
                all(self.coeff(k, let, q) == other.coeff(k, let, q)
                    for k, let, q in keys))


def extract_coeff_table(es, max_degree: int) -> CoeffTable:
    """Read off the coefficient tables of an n-tuple of FormalElements.

    Each component is right-divided by its base generator, so the keys list
    the letters and the interior Q^kappa mask only.
    """
    es = tuple(es)
    ctx = es[0].ctx
    n = ctx.n
    has_t = any(tp for e in es for (tp, _l, _q) in e.terms)
    t_order = ctx.t_cap if has_t else 0
    entries = {}
    for k, e in enumerate(es, start=1):
        f = e @ (-FormalElement.q_gen(k, ctx))
        per = {}
        for (tp, let, q), c in f.terms.items():
            if len(let) > max_degree:
                continue
            per.setdefault((let, q), {})[tp] = c
        for (let, q), tps in per.items():
            if t_order:
                entries[(k, let, q)] = TPoly(
                    [tps.get(p, Fraction(0)) for p in range(t_order + 1)],
                    t_order)
            else:
                entries[(k, let, q)] = tps[0]
    return CoeffTable(n, max_degree, entries, t_order)


def coeff_table_json(es, max_degree: int) -> str:
    return extract_coeff_table(es, max_degree).to_json()


def eval_into_matrices(e: FormalElement, assignment: dict,
                       rel_tol: float = 1e-8, t_value: float | None = None):
    """Evaluate on concrete matrices.

    assignment maps ("q", i) and ("r", j, iota_mask) to square arrays. The
    normal form was computed with the generator relations and the letter sign
    commutation, so those relations are verified on the assignment first;
    otherwise the value would depend on the rewriting history.
    """
    n = e.ctx.n
    qs = {}
    for i in range(1, n + 1):
        if ("q", i) not in assignment:
            raise KeyError(f"assignment missing generator {i}")
        qs[i] = np.asarray(assignment[("q", i)], dtype=float)
    d = qs[1].shape[0]
    eye = np.eye(d)
    scale = max(max(float(np.linalg.norm(m, "fro")) for m in qs.values()), 1.0)
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            lhs = qs[i] @ qs[j] + qs[j] @ qs[i]
            if i == j:
                lhs = lhs + 2.0 * eye
            res = float(np.linalg.norm(lhs, "fro"))
            if res > rel_tol * scale * scale:
                raise RelationViolation(
                    f"Q_{i} Q_{j} + Q_{j} Q_{i} = -2 delta", res)
    letters = {}
    for key, val in assignment.items():
        if isinstance(key, tuple) and key[0] == "r":
            _, j, mask = key
            letters[(j, mask)] = np.asarray(val, dtype=float)
    for (j, mask), rmat in letters.items():
        rs = max(float(np.linalg.norm(rmat, "fro")), 1e-30)
        for h in range(1, n + 1):
            sgn = -1.0 if mask >> (h - 1) & 1 else 1.0
            lhs = rmat @ qs[h] - sgn * qs[h] @ rmat
            res = float(np.linalg.norm(lhs, "fro"))
            if res > rel_tol * rs * scale:
                raise RelationViolation(
                    f"r({j},{_mask_bits(mask, n)}) Q_{h} commutation", res)
    out = np.zeros((d, d))
    for (tp, let, q), c in e.terms.items():
        if tp and t_value is None:
            raise ValueError("element contains t but no t_value given")
        m = eye.copy()
        for jl in let:
            if jl not in letters:
                raise KeyError(f"assignment missing letter {jl}")
            m = m @ letters[jl]
        for h in range(n):
            if q >> h & 1:
                m = m @ qs[h + 1]
        out = out + float(c) * (t_value ** tp if tp else 1.0) * m
    return out

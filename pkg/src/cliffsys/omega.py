"""General omega-orthogonalization over the formal backend.

Everything here rides on one mechanism: the Step iterator of a connection,
its exact fixed point, and the normal-form expansion of that fixed point
into coefficient tables.  On top sit the replay of free coefficient data
into custom operations, the conform extension, the structural property
report, and the t-deformation family connecting the Gram-Schmidt and
symmetric procedures.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.linalg import expm

from .errors import (ConformBaseNotFound, CostGuard, DomainError,
                     InadmissibleIndex)
from .formal import (CoeffTable, Context, FormalElement, _bits_mask,
                     _mask_bits, extract_coeff_table, letter_from_index)
from .geometry import (Ad, Ad_f, CliffordSystem, ConnectionData,
                       FloatingSystem, connection_apply,
                       connection_apply_floating, connection_data_gs_t,
                       decomp, elem_inv, elem_one, elem_scale, is_matrix)
from .gram_schmidt import ogs
from .series import TPoly


def _minsupp(mask: int) -> int:
    h = 1
    while not mask & 1:
        mask >>= 1
        h += 1
    return h


def letters_admissible(n: int) -> list:
    """Letters (j, iota) with iota = 0 or j != min supp(iota), in index order."""
    out = []
    for idx in range(1, n * (1 << n) + 1):
        j, mask = letter_from_index(idx, n)
        if mask == 0 or _minsupp(mask) != j:
            out.append((j, mask))
    return out


def letters_conform(n: int) -> list:
    """Conform letters: complement classes {iota, ~iota} with j outside the
    min supports of both members; one entry per class, keyed by the smaller
    mask."""
    fm = (1 << n) - 1
    out = []
    for j in range(1, n + 1):
        for mask in range(1 << n):
            comp = mask ^ fm
            if comp < mask:
                continue
            if mask and _minsupp(mask) == j:
                continue
            if comp and _minsupp(comp) == j:
                continue
            out.append((j, mask))
    return out


def generic_perturbation(ctx: Context) -> tuple:
    """Input hitting every sector once: A_j = Q_j + sum_iota r_j^iota Q_j.

    Tables extracted from an operation applied to this input display the
    operation's raw structure coefficients.
    """
    out = []
    for j in range(1, ctx.n + 1):
        qj = FormalElement.q_gen(j, ctx)
        acc = qj
        for mask in range(1 << ctx.n):
            acc = acc + FormalElement.letter(j, mask, ctx) @ qj
        out.append(acc)
    return tuple(out)


def _exp(x):
    return expm(x) if is_matrix(x) else x.exp()


def step(data: ConnectionData, a, q, floating: bool = False) -> tuple:
    """One sweep q -> (Ad exp Pi_q(a - q)) q."""
    a = tuple(a)
    q = tuple(q)
    r = tuple(x - y for x, y in zip(a, q))
    if floating:
        p = connection_apply_floating(data, r, FloatingSystem(q))
        return Ad_f(p.exp(), q)
    x = connection_apply(data, r, CliffordSystem(q))
    return Ad(_exp(x), q)


def o_omega(data: ConnectionData, a, floating: bool = False,
            iterations: int | None = None) -> tuple:
    """Exact fixed point of step over the formal backend.

    Each step pushes the connection residual up one filtration degree, so
    deg_cap iterations land exactly on the fixed point: the unique system
    with the same head, a - q of degree >= 1, and Pi-residual zero.
    """
    a = tuple(a)
    if is_matrix(a[0]):
        raise TypeError("o_omega is the formal fixed point; "
                        "matrix-scale iteration lives in the analytic front ends")
    its = a[0].ctx.deg_cap if iterations is None else iterations
    q = tuple(x.degree_part(0) for x in a)
    for _ in range(its):
        q = step(data, a, q, floating)
    return q


def extract_omega_tables(data: ConnectionData, n: int, max_r: int) -> CoeffTable:
    """Coefficient tables of the omega-orthogonalization, from the generic input."""
    if n > 3 or max_r > 3:
        raise CostGuard(f"table extraction is capped at n <= 3, max_r <= 3 "
                        f"(requested n={n}, max_r={max_r})")
    t_order = 0
    for c in data.omega.values():
        if isinstance(c, TPoly):
            t_order = max(t_order, c.order)
    ctx = Context(n, max_r, t_order, 0)
    q = o_omega(data, generic_perturbation(ctx))
    return extract_coeff_table(q, max_r)


# relabeling symmetry ----------------------------------------------------------

def _varpi_key(key):
    # swap the two generator roles everywhere: component, letter j, iota bits,
    # kappa bits (n = 2 only)
    k, word, kappa = key

    def fl(m):
        return ((m & 1) << 1) | (m >> 1 & 1)

    return (3 - k, tuple((3 - j, fl(m)) for j, m in word), fl(kappa))


def varpi_symmetry_check(table_pair, t) -> bool:
    """p^{[1]}(t) = p^{[2]}_{swapped}(1/t) for the n = 2 table family.

    `table_pair` holds the tables at parameters t and 1/t, already evaluated
    to rational entries; `t` itself is only echoed in error messages.
    """
    ta, tb = table_pair
    if ta.n != 2 or tb.n != 2:
        raise ValueError("the relabeling symmetry is an n = 2 statement")
    if ta.t_order or tb.t_order:
        raise ValueError(f"evaluate both tables at rational parameters "
                         f"(t={t}) before comparing")
    keys = set(ta.entries) | {_varpi_key(k) for k in tb.entries}
    for key in keys:
        k, word, kappa = key
        mk, mword, mkappa = _varpi_key(key)
        if ta.coeff(k, word, kappa) != tb.coeff(mk, mword, mkappa):
            return False
    return True


# free coefficient data --------------------------------------------------------

class FreeCoeffData:
    """Free coefficients of a formal FQ operation or orthogonalization.

    kind "op": entries keyed (k, word, kappa), word a tuple of (j, iota)
    letters, each with iota = 0 or j != min supp(iota).  kind "orth":
    entries keyed by the word alone, nonempty, letters admissible and the
    iota masks xoring to something nonzero.
    """

    def __init__(self, n: int, entries: dict, kind: str = "op"):
        if kind not in ("op", "orth"):
            raise ValueError("kind must be 'op' or 'orth'")
        self.n = int(n)
        self.kind = kind
        self.entries = {}
        for key, c in entries.items():
            key = self._norm_key(key)
            c = c if isinstance(c, Fraction) else Fraction(c)
            if c:
                self.entries[key] = c

    def _check_letter(self, j, mask):
        if not (1 <= j <= self.n and 0 <= mask < (1 << self.n)):
            raise InadmissibleIndex(f"letter ({j}, {mask}) out of range")
        if mask and _minsupp(mask) == j:
            raise InadmissibleIndex(
                f"letter ({j}, {mask}): j equals the minimal support index")

    def _norm_key(self, key):
        if self.kind == "op":
            k, word, kappa = key
            word = tuple((int(j), int(m)) for j, m in word)
            if not 1 <= k <= self.n:
                raise InadmissibleIndex(f"component {k} out of range")
            if not 0 <= kappa < (1 << self.n):
                raise InadmissibleIndex(f"kappa {kappa} out of range")
            for j, m in word:
                self._check_letter(j, m)
            return (int(k), word, int(kappa))
        word = tuple((int(j), int(m)) for j, m in key)
        if not word:
            raise InadmissibleIndex("orthogonalization words start at degree 1")
        x = 0
        for j, m in word:
            self._check_letter(j, m)
            x ^= m
        if x == 0:
            raise InadmissibleIndex("orthogonalization word with zero iota sum")
        return word

    @classmethod
    def unit(cls, n: int) -> "FreeCoeffData":
        """Degree-0 unit data: the operation that returns the GS base itself."""
        return cls(n, {(k, (), 0): Fraction(1) for k in range(1, n + 1)}, "op")

    @classmethod
    def from_table(cls, table: CoeffTable, kind: str = "op") -> "FreeCoeffData":
        """Admissible part of an extracted table.

        For operations in the GS gauge this is a complete set of free data:
        the remaining entries are forced.
        """
        if kind != "op":
            raise ValueError("only operation tables restrict this way")
        if table.t_order:
            raise ValueError("evaluate the table at a rational parameter first")
        ent = {}
        for (k, word, kappa), c in table.entries.items():
            if all(m == 0 or _minsupp(m) != j for j, m in word):
                ent[(k, word, kappa)] = c
        return cls(table.n, ent, "op")

    def _sort_key(self, key):
        if self.kind == "op":
            k, word, kappa = key
            return (k, len(word), word, kappa)
        return (len(key), key)

    def to_json_obj(self):
        rows = []
        for key in sorted(self.entries, key=self._sort_key):
            c = self.entries[key]
            row = {"c": f"{c.numerator}/{c.denominator}"}
            if self.kind == "op":
                k, word, kappa = key
                row["k"] = k
                row["r"] = [[j, _mask_bits(m, self.n)] for j, m in word]
                row["q"] = _mask_bits(kappa, self.n)
            else:
                row["r"] = [[j, _mask_bits(m, self.n)] for j, m in key]
            rows.append(row)
        return {"n": self.n, "kind": self.kind, "entries": rows}

    @classmethod
    def from_json_obj(cls, obj) -> "FreeCoeffData":
        n = int(obj["n"])
        kind = obj["kind"]
        ent = {}
        for row in obj["entries"]:
            word = tuple((int(j), _bits_mask(bits)) for j, bits in row["r"])
            num, den = row["c"].split("/")
            c = Fraction(int(num), int(den))
            if kind == "op":
                ent[(int(row["k"]), word, _bits_mask(row["q"]))] = c
            else:
                ent[word] = c
        return cls(n, ent, kind)

    def to_json(self) -> str:
        import json
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FreeCoeffData":
        import json
        return cls.from_json_obj(json.loads(text))

    def __eq__(self, other):
        return (isinstance(other, FreeCoeffData) and self.n == other.n
                and self.kind == other.kind and self.entries == other.entries)


def _qmask_prod(qs, kappa: int):
    out = elem_one(qs[0])
    h = 0
    while kappa:
        if kappa & 1:
            out = out @ qs[h]
        kappa >>= 1
        h += 1
    return out


def custom_fq_eval(p: FreeCoeffData, a, max_r: int) -> tuple:
    """Replay free coefficient data against the GS gauge of the input.

    Well defined because the gauge residual has no components at the
    excluded (min-support) letters, so the data determine the whole sum.
    """
    if p.kind != "op":
        raise InadmissibleIndex("operation data required")
    a = tuple(a)
    qs = ogs(a)
    csys = CliffordSystem(qs)
    rhat = tuple(x - y for x, y in zip(a, qs))
    need = {lt for (k, word, kappa) in p.entries if len(word) <= max_r
            for lt in word}
    sect = {(j, m): decomp(rhat, csys, j, m, "left") for (j, m) in need}
    out = []
    for k in range(1, p.n + 1):
        acc = None
        for (kk, word, kappa), c in p.entries.items():
            if kk != k or len(word) > max_r:
                continue
            term = _qmask_prod(qs, kappa) @ qs[k - 1]
            for lt in reversed(word):
                term = sect[lt] @ term
            term = elem_scale(c, term)
            acc = term if acc is None else acc + term
        out.append(acc if acc is not None else elem_scale(0, qs[k - 1]))
    return tuple(out)


def custom_orth_eval(p: FreeCoeffData, a, max_r: int) -> tuple:
    """Orthogonalization procedure from free data: conjugate the GS output by
    exp of each degree's generator, lowest degree outermost."""
    if p.kind != "orth":
        raise InadmissibleIndex("orthogonalization data required")
    a = tuple(a)
    qs = ogs(a)
    csys = CliffordSystem(qs)
    rhat = tuple(x - y for x, y in zip(a, qs))
    sect = {}
    gens = {}
    for word, c in p.entries.items():
        s = len(word)
        if s > max_r:
            continue
        term = None
        for lt in word:
            if lt not in sect:
                sect[lt] = decomp(rhat, csys, lt[0], lt[1], "left")
            term = sect[lt] if term is None else term @ sect[lt]
        term = elem_scale(c, term)
        gens[s] = term if s not in gens else gens[s] + term
    g = None
    for s in sorted(gens):
        e = _exp(gens[s])
        g = e if g is None else g @ e
    return Ad(g, qs) if g is not None else qs


# coefficient counting ---------------------------------------------------------

_KINDS = ("fq-op", "fq-op-vl", "fq-orth-vl-vc",
          "conform-op", "conform-op-vl", "conform-orth-vl-vc")


def _norm_kind(kind: str) -> str:
    k = kind.strip().lower().replace("_", "-").replace("′", "")
    k = k.replace("'", "")
    if k not in _KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {_KINDS}")
    return k


def coeff_count(n: int, r: int, kind: str) -> int:
    """Closed-form size of the free coefficient data at word length r."""
    kind = _norm_kind(kind)
    if n < 1 or r < 0:
        raise ValueError("need n >= 1 and r >= 0")
    big = 1 << n
    m = (n - 1) * big + 1
    mp = (n - 2) * (big >> 1) + 1
    if kind == "fq-op":
        return m ** r * big * n
    if kind == "fq-op-vl":
        return m ** r * n
    if kind == "fq-orth-vl-vc":
        num = (m ** r - 1) * (big - 1)
        assert num % big == 0
        return num // big
    if kind == "conform-op":
        return mp ** r * (big >> 1) * n
    if kind == "conform-op-vl":
        return mp ** r * n
    num = 2 * (mp ** r - 1) * (big - 1)
    assert num % big == 0
    return num // big + 1


def coeff_enumerate(n: int, r: int, kind: str) -> int:
    """The same sizes by direct enumeration of admissible index tuples."""
    kind = _norm_kind(kind)
    big = 1 << n
    fm = big - 1
    if kind.startswith("fq"):
        words = list(product(letters_admissible(n), repeat=r))
        if kind == "fq-op":
            return sum(1 for _ in product(range(1, n + 1), words, range(big)))
        if kind == "fq-op-vl":
            return sum(1 for _ in product(range(1, n + 1), words))
        total = 0
        for w in words:
            x = 0
            for _, mk in w:
                x ^= mk
            if x:
                total += 1
        return total
    words = list(product(letters_conform(n), repeat=r))
    if kind == "conform-op":
        return sum(1 for _ in product(range(1, n + 1), words, range(big >> 1)))
    if kind == "conform-op-vl":
        return sum(1 for _ in product(range(1, n + 1), words))
    # two sign branches per word, identified when the iota sum is a trivial
    # class (reachable from its own complement)
    total = 0
    for w in words:
        x = 0
        for _, mk in w:
            x ^= mk
        total += 1 if x in (0, fm) else 2
    return total


# conform extension ------------------------------------------------------------

def _scalar_of(e: FormalElement):
    if not e.terms:
        return Fraction(0)
    if len(e.terms) == 1:
        (w, c), = e.terms.items()
        if w == (0, (), 0):
            return c
    return None


def _rat_sqrt(b: Fraction):
    sp, sq = math.isqrt(b.numerator), math.isqrt(b.denominator)
    if sp * sp == b.numerator and sq * sq == b.denominator:
        return Fraction(sp, sq)
    return None


def _unit_normalize(e: FormalElement):
    # scale e to square -1, if its square is minus a rational square
    s = _scalar_of(e @ e)
    if s is None or s >= 0:
        return None
    rs = _rat_sqrt(-s)
    if rs is None:
        return None
    return e * (1 / rs)


def _nullspace(rows, ncols):
    mat = [list(r) for r in rows if any(r)]
    pivots = []
    r = 0
    for c in range(ncols):
        pr = next((i for i in range(r, len(mat)) if mat[i][c]), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        pv = mat[r][c]
        mat[r] = [x / pv for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c]:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    out = []
    for fc in (c for c in range(ncols) if c not in pivots):
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -mat[i][fc]
        out.append(v)
    return out


def _kernel_candidate(ratios, ctx):
    # exact anticommutant of the ratio heads inside the degree-0 algebra,
    # then look for a member with square minus a rational square
    nn = 1 << ctx.n
    basis = [FormalElement.q_mask(k, ctx) for k in range(nn)]
    rows = []
    for g in ratios:
        cols = []
        for e in basis:
            v = g @ e + e @ g
            coord = [Fraction(0)] * nn
            for (_tp, _let, qm), cc in v.terms.items():
                coord[qm] = cc
            cols.append(coord)
        for ri in range(nn):
            rows.append([cols[ci][ri] for ci in range(nn)])
    kernel = _nullspace(rows, nn)
    vecs = list(kernel)
    for i in range(len(kernel)):
        for j in range(i + 1, len(kernel)):
            vecs.append([x + y for x, y in zip(kernel[i], kernel[j])])
            vecs.append([x - y for x, y in zip(kernel[i], kernel[j])])
    for v in vecs:
        e = FormalElement(ctx, {(0, (), k): c for k, c in enumerate(v) if c})
        c = _unit_normalize(e)
        if c is not None:
            return c
    return None


def conform_extend(psi, a, base=None) -> tuple:
    """Extend a bivariant formal operation to floating-based inputs.

    Clifford-based inputs go straight through psi.  Otherwise a degree-0
    right translation theta is constructed that carries the input to a
    Clifford-based one, and the answer is pulled back: psi(a theta) theta^{-1}.
    Bivariance of psi makes the result independent of the choice.
    """
    a = tuple(a)
    if is_matrix(a[0]):
        raise TypeError("the conform extension is a formal construction")
    ctx = a[0].ctx
    n = ctx.n
    one = FormalElement.one(ctx)
    zero = FormalElement.zero(ctx)
    heads = [x.degree_part(0) for x in a]
    clifford = True
    for i in range(n):
        for j in range(i, n):
            acom = heads[i] @ heads[j] + heads[j] @ heads[i]
            want = one * Fraction(-2) if i == j else zero
            if acom != want:
                clifford = False
                break
        if not clifford:
            break
    if clifford:
        return tuple(psi(a))
    h1inv = heads[0].inverse()
    ratios = [h @ h1inv for h in heads[1:]]
    for i, g in enumerate(ratios):
        if g @ g != one * Fraction(-1):
            raise DomainError("heads are not a floating system (bad ratio square)")
        for g2 in ratios[i + 1:]:
            if g @ g2 + g2 @ g != zero:
                raise DomainError("heads are not a floating system (ratios do not anticommute)")

    def good(c):
        if c @ c != one * Fraction(-1):
            return False
        return all(not (c @ g + g @ c) for g in ratios)

    cands = []
    if base is not None:
        cands.append(base)
    h1n = _unit_normalize(heads[0])
    if h1n is not None:
        cands.append(h1n)
    for kappa in range(1, 1 << n):
        cands.append(FormalElement.q_mask(kappa, ctx))
    c = next((x for x in cands if good(x)), None)
    if c is None:
        c = _kernel_candidate(ratios, ctx)
        if c is not None and not good(c):
            c = None
    if c is None:
        raise ConformBaseNotFound(
            "no rational right translator with square -1 anticommutes with the ratios")
    theta = h1inv @ c
    res = psi(tuple(x @ theta for x in a))
    thinv = elem_inv(theta)
    return tuple(y @ thinv for y in res)


def conform_block_eval(psi, a_mats, k: int = 1) -> tuple:
    """Doubled-system route to the conform extension, matrix scale.

    The ratios against slot k are packed into an ordinary Clifford-based
    system of twice the dimension, psi is applied there, and the answer is
    read off the top-right blocks.  Cross-check for conform_extend.
    """
    a_mats = tuple(a_mats)
    ak_inv = np.linalg.inv(a_mats[k - 1])
    xs = []
    for i, ai in enumerate(a_mats, start=1):
        g = ai @ ak_inv
        z = np.zeros_like(g)
        sgn = -1.0 if i == k else 1.0
        xs.append(np.block([[z, g], [sgn * g, z]]))
    ys = psi(tuple(xs))
    d = a_mats[0].shape[0]
    return tuple(y[:d, d:] @ a_mats[k - 1] for y in ys)


# structural property report ---------------------------------------------------

def property_checks(evaluator, n: int = 2, deg: int = 2) -> dict:
    """Exact formal report on (FSt), (Sigma), (O), (Fil), (H0).

    The evaluator is any callable sending a formal input tuple to a system
    tuple; the probes rebuild the input in whatever context they need.
    """
    if n < 2:
        raise ValueError("the permutation and rotation probes need n >= 2")
    ctx0 = Context(n, deg, 0, 0)
    a = generic_perturbation(ctx0)
    qa = evaluator(a)

    # (FSt): evaluating anywhere on the segment from the output to the input
    # returns the output; t is a weight-0 formal parameter
    ctx_t = Context(n, deg, deg, 0)
    t = FormalElement.t_var(ctx_t)
    one_t = FormalElement.one(ctx_t)
    mix = tuple(t @ x.in_context(ctx_t) + (one_t - t) @ y.in_context(ctx_t)
                for x, y in zip(a, qa))
    fst = evaluator(mix) == tuple(y.in_context(ctx_t) for y in qa)

    # (Sigma): permutation equivariance over all nonidentity permutations
    sig = True
    for perm in _permutations(n):
        ap = tuple(a[i - 1] for i in perm)
        if evaluator(ap) != tuple(qa[i - 1] for i in perm):
            sig = False
            break

    # (O): equivariance under a rational rotation of the first two slots
    u11, u12 = Fraction(3, 5), Fraction(4, 5)
    au = (a[0] * u11 + a[1] * u12, a[0] * (-u12) + a[1] * u11) + a[2:]
    qu = (qa[0] * u11 + qa[1] * u12, qa[0] * (-u12) + qa[1] * u11) + qa[2:]
    o_ok = evaluator(au) == qu

    # (Fil): first n-1 outputs blind to the last slot
    an2 = a[n - 1] + (a[n - 1] - FormalElement.q_gen(n, ctx0))
    fil = evaluator(a[:n - 1] + (an2,))[:n - 1] == qa[:n - 1]

    # (H0): invariance under positive rescaling 1 + t, t of weight 1
    ctx_h = Context(n, deg, deg, 1)
    th = FormalElement.t_var(ctx_h)
    one_h = FormalElement.one(ctx_h)
    ah = tuple((one_h + th) @ x.in_context(ctx_h) for x in a)
    h0 = evaluator(ah) == tuple(y.in_context(ctx_h) for y in qa)

    return {"FSt": fst, "Sigma": sig, "O": o_ok, "Fil": fil, "H0": h0}


def _permutations(n: int):
    from itertools import permutations
    for perm in permutations(range(1, n + 1)):
        if perm != tuple(range(1, n + 1)):
            yield perm


# deformation family -----------------------------------------------------------

def _t_slice(e: FormalElement, p: int) -> FormalElement:
    """Terms whose t power is exactly p, t factor kept."""
    return FormalElement(e.ctx, {w: c for w, c in e.terms.items() if w[0] == p})


def omega_deform(a, t_order: int, want_iterates: bool = False):
    """Deformation family Omega(a, t) over truncated t-polynomials.

    Staircase construction: stage k accumulates a conjugation generator that
    is a multiple of t^{k+1} and kills the whole t^{k+1} slice of the
    connection residual (a single sweep only fixes the slice's leading
    letter degree, since the base variation couples back through the t-free
    residual).  After stage k the iterate agrees with the family to order
    t^{k+1}; t_order stages pin it completely within the truncation.
    """
    a = tuple(a)
    ctx = a[0].ctx
    if ctx.t_cap:
        raise ValueError("input must be t-free; the family introduces t itself")
    n, dcap = ctx.n, ctx.deg_cap
    ctxt = Context(n, dcap, t_order, 0)
    at = tuple(x.in_context(ctxt) for x in a)
    q = tuple(x.in_context(ctxt) for x in ogs(a))
    gens = []
    iterates = [q]
    if t_order:
        data = connection_data_gs_t(n, TPoly.t(t_order))
        for k in range(t_order):
            x = FormalElement.zero(ctxt)
            qk = q
            for _ in range(dcap + 1):
                resid = tuple(u - v for u, v in zip(at, qk))
                rho = connection_apply(data, resid, CliffordSystem(qk))
                sl = _t_slice(rho, k + 1)
                if not sl:
                    break
                x = x + sl
                qk = Ad(x.exp(), q)
            else:
                raise RuntimeError("slice correction did not close")
            gens.append(x)
            q = qk
            iterates.append(q)
    if want_iterates:
        return q, gens, iterates
    return q


def omega_r(a, r: int) -> tuple:
    """r-th t-derivative of the deformation family at t = 0."""
    fam = omega_deform(a, r)
    f = math.factorial(r)
    return tuple(x.t_coefficient(r) * f for x in fam)


def u_reconstruct(tp: TPoly, udeg: int = 2) -> list:
    """Rewrite a truncated t-expansion as a polynomial in u = t/(1+t).

    Legal exactly when the underlying function is such a polynomial of
    degree <= udeg: the higher Taylor coefficients are then forced, and are
    checked here, which is what justifies evaluating outside the disk of
    convergence of the raw t-series.
    """
    if tp.order < udeg:
        raise ValueError("not enough Taylor coefficients")
    f = list(tp.coeffs)
    coeffs = [f[0]]
    for m in range(1, udeg + 1):
        val = f[m] - sum(coeffs[mm] * (-1) ** (m - mm) * math.comb(m - 1, mm - 1)
                         for mm in range(1, m))
        coeffs.append(val)
    for p in range(udeg + 1, tp.order + 1):
        pred = sum(coeffs[mm] * (-1) ** (p - mm) * math.comb(p - 1, mm - 1)
                   for mm in range(1, udeg + 1))
        if pred != f[p]:
            raise ValueError("tail is inconsistent with a u-polynomial "
                             f"of degree {udeg}")
    return coeffs

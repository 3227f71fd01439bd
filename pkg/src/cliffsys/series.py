"""Truncated polynomial rings.

TPoly: polynomials in one variable t over Fraction, truncated at a fixed
order. Used for parameter-dependent connection weights (the weight family
w = (1, t, ..., t^{n-1}) produces weights that are rational functions of t,
expanded here as series) and for exact fixture comparison of parameter
families of coefficient tables.

MatPoly: the same ring shape with square-matrix coefficients. Used to push a
whole orthogonalization recursion through a path parameter, which yields exact
Taylor data in the parameter while staying floating point in the matrix
entries; high-order divided differences are far too noisy for that job.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.linalg import solve_sylvester

from .errors import SingularLeadingTerm
from .matrices import inv_sqrt_matrix, mat_inverse


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


class TPoly:
    """Fraction polynomial in t modulo t^(order+1)."""

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs, order: int):
        cs = [_frac(c) for c in coeffs[: order + 1]]
        cs += [Fraction(0)] * (order + 1 - len(cs))
        self.coeffs = tuple(cs)
        self.order = order

    @classmethod
    def const(cls, c, order: int) -> "TPoly":
        return cls([_frac(c)], order)

    @classmethod
    def t(cls, order: int) -> "TPoly":
        return cls([0, 1], order)

    def _coerce(self, other):
        if isinstance(other, TPoly):
            if other.order != self.order:
                raise ValueError("mixed truncation orders")
            return other
        return TPoly.const(other, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        return TPoly([a + b for a, b in zip(self.coeffs, o.coeffs)], self.order)

    __radd__ = __add__

    def __neg__(self):
        return TPoly([-a for a in self.coeffs], self.order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        out = [Fraction(0)] * (self.order + 1)
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(o.coeffs):
                if i + j > self.order:
                    break
                if b:
                    out[i + j] += a * b
        return TPoly(out, self.order)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        c = _frac(scalar)
        return TPoly([a / c for a in self.coeffs], self.order)

    def inverse(self) -> "TPoly":
        c0 = self.coeffs[0]
        if not c0:
            raise SingularLeadingTerm("constant term is zero")
        # Neumann series against the nilpotent tail
        tail = TPoly([0] + [c / c0 for c in self.coeffs[1:]], self.order)
        acc = TPoly.const(1, self.order)
        term = TPoly.const(1, self.order)
        for _ in range(self.order):
            term = term * (-tail)
            if not term:
                break
            acc = acc + term
        return acc / c0

    def eval(self, t) -> Fraction:
        t = _frac(t)
        out = Fraction(0)
        for c in reversed(self.coeffs):
            out = out * t + c
        return out

    def __bool__(self):
        return any(self.coeffs)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TPoly.const(other, self.order)
        if not isinstance(other, TPoly):
            return NotImplemented
        return self.order == other.order and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.coeffs, self.order))

    def __repr__(self):
        terms = [f"{c}*t^{k}" for k, c in enumerate(self.coeffs) if c]
        return " + ".join(terms) if terms else "0"


class MatPoly:
    """Matrix-coefficient polynomial modulo s^(order+1)."""

    __slots__ = ("coeffs", "order", "dim")

    def __init__(self, coeffs, order: int, dim: int | None = None):
        coeffs = [np.asarray(c, dtype=float) for c in coeffs]
        if dim is None:
            dim = coeffs[0].shape[0]
        zero = np.zeros((dim, dim))
        cs = list(coeffs[: order + 1])
        cs += [zero.copy() for _ in range(order + 1 - len(cs))]
        self.coeffs = cs
        self.order = order
        self.dim = dim

    @classmethod
    def const(cls, m, order: int) -> "MatPoly":
        return cls([np.asarray(m, dtype=float)], order)

    def __add__(self, other):
        return MatPoly([a + b for a, b in zip(self.coeffs, other.coeffs)],
                       self.order, self.dim)

    def __sub__(self, other):
        return MatPoly([a - b for a, b in zip(self.coeffs, other.coeffs)],
                       self.order, self.dim)

    def __neg__(self):
        return MatPoly([-a for a in self.coeffs], self.order, self.dim)

    def scale(self, c: float) -> "MatPoly":
        return MatPoly([float(c) * a for a in self.coeffs], self.order, self.dim)

    def __matmul__(self, other):
        out = [np.zeros((self.dim, self.dim)) for _ in range(self.order + 1)]
        for i, a in enumerate(self.coeffs):
            for j in range(self.order + 1 - i):
                out[i + j] += a @ other.coeffs[j]
        return MatPoly(out, self.order, self.dim)

    def inverse(self) -> "MatPoly":
        x0 = mat_inverse(self.coeffs[0])
        # A = A0 (1 + A0^{-1} A_+), invert by the finite Neumann series
        rest = MatPoly([np.zeros_like(x0)] + [x0 @ c for c in self.coeffs[1:]],
                       self.order, self.dim)
        acc = MatPoly.const(np.eye(self.dim), self.order)
        term = MatPoly.const(np.eye(self.dim), self.order)
        for _ in range(self.order):
            term = term @ (-rest)
            acc = acc + term
        return acc @ MatPoly.const(x0, self.order)

    def inv_sqrt(self) -> "MatPoly":
        """Y with Y @ Y = self^{-1} and Y(0) the principal branch.

        Coefficient recursion: with T = self^{-1}, Y_0 = principal T_0^{1/2}
        and Y_0 Y_k + Y_k Y_0 = T_k - sum_{0<i<k} Y_i Y_{k-i}, a Sylvester
        equation that is uniquely solvable because Sp(Y_0) lies in the open
        right half plane.
        """
        t = self.inverse()
        y0 = inv_sqrt_matrix(self.coeffs[0])
        ys = [y0]
        for k in range(1, self.order + 1):
            c = t.coeffs[k].copy()
            for i in range(1, k):
                c -= ys[i] @ ys[k - i]
            ys.append(solve_sylvester(y0, y0, c))
        return MatPoly(ys, self.order, self.dim)

    def eval(self, s: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for c in reversed(self.coeffs):
            out = out * s + c
        return out

"""Truncated multivariate Taylor arithmetic on TM_0.

A jet of a function of (x, v) in R^n x R^n stores its Taylor coefficients
up to x-degree ``order_x`` and v-degree ``order_v`` (a box in the bidegree,
not a total-degree simplex). Coefficients, not partial derivatives, are
stored: the coefficient of x^a v^b is d^a_x d^b_v f / (a! b!). Multiplying
two jets is a truncated convolution, which makes arithmetic exact up to
rounding and lets tensor-valued quantities (g, g^-1, the spray, ...) be
carried as jets themselves and differentiated later by index shifting.

Jets may be tensor-valued: ``Jet.c`` has shape ``(*shape, M)`` where ``M``
is the number of monomials of the space.

The module also holds the finite-difference oracle used to cross-check
jet derivatives.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, OrderBudgetError

MAX_ORDER_X = 3
MAX_ORDER_V = 6
MIN_SPEED = 1e-8


@dataclass(frozen=True)
class SupportElement:
    """A point z = (x, v) of TM_0. Stored as tuples so it can be hashed."""

    x: tuple
    v: tuple

    def __post_init__(self):
        x = tuple(float(a) for a in self.x)
        v = tuple(float(a) for a in self.v)
        if len(x) != len(v):
            raise ValueError(f"x has length {len(x)} but v has length {len(v)}")
        if not all(math.isfinite(a) for a in x + v):
            raise DomainError("support element has non-finite coordinates")
        if math.sqrt(sum(a * a for a in v)) < MIN_SPEED:
            raise DomainError("v must be non-zero (|v| >= 1e-8)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def xa(self) -> np.ndarray:
        return np.array(self.x)

    @property
    def va(self) -> np.ndarray:
        return np.array(self.v)

    @classmethod
    def of(cls, x, v) -> "SupportElement":
        return cls(tuple(np.asarray(x, dtype=float).ravel()), tuple(np.asarray(v, dtype=float).ravel()))


# --------------------------------------------------------------------------
# monomial spaces


def _monomials(n: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _pairs(monos, lookup, order):
    a_idx, b_idx, c_idx = [], [], []
    for ia, a in enumerate(monos):
        da = sum(a)
        for ib, b in enumerate(monos):
            if da + sum(b) > order:
                continue
            a_idx.append(ia)
            b_idx.append(ib)
            c_idx.append(lookup[tuple(p + q for p, q in zip(a, b))])
    return np.array(a_idx), np.array(b_idx), np.array(c_idx)


class JetSpace:
    """Index tables for jets in n + n variables with a bidegree box."""

    def __init__(self, n: int, order_x: int, order_v: int):
        self.n = n
        self.order_x = order_x
        self.order_v = order_v
        self.mx = _monomials(n, order_x)
        self.mv = _monomials(n, order_v)
        self.lx = {m: i for i, m in enumerate(self.mx)}
        self.lv = {m: i for i, m in enumerate(self.mv)}
        self.size = len(self.mx) * len(self.mv)
        self.ex = np.array(self.mx, dtype=int).reshape(len(self.mx), n)
        self.ev = np.array(self.mv, dtype=int).reshape(len(self.mv), n)
        self._mult = None

    def index(self, alpha, beta) -> int:
        return self.lx[tuple(alpha)] * len(self.mv) + self.lv[tuple(beta)]

    @property
    def max_nilpotency(self) -> int:
        return self.order_x + self.order_v

    def mult_tables(self):
        # pairs sorted by target slot so products can be summed with reduceat
        if self._mult is None:
            nv = len(self.mv)
            xa, xb, xc = _pairs(self.mx, self.lx, self.order_x)
            va, vb, vc = _pairs(self.mv, self.lv, self.order_v)
            P = (xa[:, None] * nv + va[None, :]).ravel()
            Q = (xb[:, None] * nv + vb[None, :]).ravel()
            C = (xc[:, None] * nv + vc[None, :]).ravel()
            order = np.argsort(C, kind="stable")
            P, Q, C = P[order], Q[order], C[order]
            starts = np.flatnonzero(np.r_[True, C[1:] != C[:-1]])
            assert len(starts) == self.size
            self._mult = (P, Q, starts)
        return self._mult

    def factorials(self) -> np.ndarray:
        fx = np.array([math.prod(math.factorial(a) for a in m) for m in self.mx], dtype=float)
        fv = np.array([math.prod(math.factorial(b) for b in m) for m in self.mv], dtype=float)
        return (fx[:, None] * fv[None, :]).ravel()


@lru_cache(maxsize=None)
def jet_space(n: int, order_x: int, order_v: int) -> JetSpace:
    if order_x < 0 or order_v < 0:
        raise OrderBudgetError("negative jet order")
    if order_x > MAX_ORDER_X or order_v > MAX_ORDER_V:
        raise OrderBudgetError(
            f"orders ({order_x}, {order_v}) exceed budget ({MAX_ORDER_X}, {MAX_ORDER_V})"
        )
    return JetSpace(n, order_x, order_v)


@lru_cache(maxsize=None)
def _restrict_map(n, ox, ov, tx, tv):
    src = jet_space(n, ox, ov)
    dst = jet_space(n, tx, tv)
    return np.array([src.index(a, b) for a in dst.mx for b in dst.mv])


@lru_cache(maxsize=None)
def _deriv_map(n, ox, ov, k, wrt_v):
    src = jet_space(n, ox, ov)
    dst = jet_space(n, ox, ov - 1) if wrt_v else jet_space(n, ox - 1, ov)
    idx, fac = [], []
    for a in dst.mx:
        for b in dst.mv:
            if wrt_v:
                b2 = list(b)
                b2[k] += 1
                idx.append(src.index(a, b2))
                fac.append(b2[k])
            else:
                a2 = list(a)
                a2[k] += 1
                idx.append(src.index(a2, b))
                fac.append(a2[k])
    return np.array(idx), np.array(fac, dtype=float)


# --------------------------------------------------------------------------
# jet arrays


class Jet:
    """Tensor-valued truncated Taylor expansion. ``c`` has shape (*shape, M)."""

    __slots__ = ("space", "c")
    __array_ufunc__ = None

    def __init__(self, space: JetSpace, c: np.ndarray):
        self.space = space
        self.c = c

    # -- construction
    @classmethod
    def constant(cls, space, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (space.size,))
        c[..., 0] = value
        return cls(space, c)

    @classmethod
    def variables(cls, space, x0, v0) -> tuple["Jet", "Jet"]:
        """Coordinate jets x = x0 + dx, v = v0 + dv."""
        n = space.n
        cx = np.zeros((n, space.size))
        cv = np.zeros((n, space.size))
        cx[:, 0] = x0
        cv[:, 0] = v0
        zero = (0,) * n
        for k in range(n):
            e = [0] * n
            e[k] = 1
            if space.order_x >= 1:
                cx[k, space.index(e, zero)] = 1.0
            if space.order_v >= 1:
                cv[k, space.index(zero, e)] = 1.0
        return cls(space, cx), cls(space, cv)

    # -- basic properties
    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def ndim(self):
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def transpose(self, *axes) -> "Jet":
        return Jet(self.space, self.c.transpose(*axes, self.ndim))

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.space, self.c[idx + (Ellipsis, slice(None))] if Ellipsis not in idx else self.c[idx])

    def __iter__(self):
        for i in range(self.shape[0]):
            yield self[i]

    def __repr__(self):
        s = self.space
        return f"Jet(shape={self.shape}, n={s.n}, orders=({s.order_x},{s.order_v}))"

    # -- space handling
    def restrict(self, space: JetSpace) -> "Jet":
        if space is self.space:
            return self
        s = self.space
        idx = _restrict_map(s.n, s.order_x, s.order_v, space.order_x, space.order_v)
        return Jet(space, self.c[..., idx])

    def _align(self, other):
        if isinstance(other, Jet):
            if other.space is self.space:
                return self, other
            s, o = self.space, other.space
            sp = jet_space(s.n, min(s.order_x, o.order_x), min(s.order_v, o.order_v))
            return self.restrict(sp), other.restrict(sp)
        return self, Jet.constant(self.space, other)

    # -- arithmetic
    def __add__(self, other):
        a, b = self._align(other)
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __sub__(self, other):
        a, b = self._align(other)
        return Jet(a.space, a.c - b.c)

    def __rsub__(self, other):
        a, b = self._align(other)
        return Jet(a.space, b.c - a.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.space, self.c * other[..., None])
        a, b = self._align(other)
        P, Q, starts = a.space.mult_tables()
        prod = a.c[..., P] * b.c[..., Q]
        return Jet(a.space, np.add.reduceat(prod, starts, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.space, self.c / other[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            out = Jet.constant(self.space, np.ones(self.shape))
            for _ in range(p):
                out = out * self
            return out
        return self.power(float(p))

    def power(self, p: float) -> "Jet":
        """Elementwise a**p through the Taylor series about the constant term."""
        a0 = self.value
        if np.any(a0 <= 0) and not float(p).is_integer():
            raise DomainError("non-integer power of a non-positive jet")
        h = Jet(self.space, self.c.copy())
        h.c[..., 0] = 0.0
        D = self.space.max_nilpotency
        coefs = [a0 ** p]
        for m in range(1, D + 1):
            coefs.append(coefs[-1] * (p - m + 1) / m / a0)
        out = Jet.constant(self.space, coefs[D])
        for m in range(D - 1, -1, -1):
            out = out * h + coefs[m]
        return out

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def reciprocal(self) -> "Jet":
        a0 = self.value
        if np.any(a0 == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero constant term")
        return self.power(-1.0)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.space, self.c.sum(axis=axis))

    # -- differentiation
    def dx(self, k: int) -> "Jet":
        s = self.space
        if s.order_x < 1:
            raise OrderBudgetError("x-order exhausted")
        idx, fac = _deriv_map(s.n, s.order_x, s.order_v, k, False)
        return Jet(jet_space(s.n, s.order_x - 1, s.order_v), self.c[..., idx] * fac)

    def dv(self, k: int) -> "Jet":
        s = self.space
        if s.order_v < 1:
            raise OrderBudgetError("v-order exhausted")
        idx, fac = _deriv_map(s.n, s.order_x, s.order_v, k, True)
        return Jet(jet_space(s.n, s.order_x, s.order_v - 1), self.c[..., idx] * fac)

    def grad_x(self) -> "Jet":
        """Stack of x-derivatives as a new trailing tensor index."""
        parts = [self.dx(k).c for k in range(self.space.n)]
        return Jet(jet_space(self.space.n, self.space.order_x - 1, self.space.order_v), np.stack(parts, axis=-2))

    def grad_v(self) -> "Jet":
        parts = [self.dv(k).c for k in range(self.space.n)]
        return Jet(jet_space(self.space.n, self.space.order_x, self.space.order_v - 1), np.stack(parts, axis=-2))


def stack(jets: Sequence[Jet], axis=0) -> Jet:
    sp = jets[0].space
    for j in jets[1:]:
        if j.space.order_x < sp.order_x or j.space.order_v < sp.order_v:
            sp = jet_space(sp.n, min(sp.order_x, j.space.order_x), min(sp.order_v, j.space.order_v))
    arrs = [j.restrict(sp).c for j in jets]
    if axis < 0:
        axis = jets[0].ndim + 1 + axis
    return Jet(sp, np.stack(arrs, axis=axis))


def einsum(subscripts: str, a, b) -> Jet:
    """Two-operand einsum over tensor indices with truncated convolution.

    Either operand may be a plain array (treated as constant).
    """
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    if not isinstance(a, Jet):
        return Jet(b.space, np.einsum(f"{sa},{sb}z->{out}z", np.asarray(a, dtype=float), b.c))
    if not isinstance(b, Jet):
        return Jet(a.space, np.einsum(f"{sa}z,{sb}->{out}z", a.c, np.asarray(b, dtype=float)))
    a, b = a._align(b)
    P, Q, starts = a.space.mult_tables()
    prod = np.einsum(f"{sa}z,{sb}z->{out}z", a.c[..., P], b.c[..., Q])
    return Jet(a.space, np.add.reduceat(prod, starts, axis=-1))


def inv(a: Jet) -> Jet:
    """Inverse of a jet-valued square matrix (last two tensor axes)."""
    a0inv = np.linalg.inv(a.value)
    h = Jet(a.space, a.c.copy())
    h.c[..., 0] = 0.0
    K = -einsum("ij,jk->ik", a0inv, h)
    out = Jet.constant(a.space, a0inv)
    for _ in range(a.space.max_nilpotency):
        out = einsum("ij,jk->ik", K, out) + a0inv
    return out


def sqrt(a):
    return a.sqrt() if isinstance(a, Jet) else np.sqrt(a)


def power(a, p):
    return a.power(p) if isinstance(a, Jet) else np.power(a, p)


# --------------------------------------------------------------------------
# public jet evaluation


MultiIndex = tuple  # (x_slots, v_slots), each a tuple of coordinate indices


def canonical_index(multi_index) -> tuple[tuple[int, ...], tuple[int, ...]]:
    xs, vs = multi_index
    return tuple(sorted(int(i) for i in xs)), tuple(sorted(int(i) for i in vs))


def _exponents(slots, n):
    e = [0] * n
    for i in slots:
        e[i] += 1
    return tuple(e)


@dataclass(frozen=True)
class JetValue:
    """All mixed partials of a scalar at z up to (order_x, order_v).

    ``partials`` is keyed by canonical multi-indices ``(x_slots, v_slots)``
    with each slot tuple sorted; the empty key ``((), ())`` holds the value.
    """

    value: float
    partials: Mapping[tuple, float]
    order_x: int
    order_v: int

    def partial(self, x_slots=(), v_slots=()) -> float:
        return self.partials[canonical_index((x_slots, v_slots))]


def _check_orders(order_x, order_v):
    if order_x < 0 or order_v < 0:
        raise OrderBudgetError("orders must be non-negative")
    if order_x > MAX_ORDER_X or order_v > MAX_ORDER_V:
        raise OrderBudgetError(
            f"orders ({order_x}, {order_v}) exceed budget ({MAX_ORDER_X}, {MAX_ORDER_V})"
        )


def taylor_jet(f: Callable, z: SupportElement, order_x: int, order_v: int, domain=None) -> Jet:
    """Jet of the scalar field ``f(x, v)`` at z."""
    _check_orders(order_x, order_v)
    if domain is not None and not domain(z.xa):
        raise DomainError(f"x={z.x} is outside the metric domain")
    sp = jet_space(z.n, order_x, order_v)
    x, v = Jet.variables(sp, z.xa, z.va)
    out = f(x, v)
    if not isinstance(out, Jet):
        out = Jet.constant(sp, out)
    return out.restrict(sp) if out.space is not sp else out


def evaluate_jet(f: Callable, z: SupportElement, order_x: int, order_v: int, domain=None) -> JetValue:
    jet = taylor_jet(f, z, order_x, order_v, domain)
    sp = jet.space
    fac = sp.factorials()
    coef = jet.c * fac
    partials = {}
    n = z.n
    for ia, a in enumerate(sp.mx):
        xs = tuple(i for i in range(n) for _ in range(a[i]))
        for ib, b in enumerate(sp.mv):
            vs = tuple(i for i in range(n) for _ in range(b[i]))
            partials[(xs, vs)] = float(coef[ia * len(sp.mv) + ib])
    return JetValue(float(jet.value), partials, order_x, order_v)


# --------------------------------------------------------------------------
# finite-difference oracle

# central stencils (offset, weight) for d^m/dt^m, all with O(h^2) error
_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def _central(f, base, counts, steps):
    # tensor-product stencil over all 2n coordinates
    axes = [k for k in range(len(base)) if counts[k] > 0]
    total = 0.0
    stencils = [_STENCILS[counts[k]] for k in axes]
    for combo in itertools.product(*stencils):
        point = base.copy()
        w = 1.0
        for k, (off, wt) in zip(axes, combo):
            point[k] += off * steps[k]
            w *= wt
        total += w * f(point)
    scale = np.prod([steps[k] ** counts[k] for k in axes]) if axes else 1.0
    return total / scale


# per-order default steps for two Richardson levels, about eps^(1/(m+6))
FD_STEPS = {0: 1e-3, 1: 5e-3, 2: 1e-2, 3: 2e-2, 4: 3e-2}


def finite_difference_partial(
    f: Callable, z: SupportElement, multi_index, step: Optional[float] = None, domain=None, levels: int = 2
) -> float:
    """Central-difference partial of ``f(x, v)`` with Richardson extrapolation.

    The step is ``step * (1 + |x_k|)`` along x_k and ``step * |v|`` along every
    v_k (F² is 2-homogeneous in v, so |v| is its natural length there);
    ``step`` defaults to ``FD_STEPS[order]``. Truncation error is O(step^(2 levels + 2)); rounding
    grows like eps * |f| / step^m for an order-m partial.
    """
    xs, vs = canonical_index(multi_index)
    order = len(xs) + len(vs)
    if order > 4:
        raise OrderBudgetError("finite differences support total order <= 4")
    if step is None:
        step = FD_STEPS[order]
    if not step > 0 or step < 1e-8:
        raise ValueError(f"finite-difference step {step!r} underflows (must be >= 1e-8)")
    if levels not in (1, 2):
        raise ValueError("levels must be 1 or 2")
    n = z.n
    counts = list(_exponents(xs, n)) + list(_exponents(vs, n))
    if any(c > 4 for c in counts):
        raise OrderBudgetError("at most 4 derivatives per coordinate")
    base = np.concatenate([z.xa, z.va])
    steps = step * np.concatenate([1.0 + np.abs(z.xa), np.full(n, np.linalg.norm(z.va))])

    reach = [2 if c >= 3 else (1 if c >= 1 else 0) for c in counts]
    for k in range(n):
        if reach[k]:
            for sgn in (-1, 1):
                xp = z.xa.copy()
                xp[k] += sgn * reach[k] * steps[k]
                if domain is not None and not domain(xp):
                    raise DomainError(f"finite-difference stencil leaves the domain along x{k + 1}")

    def g(p):
        return float(f(p[:n], p[n:]))

    D = [_central(g, base, counts, steps / 2**i) for i in range(levels + 1)]
    R1 = [(4.0 * D[i + 1] - D[i]) / 3.0 for i in range(levels)]
    if levels == 1:
        return R1[0]
    return (16.0 * R1[1] - R1[0]) / 15.0


def jet_fd_disagreement(
    f: Callable, z: SupportElement, order: int = 3, step: Optional[float] = None, domain=None
) -> float:
    """max over partials of total order <= ``order`` of |jet - fd| / max(1, |jet|)."""
    jv = evaluate_jet(f, z, order, order, domain)
    worst = 0.0
    for key, val in jv.partials.items():
        if len(key[0]) + len(key[1]) > order:
            continue
        fd = finite_difference_partial(f, z, key, step, domain)
        worst = max(worst, abs(val - fd) / max(1.0, abs(val)))
    return worst

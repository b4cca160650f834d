"""Forward-mode automatic differentiation and small fixed-size linear algebra.

Everything downstream (surface evaluation, pose kinematics, the vehicle
dynamics residual, the collocation transcription) is written against the
scalar-generic functions in this module, so a single code path serves

* plain floats and numpy arrays (batched evaluation over collocation nodes),
* ``Dual``   -- value + directional first derivatives,
* ``Dual2``  -- value + first derivatives + dense Hessian blocks,
* ``TimeJet`` -- truncated time-derivative series used by the momentum
  bookkeeping in :mod:`motoraceline.dynamics`.

Vectors are plain length-3 sequences of scalars and 2x2 matrices are nested
2-tuples; the helpers at the bottom implement the handful of operations the
models need without committing to a numeric dtype.
"""

from __future__ import annotations

import math

import numpy as np

_SCALAR_TYPES = (int, float, np.integer, np.floating, np.ndarray)


def _is_plain(x) -> bool:
    return isinstance(x, _SCALAR_TYPES)


class Dual:
    """First-order forward-mode scalar: value plus ``k`` directional derivatives.

    ``val`` may be a float or an array of shape ``(N,)`` (batched evaluation);
    ``dot`` then has shape ``(k,)`` or ``(k, N)``.
    """

    __slots__ = ("val", "dot")
    __array_ufunc__ = None  # keep numpy from elementwise-wrapping us

    def __init__(self, val, dot):
        self.val = val
        self.dot = dot

    def __repr__(self):
        return f"Dual({self.val!r})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.dot + o.dot)
        if _is_plain(o):
            return Dual(self.val + o, self.dot)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.dot - o.dot)
        if _is_plain(o):
            return Dual(self.val - o, self.dot)
        return NotImplemented

    def __rsub__(self, o):
        if _is_plain(o):
            return Dual(o - self.val, -self.dot)
        return NotImplemented

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val * o.val, self.dot * o.val + o.dot * self.val)
        if _is_plain(o):
            return Dual(self.val * o, self.dot * o)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            inv = 1.0 / o.val
            return Dual(self.val * inv, (self.dot - o.dot * (self.val * inv)) * inv)
        if _is_plain(o):
            return Dual(self.val / o, self.dot / o)
        return NotImplemented

    def __rtruediv__(self, o):
        if _is_plain(o):
            inv = 1.0 / self.val
            v = o * inv
            return Dual(v, -self.dot * (v * inv))
        return NotImplemented

    def __pow__(self, p):
        if not _is_plain(p):
            return NotImplemented
        return _apply_unary(
            self,
            self.val ** p,
            p * self.val ** (p - 1),
            p * (p - 1) * self.val ** (p - 2) if p != 1 else 0.0,
        )

    # comparisons act on values (used only in guards)
    def __lt__(self, o):
        return self.val < value_of(o)

    def __le__(self, o):
        return self.val <= value_of(o)

    def __gt__(self, o):
        return self.val > value_of(o)

    def __ge__(self, o):
        return self.val >= value_of(o)


class Dual2(Dual):
    """Second-order forward scalar: value, gradient, and Hessian block.

    ``hes`` has shape ``(k, k)`` or ``(k, k, N)``. Mixing ``Dual`` and
    ``Dual2`` operands in one expression is not supported.
    """

    __slots__ = ("hes",)

    def __init__(self, val, dot, hes):
        super().__init__(val, dot)
        self.hes = hes

    def __repr__(self):
        return f"Dual2({self.val!r})"

    def __add__(self, o):
        if isinstance(o, Dual2):
            return Dual2(self.val + o.val, self.dot + o.dot, self.hes + o.hes)
        if _is_plain(o):
            return Dual2(self.val + o, self.dot, self.hes)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual2):
            return Dual2(self.val - o.val, self.dot - o.dot, self.hes - o.hes)
        if _is_plain(o):
            return Dual2(self.val - o, self.dot, self.hes)
        return NotImplemented

    def __rsub__(self, o):
        if _is_plain(o):
            return Dual2(o - self.val, -self.dot, -self.hes)
        return NotImplemented

    def __neg__(self):
        return Dual2(-self.val, -self.dot, -self.hes)

    def __mul__(self, o):
        if isinstance(o, Dual2):
            cross = self.dot[:, None] * o.dot[None, :]
            sym = cross + _swap01(cross)
            return Dual2(
                self.val * o.val,
                self.dot * o.val + o.dot * self.val,
                self.hes * o.val + o.hes * self.val + sym,
            )
        if _is_plain(o):
            return Dual2(self.val * o, self.dot * o, self.hes * o)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual2):
            return self * _apply_unary(o, 1.0 / o.val, -1.0 / o.val**2, 2.0 / o.val**3)
        if _is_plain(o):
            return Dual2(self.val / o, self.dot / o, self.hes / o)
        return NotImplemented

    def __rtruediv__(self, o):
        if _is_plain(o):
            return _apply_unary(self, o / self.val, -o / self.val**2, 2.0 * o / self.val**3)
        return NotImplemented

    def __pow__(self, p):
        if not _is_plain(p):
            return NotImplemented
        return _apply_unary(
            self,
            self.val ** p,
            p * self.val ** (p - 1),
            p * (p - 1) * self.val ** (p - 2) if p != 1 else 0.0,
        )


def _swap01(a):
    return np.swapaxes(a, 0, 1)


def _apply_unary(x, f0, f1, f2):
    """Chain rule for f(x) given f, f', f'' evaluated at x.val."""
    if isinstance(x, Dual2):
        outer = x.dot[:, None] * x.dot[None, :]
        return Dual2(f0, f1 * x.dot, f1 * x.hes + f2 * outer)
    return Dual(f0, f1 * x.dot)


def seed_duals(values, second_order=False):
    """Promote a sequence of k values (floats or (N,) arrays) to seeded duals."""
    values = list(values)
    k = len(values)
    duals = []
    for i, v in enumerate(values):
        v = np.asarray(v, dtype=float) if isinstance(v, np.ndarray) else float(v)
        if isinstance(v, np.ndarray):
            dot = np.zeros((k,) + v.shape)
            dot[i] = 1.0
            hshape = (k, k) + v.shape
        else:
            dot = np.zeros(k)
            dot[i] = 1.0
            hshape = (k, k)
        if second_order:
            duals.append(Dual2(v, dot, np.zeros(hshape)))
        else:
            duals.append(Dual(v, dot))
    return duals


# ---------------------------------------------------------------------------
# truncated time series
# ---------------------------------------------------------------------------

_BINOM = ((1,), (1, 1), (1, 2, 1))


class TimeJet:
    """Truncated series of time derivatives ``(f, df/dt, d2f/dt2, ...)``.

    Products truncate to the shorter operand, so derivative information is
    never fabricated: a coefficient exists in the result only if every term
    contributing to it is available. Coefficients may be floats, arrays, or
    duals.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = tuple(coeffs)
        if not self.c or len(self.c) > 3:
            raise ValueError("TimeJet supports orders 0..2")

    def __repr__(self):
        return f"TimeJet{self.c!r}"

    @property
    def value(self):
        return self.c[0]

    def dt(self) -> "TimeJet":
        """Apparent (in-frame) time derivative: shift coefficients down."""
        if len(self.c) < 2:
            raise ValueError("cannot differentiate an order-0 TimeJet")
        return TimeJet(self.c[1:])

    def __add__(self, o):
        o = _lift(o, len(self.c))
        n = min(len(self.c), len(o.c))
        return TimeJet(tuple(self.c[i] + o.c[i] for i in range(n)))

    __radd__ = __add__

    def __sub__(self, o):
        o = _lift(o, len(self.c))
        n = min(len(self.c), len(o.c))
        return TimeJet(tuple(self.c[i] - o.c[i] for i in range(n)))

    def __rsub__(self, o):
        return _lift(o, len(self.c)) - self

    def __neg__(self):
        return TimeJet(tuple(-ci for ci in self.c))

    def __mul__(self, o):
        o = _lift(o, len(self.c))
        n = min(len(self.c), len(o.c))
        a, b = self.c, o.c
        out = []
        for k in range(n):
            acc = _BINOM[k][0] * (a[0] * b[k])
            for i in range(1, k + 1):
                acc = acc + _BINOM[k][i] * (a[i] * b[k - i])
            out.append(acc)
        return TimeJet(out)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, TimeJet):
            return NotImplemented  # no jet/jet division in the models
        return self * (1.0 / o)

    def _compose(self, f0, f1, f2):
        """Chain rule for f(self) given f, f', f'' at the value coefficient."""
        c = self.c
        if len(c) == 1:
            return TimeJet((f0,))
        if len(c) == 2:
            return TimeJet((f0, f1 * c[1]))
        return TimeJet((f0, f1 * c[1], f1 * c[2] + f2 * (c[1] * c[1])))


def _lift(x, n):
    if isinstance(x, TimeJet):
        return x
    return TimeJet((x,) + (0.0,) * (n - 1))


def jet(*coeffs) -> TimeJet:
    return TimeJet(coeffs)


def value_of(x):
    """Plain value of a scalar-like, stripping jet/dual layers."""
    while True:
        if isinstance(x, TimeJet):
            x = x.c[0]
        elif isinstance(x, Dual):
            x = x.val
        else:
            return x


# ---------------------------------------------------------------------------
# scalar-generic math
# ---------------------------------------------------------------------------


def sin(x):
    if isinstance(x, TimeJet):
        return x._compose(sin(x.c[0]), cos(x.c[0]), -sin(x.c[0]))
    if isinstance(x, Dual):
        return _apply_unary(x, np.sin(x.val), np.cos(x.val), -np.sin(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, TimeJet):
        return x._compose(cos(x.c[0]), -sin(x.c[0]), -cos(x.c[0]))
    if isinstance(x, Dual):
        return _apply_unary(x, np.cos(x.val), -np.sin(x.val), -np.cos(x.val))
    return np.cos(x)


def sqrt(x):
    if isinstance(x, TimeJet):
        v = sqrt(x.c[0])
        return x._compose(v, 0.5 / v, -0.25 / (v * x.c[0]))
    if isinstance(x, Dual):
        v = np.sqrt(x.val)
        return _apply_unary(x, v, 0.5 / v, -0.25 / (v * x.val))
    return np.sqrt(x)


def asin(x):
    if isinstance(x, Dual):
        w = 1.0 - x.val * x.val
        return _apply_unary(x, np.arcsin(x.val), w**-0.5, x.val * w**-1.5)
    return np.arcsin(x)


def atan(x):
    if isinstance(x, Dual):
        w = 1.0 + x.val * x.val
        return _apply_unary(x, np.arctan(x.val), 1.0 / w, -2.0 * x.val / w**2)
    return np.arctan(x)


def atan2(y, x):
    if not isinstance(y, Dual) and not isinstance(x, Dual):
        return np.arctan2(y, x)
    yv, xv = value_of(y), value_of(x)
    d = xv * xv + yv * yv
    v = np.arctan2(yv, xv)
    # partials of atan2 wrt (y, x) and their derivatives via the quotient rule
    second = isinstance(y, Dual2) or isinstance(x, Dual2)
    ydot = y.dot if isinstance(y, Dual) else 0.0
    xdot = x.dot if isinstance(x, Dual) else 0.0
    dot = (xv * ydot - yv * xdot) / d
    if not second:
        return Dual(v, dot)
    yhes = y.hes if isinstance(y, Dual2) else 0.0
    xhes = x.hes if isinstance(x, Dual2) else 0.0
    d2 = d * d
    # Hessian of atan2 in (y, x): [[-2xy, x^2-y^2], [x^2-y^2, 2xy]] / d^2
    fyy = -2.0 * xv * yv / d2
    fxx = 2.0 * xv * yv / d2
    fxy = (yv * yv - xv * xv) / d2
    if isinstance(ydot, np.ndarray) or isinstance(xdot, np.ndarray):
        yd = ydot if isinstance(ydot, np.ndarray) else np.zeros_like(xdot)
        xd = xdot if isinstance(xdot, np.ndarray) else np.zeros_like(ydot)
        oyy = yd[:, None] * yd[None, :]
        oxx = xd[:, None] * xd[None, :]
        oxy = yd[:, None] * xd[None, :]
        oxy = oxy + _swap01(oxy)
        hes = (xv / d) * yhes + (-yv / d) * xhes + fyy * oyy + fxx * oxx + fxy * oxy
    else:  # pragma: no cover - degenerate constant case
        hes = 0.0
    return Dual2(v, dot, hes)


def hypot2(a, b):
    return a * a + b * b


def smooth_relu(x, eps):
    """C1 positive part: 0.5*(x + sqrt(x^2 + eps^2)). Exact max(x, 0) at eps=0."""
    if eps == 0.0:
        if isinstance(x, Dual):
            return where_scalar(value_of(x) > 0.0, x, 0.0 * x)
        return np.maximum(x, 0.0)
    return 0.5 * (x + sqrt(x * x + eps * eps))


def where_scalar(mask, a, b):
    """Elementwise select that keeps dual structure (mask is a plain bool array)."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        a = a if isinstance(a, Dual) else Dual(a, 0.0)  # pragma: no cover
        m = np.asarray(mask)
        second = isinstance(a, Dual2) or isinstance(b, Dual2)
        bval, bdot = (b.val, b.dot) if isinstance(b, Dual) else (b, np.zeros_like(a.dot))
        val = np.where(m, a.val, bval)
        dot = np.where(m, a.dot, bdot)
        if second:
            bhes = b.hes if isinstance(b, Dual2) else np.zeros_like(a.hes)
            return Dual2(val, dot, np.where(m, a.hes, bhes))
        return Dual(val, dot)
    return np.where(mask, a, b)


# ---------------------------------------------------------------------------
# 3-vectors as length-3 sequences, 2x2 matrices as nested tuples
# ---------------------------------------------------------------------------


def vec3(a, b, c):
    return (a, b, c)


def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross3(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def add3(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub3(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale3(k, a):
    return (k * a[0], k * a[1], k * a[2])


def norm3(a):
    return sqrt(dot3(a, a))


def mat22(a11, a12, a21, a22):
    return ((a11, a12), (a21, a22))


def det22(m):
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def matvec22(m, v):
    return (m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1])


def matmul22(a, b):
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


def inv22(m):
    idet = 1.0 / det22(m)
    return (
        (m[1][1] * idet, -m[0][1] * idet),
        (-m[1][0] * idet, m[0][0] * idet),
    )


def solve22(m, v):
    idet = 1.0 / det22(m)
    return (
        (m[1][1] * v[0] - m[0][1] * v[1]) * idet,
        (m[0][0] * v[1] - m[1][0] * v[0]) * idet,
    )


def cond22(m):
    """Rough 2-norm condition estimate of a float 2x2 matrix."""
    a = np.array([[value_of(m[0][0]), value_of(m[0][1])],
                  [value_of(m[1][0]), value_of(m[1][1])]], dtype=float)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0.0:
        return math.inf
    return float(s[0] / s[-1])


def frame_dt(vec, omega):
    """Inertial time derivative of a vector carried in a rotating frame.

    ``vec`` components and ``omega`` components are TimeJets expressed in the
    moving frame; the result is the transport-theorem derivative
    ``d/dt vec = (coefficient rates) + omega x vec``, one jet order lower.
    """
    v = tuple(ci if isinstance(ci, TimeJet) else _lift(ci, 3) for ci in vec)
    shifted = tuple(ci.dt() for ci in v)
    rot = cross3(omega, v)
    return add3(shifted, rot)

"""Reverse-mode automatic differentiation on a scalar tape.

A Tape records every primitive operation as a node holding the indices
of its (at most two) parents and the local partial derivatives, so a
single reverse sweep accumulates exact adjoints.  Module-level functions
(exp, log, sigmoid, ...) dispatch on the argument type: they record on
the tape for Var inputs and fall back to math.* for plain floats, which
lets density code run both in taped and in plain-float mode.
"""

from __future__ import annotations

import math


class TraceInvalidError(ArithmeticError):
    """A primitive was evaluated outside its domain while recording."""

    def __init__(self, op, value):
        super().__init__(f"invalid trace: {op}({value!r})")
        self.op = op
        self.value = value


class Tape:
    """Growable record of primitive operations in topological order."""

    __slots__ = ("vals", "p1", "p2", "d1", "d2")

    def __init__(self):
        self.vals = []
        self.p1 = []
        self.p2 = []
        self.d1 = []
        self.d2 = []

    def __len__(self):
        return len(self.vals)

    def var(self, value):
        """Create a leaf variable."""
        value = float(value)
        if not math.isfinite(value):
            raise TraceInvalidError("leaf", value)
        return Var(self, self._push(value, -1, 0.0, -1, 0.0), value)

    def _push(self, value, a, da, b, db):
        i = len(self.vals)
        self.vals.append(value)
        self.p1.append(a)
        self.d1.append(da)
        self.p2.append(b)
        self.d2.append(db)
        return i

    def gradient(self, output, inputs):
        """Adjoints of `output` with respect to leaf variables `inputs`."""
        if not isinstance(output, Var) or output.tape is not self:
            raise ValueError("output is not recorded on this tape")
        for v in inputs:
            if v.tape is not self:
                raise ValueError("input is not recorded on this tape")
            if self.p1[v.i] != -1:
                raise ValueError("gradient inputs must be leaf nodes")
        adj = [0.0] * len(self.vals)
        adj[output.i] = 1.0
        p1, p2, d1, d2 = self.p1, self.p2, self.d1, self.d2
        for i in range(output.i, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            j = p1[i]
            if j >= 0:
                adj[j] += a * d1[i]
                k = p2[i]
                if k >= 0:
                    adj[k] += a * d2[i]
        return [adj[v.i] for v in inputs]


class Var:
    """Handle to a node on a tape."""

    __slots__ = ("tape", "i", "val")

    def __init__(self, tape, i, val):
        self.tape = tape
        self.i = i
        self.val = val

    def __repr__(self):
        return f"Var({self.val})"

    def __float__(self):
        return self.val

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        t = self.tape
        if isinstance(other, Var):
            v = self.val + other.val
            return Var(t, t._push(v, self.i, 1.0, other.i, 1.0), v)
        v = self.val + other
        return Var(t, t._push(v, self.i, 1.0, -1, 0.0), v)

    __radd__ = __add__

    def __sub__(self, other):
        t = self.tape
        if isinstance(other, Var):
            v = self.val - other.val
            return Var(t, t._push(v, self.i, 1.0, other.i, -1.0), v)
        v = self.val - other
        return Var(t, t._push(v, self.i, 1.0, -1, 0.0), v)

    def __rsub__(self, other):
        t = self.tape
        v = other - self.val
        return Var(t, t._push(v, self.i, -1.0, -1, 0.0), v)

    def __mul__(self, other):
        t = self.tape
        if isinstance(other, Var):
            v = self.val * other.val
            return Var(t, t._push(v, self.i, other.val, other.i, self.val), v)
        v = self.val * other
        return Var(t, t._push(v, self.i, other, -1, 0.0), v)

    __rmul__ = __mul__

    def __truediv__(self, other):
        t = self.tape
        if isinstance(other, Var):
            if other.val == 0.0:
                raise TraceInvalidError("div", 0.0)
            v = self.val / other.val
            return Var(
                t, t._push(v, self.i, 1.0 / other.val, other.i, -v / other.val), v
            )
        if other == 0.0:
            raise TraceInvalidError("div", 0.0)
        v = self.val / other
        return Var(t, t._push(v, self.i, 1.0 / other, -1, 0.0), v)

    def __rtruediv__(self, other):
        if self.val == 0.0:
            raise TraceInvalidError("div", 0.0)
        t = self.tape
        v = other / self.val
        return Var(t, t._push(v, self.i, -v / self.val, -1, 0.0), v)

    def __neg__(self):
        t = self.tape
        return Var(t, t._push(-self.val, self.i, -1.0, -1, 0.0), -self.val)

    def __pow__(self, other):
        return pow_(self, other)


def _record1(x, op, value, partial):
    if not math.isfinite(value):
        raise TraceInvalidError(op, x.val)
    t = x.tape
    return Var(t, t._push(value, x.i, partial, -1, 0.0), value)


def exp(x):
    if isinstance(x, Var):
        v = math.exp(x.val)
        return _record1(x, "exp", v, v)
    return math.exp(x)


def log(x):
    if isinstance(x, Var):
        if x.val <= 0.0:
            raise TraceInvalidError("log", x.val)
        return _record1(x, "log", math.log(x.val), 1.0 / x.val)
    if x <= 0.0:
        raise TraceInvalidError("log", x)
    return math.log(x)


def log1p(x):
    if isinstance(x, Var):
        if x.val <= -1.0:
            raise TraceInvalidError("log1p", x.val)
        return _record1(x, "log1p", math.log1p(x.val), 1.0 / (1.0 + x.val))
    if x <= -1.0:
        raise TraceInvalidError("log1p", x)
    return math.log1p(x)


def sqrt(x):
    if isinstance(x, Var):
        if x.val <= 0.0:
            raise TraceInvalidError("sqrt", x.val)
        v = math.sqrt(x.val)
        return _record1(x, "sqrt", v, 0.5 / v)
    if x < 0.0:
        raise TraceInvalidError("sqrt", x)
    return math.sqrt(x)


def tanh(x):
    if isinstance(x, Var):
        v = math.tanh(x.val)
        return _record1(x, "tanh", v, 1.0 - v * v)
    return math.tanh(x)


def _sigmoid_float(x):
    if x >= 0.0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


def sigmoid(x):
    """Logistic function, stable for |x| up to overflow range."""
    if isinstance(x, Var):
        v = _sigmoid_float(x.val)
        return _record1(x, "sigmoid", v, v * (1.0 - v))
    return _sigmoid_float(x)


def softplus(x):
    """log(1 + exp(x)), stable in both tails."""
    xv = x.val if isinstance(x, Var) else x
    if xv > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def log_sum_exp(x, y):
    """log(exp(x) + exp(y)) for a pair, stable adjoints."""
    xv = x.val if isinstance(x, Var) else x
    yv = y.val if isinstance(y, Var) else y
    if isinstance(x, Var) or isinstance(y, Var):
        m = max(xv, yv)
        v = m + math.log(math.exp(xv - m) + math.exp(yv - m))
        px = _sigmoid_float(xv - yv)
        py = 1.0 - px
        if isinstance(x, Var) and isinstance(y, Var):
            t = x.tape
            return Var(t, t._push(v, x.i, px, y.i, py), v)
        if isinstance(x, Var):
            t = x.tape
            return Var(t, t._push(v, x.i, px, -1, 0.0), v)
        t = y.tape
        return Var(t, t._push(v, y.i, py, -1, 0.0), v)
    m = max(xv, yv)
    return m + math.log(math.exp(xv - m) + math.exp(yv - m))


def pow_(x, p):
    """x ** p for a constant exponent p."""
    if isinstance(p, Var):
        # x^p = exp(p log x); only needed with variable exponent
        return exp(p * log(x))
    if isinstance(x, Var):
        if x.val < 0.0 and p != int(p):
            raise TraceInvalidError("pow", x.val)
        v = x.val**p
        return _record1(x, "pow", v, p * x.val ** (p - 1) if p != 0 else 0.0)
    return x**p


def _digamma_float(x):
    """Digamma via recurrence plus asymptotic series, x > 0."""
    if x <= 0.0:
        raise TraceInvalidError("digamma", x)
    acc = 0.0
    while x < 8.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # Bernoulli-number tail of the asymptotic expansion
    series = (
        math.log(x)
        - 0.5 * inv
        - inv2
        * (
            1.0 / 12.0
            - inv2
            * (
                1.0 / 120.0
                - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))
            )
        )
    )
    return acc + series


def lgamma(x):
    if isinstance(x, Var):
        if x.val <= 0.0:
            raise TraceInvalidError("lgamma", x.val)
        return _record1(x, "lgamma", math.lgamma(x.val), _digamma_float(x.val))
    if x <= 0.0:
        raise TraceInvalidError("lgamma", x)
    return math.lgamma(x)


def value(x):
    """Plain float value of a scalar or Var."""
    return x.val if isinstance(x, Var) else float(x)


def gradient(tape, output, inputs):
    """Convenience wrapper around Tape.gradient."""
    return tape.gradient(output, inputs)

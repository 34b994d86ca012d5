"""Second-order forward jets in Wirtinger coordinates, vectorised over samples.

A :class:`Jet2` carries the value, the gradient with respect to
``(Z_1..Z_m, conj Z_1..conj Z_m)`` and the matching ``2m x 2m`` Hessian at a
batch of points.  Chain rules for scalar functions are exact, so any closed
form built from coordinates, polynomials and smooth scalar maps gets exact
first and second derivatives.
"""

from __future__ import annotations

import numpy as np


class Jet2:
    def __init__(self, val, grad, hess):
        self.val = np.asarray(val, dtype=complex)
        self.grad = np.asarray(grad, dtype=complex)
        self.hess = np.asarray(hess, dtype=complex)

    @property
    def m(self):
        return self.grad.shape[-1] // 2

    @property
    def size(self):
        return self.val.shape[0]

    # constructors --------------------------------------------------------

    @classmethod
    def constant(cls, m, values):
        values = np.asarray(values, dtype=complex)
        S = values.shape[0]
        return cls(values, np.zeros((S, 2 * m), complex), np.zeros((S, 2 * m, 2 * m), complex))

    @classmethod
    def variable(cls, m, index, values, conjugate=False):
        values = np.asarray(values, dtype=complex)
        out = cls.constant(m, np.conj(values) if conjugate else values)
        out.grad[:, index + (m if conjugate else 0)] = 1.0
        return out

    @classmethod
    def from_poly(cls, poly, z, m, offset=0):
        """Lift a PolyJet in ``poly.n`` variables, placed at slots ``offset..offset+n``."""
        z = np.asarray(z, dtype=complex)
        S, n = z.shape
        out = cls.constant(m, np.broadcast_to(poly(z), (S,)))
        hol = slice(offset, offset + n)
        anti = slice(m + offset, m + offset + n)
        for k in range(n):
            dk, dkb = poly.dz(k), poly.dzb(k)
            out.grad[:, offset + k] = dk(z)
            out.grad[:, m + offset + k] = dkb(z)
            for l in range(n):
                out.hess[:, offset + k, offset + l] = dk.dz(l)(z)
                out.hess[:, offset + k, m + offset + l] = dk.dzb(l)(z)
                out.hess[:, m + offset + k, m + offset + l] = dkb.dzb(l)(z)
        out.hess[:, anti, hol] = np.swapaxes(out.hess[:, hol, anti], 1, 2)
        return out

    # algebra -------------------------------------------------------------

    def _lift(self, other):
        if isinstance(other, Jet2):
            return other
        vals = np.broadcast_to(np.asarray(other, dtype=complex), self.val.shape)
        return Jet2.constant(self.m, vals)

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=complex)
            if c.ndim == 1:
                return Jet2(self.val * c, self.grad * c[:, None], self.hess * c[:, None, None])
            return Jet2(self.val * c, self.grad * c, self.hess * c)
        o = other
        val = self.val * o.val
        grad = self.grad * o.val[:, None] + o.grad * self.val[:, None]
        cross = self.grad[:, :, None] * o.grad[:, None, :]
        hess = (self.hess * o.val[:, None, None] + o.hess * self.val[:, None, None]
                + cross + np.swapaxes(cross, 1, 2))
        return Jet2(val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / np.asarray(other, dtype=complex))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def apply(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives at ``self.val``."""
        f0, f1, f2 = (np.asarray(a, dtype=complex) for a in (f0, f1, f2))
        g = self.grad
        return Jet2(f0, f1[:, None] * g,
                    f1[:, None, None] * self.hess + f2[:, None, None] * g[:, :, None] * g[:, None, :])

    def reciprocal(self):
        v = self.val
        return self.apply(1 / v, -1 / v**2, 2 / v**3)

    def power(self, a):
        """``self ** a`` for a real exponent; the base must be positive where ``a`` is fractional."""
        v = self.val.real if np.all(np.abs(self.val.imag) < 1e-300) else self.val
        return self.apply(v**a, a * v ** (a - 1), a * (a - 1) * v ** (a - 2))

    def sqrt(self):
        return self.power(0.5)

    def conj(self):
        m = self.m
        perm = np.r_[m:2 * m, 0:m]
        return Jet2(np.conj(self.val), np.conj(self.grad[:, perm]),
                    np.conj(self.hess[:, perm][:, :, perm]))

    def real_part(self):
        return (self + self.conj()) * 0.5

    def abs2(self):
        return self * self.conj()

    # derivative access ---------------------------------------------------

    def holo_grad(self):
        """``w_I`` for ``I = 1..m``."""
        return self.grad[:, :self.m]

    def mixed_hessian(self):
        """``w_{I Jbar}`` as an ``(S, m, m)`` array."""
        m = self.m
        return self.hess[:, :m, m:]


def sum_jets(jets):
    out = jets[0]
    for j in jets[1:]:
        out = out + j
    return out

"""
Grouped rational KAN layer.

The input channels are split into `groups` contiguous groups; every channel
of group r is activated by the same rational function

    F_r(x) = P_r(x) / Q(x),  P_r(x) = a_0 + a_1 x + ... + a_m x^m
                             Q(x)   = sqrt(1 + G(x)^2)
                             G(x)   = b_1 x + ... + b_n x^n

whose denominator coefficients are shared by all groups. The activated
vector is mixed by one linear layer (weight, bias). Every polynomial is
evaluated by Horner's rule and the backward pass uses the closed-form
derivatives of F with respect to a, b and x.
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.kan.horner import derivative_coeffs, horner_eval
from pointkan.nn import Module, check_width, require_cache


class RationalGroupLayer(Module):
    def __init__(
        self,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        groups=4,
        degree_num=5,
        degree_den=4,
    ):
        super().__init__()
        if d_in < 1 or d_out < 1:
            msg = f"Rational layer dimensions must be positive, not {d_in}→{d_out}"
            raise InvalidArgumentError(msg)
        if groups < 1 or d_in % groups:
            msg = f"Group count {groups} does not divide {d_in} input channels"
            raise InvalidArgumentError(msg)
        if degree_num < 0 or degree_den < 0:
            msg = f"Rational degrees must be non-negative, not m={degree_num}, n={degree_den}"
            raise InvalidArgumentError(msg)
        self.d_in = d_in
        self.d_out = d_out
        self.groups = groups
        self.degree_num = degree_num
        self.degree_den = degree_den

        # Identity activation to start with: P(x) = x, Q(x) = 1
        numerator = np.zeros((groups, degree_num + 1))
        if degree_num >= 1:
            numerator[:, 1] = 1.0
        self.params["numerator"] = numerator
        self.params["denominator"] = np.zeros(degree_den)
        bound = 1.0 / np.sqrt(d_in)
        self.params["weight"] = rng.uniform(-bound, bound, size=(d_in, d_out))
        self.params["bias"] = np.zeros(d_out)

    def __repr__(self):
        return (
            f"RationalGroupLayer({self.d_in}→{self.d_out}, g={self.groups},"
            f" m={self.degree_num}, n={self.degree_den})"
        )

    @property
    def channel_group(self) -> np.ndarray:
        """Group index of every input channel"""
        return np.arange(self.d_in) // (self.d_in // self.groups)

    def _channel_numerator(self):
        # (m + 1, d_in): column p holds the numerator of channel p's group
        return self.params["numerator"][self.channel_group].T

    def _denominator_poly(self):
        # G(x) as a polynomial with a zero constant term
        return np.concatenate([[0.0], self.params["denominator"]])

    def _evaluate(self, flat):
        num = horner_eval(self._channel_numerator(), flat)
        g = horner_eval(self._denominator_poly(), flat)
        q = np.sqrt(1.0 + g * g)
        # Degree zero polynomials come back without the row axis
        return tuple(np.broadcast_to(v, flat.shape) for v in (num, g, q))

    def activate(self, x) -> np.ndarray:
        """The per-channel activated values F(x), before mixing"""
        check_width(x, self.d_in, self)
        num, _, q = self._evaluate(np.asarray(x, dtype=np.float64))
        return num / q

    def forward(self, x):
        check_width(x, self.d_in, self)
        flat = x.reshape(-1, self.d_in)
        num, g, q = self._evaluate(flat)
        act = num / q
        y = act @ self.params["weight"] + self.params["bias"]
        return y.reshape(*x.shape[:-1], self.d_out), (x.shape, flat, num, g, q, act)

    def backward(self, dy, cache):
        shape, flat, num, g, q, act = require_cache(cache, self)
        prm = self.params
        m = self.degree_num
        n = self.degree_den
        dyf = dy.reshape(-1, self.d_out)
        d_act = dyf @ prm["weight"].T

        grads = {
            "weight": act.T @ dyf,
            "bias": dyf.sum(axis=0),
        }

        # Powers x^0 .. x^max(m, n), shape (max + 1, rows, d_in)
        top = max(m, n)
        powers = np.empty((top + 1, *flat.shape))
        powers[0] = 1.0
        for i in range(1, top + 1):
            powers[i] = powers[i - 1] * flat

        # dF/da_i = x^i / Q, summed over the channels of each group
        per_channel = np.sum(powers[: m + 1] * (d_act / q), axis=1)
        grads["numerator"] = np.stack(
            [
                per_channel[:, self.channel_group == r].sum(axis=1)
                for r in range(self.groups)
            ]
        )

        # dF/db_j = -x^j G(x) P(x) / Q^3
        common = d_act * g * num / (q * q * q)
        grads["denominator"] = -np.sum(powers[1 : n + 1] * common, axis=(1, 2))

        # dF/dx = P'(x) / Q - Q'(x) P(x) / Q^2,  Q'(x) = G(x) G'(x) / Q
        dp = horner_eval(derivative_coeffs(self._channel_numerator()), flat)
        dg = horner_eval(derivative_coeffs(self._denominator_poly()), flat)
        dq = g * dg / q
        dx = d_act * (dp / q - dq * num / (q * q))
        return dx.reshape(shape), grads

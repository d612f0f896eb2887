"""
B-spline KAN layer: every edge (p, q) carries the learnable function

    phi(x) = scale_base * silu(x) + scale_spline * sum_i c_i B_i(x)

with B_i the degree `order` B-splines on a uniform knot vector.
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.nn import Module, check_width, require_cache


class SplineGrid:
    """
    Uniform knots over [lower, upper] with `grid_size` interior intervals,
    extended by `order` knots of the same spacing beyond each bound.
    """

    __slots__ = "grid_size", "knots", "lower", "order", "upper"

    def __init__(self, lower=-1.0, upper=1.0, grid_size=5, order=3):
        if grid_size < 1:
            msg = f"Spline grid_size must be at least 1, not {grid_size}"
            raise InvalidArgumentError(msg)
        if order < 0:
            msg = f"Spline order must be non-negative, not {order}"
            raise InvalidArgumentError(msg)
        if not lower < upper:
            msg = f"Spline domain [{lower}, {upper}] is empty"
            raise InvalidArgumentError(msg)
        self.lower = float(lower)
        self.upper = float(upper)
        self.grid_size = grid_size
        self.order = order
        h = (self.upper - self.lower) / grid_size
        self.knots = self.lower + h * np.arange(-order, grid_size + order + 1)

    @property
    def basis_count(self) -> int:
        return self.grid_size + self.order

    def __repr__(self):
        return (
            f"SplineGrid([{self.lower}, {self.upper}],"
            f" grid_size={self.grid_size}, order={self.order})"
        )


def _cox_de_boor(x, t, upto):
    """Degree `upto` basis values by the Cox-de Boor recursion"""
    basis = ((x >= t[:-1]) & (x < t[1:])).astype(np.float64)
    for p in range(1, upto + 1):
        left = (x - t[: -(p + 1)]) / (t[p:-1] - t[: -(p + 1)])
        right = (t[p + 1 :] - x) / (t[p + 1 :] - t[1:-p])
        basis = left * basis[..., :-1] + right * basis[..., 1:]
    return basis


def bspline_basis(x, grid: SplineGrid) -> np.ndarray:
    """
    Values of all `grid.basis_count` B-splines at `x`, shape
    `x.shape + (basis_count,)`. Inputs outside the domain are evaluated on
    the extended knots without clamping.
    """
    x = np.asarray(x, dtype=np.float64)[..., None]
    return _cox_de_boor(x, grid.knots, grid.order)


def bspline_basis_and_derivative(x, grid: SplineGrid):
    """
    Basis values and their derivatives with respect to `x`, using

        B'_{i,k} = k (B_{i,k-1} / (t_{i+k} - t_i)
                      - B_{i+1,k-1} / (t_{i+k+1} - t_{i+1}))
    """
    x = np.asarray(x, dtype=np.float64)[..., None]
    t = grid.knots
    k = grid.order
    nb = grid.basis_count
    if k == 0:
        basis = _cox_de_boor(x, t, 0)
        return basis, np.zeros_like(basis)

    lower = _cox_de_boor(x, t, k - 1)
    left = (x - t[: -(k + 1)]) / (t[k:-1] - t[: -(k + 1)])
    right = (t[k + 1 :] - x) / (t[k + 1 :] - t[1:-k])
    basis = left * lower[..., :-1] + right * lower[..., 1:]
    deriv = k * (
        lower[..., :-1] / (t[k : k + nb] - t[:nb])
        - lower[..., 1:] / (t[k + 1 : k + 1 + nb] - t[1 : 1 + nb])
    )
    return basis, deriv


def bspline_basis_derivative(x, grid: SplineGrid) -> np.ndarray:
    return bspline_basis_and_derivative(x, grid)[1]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def silu(x):
    return x * sigmoid(x)


class KanLayer(Module):
    def __init__(
        self,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        grid: SplineGrid | None = None,
    ):
        super().__init__()
        if d_in < 1 or d_out < 1:
            msg = f"KAN layer dimensions must be positive, not {d_in}→{d_out}"
            raise InvalidArgumentError(msg)
        self.d_in = d_in
        self.d_out = d_out
        self.grid = grid = grid or SplineGrid()
        nb = grid.basis_count
        s = 0.1 / nb
        self.params["spline_coeffs"] = rng.uniform(-s, s, size=(d_in, d_out, nb))
        self.params["scale_base"] = np.ones((d_in, d_out))
        self.params["scale_spline"] = np.ones((d_in, d_out))
        self.params["bias"] = np.zeros(d_out)

    def __repr__(self):
        return f"KanLayer({self.d_in}→{self.d_out}, {self.grid!r})"

    def _spline_weight(self):
        # (d_in * basis_count, d_out) matrix of scale_spline[p,q] * c_i[p,q]
        prm = self.params
        w = prm["spline_coeffs"] * prm["scale_spline"][:, :, None]
        return w.transpose(0, 2, 1).reshape(-1, self.d_out)

    def forward(self, x):
        check_width(x, self.d_in, self)
        flat = x.reshape(-1, self.d_in)
        basis, deriv = bspline_basis_and_derivative(flat, self.grid)
        sig = sigmoid(flat)
        act = flat * sig
        y = (
            act @ self.params["scale_base"]
            + basis.reshape(len(flat), -1) @ self._spline_weight()
            + self.params["bias"]
        )
        cache = (x.shape, flat, sig, act, basis, deriv)
        return y.reshape(*x.shape[:-1], self.d_out), cache

    def backward(self, dy, cache):
        shape, flat, sig, act, basis, deriv = require_cache(cache, self)
        prm = self.params
        nb = self.grid.basis_count
        dyf = dy.reshape(-1, self.d_out)
        n = len(dyf)

        # s[p, i, q] = sum_n B_i(x_np) dy_nq
        s = (basis.reshape(n, -1).T @ dyf).reshape(self.d_in, nb, self.d_out)
        coeffs_t = prm["spline_coeffs"].transpose(0, 2, 1)
        grads = {
            "spline_coeffs": (prm["scale_spline"][:, None, :] * s).transpose(0, 2, 1),
            "scale_base": act.T @ dyf,
            "scale_spline": np.sum(coeffs_t * s, axis=1),
            "bias": dyf.sum(axis=0),
        }

        dsilu = sig * (1.0 + flat * (1.0 - sig))
        spline_back = (dyf @ self._spline_weight().T).reshape(n, self.d_in, nb)
        dx = dsilu * (dyf @ prm["scale_base"].T) + np.sum(deriv * spline_back, axis=2)
        return dx.reshape(shape), grads

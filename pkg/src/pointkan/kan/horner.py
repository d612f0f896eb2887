import numpy as np

from pointkan.errors import InvalidArgumentError


def horner_eval(coeffs, x):
    """
    Evaluates a_0 + a_1 x + ... + a_m x^m as a_0 + x(a_1 + x(a_2 + ...)),
    using exactly m multiplications and m additions.

    `coeffs` is indexed along its first axis, so each a_i may itself be an
    array broadcasting against `x` (one polynomial per channel).
    """
    if len(coeffs) == 0:
        msg = "Horner evaluation needs at least one coefficient"
        raise InvalidArgumentError(msg)
    acc = coeffs[-1]
    for a in coeffs[-2::-1]:
        acc = acc * x + a
    return acc


def derivative_coeffs(coeffs):
    """
    Coefficients of the derivative polynomial: (a_1, 2 a_2, ..., m a_m).
    A constant polynomial has derivative (0,).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coeffs) < 2:
        return np.zeros((1, *coeffs.shape[1:]))
    powers = np.arange(1, len(coeffs)).reshape(-1, *([1] * (coeffs.ndim - 1)))
    return coeffs[1:] * powers

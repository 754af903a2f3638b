import math
from itertools import product

import numpy as np
import pytest

from bpxhd.quadrature import grundmann_moller, integrate, simplex_rule


def monomial_integral(alpha):
    """Exact integral of prod lambda_i^alpha_i over a simplex of unit measure."""
    k = len(alpha) - 1
    return math.factorial(k) * math.prod(math.factorial(a) for a in alpha) / math.factorial(k + sum(alpha))


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_grundmann_moller_exact(d, s):
    bary, w = grundmann_moller(s, d)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(bary.sum(1), 1.0)
    deg = 2 * s + 1
    for alpha in product(range(deg + 1), repeat=d + 1):
        if sum(alpha) > deg:
            continue
        val = np.dot(w, np.prod(bary ** np.array(alpha), axis=1))
        assert val == pytest.approx(monomial_integral(alpha), rel=1e-12, abs=1e-15)


def test_rule_degree_not_exceeded_claim():
    # degree 2s+2 is generally not integrated exactly
    bary, w = grundmann_moller(0, 2)
    assert not np.isclose(np.dot(w, bary[:, 0] ** 2), monomial_integral((2, 0, 0)))


def test_simplex_rule_degree():
    for degree in range(0, 8):
        bary, w = simplex_rule(degree, 3)
        val = np.dot(w, bary[:, 0] ** degree)
        assert val == pytest.approx(monomial_integral((degree, 0, 0, 0)), rel=1e-12)


def test_zero_dimensional():
    bary, w = grundmann_moller(2, 0)
    assert bary.shape == (1, 1) and w.tolist() == [1.0]


def test_integrate_on_simplex():
    tri = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    # int x^2 over the triangle = 2/3
    assert integrate(lambda x: x[:, 0] ** 2, tri, degree=2) == pytest.approx(2 / 3)

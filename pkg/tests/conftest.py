import itertools
import math

import numpy as np
import pytest

from piola.chart import Chart, ChartMap


def random_spd(rng, d, cond_max=100.0):
    """Random SPD matrix with condition number at most ``cond_max``."""
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    eig = np.exp(rng.uniform(0.0, math.log(cond_max), size=d))
    eig[0], eig[-1] = 1.0, eig[-1]
    return (Q * eig) @ Q.T


def leibniz_det(m):
    """Determinant by the permutation sum, an oracle independent of the package."""
    n = m.shape[0]
    total = 0.0
    for perm in itertools.permutations(range(n)):
        sign = 1
        for i in range(n):
            for j in range(i + 1, n):
                if perm[i] > perm[j]:
                    sign = -sign
        total += sign * math.prod(m[i, perm[i]] for i in range(n))
    return total


def minors_cofactor(m):
    """Matrix of signed minors, each minor by the permutation sum."""
    n = m.shape[0]
    if n == 1:
        return np.ones((1, 1))
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            sub = np.delete(np.delete(m, i, axis=0), j, axis=1)
            out[i, j] = (-1) ** (i + j) * leibniz_det(sub)
    return out


SPHERE = [["4/(1+x0^2+x1^2)^2", "0"], ["0", "4/(1+x0^2+x1^2)^2"]]
HYPERBOLIC = [["1/x1^2", "0"], ["0", "1/x1^2"]]
POLAR = [["1", "0"], ["0", "x0^2"]]
ANISOTROPIC = [["1+x0^2", "0"], ["0", "exp(x1)"]]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def euclid2():
    return Chart.euclidean(2, [[0, 1], [0, 1]])


@pytest.fixture
def hyperbolic_map():
    S = Chart.from_strings(2, [[-1, 1], [0.5, 1.5]], HYPERBOLIC)
    T = Chart.from_strings(2, [[-1.5, 1.5], [0.25, 2]], HYPERBOLIC)
    return ChartMap(S, T, ["x0 + 0.2*x1^2", "x1 + 0.1*sin(x0) + 0.05*x0*x1"])


@pytest.fixture
def sphere_map():
    S = Chart.from_strings(2, [[-1, 1], [-1, 1]], SPHERE)
    T = Chart.from_strings(2, [[-1.5, 1.5], [-1.5, 1.5]], SPHERE)
    return ChartMap(S, T, ["x0 + 0.1*sin(x1) + 0.05*x0*x1", "x1 + 0.1*x0*x1 - 0.05*cos(x0)"])


@pytest.fixture
def aniso_map():
    S = Chart.from_strings(2, [[0, 1], [0, 1]], ANISOTROPIC)
    T = Chart.from_strings(2, [[-0.5, 1.5], [-0.5, 1.5]], ANISOTROPIC)
    return ChartMap(S, T, ["x0 + 0.1*x1^2 + 0.05*sin(x0*x1)", "x1 + 0.1*x0*x1"])

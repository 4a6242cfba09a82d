"""Builtin benchmark problems."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Tuple

import numpy as np

from .algebra import TracePoly
from .relaxation import INVOLUTION, PROJECTION, Constraint, ProblemSpec

T = TracePoly.tr


@dataclass(frozen=True)
class Example:
    id: str
    build: Callable[[], ProblemSpec]
    order: int
    expected: float  # reference value of the relaxation at ``order``
    heavy: bool = False  # refuse to solve without --force
    note: str = ""


def toy() -> ProblemSpec:
    """``min Tr(x1 x2 x3) + Tr(x1 x2) Tr(x3)`` over triples of projections."""
    a = T((0, 1, 2)) + T((0, 1)) * T((2,))
    return ProblemSpec(3, a, [Constraint(PROJECTION, var=j) for j in range(3)], 1, "min",
                       ["x1", "x2", "x3"], "toy").validate()


def toy_minimizer() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """2x2 projections attaining -1/32 (float entries)."""
    r = np.sqrt(15.0)
    X1 = np.array([[1.0, 0.0], [0.0, 0.0]])
    X2 = np.array([[1 / 16, r / 16], [r / 16, 15 / 16]])
    X3 = np.array([[3 / 8, -r / 8], [-r / 8, 5 / 8]])
    return X1, X2, X3


def bell_quadratic() -> ProblemSpec:
    """``max Tr(x1 y2 + x2 y1)^2 + Tr(x1 y1 - x2 y2)^2`` with ``x^2 = y^2 = 1``."""
    x1, x2, y1, y2 = 0, 1, 2, 3
    a = (T((x1, y2)) + T((x2, y1))) ** 2 + (T((x1, y1)) - T((x2, y2))) ** 2
    return ProblemSpec(4, a, [Constraint(INVOLUTION, var=j) for j in range(4)], 1, "max",
                       ["x1", "x2", "y1", "y2"], "bell-quadratic").validate()


COVARIANCE_SIGNS: Dict[Tuple[int, int], int] = {
    (1, 1): 1, (1, 2): 1, (1, 3): 1,
    (2, 1): 1, (2, 2): 1, (2, 3): -1,
    (3, 1): 1, (3, 2): -1,
}


def bell_covariance() -> ProblemSpec:
    """Signed sum of covariances ``Tr(x_i y_j) - Tr(x_i) Tr(y_j)`` with ``x^2 = y^2 = 1``."""
    a = TracePoly()
    for (i, j), s in COVARIANCE_SIGNS.items():
        xi, yj = i - 1, 2 + j
        a = a + s * (T((xi, yj)) - T((xi,)) * T((yj,)))
    names = ["x1", "x2", "x3", "y1", "y2", "y3"]
    return ProblemSpec(6, a, [Constraint(INVOLUTION, var=j) for j in range(6)], 1, "max",
                       names, "bell-covariance").validate()


def bell_bilocal(signs: Tuple[int, int, int] = (1, 1, 1)) -> ProblemSpec:
    """Bilocal quadratic family over eight projections; degree 8.

    ``a = -1/8 (J1 + s0 J2)^2 + s1 J1 + s2 J2 - 2`` where ``J1``/``J2`` are sums
    of products of two-letter traces.
    """
    s0, s1, s2 = signs
    x = [0, 1]
    y1 = [2, 3]  # y'_1, y'_2
    y2 = [4, 5]  # y''_1, y''_2
    z = [6, 7]
    J1 = TracePoly()
    J2 = TracePoly()
    for i in range(2):
        for j in range(2):
            J1 = J1 + T((x[i], y1[0])) * T((y2[0], z[j]))
            J2 = J2 + (-1) ** (i + j) * T((x[i], y1[1])) * T((y2[1], z[j]))
    a = Fraction(-1, 8) * (J1 + s0 * J2) ** 2 + s1 * J1 + s2 * J2 - 2
    names = ["x1", "x2", "y'1", "y'2", "y''1", "y''2", "z1", "z2"]
    return ProblemSpec(8, a, [Constraint(PROJECTION, var=j) for j in range(8)], 1, "max",
                       names, "bell-bilocal").validate()


EXAMPLES: Dict[str, Example] = {
    "toy": Example("toy", toy, 2, -0.0467),
    "bell-quadratic": Example("bell-quadratic", bell_quadratic, 2, 4.0),
    "bell-covariance": Example("bell-covariance", bell_covariance, 2, 5.0),
    "bell-bilocal": Example(
        "bell-bilocal", bell_bilocal, 4, float("nan"), heavy=True,
        note="degree 8 in 8 variables: the order-4 relaxation is far beyond a dense solver",
    ),
}


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None

"""Composite tensor-product Gauss-Legendre quadrature on rectangles.

The spatial discretisation used throughout this package: each axis of a
rectangular domain is split into ``n`` equal subintervals carrying a
``k``-point Gauss-Legendre rule, giving ``N = n * k`` points per axis and
``N**2`` points in the plane.  Two-dimensional quantities are stored as flat
vectors in row-major order, i.e. the value at ``(x1[a], x2[b])`` sits at flat
index ``a * N + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GaussRule",
    "Rectangle",
    "SpatialGrid",
    "build_gauss_rule",
    "build_grid",
    "apply_quadrature",
]

_NEWTON_TOL = 1e-15
_NEWTON_MAX_ITER = 100
_MAX_RULE_ORDER = 32


@dataclass
class GaussRule:
    """A k-point Gauss-Legendre rule on the reference interval [-1, 1].

    Attributes
    ----------
    k : int
        Number of nodes.  Exact for polynomials of degree <= 2k - 1.
    nodes : ndarray, shape (k,)
        Node abscissae in ascending order, all inside (-1, 1).
    weights : ndarray, shape (k,)
        Positive weights summing to 2.
    """

    k: int
    nodes: np.ndarray
    weights: np.ndarray


def _legendre_and_derivative(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate P_k and P_k' at ``x`` by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    if k == 1:
        return p, np.ones_like(x)
    for j in range(2, k + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    # derivative identity: (1 - x^2) P_k'(x) = k (P_{k-1}(x) - x P_k(x))
    dp = k * (p_prev - x * p) / (1.0 - x * x)
    return p, dp


def build_gauss_rule(k: int) -> GaussRule:
    """Construct the k-point Gauss-Legendre rule on [-1, 1].

    Nodes are the roots of the Legendre polynomial P_k, found by Newton
    iteration started from the Chebyshev-angle estimates
    ``cos(pi * (4i + 3) / (4k + 2))``.  The iteration is run to an update
    of at most 1e-15, which the smooth, well-separated root structure of
    P_k reaches in a handful of steps for every supported order.

    Parameters
    ----------
    k : int
        Number of nodes, between 1 and 32.

    Returns
    -------
    GaussRule

    Raises
    ------
    ValueError
        If ``k`` is outside the supported range.
    RuntimeError
        If the Newton iteration fails to converge (not observed for any
        supported order; kept as a guard).
    """
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= _MAX_RULE_ORDER:
        raise ValueError(f"rule order k must be an integer in [1, {_MAX_RULE_ORDER}], got {k!r}")
    i = np.arange(k, dtype=float)
    x = np.cos(np.pi * (4.0 * i + 3.0) / (4.0 * k + 2.0))
    dp = np.ones_like(x)
    for _ in range(_NEWTON_MAX_ITER):
        p, dp = _legendre_and_derivative(x, k)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) <= _NEWTON_TOL:
            break
    else:
        raise RuntimeError(f"Legendre root search did not converge for k={k}")
    # one clean-up evaluation so the weights use the final abscissae
    _, dp = _legendre_and_derivative(x, k)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return GaussRule(k=int(k), nodes=x[order], weights=w[order])


@dataclass
class Rectangle:
    """Axis-aligned rectangle [a1, b1] x [a2, b2]."""

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self) -> None:
        if not (self.b1 > self.a1 and self.b2 > self.a2):
            raise ValueError("rectangle sides must have positive length")

    @property
    def area(self) -> float:
        return (self.b1 - self.a1) * (self.b2 - self.a2)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.b1 - self.a1, self.b2 - self.a2))


def _composite_axis(a: float, b: float, n: int, rule: GaussRule) -> tuple[np.ndarray, np.ndarray, float]:
    h = (b - a) / n
    edges = a + h * np.arange(n)
    # node s of subinterval i sits at edge_i + (h/2) (1 + xi_s)
    pts = (edges[:, None] + 0.5 * h * (1.0 + rule.nodes[None, :])).ravel()
    wts = np.tile(0.5 * h * rule.weights, n)
    return pts, wts, h


@dataclass
class SpatialGrid:
    """Composite Gauss-Legendre grid over a rectangle.

    Attributes
    ----------
    domain : Rectangle
    n : int
        Subintervals per axis.
    rule : GaussRule
        The per-subinterval rule; ``points_per_axis == n * rule.k``.
    x1, x2 : ndarray, shape (N,)
        Node coordinates along each axis, ascending.
    w1, w2 : ndarray, shape (N,)
        Scaled per-axis weights; each sums to the side length, so the
        tensor-product weights sum to the domain area.
    h1, h2 : float
        Subinterval widths per axis.
    """

    domain: Rectangle
    n: int
    rule: GaussRule
    x1: np.ndarray = field(repr=False)
    x2: np.ndarray = field(repr=False)
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    h1: float
    h2: float

    @property
    def k(self) -> int:
        return self.rule.k

    @property
    def points_per_axis(self) -> int:
        return self.n * self.rule.k

    @property
    def total_points(self) -> int:
        return self.points_per_axis ** 2

    def flat_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of all N^2 grid points in flat row-major order.

        Returns ``(p1, p2)`` with ``p1[a * N + b] == x1[a]`` and
        ``p2[a * N + b] == x2[b]``.
        """
        N = self.points_per_axis
        p1 = np.repeat(self.x1, N)
        p2 = np.tile(self.x2, N)
        return p1, p2

    def flat_weights(self) -> np.ndarray:
        """Tensor-product weights in flat row-major order; sums to the area."""
        return (self.w1[:, None] * self.w2[None, :]).ravel()


def build_grid(domain: Rectangle, n: int, rule: GaussRule) -> SpatialGrid:
    """Assemble the composite tensor-product grid for ``domain``.

    Parameters
    ----------
    domain : Rectangle
    n : int
        Subintervals per axis, at least 1.
    rule : GaussRule

    Returns
    -------
    SpatialGrid
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"subinterval count n must be a positive integer, got {n!r}")
    x1, w1, h1 = _composite_axis(domain.a1, domain.b1, int(n), rule)
    x2, w2, h2 = _composite_axis(domain.a2, domain.b2, int(n), rule)
    return SpatialGrid(domain=domain, n=int(n), rule=rule, x1=x1, x2=x2, w1=w1, w2=w2, h1=h1, h2=h2)


def apply_quadrature(grid: SpatialGrid, values: np.ndarray) -> float:
    """Quadrature sum of a flat length-N^2 value vector over the domain.

    ``values[a * N + b]`` is taken as the integrand sample at
    ``(x1[a], x2[b])``.
    """
    N = grid.points_per_axis
    values = np.asarray(values, dtype=float)
    if values.shape != (N * N,):
        raise ValueError(f"expected a flat vector of length {N * N}, got shape {values.shape}")
    return float(grid.w1 @ values.reshape(N, N) @ grid.w2)

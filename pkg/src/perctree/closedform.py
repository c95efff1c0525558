"""Closed-form references.

* ``chi_polynomial``: expected cluster size of the base vertex of a finite
  graph, as an exact integer polynomial in ``p``.
* ``free_product_pc``: threshold of a free product of finite transitive
  factors from their cluster-size polynomials.
* ``z2z_amalgam_pc``: threshold of ``(Z2 x Z) *_{Z2} Z4``, whose ``Z2 x Z``
  pieces are infinite ladders summed in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from .builders import FiniteGraph
from .partition import Color, UnionFind, child_color
from .structure import ChildSlot, ModelPiece

MAX_CHI_EDGES = 16


@dataclass(frozen=True)
class ChiPolynomial:
    """Integer coefficients, lowest degree first."""

    coefficients: tuple

    def __call__(self, p):
        acc = 0.0 * np.asarray(p, dtype=float)
        for c in reversed(self.coefficients):
            acc = acc * p + c
        return acc

    def exact(self, p) -> Fraction:
        p = Fraction(p)
        acc = Fraction(0)
        for c in reversed(self.coefficients):
            acc = acc * p + c
        return acc

    def __str__(self) -> str:
        terms = []
        for d, c in enumerate(self.coefficients):
            if c:
                terms.append(f"{c}" if d == 0 else f"{c}*p" if d == 1 else f"{c}*p^{d}")
        return " + ".join(terms).replace("+ -", "- ") or "0"


def chi_polynomial(graph: FiniteGraph) -> ChiPolynomial:
    """Expected size of the open cluster of ``graph.base``."""
    m = len(graph.edges)
    if m > MAX_CHI_EDGES:
        raise ValueError(f"{m} edges exceeds the enumeration limit of {MAX_CHI_EDGES}")
    # weight[a] = total cluster size over subsets with a open edges
    weight = [0] * (m + 1)
    for mask in range(1 << m):
        uf = UnionFind(graph.vertex_count)
        for k, (u, v) in enumerate(graph.edges):
            if mask >> k & 1:
                uf.union(u, v)
        root = uf.find(graph.base)
        size = sum(1 for v in range(graph.vertex_count) if uf.find(v) == root)
        weight[bin(mask).count("1")] += size
    coeffs = [0] * (m + 1)
    for a, w in enumerate(weight):
        if not w:
            continue
        # p^a (1 - p)^(m - a)
        for i in range(m - a + 1):
            coeffs[a + i] += w * comb(m - a, i) * (-1) ** i
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return ChiPolynomial(tuple(coeffs))


def free_product_polynomial(chis: Sequence[ChiPolynomial], p):
    """``sum_j prod_{i != j} chi_i - (n - 1) prod_i chi_i`` at ``p``."""
    vals = [c(p) for c in chis]
    n = len(vals)
    total = 0.0
    for j in range(n):
        term = 1.0
        for i in range(n):
            if i != j:
                term = term * vals[i]
        total = total + term
    prod = 1.0
    for v in vals:
        prod = prod * v
    return total - (n - 1) * prod


def _first_root(f, grid: int, tol: float, upper: float = 1.0):
    """First sign change of ``f`` on ``(0, upper)``, refined by bisection; None if absent."""
    lo = 0.0
    flo = f(lo)
    for i in range(1, grid + 1):
        hi = upper * i / grid
        fhi = f(hi)
        if i == grid and fhi == 0:
            # a root exactly at the end of the range is not below it
            return None
        if (flo > 0) != (fhi > 0) or fhi == 0:
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = f(mid)
                if (fm > 0) == (flo > 0) and fm != 0:
                    lo, flo = mid, fm
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        lo, flo = hi, fhi
    return None


def free_product_pc(chis: Sequence[ChiPolynomial], tol: float = 1e-12, grid: int = 4096) -> float:
    if len(chis) < 2:
        raise ValueError("need at least two factors")
    root = _first_root(lambda p: float(free_product_polynomial(chis, p)), grid, tol)
    if root is None or root >= 1.0:
        return 1.0
    return root


# ---------------------------------------------------------------------------
# (Z2 x Z) amalgamated with Z4 over Z2


@dataclass
class LadderSolution:
    A: float
    B: float
    C: float
    iterations: int
    residuals: tuple


def ladder_connections(p: float, tol: float = 1e-14, max_iter: int = 1_000_000) -> LadderSolution:
    """Border-connection probabilities: ``A`` for a ladder piece, ``B`` for a
    square piece, ``C`` for a half ladder, iterated upward from zero."""
    q = 2 * p - p * p
    s = (1 - p) ** 2
    a = b = c = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        a_new = q + s * (2 * c - c * c)
        b_new = q * q * a_new + (2 * p * p - p**4) * (1 - a_new)
        c_new = p * p * (1 - s * (1 - b_new)) / (1 - p * p * s * (1 - b_new))
        change = max(abs(a_new - a), abs(b_new - b), abs(c_new - c))
        a, b, c = a_new, b_new, c_new
        if change < tol:
            break
    residuals = (
        a - (q + s * (2 * c - c * c)),
        b - (q * q * a + (2 * p * p - p**4) * (1 - a)),
        c - p * p * (1 - s * (1 - b) * (1 - c)),
    )
    return LadderSolution(a, b, c, it, tuple(float(r) for r in residuals))


def _ladder_blocks(p: float, sol: LadderSolution):
    q = 2 * p - p * p
    s = (1 - p) ** 2
    b, c = sol.B, sol.C
    t = np.array(
        [
            [p * p + 2 * p * (1 - p) * q, 2 * p * (1 - p) ** 3],
            [p * q, p * s],
        ]
    )
    sibling = np.array([[1.0, 0.0], [b, 1 - b]])
    right = np.array([[1.0, 0.0], [c, 1 - c]])
    left = right @ np.array([[1.0, 0.0], [q, s]])
    return t, sibling, right, left


def ladder_block(p: float, sol: LadderSolution) -> np.ndarray:
    """Expected children of each color (joined-marked, singleton-marked) of a ladder piece."""
    t, sibling, right, left = _ladder_blocks(p, sol)
    return 2 * left @ t @ np.linalg.solve(np.eye(2) - sibling @ t, right)


def ladder_block_partial(p: float, sol: LadderSolution, terms: int = 200) -> np.ndarray:
    t, sibling, right, left = _ladder_blocks(p, sol)
    step = sibling @ t
    power = np.eye(2)
    total = np.zeros((2, 2))
    for _ in range(terms):
        total += left @ t @ power @ right
        power = power @ step
    return 2 * total


_SQUARE = ModelPiece("square", 4, [(0, 1), (1, 2), (2, 3), (3, 0)], [0, 2], [ChildSlot("ladder", [1, 3])])


def square_block(p: float) -> np.ndarray:
    """Expected ladder children of each color of a square piece, by direct enumeration."""
    parents = [Color((0, 0), 0), Color((0, 1), 0)]
    out = np.zeros((2, 2))
    n_edges = len(_SQUARE.edges)
    for r, parent in enumerate(parents):
        for mask in range(1 << n_edges):
            k = bin(mask).count("1")
            w = p**k * (1 - p) ** (n_edges - k)
            child = child_color(_SQUARE, parent, mask, [None], 0)
            if child.white:
                continue
            out[r, 0 if child.partition == (0, 0) else 1] += w
    return out


@dataclass
class Z2ZReport:
    p_c: float
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    def to_json(self) -> dict:
        return {"p_c": self.p_c, "residuals": self.residuals, "iterations": self.iterations}


def z2z_rho(p: float) -> float:
    if p <= 0.0:
        return 0.0
    sol = ladder_connections(p)
    prod = square_block(p) @ ladder_block(p, sol)
    return math.sqrt(max(abs(np.linalg.eigvals(prod)).max(), 0.0))


def z2z_amalgam_pc(tol: float = 1e-12, grid: int = 1000) -> Z2ZReport:
    root = _first_root(lambda p: z2z_rho(p) - 1.0, grid, tol, upper=0.999)
    if root is None:
        return Z2ZReport(1.0)
    sol = ladder_connections(root)
    m12 = square_block(root)
    m21 = ladder_block(root, sol)
    n = 2
    m = np.zeros((2 * n, 2 * n))
    m[:n, n:] = m12
    m[n:, :n] = m21
    residuals = {
        "fixed_point": max(abs(r) for r in sol.residuals),
        "det": float(np.linalg.det(m - np.eye(2 * n))),
        "series": float(np.max(np.abs(m21 - ladder_block_partial(root, sol)))),
    }
    return Z2ZReport(root, residuals, sol.iterations)

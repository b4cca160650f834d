"""Radau collocation nodes, differentiation matrix, and quadrature weights.

Right-endpoint Radau points (roots of P_{p-1} - P_p mapped to (0, 1]) give a
stiffly accurate Legendre-family scheme: the last node coincides with the
interval end, so interval continuity is a plain variable identification.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

SUPPORTED_DEGREES = (1, 2, 3, 4, 5)


def collocation_nodes(degree: int):
    """Radau nodes on (0, 1] and their quadrature weights.

    Weights integrate the Lagrange basis over [0, 1]; the rule is exact for
    polynomials up to degree 2p - 2.
    """
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported collocation degree {degree}; use one of {SUPPORTED_DEGREES}")
    # roots of P_{p-1}(x) - P_p(x) on [-1, 1]; x = 1 is always a root
    coeffs = np.zeros(degree + 1)
    coeffs[degree - 1] = 1.0
    coeffs[degree] -= 1.0
    roots = npleg.legroots(coeffs)
    nodes = np.sort((np.real(roots) + 1.0) / 2.0)
    nodes[-1] = 1.0
    weights = np.array([_lagrange_integral(nodes, i, 1.0) for i in range(degree)])
    return nodes, weights


def _lagrange_poly(nodes, i):
    """Coefficients of the i-th Lagrange basis polynomial over ``nodes``."""
    poly = np.array([1.0])
    for j, xj in enumerate(nodes):
        if j == i:
            continue
        poly = nppoly.polymul(poly, np.array([-xj, 1.0])) / (nodes[i] - xj)
    return poly


def _lagrange_integral(nodes, i, upto):
    anti = nppoly.polyint(_lagrange_poly(nodes, i))
    return nppoly.polyval(upto, anti)


def differentiation_matrix(degree: int):
    """Derivative matrix D[r, j] = dL_r/dtau at collocation node j.

    The Lagrange basis runs over tau_0 = 0 plus the Radau nodes, so row 0
    carries the interval-start state and rows 1..p the collocation states.
    """
    nodes, _ = collocation_nodes(degree)
    grid = np.concatenate([[0.0], nodes])
    d = np.zeros((degree + 1, degree))
    for r in range(degree + 1):
        dpoly = nppoly.polyder(_lagrange_poly(grid, r))
        for j in range(degree):
            d[r, j] = nppoly.polyval(nodes[j], dpoly)
    return d


def partial_time_matrix(degree: int):
    """T[j, r] = integral of the r-th collocation Lagrange basis over [0, tau_j].

    Used to recover elapsed time at each node from nodewise 1/s_dot values;
    the last row equals the quadrature weights.
    """
    nodes, _ = collocation_nodes(degree)
    t = np.zeros((degree, degree))
    for r in range(degree):
        for j in range(degree):
            t[j, r] = _lagrange_integral(nodes, r, nodes[j])
    return t

"""Closed-form results for learning on a circle, used as oracles.

For data on the unit circle with density alpha * exp(-|phi| / sigma), the
hidden-unit positions, the divergence between the data distribution and
the distribution it induces over codes, and the false-negative rate of
nearest-unit hashing all have analytic forms. Trained weight matrices are
checked against these.
"""

from __future__ import annotations

import csv
import math
from typing import Tuple

import numpy as np

from .errors import DegenerateRow, DomainError, NoBracket


def analytic_m2(sigma: float) -> Tuple[float, float]:
    """Optimal two-unit angles (+arctan sigma, -arctan sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a = math.atan(sigma)
    return (a, -a)


def _psi_equation(psi: float, sigma: float) -> float:
    return ((sigma * math.cos(psi) - math.sin(psi)) * math.exp(-math.pi / sigma)
            + (sigma * math.cos(psi / 2) - math.sin(psi / 2)) * math.exp(-psi / (2 * sigma)))


def solve_psi_m3(sigma: float) -> float:
    """Flank angle for three units: the root of the stationarity equation.

    Bisection on (0, pi); the bracket is validated before iterating and the
    interval is shrunk until it collapses to floating-point resolution.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lo, hi = 1e-12, math.pi - 1e-12
    flo, fhi = _psi_equation(lo, sigma), _psi_equation(hi, sigma)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoBracket(f"no sign change on (0, pi) at sigma={sigma}")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # interval at ULP width
            break
        fmid = _psi_equation(mid, sigma)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return 0.5 * (lo + hi)


def _cell_masses(sigma: float, psi: float):
    """Probability mass and arc length of each code cell for three units.

    Returns ((P_center, len_center), (P_flank, len_flank) twice) for the
    one-active-unit code and ((P_wrap, len), (P_rest, len)) for the
    two-active-unit code, all under the exponential circle density.
    """
    q = math.exp(-math.pi / sigma)
    z = 1.0 - q
    p_center = (1.0 - math.exp(-psi / (2 * sigma))) / z
    p_flank = (math.exp(-psi / (2 * sigma)) - q) / (2 * z)
    p_wrap = (math.exp(-(math.pi - psi / 2) / sigma) - q) / z
    return (p_center, psi, p_flank, math.pi - psi / 2), (p_wrap, psi, 1.0 - p_wrap, 2 * math.pi - psi)


def _entropy_term(sigma: float) -> float:
    # integral of rho * ln(rho) minus ln(alpha); equals -E|phi| / sigma
    q = math.exp(-math.pi / sigma)
    return -(sigma - (math.pi + sigma) * q) / (sigma * (1.0 - q))


def kl_divergence(sigma: float, psi: float, hash_k: int) -> float:
    """Divergence between the circle density and the code-induced density.

    hash_k = 1 activates the nearest of the three units (three cells);
    hash_k = 2 activates the nearest two (two distinct codes).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if hash_k not in (1, 2):
        raise ValueError("hash_k must be 1 or 2")
    if not (0.0 < psi < 2.0 * math.pi / 3.0 + 1e-9):
        raise DomainError(f"psi={psi} outside (0, 2*pi/3]")
    alpha = 1.0 / (2.0 * sigma * (1.0 - math.exp(-math.pi / sigma)))
    (p0, len0, p1, len1), (pw, lenw, pr, lenr) = _cell_masses(sigma, psi)
    if hash_k == 1:
        cells = [(p0, len0), (p1, len1), (p1, len1)]
    else:
        cells = [(pw, lenw), (pr, lenr)]
    total = _entropy_term(sigma)
    for mass, length in cells:
        if mass <= 0.0:
            raise DomainError(f"cell mass {mass:.3e} is not positive")
        # rho-weighted log of (rho normalization / induced density)
        total -= mass * math.log(mass / (alpha * length))
    return total


def false_negative_prob(theta: float, m: int) -> float:
    """Chance that two points theta apart land in different nearest-unit
    cells, for m units evenly spread (smooth-density limit, one active unit).

    Linear in theta up to 2*pi/m, then saturates at 1; continuous at the knee.
    """
    if not (0.0 <= theta <= math.pi):
        raise ValueError("theta must lie in [0, pi]")
    if m < 1:
        raise ValueError("m must be >= 1")
    knee = 2.0 * math.pi / m
    if theta <= knee:
        return m * theta / (2.0 * math.pi)
    return 1.0


def empirical_unit_angles(W) -> np.ndarray:
    """Sorted atan2 angle of each weight row (d must be 2)."""
    weights = np.asarray(getattr(W, "weights", W), dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != 2:
        raise ValueError(f"need (m, 2) weights, got {weights.shape}")
    norms = np.linalg.norm(weights, axis=1)
    if (norms < 1e-6).any():
        bad = int(np.argmin(norms))
        raise DegenerateRow(f"row {bad} has norm {norms[bad]:.3e}")
    return np.sort(np.arctan2(weights[:, 1], weights[:, 0]))


def write_toy_csv(path_or_file, rows):
    """Emit (sigma, m, analytic, empirical, kl_k1, kl_k2) rows for plotting.

    Angle lists are ';'-joined in file order. Missing values are blank.
    Accepts a path or an open text stream.
    """

    def fmt(val):
        if val is None:
            return ""
        if isinstance(val, (list, tuple, np.ndarray)):
            return ";".join(f"{float(v):.10g}" for v in val)
        return f"{float(val):.10g}"

    def emit(f):
        writer = csv.writer(f)
        writer.writerow(["sigma", "m", "analytic_angles", "empirical_angles",
                         "kl_k1", "kl_k2"])
        for sigma, m, analytic, empirical, kl1, kl2 in rows:
            writer.writerow([fmt(sigma), int(m), fmt(analytic), fmt(empirical),
                             fmt(kl1), fmt(kl2)])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as f:
            emit(f)

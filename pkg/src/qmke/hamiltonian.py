"""Weak-Hamiltonian estimation from prior and estimated final Bloch vectors.

A Hamiltonian ``H = h . sigma`` is carried as the real 3-vector ``h`` (the
evolution time is absorbed into ``h``).
"""

from __future__ import annotations

import math

import numpy as np

from .algebra import as_bloch
from .errors import DegeneratePriorError, DomainError


def as_hamiltonian(h):
    v = np.asarray(h, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise DomainError(f"Hamiltonian vector must be 3 finite reals, got {h!r}")
    return v


def evolve(tau, h):
    """Bloch vector of ``exp(-iH) tau exp(iH)``.

    This is a right-handed rotation of ``tau`` about ``h`` by ``2|h|``.
    """
    t = as_bloch(tau, "tau")
    h = as_hamiltonian(h)
    n = float(np.linalg.norm(h))
    if n == 0.0:
        return t.copy()
    k = h / n
    angle = 2.0 * n
    c, s = math.cos(angle), math.sin(angle)
    return t * c + np.cross(k, t) * s + k * float(k @ t) * (1.0 - c)


def estimate_hamiltonian(tau, rho):
    """First-order Hamiltonian estimate ``(tau x rho) / (2 |tau|^2)``.

    Only the component of the true ``h`` perpendicular to ``tau`` is
    recoverable; the estimate is orthogonal to ``tau`` by construction.

    Raises:
        DegeneratePriorError: ``|tau| <= 1e-12`` (maximally mixed prior).
    """
    t = as_bloch(tau, "tau")
    r = as_bloch(rho, "rho")
    n2 = float(t @ t)
    if n2 <= 1e-24:
        raise DegeneratePriorError("the maximally mixed prior does not determine a Hamiltonian")
    return np.cross(t, r) / (2.0 * n2)


def hamiltonian_distance(h1, h2):
    """Trace distance ``Tr|H1 - H2| / 2``, equal to ``|h1 - h2|``."""
    return float(np.linalg.norm(as_hamiltonian(h1) - as_hamiltonian(h2)))

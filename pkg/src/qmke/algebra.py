"""Closed-form algebra of 2x2 Hermitian operators in the Pauli basis.

States are carried as Bloch vectors: real numpy arrays ``r`` of shape (3,)
with ``rho = (I + r . sigma) / 2``.  General Hermitian operators
``c0 I + c . sigma`` are carried as :class:`HermitianOp`.  Explicit complex
matrices only appear in the conversion helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    ExponentOverflowError,
    RankDeficiencyError,
    UndefinedDivergenceError,
)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

PHYSICAL_TOL = 1e-12
PURE_TOL = 1e-12
# math.exp overflows just above 709.78
_EXP_LIMIT = 709.0


def as_bloch(r, name="r"):
    """Validate and return a physical Bloch vector as a float array."""
    v = np.asarray(r, dtype=float)
    if v.shape != (3,):
        raise DomainError(f"{name} must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has non-finite components")
    if float(v @ v) > 1.0 + PHYSICAL_TOL:
        raise DomainError(f"{name} lies outside the Bloch ball: |{name}| = {np.linalg.norm(v)!r}")
    return v


def _norm(v):
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@dataclass(frozen=True)
class HermitianOp:
    """The operator ``c0 * I + c . sigma``."""

    c0: float
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (3,):
            raise DomainError(f"vector part must have shape (3,), got {c.shape}")
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "c", c)

    @classmethod
    def from_matrix(cls, m):
        """Pauli decomposition of a Hermitian 2x2 matrix (anti-Hermitian part dropped)."""
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise DomainError(f"expected a 2x2 matrix, got shape {m.shape}")
        c0 = 0.5 * np.real(m[0, 0] + m[1, 1])
        c = np.array([np.real(np.trace(m @ p)) / 2 for p in PAULI])
        return cls(c0, c)

    @classmethod
    def from_bloch(cls, r):
        """The density operator with Bloch vector ``r``."""
        return cls(0.5, 0.5 * np.asarray(r, dtype=float))

    def matrix(self):
        return self.c0 * IDENTITY + sum(ci * p for ci, p in zip(self.c, PAULI))

    @property
    def norm(self):
        """Length of the vector part."""
        return _norm(self.c)

    @property
    def trace(self):
        return 2.0 * self.c0

    def eigenvalues(self):
        """Eigenvalues in ascending order."""
        n = self.norm
        return np.array([self.c0 - n, self.c0 + n])

    def hs_inner(self, other):
        """Hilbert-Schmidt inner product Tr[self @ other]."""
        return 2.0 * (self.c0 * other.c0 + float(self.c @ other.c))

    def to_bloch(self):
        """Bloch vector of ``self / Tr[self]``."""
        if self.c0 <= 0:
            raise DomainError("operator trace must be positive to normalise")
        return self.c / self.c0

    def __add__(self, other):
        return HermitianOp(self.c0 + other.c0, self.c + other.c)

    def __sub__(self, other):
        return HermitianOp(self.c0 - other.c0, self.c - other.c)

    def __neg__(self):
        return HermitianOp(-self.c0, -self.c)

    def __mul__(self, k):
        return HermitianOp(k * self.c0, k * self.c)

    __rmul__ = __mul__


def bloch_to_matrix(r):
    return HermitianOp.from_bloch(r).matrix()


def matrix_to_bloch(rho):
    """Bloch vector of a unit-trace Hermitian matrix."""
    rho = np.asarray(rho, dtype=complex)
    return np.array([np.real(np.trace(rho @ p)) for p in PAULI])


@dataclass(frozen=True)
class StateParams:
    """Polar angle, azimuth and purity of a qubit prior.

    The state is ``(|psi><psi| + eps |psi_perp><psi_perp|) / (1 + eps)`` with
    ``|psi> = cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>`` and
    ``mu = (1 + eps**2) / (1 + eps)**2``.
    """

    theta: float
    phi: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not (-PHYSICAL_TOL <= self.theta <= math.pi + PHYSICAL_TOL):
            raise DomainError(f"theta must lie in [0, pi], got {self.theta!r}")
        if not (0.0 <= self.phi < 2 * math.pi):
            raise DomainError(f"phi must lie in [0, 2pi), got {self.phi!r}")
        if not (0.5 - PHYSICAL_TOL <= self.mu <= 1.0 + PHYSICAL_TOL):
            raise DomainError(f"mu must lie in [1/2, 1], got {self.mu!r}")

    @property
    def bloch_length(self):
        return math.sqrt(max(0.0, 2.0 * self.mu - 1.0))

    @property
    def epsilon(self):
        k = self.bloch_length
        return (1.0 - k) / (1.0 + k)


def state_from_angles(p: StateParams) -> np.ndarray:
    """Bloch vector ``k (sin t cos f, sin t sin f, cos t)`` with ``k = sqrt(2 mu - 1)``."""
    k = p.bloch_length
    st = math.sin(p.theta)
    return np.array([k * st * math.cos(p.phi), k * st * math.sin(p.phi), k * math.cos(p.theta)])


def purity(r) -> float:
    r = np.asarray(r, dtype=float)
    return 0.5 * (1.0 + float(r @ r))


def fidelity(r1, r2) -> float:
    """Qubit fidelity ``Tr[rho1 rho2] + sqrt(1 - mu1) sqrt(1 - mu2)``.

    This is the squared Uhlmann fidelity written in Bloch form.
    """
    a = np.asarray(r1, dtype=float)
    b = np.asarray(r2, dtype=float)
    overlap = 0.5 * (1.0 + (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]))
    ma = max(0.0, 1.0 - purity(a))
    mb = max(0.0, 1.0 - purity(b))
    f = overlap + math.sqrt(ma) * math.sqrt(mb)
    return min(1.0, max(0.0, f))


def _xlogx(x):
    return x * math.log(x) if x > 0.0 else 0.0


def neg_entropy(n: float) -> float:
    """``Tr[rho log rho]`` for a state with Bloch length ``n`` (nats)."""
    n = min(n, 1.0)
    return _xlogx(0.5 * (1.0 + n)) + _xlogx(0.5 * (1.0 - n))


def relative_entropy(rho, tau) -> float:
    """Umegaki relative entropy ``K(rho|tau) = Tr[rho (log rho - log tau)]`` in nats.

    Raises:
        UndefinedDivergenceError: ``tau`` is pure and ``rho`` differs from it.
    """
    r = as_bloch(rho, "rho")
    t = as_bloch(tau, "tau")
    if _norm(t) >= 1.0 - PURE_TOL:
        if _norm(r - t) < 1e-8:
            return 0.0
        raise UndefinedDivergenceError("support of rho is not contained in the support of the pure state tau")
    log_tau = herm_log(t)
    # Tr[rho log tau] = c0 + r . c for rho = (I + r.sigma)/2
    cross = log_tau.c0 + float(r @ log_tau.c)
    return neg_entropy(_norm(r)) - cross


def herm_exp(b: HermitianOp) -> HermitianOp:
    """``exp(c0 I + c.sigma) = e^c0 (cosh|c| I + sinh|c| c_hat.sigma)``; not renormalised."""
    n = b.norm
    if abs(b.c0) + n > _EXP_LIMIT:
        raise ExponentOverflowError(f"exponent too large: |c0| + |c| = {abs(b.c0) + n!r}")
    scale = math.exp(b.c0)
    if n == 0.0:
        return HermitianOp(scale, np.zeros(3))
    return HermitianOp(scale * math.cosh(n), (scale * math.sinh(n) / n) * b.c)


def herm_log(rho) -> HermitianOp:
    """Matrix logarithm of a full-rank state given by its Bloch vector.

    Raises:
        RankDeficiencyError: ``|r| >= 1 - 1e-12``.
    """
    r = np.asarray(rho, dtype=float)
    n = _norm(r)
    if n >= 1.0 - PURE_TOL:
        raise RankDeficiencyError(f"log of a (numerically) pure state, |r| = {n!r}")
    c0 = 0.5 * math.log((1.0 - n * n) / 4.0)
    if n == 0.0:
        return HermitianOp(c0, np.zeros(3))
    return HermitianOp(c0, (math.atanh(n) / n) * r)


def trace_norm(b: HermitianOp) -> float:
    """``Tr|B|``, the sum of absolute eigenvalues."""
    n = b.norm
    return abs(b.c0 + n) + abs(b.c0 - n)

"""Exact and approximate minimum-relative-entropy estimates for a qubit.

Both solvers work in the normal-form frame where the measured observable is
``alpha I + sigma_3`` and the datum is ``s = <sigma_3>``.  Use
:func:`normalize_observable` to bring a general observable into that frame and
:meth:`MeasurementRecord.to_normal_frame` to rotate the prior along with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .algebra import (
    SIGMA_Z,
    HermitianOp,
    as_bloch,
    bloch_to_matrix,
    fidelity,
    herm_log,
    matrix_to_bloch,
    purity,
    relative_entropy,
)
from .errors import (
    BoundaryConstraintError,
    ConfigurationError,
    ConvergenceError,
    InfeasibleConstraintError,
    InfeasibleMeanError,
    MKEError,
    PriorRankError,
    SolverError,
    TrivialObservableError,
)

SQRT2 = math.sqrt(2.0)
_E3 = np.array([0.0, 0.0, 1.0])
# slack on the purity clamp so that mu = clamp itself survives the
# mu -> Bloch vector -> purity round trip
_CLAMP_SLACK = 1e-13
_MAX_DOUBLINGS = 64


@dataclass(frozen=True)
class SolverConfig:
    constraint_tol: float = 1e-10
    max_iter: int = 200
    purity_clamp: float = 1.0 - 1e-7
    mean_clamp: float = 1.0 - 1e-9

    def __post_init__(self):
        if not self.constraint_tol > 0:
            raise ConfigurationError("constraint_tol must be positive")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if not 0 < self.purity_clamp < 1:
            raise ConfigurationError("purity_clamp must lie in (0, 1)")
        if not 0 < self.mean_clamp < 1:
            raise ConfigurationError("mean_clamp must lie in (0, 1)")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class MeasurementRecord:
    """A measured mean value reduced to the normal form ``alpha I + sigma_3``.

    ``rotation`` maps the original observable axis onto ``e_3``; the original
    mean value is ``scale * (alpha + mean_s)``.
    """

    alpha: float
    mean_s: float
    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not -1.0 <= self.mean_s <= 1.0:
            raise InfeasibleMeanError(f"mean_s must lie in [-1, 1], got {self.mean_s!r}")
        if not self.scale > 0:
            raise ConfigurationError("scale must be positive")
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-12) \
                or abs(np.linalg.det(rot) - 1.0) > 1e-12:
            raise ConfigurationError("rotation must be a proper orthogonal 3x3 matrix")
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def normal_form(cls, s, alpha=0.0):
        """Record for the observable ``alpha I + sigma_3`` with ``<sigma_3> = s``."""
        return cls(alpha=float(alpha), mean_s=float(s))

    @property
    def mean_value(self):
        return self.scale * (self.alpha + self.mean_s)

    def to_normal_frame(self, r):
        return self.rotation @ np.asarray(r, dtype=float)

    def from_normal_frame(self, r):
        return self.rotation.T @ np.asarray(r, dtype=float)


@dataclass(frozen=True)
class ExactSolution:
    state: np.ndarray
    lambda1: float
    lambda2: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class ApproxSolution:
    state: np.ndarray
    lam: float


@dataclass(frozen=True)
class SolutionPair:
    exact: ExactSolution
    approx: ApproxSolution
    fidelity: float
    purity_exact: float
    purity_approx: float
    k_exact: float
    k_approx: float


def _rotation_to_e3(u):
    """Proper rotation taking the unit vector ``u`` onto ``e_3``."""
    cos_a = float(np.clip(u[2], -1.0, 1.0))
    axis = np.cross(u, _E3)
    sin_a = float(np.linalg.norm(axis))
    if sin_a < 1e-15:
        return np.eye(3) if cos_a > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / sin_a
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + sin_a * kx + (1.0 - cos_a) * (kx @ kx)


def normalize_observable(a: HermitianOp, mean_a: float) -> MeasurementRecord:
    """Rotate and rescale ``a0 I + a.sigma`` to ``alpha I + sigma_3``.

    Raises:
        TrivialObservableError: ``|a| <= 1e-14``.
        InfeasibleMeanError: ``mean_a`` lies outside the spectrum of ``a``.
    """
    scale = a.norm
    if scale <= 1e-14:
        raise TrivialObservableError("observable is proportional to the identity")
    s = (mean_a - a.c0) / scale
    if abs(s) > 1.0 + 1e-12:
        raise InfeasibleMeanError(
            f"mean value {mean_a!r} lies outside the spectrum [{a.c0 - scale!r}, {a.c0 + scale!r}]")
    return MeasurementRecord(
        alpha=a.c0 / scale,
        mean_s=float(np.clip(s, -1.0, 1.0)),
        scale=scale,
        rotation=_rotation_to_e3(a.c / scale),
    )


def gram_schmidt_pair(a: HermitianOp):
    """Hilbert-Schmidt orthonormalisation of ``{I, a}``."""
    n = a.norm
    if n <= 1e-14:
        raise TrivialObservableError("cannot orthogonalise the identity against a multiple of itself")
    x1 = HermitianOp(1.0 / SQRT2, np.zeros(3))
    # ||a.sigma||_HS = sqrt(2) |a|
    x2 = HermitianOp(0.0, a.c / (SQRT2 * n))
    return x1, x2


def _normal_observable(m: MeasurementRecord) -> HermitianOp:
    return HermitianOp(m.alpha, _E3)


def _checked_atanh(x):
    if not abs(x) < 1.0:
        raise InfeasibleConstraintError(f"Lagrange multiplier diverges: tanh(lambda) = {x!r}")
    x = min(max(x, -1.0 + 1e-15), 1.0 - 1e-15)
    return 0.5 * math.log((1.0 + x) / (1.0 - x))


def solve_approx(tau, m: MeasurementRecord, cfg: SolverConfig = DEFAULT_CONFIG) -> ApproxSolution:
    """Closed-form approximate estimate.

    ``lambda = atanh((t3 - s) / (1 - s t3))``, ``Z = cosh(lambda) - t3 sinh(lambda)``
    and ``r = (t1 / Z, t2 / Z, s)``.
    """
    t = as_bloch(tau, "tau")
    s = m.mean_s
    t3 = float(t[2])
    if 1.0 - s * t3 == 0.0:
        # s = t3 = +-1: the prior already satisfies the constraint
        return ApproxSolution(state=t.copy(), lam=0.0)
    if abs(t3) >= 1.0:
        raise InfeasibleConstraintError("prior is a sigma_3 eigenstate; its mean value cannot be shifted")
    lam = _checked_atanh((t3 - s) / (1.0 - s * t3))
    z = math.cosh(lam) - t3 * math.sinh(lam)
    return ApproxSolution(state=np.array([t[0] / z, t[1] / z, s]), lam=lam)


def approx_bloch_from_angles(theta, phi, eps, s):
    """Approximate-estimate Bloch vector written directly in ``(theta, phi, eps)``.

    Independent of :func:`solve_approx`; used to cross-check it.
    """
    ct, st = math.cos(theta), math.sin(theta)
    em, ep = eps - 1.0, eps + 1.0
    lin = s * em * ct + ep
    root = math.sqrt(max(0.0, 1.0 - (s * ep + em * ct) ** 2 / lin ** 2))
    den = em ** 2 * ct ** 2 - ep ** 2
    common = em * st * lin * root / den
    return np.array([common * math.cos(phi), common * math.sin(phi), s])


def solve_approx_operator_form(tau, m: MeasurementRecord, cfg: SolverConfig = DEFAULT_CONFIG) -> ApproxSolution:
    """Approximate estimate via the explicit operator sandwich.

    ``rho(lam) = E tau E / Tr[tau E^2]`` with ``E = expm(-lam sigma_3 / 2)``;
    ``lam`` is found by bracketed root finding on ``Tr[rho(lam) sigma_3] - s``.
    """
    t = as_bloch(tau, "tau")
    s = m.mean_s
    tau_m = bloch_to_matrix(t)

    def state(lam):
        e = expm(-0.5 * lam * SIGMA_Z)
        num = e @ tau_m @ e
        return num / np.real(np.trace(num))

    def g(lam):
        rho = state(lam)
        return np.real(rho[0, 0] - rho[1, 1]) - s

    g0 = g(0.0)
    if abs(g0) <= 1e-15:
        return ApproxSolution(state=t.copy(), lam=0.0)
    lo, hi = -1.0, 1.0
    while g(lo) * g(hi) > 0:
        if hi >= 512.0:
            raise InfeasibleConstraintError(f"no sign change of the constraint within |lambda| <= {hi}")
        lo, hi = 2 * lo, 2 * hi
    lam = brentq(g, lo, hi, xtol=1e-15, maxiter=cfg.max_iter)
    r = matrix_to_bloch(state(lam))
    r[2] = s
    return ApproxSolution(state=r, lam=float(lam))


def _check_exact_domain(t, s, cfg):
    if purity(t) > cfg.purity_clamp + _CLAMP_SLACK:
        raise PriorRankError(
            f"prior purity {purity(t)!r} exceeds the clamp {cfg.purity_clamp!r}; the exact solution needs a full-rank prior")
    if abs(s) > cfg.mean_clamp:
        raise BoundaryConstraintError(f"|mean_s| = {abs(s)!r} exceeds the clamp {cfg.mean_clamp!r}")


def _log2cosh(x):
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x))


def solve_exact(tau, m: MeasurementRecord, cfg: SolverConfig = DEFAULT_CONFIG) -> ExactSolution:
    """Exact estimate ``exp(log tau - I - l1 X1 - l2 X2)``.

    ``l1`` only normalises, so the state is obtained from
    ``exp(log tau - l2 X2)`` divided by its trace, and ``l2`` is the single
    unknown found by Brent's method on the mean-value constraint.

    Raises:
        PriorRankError: prior purity above ``cfg.purity_clamp``.
        BoundaryConstraintError: ``|s|`` above ``cfg.mean_clamp``.
        ConvergenceError: root finding failed or the residual exceeds
            ``cfg.constraint_tol``.
    """
    t = as_bloch(tau, "tau")
    s = m.mean_s
    _check_exact_domain(t, s, cfg)
    log_tau = herm_log(t)
    _, x2 = gram_schmidt_pair(_normal_observable(m))
    c1, c2, c3 = (float(x) for x in log_tau.c)
    d1, d2, d3 = (float(x) for x in x2.c)

    # exp(v.sigma) / Tr has Bloch vector tanh|v| v_hat
    def bloch(lam2):
        v1, v2, v3 = c1 - lam2 * d1, c2 - lam2 * d2, c3 - lam2 * d3
        n = math.sqrt(v1 * v1 + v2 * v2 + v3 * v3)
        f = math.tanh(n) / n if n > 0.0 else 0.0
        return n, (f * v1, f * v2, f * v3)

    def g(lam2):
        return bloch(lam2)[1][2] - s

    lim = 10.0 * SQRT2
    for _ in range(_MAX_DOUBLINGS):
        if g(-lim) * g(lim) <= 0:
            break
        lim *= 2.0
    else:
        raise ConvergenceError(f"constraint not bracketed within |lambda2| <= {lim!r}", residual=g(0.0))
    try:
        lam2, info = brentq(g, -lim, lim, xtol=1e-14, maxiter=cfg.max_iter, full_output=True)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc), residual=g(0.0), iterations=cfg.max_iter) from exc
    n, r = bloch(lam2)
    residual = r[2] - s
    if abs(residual) > cfg.constraint_tol:
        raise ConvergenceError(
            f"residual {residual!r} exceeds tolerance {cfg.constraint_tol!r}",
            residual=residual, iterations=info.iterations)
    # Tr exp(log tau - I - l1 X1 - l2 X2) = 1 fixes l1
    lam1 = SQRT2 * (log_tau.c0 - 1.0 + _log2cosh(n))
    return ExactSolution(state=np.array(r), lambda1=float(lam1), lambda2=float(lam2),
                         residual=residual, iterations=int(info.iterations))


def exact_exponent(tau, m: MeasurementRecord, sol: ExactSolution) -> HermitianOp:
    """The literal exponent ``log tau - I - l1 X1 - l2 X2`` of an exact solution."""
    x1, x2 = gram_schmidt_pair(_normal_observable(m))
    return herm_log(tau) - HermitianOp(1.0, np.zeros(3)) - sol.lambda1 * x1 - sol.lambda2 * x2


def mke_pair(tau, m: MeasurementRecord, cfg: SolverConfig = DEFAULT_CONFIG) -> SolutionPair:
    """Run both solvers and collect the comparison scalars."""
    try:
        ex = solve_exact(tau, m, cfg)
    except MKEError as exc:
        raise SolverError("exact", exc) from exc
    try:
        ap = solve_approx(tau, m, cfg)
    except MKEError as exc:
        raise SolverError("approx", exc) from exc
    return SolutionPair(
        exact=ex,
        approx=ap,
        fidelity=fidelity(ex.state, ap.state),
        purity_exact=purity(ex.state),
        purity_approx=purity(ap.state),
        k_exact=relative_entropy(ex.state, tau),
        k_approx=relative_entropy(ap.state, tau),
    )


def mke_estimate(tau, a: HermitianOp, mean_a: float, cfg: SolverConfig = DEFAULT_CONFIG):
    """Both estimates for a general observable, expressed in the original frame.

    Returns ``(record, pair)``; the Bloch vectors inside ``pair`` are rotated
    back to the frame of ``tau`` while the multipliers refer to the normal form.
    """
    m = normalize_observable(a, mean_a)
    t = m.to_normal_frame(as_bloch(tau, "tau"))
    p = mke_pair(t, m, cfg)
    ex = ExactSolution(m.from_normal_frame(p.exact.state), p.exact.lambda1, p.exact.lambda2,
                       p.exact.residual, p.exact.iterations)
    ap = ApproxSolution(m.from_normal_frame(p.approx.state), p.approx.lam)
    return m, SolutionPair(ex, ap, p.fidelity, p.purity_exact, p.purity_approx, p.k_exact, p.k_approx)


def lagrange_functional(rho: HermitianOp, tau, a: HermitianOp, mean_a, lam1, lam2):
    """``K(rho|tau) + lam1 (Tr rho - 1) + lam2 (Tr[rho a] - <a>)`` for a positive ``rho``.

    ``rho`` need not be normalised, so this is the unconstrained objective
    whose stationary point the exact solution is.
    """
    ev = rho.eigenvalues()
    if ev[0] < 0:
        raise MKEError("rho must be positive semidefinite")
    tr_rho_log_rho = sum(x * math.log(x) for x in ev if x > 0)
    k = tr_rho_log_rho - rho.hs_inner(herm_log(tau))
    return k + lam1 * (rho.trace - 1.0) + lam2 * (rho.hs_inner(a) - mean_a)


__all__ = [
    "ApproxSolution",
    "ExactSolution",
    "MeasurementRecord",
    "SolutionPair",
    "SolverConfig",
    "approx_bloch_from_angles",
    "exact_exponent",
    "gram_schmidt_pair",
    "lagrange_functional",
    "mke_estimate",
    "mke_pair",
    "normalize_observable",
    "solve_approx",
    "solve_approx_operator_form",
    "solve_exact",
]

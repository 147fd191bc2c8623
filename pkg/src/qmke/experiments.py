"""Parameter sweeps comparing the exact and approximate estimates.

Every sweep evaluates independent grid points and returns a
:class:`SweepResult` whose rows are in grid order (theta outer, s inner).
Solver failures never escape a sweep; they become rows whose ``error`` field
names the failure and whose numeric fields are NaN.
"""

from __future__ import annotations

import datetime as _dt
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from . import __version__
from .algebra import StateParams, fidelity, herm_log, state_from_angles
from .errors import ConfigurationError, DomainError, MKEError
from .hamiltonian import estimate_hamiltonian, hamiltonian_distance
from .solvers import DEFAULT_CONFIG, MeasurementRecord, SolverConfig, mke_pair

log = logging.getLogger(__name__)

NAN = float("nan")

SURFACE_COLUMNS = [
    "theta", "s", "mu", "phi",
    "fidelity", "purity_exact", "purity_approx", "K_exact", "K_approx",
    "fid_exact_to_prior", "fid_approx_to_prior", "D_hamiltonian",
    "error",
]
RATIO_COLUMNS = SURFACE_COLUMNS[:-1] + ["ratio_Z", "error"]
HAMILTONIAN_COLUMNS = SURFACE_COLUMNS[:-1] + [
    "h_exact_1", "h_exact_2", "h_exact_3",
    "h_approx_1", "h_approx_2", "h_approx_3",
    "error",
]
MIN_CURVE_COLUMNS = ["mu", "kind", "theta", "s", "min_fidelity", "n_errors", "error"]
SCATTER_COLUMNS = ["index", "theta", "s", "mu", "mu_exact", "mu_approx", "R_mu", "resamples", "error"]
ORACLE_COLUMNS = [
    "index", "theta", "phi", "mu", "s",
    "K_exact", "K_approx", "K_oracle", "oracle_gap", "oracle_dominated", "exact_beats_approx",
    "error",
]

# refinement targets for the minimum-fidelity curve
REFINE_THETAS = (math.pi / 2, 5 * math.pi / 12, math.pi / 3)


@dataclass(frozen=True)
class SweepGrid:
    theta_points: tuple
    s_points: tuple
    mu: float
    phi: float = 0.0
    seed: int = 0

    def __post_init__(self):
        th = tuple(float(x) for x in self.theta_points)
        ss = tuple(float(x) for x in self.s_points)
        object.__setattr__(self, "theta_points", th)
        object.__setattr__(self, "s_points", ss)
        if not th or not ss:
            raise ConfigurationError("grid axes must be non-empty")
        if any(b <= a for a, b in zip(th, th[1:])) or any(b <= a for a, b in zip(ss, ss[1:])):
            raise ConfigurationError("grid axes must be strictly increasing")
        if th[0] < 0 or th[-1] > math.pi:
            raise ConfigurationError("theta points must lie in [0, pi]")
        if ss[0] <= -1 or ss[-1] >= 1:
            raise ConfigurationError("s points must lie in (-1, 1)")
        if not 0.5 <= self.mu <= 1.0:
            raise ConfigurationError(f"mu must lie in [1/2, 1], got {self.mu!r}")
        if not 0 <= self.phi < 2 * math.pi:
            raise ConfigurationError(f"phi must lie in [0, 2pi), got {self.phi!r}")

    @classmethod
    def regular(cls, mu, n_theta=101, n_s=101, s_max=0.999, phi=0.0, seed=0):
        """``n_theta`` points on [0, pi] and ``n_s`` points on [-s_max, s_max]."""
        return cls(
            theta_points=tuple(np.linspace(0.0, math.pi, n_theta)),
            s_points=tuple(np.linspace(-s_max, s_max, n_s)),
            mu=mu, phi=phi, seed=seed,
        )

    def with_mu(self, mu):
        return SweepGrid(self.theta_points, self.s_points, mu, self.phi, self.seed)

    @property
    def shape(self):
        return len(self.theta_points), len(self.s_points)

    def describe(self):
        return {
            "theta_points": len(self.theta_points),
            "theta_range": [self.theta_points[0], self.theta_points[-1]],
            "s_points": len(self.s_points),
            "s_range": [self.s_points[0], self.s_points[-1]],
            "mu": self.mu, "phi": self.phi, "seed": self.seed,
        }


@dataclass
class SweepResult:
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    def grid(self, name, shape):
        """Column reshaped to the (theta, s) grid."""
        return self.column(name).reshape(shape)

    @property
    def error_rows(self):
        return [row for row in self.rows if row["error"]]


def _meta(command, config, seed=None):
    return {
        "tool": "qmke",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _run(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
    return [fn(item) for item in items]


def _error_row(columns, base, exc):
    row = {c: NAN for c in columns}
    row.update(base)
    row["error"] = exc.kind if isinstance(exc, MKEError) else type(exc).__name__
    if hasattr(exc, "solver"):
        row["error"] = f"{exc.solver}:{exc.cause.kind}"
    return row


def pair_row(point, cfg=DEFAULT_CONFIG, columns=SURFACE_COLUMNS):
    """Comparison scalars for one ``(theta, s, mu, phi)`` point."""
    theta, s, mu, phi = point
    base = {"theta": theta, "s": s, "mu": mu, "phi": phi}
    try:
        tau = state_from_angles(StateParams(theta, phi, mu))
        pair = mke_pair(tau, MeasurementRecord.normal_form(s), cfg)
    except MKEError as exc:
        return _error_row(columns, base, exc)
    row = dict(base)
    f_ex = fidelity(pair.exact.state, tau)
    f_ap = fidelity(pair.approx.state, tau)
    row.update(
        fidelity=pair.fidelity,
        purity_exact=pair.purity_exact,
        purity_approx=pair.purity_approx,
        K_exact=pair.k_exact,
        K_approx=pair.k_approx,
        fid_exact_to_prior=f_ex,
        fid_approx_to_prior=f_ap,
    )
    if float(tau @ tau) > 1e-24:
        h_ex = estimate_hamiltonian(tau, pair.exact.state)
        h_ap = estimate_hamiltonian(tau, pair.approx.state)
        row["D_hamiltonian"] = hamiltonian_distance(h_ex, h_ap)
    else:
        h_ex = h_ap = np.full(3, NAN)
        row["D_hamiltonian"] = NAN
    if "ratio_Z" in columns:
        row["ratio_Z"] = f_ap / f_ex
    if "h_exact_1" in columns:
        for i in range(3):
            row[f"h_exact_{i + 1}"] = float(h_ex[i])
            row[f"h_approx_{i + 1}"] = float(h_ap[i])
    row["error"] = ""
    return {c: row[c] for c in columns}


def _surface(command, grid, columns, cfg, workers):
    points = [(th, s, grid.mu, grid.phi) for th in grid.theta_points for s in grid.s_points]
    rows = _run(partial(pair_row, cfg=cfg, columns=columns), points, workers)
    meta = _meta(command, grid.describe(), grid.seed)
    meta["n_errors"] = sum(1 for r in rows if r["error"])
    return SweepResult(list(columns), rows, meta)


def fidelity_surface(grid: SweepGrid, cfg: SolverConfig = DEFAULT_CONFIG, workers=1) -> SweepResult:
    """Exact-vs-approximate comparison at every ``(theta, s)`` grid point."""
    return _surface("sweep-fidelity", grid, SURFACE_COLUMNS, cfg, workers)


def fidelity_ratio_surface(grid: SweepGrid, cfg: SolverConfig = DEFAULT_CONFIG, workers=1) -> SweepResult:
    """As :func:`fidelity_surface` plus ``ratio_Z = F(approx, tau) / F(exact, tau)``."""
    return _surface("ratio-surface", grid, RATIO_COLUMNS, cfg, workers)


def hamiltonian_distance_surface(grid: SweepGrid, cfg: SolverConfig = DEFAULT_CONFIG, workers=1) -> SweepResult:
    """Trace distance between the Hamiltonians estimated from both solutions.

    The same datum ``s`` is fed to both solvers; ``mu`` must exceed 1/2.
    """
    if not grid.mu > 0.5:
        raise ConfigurationError("Hamiltonian estimation needs a prior that is not maximally mixed (mu > 1/2)")
    return _surface("ham-distance", grid, HAMILTONIAN_COLUMNS, cfg, workers)


def _refined_minimum(theta, mu, phi, s_points, cfg):
    """Golden-section minimum of the fidelity in ``s`` at fixed ``theta``."""
    def f(s):
        row = pair_row((theta, float(s), mu, phi), cfg)
        if row["error"]:
            raise MKEError(row["error"])
        return row["fidelity"]

    values = np.array([f(s) for s in s_points])
    i = int(np.argmin(values))
    best_s, best_f = s_points[i], float(values[i])
    if 0 < i < len(s_points) - 1 and values[i] < values[i - 1] and values[i] < values[i + 1]:
        res = minimize_scalar(f, bracket=(s_points[i - 1], s_points[i], s_points[i + 1]),
                              method="golden", options={"xtol": 1e-10})
        if res.fun < best_f:
            best_s, best_f = float(res.x), float(res.fun)
    return best_s, best_f


def min_fidelity_curve(mu_points, grid: SweepGrid, cfg: SolverConfig = DEFAULT_CONFIG,
                       refine_thetas=REFINE_THETAS, workers=1) -> SweepResult:
    """Minimum fidelity over the ``(theta, s)`` grid for each purity.

    For each ``mu`` one ``kind="grid"`` row holds the grid minimum and its
    location; one ``kind="refined"`` row per entry of ``refine_thetas`` holds
    the golden-section minimum in ``s`` at that fixed ``theta``.
    """
    rows = []
    for mu in mu_points:
        surf = fidelity_surface(grid.with_mu(float(mu)), cfg, workers)
        fid = surf.column("fidelity")
        n_err = len(surf.error_rows)
        if np.all(np.isnan(fid)):
            rows.append({"mu": float(mu), "kind": "grid", "theta": NAN, "s": NAN,
                         "min_fidelity": NAN, "n_errors": n_err, "error": "all-points-failed"})
            continue
        k = int(np.nanargmin(fid))
        best = surf.rows[k]
        rows.append({"mu": float(mu), "kind": "grid", "theta": best["theta"], "s": best["s"],
                     "min_fidelity": best["fidelity"], "n_errors": n_err, "error": ""})
        for theta in refine_thetas:
            try:
                s_min, f_min = _refined_minimum(theta, float(mu), grid.phi, grid.s_points, cfg)
                rows.append({"mu": float(mu), "kind": "refined", "theta": theta, "s": s_min,
                             "min_fidelity": f_min, "n_errors": 0, "error": ""})
            except MKEError as exc:
                rows.append({"mu": float(mu), "kind": "refined", "theta": theta, "s": NAN,
                             "min_fidelity": NAN, "n_errors": 1, "error": str(exc)})
    config = grid.describe()
    config.pop("mu")
    config["mu_points"] = [float(m) for m in mu_points]
    config["refine_thetas"] = list(refine_thetas)
    return SweepResult(list(MIN_CURVE_COLUMNS), rows, _meta("min-fid-curve", config, grid.seed))


def sample_rng(seed, index):
    """Independent generator for sample ``index``; the sample set does not depend on evaluation order."""
    return np.random.default_rng([int(seed), int(index)])


def _scatter_sample(index, seed, mu_range, theta_range, s_range, mirror_theta, mirror_s, cfg, max_attempts):
    rng = sample_rng(seed, index)
    exc = None
    for attempt in range(max_attempts):
        mu = rng.uniform(*mu_range)
        theta = rng.uniform(*theta_range)
        s = rng.uniform(*s_range)
        if mirror_theta and rng.random() < 0.5:
            theta = math.pi - theta
        if mirror_s and rng.random() < 0.5:
            s = -s
        try:
            tau = state_from_angles(StateParams(theta, 0.0, mu))
            pair = mke_pair(tau, MeasurementRecord.normal_form(s), cfg)
        except MKEError as e:
            exc = e
            continue
        return {"index": index, "theta": theta, "s": s, "mu": mu,
                "mu_exact": pair.purity_exact, "mu_approx": pair.purity_approx,
                "R_mu": pair.purity_exact / pair.purity_approx,
                "resamples": attempt, "error": ""}
    row = _error_row(SCATTER_COLUMNS, {"index": index}, exc)
    row["resamples"] = max_attempts
    return row


def purity_scatter(n_samples, mu_range, theta_range=(0.0, math.pi), s_range=(-0.999, 0.999), seed=0,
                   cfg: SolverConfig = DEFAULT_CONFIG, mirror_theta=False, mirror_s=False,
                   max_attempts=100, workers=1) -> SweepResult:
    """Purities of both estimates for uniformly sampled priors and data.

    ``mu``, ``theta`` and ``s`` are drawn uniformly from their ranges (``phi``
    is fixed to 0).  ``mirror_theta`` / ``mirror_s`` reflect a draw to
    ``pi - theta`` / ``-s`` with probability 1/2, which samples both ends of
    the sphere.  Samples a solver rejects are redrawn.
    """
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1")
    for name, (lo, hi) in (("mu_range", mu_range), ("theta_range", theta_range), ("s_range", s_range)):
        if not lo <= hi:
            raise ConfigurationError(f"{name} must satisfy lo <= hi")
    if mu_range[0] < 0.5 or mu_range[1] > 1.0:
        raise ConfigurationError("mu_range must lie inside [1/2, 1]")
    if theta_range[0] < 0 or theta_range[1] > math.pi:
        raise ConfigurationError("theta_range must lie inside [0, pi]")
    if s_range[0] <= -1 or s_range[1] >= 1:
        raise ConfigurationError("s_range must lie inside (-1, 1)")
    fn = partial(_scatter_sample, seed=seed, mu_range=tuple(mu_range), theta_range=tuple(theta_range),
                 s_range=tuple(s_range), mirror_theta=mirror_theta, mirror_s=mirror_s, cfg=cfg,
                 max_attempts=max_attempts)
    rows = _run(fn, list(range(n_samples)), workers)
    resampled = sum(r["resamples"] for r in rows if not r["error"])
    if resampled:
        log.info("purity_scatter: %d infeasible draws were resampled", resampled)
    config = {"n_samples": n_samples, "mu_range": list(mu_range), "theta_range": list(theta_range),
              "s_range": list(s_range), "mirror_theta": mirror_theta, "mirror_s": mirror_s}
    meta = _meta("purity-scatter", config, seed)
    meta["resampled"] = resampled
    meta["n_errors"] = sum(1 for r in rows if r["error"])
    return SweepResult(list(SCATTER_COLUMNS), rows, meta)


def _disk_k(c0, c, x, y, s):
    """K(rho|tau) for rho = (x, y, s), vectorised over x and y."""
    n = np.minimum(np.sqrt(x * x + y * y + s * s), 1.0)
    p, q = 0.5 * (1.0 + n), 0.5 * (1.0 - n)
    return xlogy(p, p) + xlogy(q, q) - (c0 + c[0] * x + c[1] * y + c[2] * s)


def brute_force_oracle(tau, s, resolution=400, refine=True):
    """Grid minimum of ``K(rho|tau)`` over the feasible disk ``r3 = s``.

    A ``resolution x resolution`` grid covers the square around the disk of
    radius ``sqrt(1 - s^2)``; points outside the disk are discarded.  With
    ``refine`` the best point is improved by four passes of a 5x5 stencil,
    halving the cell each pass.

    Returns:
        (bloch_vector, k_min)
    """
    if resolution < 8:
        raise ConfigurationError("resolution must be at least 8")
    if not abs(s) < 1:
        raise DomainError("the oracle needs |s| < 1")
    log_tau = herm_log(tau)
    c0, c = log_tau.c0, log_tau.c
    radius = math.sqrt(1.0 - s * s)
    axis = np.linspace(-radius, radius, resolution)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    inside = x * x + y * y <= radius * radius
    k = np.where(inside, _disk_k(c0, c, x, y, s), np.inf)
    i = np.unravel_index(np.argmin(k), k.shape)
    bx, by, best = float(x[i]), float(y[i]), float(k[i])
    if refine:
        h = 2.0 * radius / (resolution - 1)
        offsets = np.arange(-2, 3)
        for _ in range(4):
            h *= 0.5
            sx, sy = np.meshgrid(bx + h * offsets, by + h * offsets, indexing="ij")
            ok = sx * sx + sy * sy <= radius * radius
            ks = np.where(ok, _disk_k(c0, c, sx, sy, s), np.inf)
            j = np.unravel_index(np.argmin(ks), ks.shape)
            if ks[j] < best:
                bx, by, best = float(sx[j]), float(sy[j]), float(ks[j])
    return np.array([bx, by, s]), best


def _oracle_instance(index, seed, resolution, cfg, mu_range, s_max):
    rng = sample_rng(seed, index)
    theta = rng.uniform(0.0, math.pi)
    phi = rng.uniform(0.0, 2 * math.pi)
    mu = rng.uniform(*mu_range)
    s = rng.uniform(-s_max, s_max)
    base = {"index": index, "theta": theta, "phi": phi, "mu": mu, "s": s}
    try:
        tau = state_from_angles(StateParams(theta, phi, mu))
        pair = mke_pair(tau, MeasurementRecord.normal_form(s), cfg)
        _, k_oracle = brute_force_oracle(tau, s, resolution)
    except MKEError as exc:
        return _error_row(ORACLE_COLUMNS, base, exc)
    gap = k_oracle - pair.k_exact
    row = dict(base)
    row.update(K_exact=pair.k_exact, K_approx=pair.k_approx, K_oracle=k_oracle, oracle_gap=gap,
               oracle_dominated=bool(gap >= -1e-6),
               exact_beats_approx=bool(pair.k_exact <= pair.k_approx + 1e-9), error="")
    return row


def oracle_check(instances=100, resolution=400, seed=0, cfg: SolverConfig = DEFAULT_CONFIG,
                 mu_range=(0.5, 0.999), s_max=0.99, workers=1) -> SweepResult:
    """Compare the exact solver against the brute-force oracle on random instances.

    ``oracle_dominated`` holds when the oracle never beats the exact solver by
    more than 1e-6 in K; ``exact_beats_approx`` when ``K_exact <= K_approx + 1e-9``.
    """
    if instances < 1:
        raise ConfigurationError("instances must be at least 1")
    fn = partial(_oracle_instance, seed=seed, resolution=resolution, cfg=cfg,
                 mu_range=tuple(mu_range), s_max=s_max)
    rows = _run(fn, list(range(instances)), workers)
    config = {"instances": instances, "resolution": resolution, "mu_range": list(mu_range), "s_max": s_max}
    meta = _meta("oracle-check", config, seed)
    meta["n_errors"] = sum(1 for r in rows if r["error"])
    meta["all_dominated"] = all(r["oracle_dominated"] is True for r in rows)
    meta["all_exact_beats_approx"] = all(r["exact_beats_approx"] is True for r in rows)
    return SweepResult(list(ORACLE_COLUMNS), rows, meta)

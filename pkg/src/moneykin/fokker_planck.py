"""Drift-diffusion (Kolmogorov forward) solver on a bounded money grid.

Solves dP/dt = d/dm [A P + d(B P)/dm] by a finite-volume Chang-Cooper
discretization with zero-flux boundaries and implicit time stepping. Writing
the flux as J = (A + B') P + B P' and weighting the face value of P by the
Chang-Cooper factor delta(w) = 1/w - 1/(e^w - 1), w = (A + B') dm / B, makes
the scheme positivity-preserving and gives it an exact discrete stationary
state with cell ratios e^{-w}, the grid analogue of
P ~ exp(-int A/B dm) / B. For constant coefficients the stationary profile is
the exponential with temperature B/A, exact at the cell centers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .ledger import ConfigError, UsageError


def table_function(values, table, name: str = "table") -> Callable:
    """Interpolating callable over a per-balance table with NaN gaps.

    Gaps are bridged linearly between measured neighbours; the ends continue
    at their last measured value.
    """
    v = np.asarray(values, dtype=np.float64)
    t = np.asarray(table, dtype=np.float64)
    ok = np.isfinite(t)
    if not ok.any():
        raise UsageError(f"{name} has no finite entries")
    vv, tt = v[ok], t[ok]
    return lambda m: np.interp(m, vv, tt)


@dataclass
class FpProblem:
    grid_min: float
    grid_max: float
    cells: int
    drift: Callable          # A(m), money per unit time
    diffusion: Callable      # B(m) > 0, money^2 per unit time

    def __post_init__(self):
        if not self.grid_max > self.grid_min:
            raise ConfigError("grid_max must exceed grid_min")
        if self.cells < 3:
            raise ConfigError("need at least 3 cells")
        if np.any(np.asarray(self.diffusion(self.centers)) <= 0):
            raise ConfigError("diffusion must be positive on the interior")

    @property
    def dm(self) -> float:
        return (self.grid_max - self.grid_min) / self.cells

    @property
    def centers(self) -> np.ndarray:
        return self.grid_min + self.dm * (np.arange(self.cells) + 0.5)

    @property
    def interior_faces(self) -> np.ndarray:
        return self.grid_min + self.dm * np.arange(1, self.cells)

    def delta_initial(self, at: float | None = None) -> np.ndarray:
        """Unit-mass delta profile in the cell containing ``at`` (mid-grid
        default)."""
        p = np.zeros(self.cells)
        target = 0.5 * (self.grid_min + self.grid_max) if at is None else at
        j = int(np.clip((target - self.grid_min) / self.dm, 0, self.cells - 1))
        p[j] = 1.0 / self.dm
        return p


def _chang_cooper_delta(w: np.ndarray) -> np.ndarray:
    d = np.empty_like(w)
    small = np.abs(w) < 1e-8
    ws = w[~small]
    d[~small] = 1.0 / ws - 1.0 / np.expm1(ws)
    d[small] = 0.5 - w[small] / 12.0
    return d


def _face_coefficients(problem: FpProblem):
    """Per interior face: (a, b) with J_{j+1/2} = a P_j + b P_{j+1}."""
    dm = problem.dm
    faces = problem.interior_faces
    centers = problem.centers
    b_centers = np.asarray(problem.diffusion(centers), dtype=np.float64)
    a_face = np.asarray(problem.drift(faces), dtype=np.float64)
    b_face = np.asarray(problem.diffusion(faces), dtype=np.float64)
    if np.any(b_face <= 0):
        raise ConfigError("diffusion must be positive at all faces")
    bprime = np.diff(b_centers) / dm
    drift_eff = a_face + bprime
    w = drift_eff * dm / b_face
    delta = _chang_cooper_delta(w)
    a = drift_eff * delta - b_face / dm
    b = drift_eff * (1.0 - delta) + b_face / dm
    return a, b, w


def _generator_banded(problem: FpProblem, dt: float):
    """Banded form of (I - dt L) for the implicit step."""
    n = problem.cells
    dm = problem.dm
    a, b, _ = _face_coefficients(problem)
    # dP_j/dt = (J_{j+1/2} - J_{j-1/2}) / dm with J_0 = J_n = 0
    lower = np.zeros(n)   # coefficient of P_{j-1} in row j
    diag = np.zeros(n)
    upper = np.zeros(n)   # coefficient of P_{j+1} in row j
    diag[:-1] += a / dm
    upper[:-1] = b / dm
    diag[1:] -= b / dm
    lower[1:] = -a / dm
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * upper[:-1]
    ab[1, :] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower[1:]
    return ab


@dataclass
class FpSolution:
    times: np.ndarray
    profiles: np.ndarray     # (n_times, cells)
    masses: np.ndarray
    boundary_flux: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def final(self) -> np.ndarray:
        return self.profiles[-1]


def fp_step(problem: FpProblem, dt: float, steps: int,
            p0: np.ndarray | None = None,
            record_every: int | None = None) -> FpSolution:
    """Advance the profile by `steps` implicit Euler steps of size dt.

    Zero-flux boundaries make the discrete mass a conserved quantity; the
    recorded mass series exposes the (machine-precision) drift of the solve.
    """
    if dt <= 0 or steps < 1:
        raise ConfigError("need dt > 0 and steps >= 1")
    p = problem.delta_initial() if p0 is None else np.asarray(p0, np.float64).copy()
    if p.size != problem.cells:
        raise UsageError("initial profile does not match the grid")
    ab = _generator_banded(problem, dt)
    every = record_every or steps
    times = [0.0]
    profiles = [p.copy()]
    dm = problem.dm
    for k in range(1, steps + 1):
        p = solve_banded((1, 1), ab, p)
        if k % every == 0 or k == steps:
            times.append(k * dt)
            profiles.append(p.copy())
    profs = np.array(profiles)
    masses = profs.sum(axis=1) * dm
    return FpSolution(np.array(times), profs, masses,
                      np.zeros((len(times), 2)))


def fp_stationary(problem: FpProblem) -> np.ndarray:
    """Zero-flux stationary profile, normalized to unit mass on the grid.

    Built directly from the J = 0 condition of the discrete scheme
    (cell ratios e^{-w}), so stepping it forward leaves it unchanged to
    solver precision.
    """
    _, _, w = _face_coefficients(problem)
    logp = np.concatenate([[0.0], np.cumsum(-w)])
    logp -= logp.max()
    p = np.exp(logp)
    return p / (p.sum() * problem.dm)


# ---------------------------------------------------------------------------
# Drift and diffusion measured from simulation output
# ---------------------------------------------------------------------------

@dataclass
class DriftDiffusionTable:
    """Per-balance conditional moments of balance changes, per sweep.

    NaN rows are gaps (bins visited too rarely to estimate), reported as such
    rather than as zeros.
    """

    values: np.ndarray
    drift: np.ndarray        # A(m) = -<delta m> / sweep
    diffusion: np.ndarray    # B(m) = <delta m^2> / (2 sweeps)
    counts: np.ndarray

    def drift_function(self) -> Callable:
        return table_function(self.values, self.drift, "drift")

    def diffusion_function(self) -> Callable:
        return table_function(self.values, self.diffusion, "diffusion")


def estimate_drift_diffusion(replica, min_count: int = 1000,
                             skip_boundary: bool = True) -> DriftDiffusionTable:
    """Moment tables from a replica run with ``collect_moments=True``.

    Every event logs both participants' (balance before, balance change);
    ordered pairs are drawn uniformly, so each agent participates exactly
    twice per sweep on average and the per-sweep moments follow from the
    per-participation ones with rate 2. The m=0 bin sees only the rejection
    asymmetry of the boundary and is excluded by default (the PDE carries the
    boundary as a zero-flux condition instead).
    """
    if replica.moment_count is None:
        raise UsageError("run the replica with collect_moments=True")
    cnt = replica.moment_count.astype(np.float64)
    values = np.arange(cnt.size, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_d = replica.moment_sum / cnt
        mean_d2 = replica.moment_sum2 / cnt
    rate = 2.0  # participations per agent per sweep, exact for uniform pairs
    drift = -rate * mean_d
    diffusion = rate * mean_d2 / 2.0
    thin = cnt < min_count
    drift[thin] = np.nan
    diffusion[thin] = np.nan
    if skip_boundary:
        drift[0] = np.nan
        diffusion[0] = np.nan
    return DriftDiffusionTable(values, drift, diffusion,
                               replica.moment_count.copy())


def stationary_from_moments(table: DriftDiffusionTable, grid_max: float,
                            cells: int = 2000,
                            grid_min: float = 0.0) -> tuple[FpProblem, np.ndarray]:
    """Stationary PDE solution for measured drift/diffusion tables."""
    problem = FpProblem(grid_min, grid_max, cells,
                        table.drift_function(), table.diffusion_function())
    return problem, fp_stationary(problem)

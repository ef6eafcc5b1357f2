"""CHSH correlators from sign-binned homodyne outcomes.

The joint distribution of the two measured quadratures is a signed
mixture of bivariate Gaussians; the sign-binned correlator of each term
follows from the Gaussian orthant probability,

    E_term = (2/pi) * arcsin(rho),

with rho the term's correlation coefficient, so the full correlator is
the weight-averaged arcsine.  A 2D quadrature fallback guards the closed
form in the tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import conditioning, gaussian
from .errors import (CVBellError, DomainError, OptimizationError,
                     SingularMatrixError)

DEFAULT_ANGLES = (0.0, np.pi / 2, -np.pi / 4, np.pi / 4)

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0

#: clamp |rho| at this bound, counting occurrences for diagnostics
_RHO_BOUND = 1.0 - 1e-12
_clamp_count = 0


def clamp_count() -> int:
    """Number of times a correlation coefficient had to be clamped to (-1, 1)."""
    return _clamp_count


@dataclass(frozen=True)
class ExperimentParams:
    """Source and analysis settings for one CHSH evaluation.

    squeezing is tanh of the squeeze parameter; angles are the two
    quadrature phases per party, (theta1, theta2, phi1, phi2).
    """

    squeezing: float
    transmittance: float
    apd_efficiency: float
    homodyne_efficiency: float
    angles: tuple[float, float, float, float] = DEFAULT_ANGLES

    def __post_init__(self):
        if not 0.0 <= self.squeezing < 1.0:
            raise DomainError(f"squeezing must lie in [0, 1), got {self.squeezing}")
        for name in ("transmittance", "apd_efficiency", "homodyne_efficiency"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {val}")
        if len(self.angles) != 4:
            raise DomainError("angles must be (theta1, theta2, phi1, phi2)")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    def output_covariance(self) -> np.ndarray:
        return gaussian.output_covariance(self.squeezing, self.transmittance,
                                          self.apd_efficiency,
                                          self.homodyne_efficiency)


@dataclass(frozen=True)
class BivariateMixture:
    """Signed mixture of zero-mean bivariate Gaussians; weights sum to 1."""

    weights: np.ndarray        # shape (4,)
    covariances: np.ndarray    # shape (4, 2, 2)

    def density(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Joint density on a broadcastable grid of quadrature values."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.zeros_like(x, dtype=float)
        for w, cov in zip(self.weights, self.covariances):
            det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
            quad = (cov[1, 1] * x * x - 2.0 * cov[0, 1] * x * y
                    + cov[0, 0] * y * y) / det
            out += w * np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
        return out


@dataclass(frozen=True)
class BellResult:
    """Four correlators E(theta_j, phi_k), the CHSH combination, and the
    heralding probability."""

    correlators: np.ndarray    # shape (2, 2), rows theta, columns phi
    S: float
    success_prob: float


def rotated_marginal(state: conditioning.SignedGaussianMixture,
                     theta: float, phi: float) -> BivariateMixture:
    """Marginal of (x_theta on A, x_phi on B) as a signed bivariate mixture.

    Each term's 4x4 covariance is projected onto the two measured
    quadratures; marginalizing a Gaussian in covariance form just drops
    the conjugate rows and columns.
    """
    weights = conditioning.normalized_term_weights(state)
    covs4 = conditioning.term_covariances(state)
    proj = np.array([[np.cos(theta), np.sin(theta), 0.0, 0.0],
                     [0.0, 0.0, np.cos(phi), np.sin(phi)]])
    covs2 = np.einsum("ai,nij,bj->nab", proj, covs4, proj)
    for cov in covs2:
        if cov[0, 0] <= 0 or cov[1, 1] <= 0 or np.linalg.det(cov) <= 0:
            raise SingularMatrixError(
                "marginal term covariance is not positive definite")
    return BivariateMixture(weights=weights, covariances=covs2)


def sign_correlation(marginal: BivariateMixture) -> float:
    """Closed-form sign-binned correlator of a signed Gaussian mixture."""
    global _clamp_count
    total = 0.0
    for w, cov in zip(marginal.weights, marginal.covariances):
        rho = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])
        if abs(rho) > _RHO_BOUND:
            rho = np.copysign(_RHO_BOUND, rho)
            _clamp_count += 1
        total += w * (2.0 / np.pi) * np.arcsin(rho)
    return float(total)


def sign_correlation_quadrature(marginal: BivariateMixture,
                                nodes_per_quadrant: int = 48,
                                sigma_range: float = 6.0) -> float:
    """Quadrature evaluation of the sign-binned correlator.

    Integrates sign(x*y) * density quadrant by quadrant with Gauss-Legendre
    nodes (so the sign discontinuity never crosses a panel), giving the
    independent check on the arcsine closed form.
    """
    sx = sigma_range * np.sqrt(max(cov[0, 0] for cov in marginal.covariances))
    sy = sigma_range * np.sqrt(max(cov[1, 1] for cov in marginal.covariances))
    nodes, wts = np.polynomial.legendre.leggauss(nodes_per_quadrant)
    x_pos = (nodes + 1.0) * sx / 2.0
    y_pos = (nodes + 1.0) * sy / 2.0
    wx = wts * sx / 2.0
    wy = wts * sy / 2.0
    total = 0.0
    for sgn_x, sgn_y in itertools.product((1.0, -1.0), repeat=2):
        dens = marginal.density(sgn_x * x_pos[:, None], sgn_y * y_pos[None, :])
        total += sgn_x * sgn_y * (wx @ dens @ wy)
    return float(total)


def chsh(params: ExperimentParams) -> BellResult:
    """Run the Gaussian pipeline end to end and assemble the CHSH parameter.

    Propagates the invalid-regime error from the conditioning step when
    the parameters cannot herald (e.g. zero squeezing).
    """
    state = conditioning.conditional_state(params.output_covariance())
    theta1, theta2, phi1, phi2 = params.angles
    corr = np.empty((2, 2))
    for (j, theta), (k, phi) in itertools.product(
            enumerate((theta1, theta2)), enumerate((phi1, phi2))):
        corr[j, k] = sign_correlation(rotated_marginal(state, theta, phi))
    s = corr[0, 0] + corr[0, 1] + corr[1, 0] - corr[1, 1]
    return BellResult(correlators=corr, S=float(s),
                      success_prob=state.success_prob)


def _golden_section_max(fun, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal scalar function."""
    c = hi - (hi - lo) / GOLDEN_RATIO
    d = lo + (hi - lo) / GOLDEN_RATIO
    fc, fd = fun(c), fun(d)
    while abs(hi - lo) > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - (hi - lo) / GOLDEN_RATIO
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + (hi - lo) / GOLDEN_RATIO
            fd = fun(d)
    mid = 0.5 * (lo + hi)
    return mid, fun(mid)


def optimize_lambda(transmittance: float, apd_efficiency: float,
                    homodyne_efficiency: float,
                    angles: tuple[float, float, float, float] = DEFAULT_ANGLES,
                    tol: float = 1e-4) -> tuple[float, float]:
    """Squeezing value maximizing the CHSH parameter, and the maximum.

    A 20-point pre-scan brackets the peak and errors out if two separated
    local maxima agree within 0.005 (the unimodality assumption behind
    golden-section search would then be unsafe).
    """
    def objective(lam: float) -> float:
        params = ExperimentParams(squeezing=lam, transmittance=transmittance,
                                  apd_efficiency=apd_efficiency,
                                  homodyne_efficiency=homodyne_efficiency,
                                  angles=angles)
        try:
            return chsh(params).S
        except CVBellError:
            return -np.inf

    grid = np.linspace(0.01, 0.95, 20)
    values = np.array([objective(lam) for lam in grid])
    maxima = [i for i in range(1, len(grid) - 1)
              if values[i] >= values[i - 1] and values[i] >= values[i + 1]
              and np.isfinite(values[i])]
    if not maxima:
        raise OptimizationError("no interior maximum found in the pre-scan")
    best = max(maxima, key=lambda i: values[i])
    for other in maxima:
        if abs(other - best) > 1 and abs(values[other] - values[best]) < 0.005:
            raise OptimizationError(
                "pre-scan found two comparable separated maxima; "
                "refusing unimodal search")
    lam_opt, s_max = _golden_section_max(objective, grid[best - 1],
                                         grid[best + 1], tol)
    return float(lam_opt), float(s_max)


@dataclass(frozen=True)
class SweepPoint:
    """One row of a parameter sweep; `error` is set when the point failed."""

    value: float
    S: float = np.nan
    success_prob: float = np.nan
    error: str | None = None


SWEEP_AXES = ("squeezing", "apd_efficiency", "homodyne_efficiency")


def sweep(axis: str, grid, fixed: ExperimentParams,
          threads: int = 1) -> list[SweepPoint]:
    """Evaluate the CHSH pipeline along one parameter axis.

    Per-point domain failures are recorded in the row and the sweep
    continues.  Points are independent, so they may be evaluated by a
    thread pool; the returned rows are ordered by axis value regardless.
    """
    if axis not in SWEEP_AXES:
        raise DomainError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = sorted(float(v) for v in grid)

    def evaluate(value: float) -> SweepPoint:
        try:
            result = chsh(replace(fixed, **{axis: value}))
        except CVBellError as exc:
            return SweepPoint(value=value, error=str(exc))
        return SweepPoint(value=value, S=result.S,
                          success_prob=result.success_prob)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(evaluate, values))
    return [evaluate(v) for v in values]

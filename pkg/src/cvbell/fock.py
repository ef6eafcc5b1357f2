"""Truncated photon-number-basis implementation of the whole experiment.

Everything here is computed independently of the covariance-matrix
pipeline: states are amplitude arrays over photon numbers, beam splitters
act through binomial amplitude tables, loss through Kraus operators
obtained from a beam-splitter dilation that is traced out immediately,
and homodyne statistics through harmonic-oscillator wavefunctions.  The
module exists to referee the Gaussian results, so it favours directness
over speed.

Quadrature convention matches the covariance modules: <x^2> = 1/2 in
vacuum, i.e. psi_0(x) = pi^(-1/4) exp(-x^2/2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import DomainError, InvalidRegimeError, TruncationError

DEFAULT_TRUNCATION = 40

DEFAULT_ANGLES = (0.0, np.pi / 2, -np.pi / 4, np.pi / 4)

#: maximum probability allowed in the top four photon-number layers
TAIL_TOLERANCE = 1e-8

#: half-width and size of the homodyne quadrature grid
GRID_HALFWIDTH = 8.0
GRID_POINTS = 400


def _check_truncation(probs: np.ndarray, n_trunc: int):
    """Fail when too much probability sits near the truncation edge."""
    cut = max(n_trunc - 4, 0)
    tail = float(probs[cut:, :].sum() + probs[:cut, cut:].sum())
    if tail > TAIL_TOLERANCE:
        raise TruncationError(
            f"probability {tail:.3e} above photon number {cut} "
            f"exceeds {TAIL_TOLERANCE:.1e}; increase the truncation")


@dataclass(frozen=True)
class FockState:
    """Pure two-mode state as a complex amplitude array over (n_A, n_B)."""

    amplitudes: np.ndarray
    n_trunc: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.n_trunc < 16:
            raise DomainError(f"truncation must be >= 16, got {self.n_trunc}")
        if amps.shape != (self.n_trunc, self.n_trunc):
            raise DomainError("amplitude array does not match the truncation")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"state norm {norm} differs from 1 beyond 1e-10")
        _check_truncation(np.abs(amps) ** 2, self.n_trunc)
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class FockDensityMatrix:
    """Mixed two-mode state, indexed (n_A, n_B, m_A, m_B)."""

    entries: np.ndarray
    n_trunc: int

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        n = self.n_trunc
        if rho.shape != (n, n, n, n):
            raise DomainError("density array does not match the truncation")
        flat = rho.reshape(n * n, n * n)
        if np.max(np.abs(flat - flat.conj().T)) > 1e-10:
            raise DomainError("density matrix is not hermitian within 1e-10")
        trace = float(np.einsum("abab->", rho).real)
        if abs(trace - 1.0) > 1e-9:
            raise DomainError(f"density matrix trace {trace} differs from 1")
        object.__setattr__(self, "entries", rho)

    def flat(self) -> np.ndarray:
        n = self.n_trunc
        return self.entries.reshape(n * n, n * n)


# ---------------------------------------------------------------------------
# states and beam splitters


def tmsv_amplitudes(squeezing: float, n_trunc: int) -> np.ndarray:
    """Schmidt coefficients of the two-mode squeezed vacuum, sqrt(1-l^2) l^n."""
    if not 0.0 <= squeezing < 1.0:
        raise DomainError(f"squeezing must lie in [0, 1), got {squeezing}")
    return np.sqrt(1.0 - squeezing ** 2) * squeezing ** np.arange(n_trunc)


def tmsv_state(squeezing: float, n_trunc: int = DEFAULT_TRUNCATION) -> FockState:
    """Two-mode squeezed vacuum in the photon-number basis."""
    diag = tmsv_amplitudes(squeezing, n_trunc)
    amps = np.zeros((n_trunc, n_trunc), dtype=complex)
    np.fill_diagonal(amps, diag)
    norm = np.sqrt(np.sum(np.abs(amps) ** 2))
    return FockState(amplitudes=amps / norm, n_trunc=n_trunc)


def ladder(n_trunc: int) -> np.ndarray:
    """Annihilation operator on the truncated basis."""
    return np.diag(np.sqrt(np.arange(1, n_trunc)), k=1)


def quadrature_operators(n_trunc: int) -> tuple[np.ndarray, np.ndarray]:
    """x and p matrices with <x^2>_vac = 1/2."""
    a = ladder(n_trunc)
    x = (a + a.T) / np.sqrt(2.0)
    p = (a - a.T) / (1j * np.sqrt(2.0))
    return x, p


def second_moments(state: FockState) -> np.ndarray:
    """Covariance matrix gamma_ij = <r_i r_j + r_j r_i> of a zero-mean state.

    Brute-force moment evaluation used as the ground truth for the
    covariance-matrix constructors.  For operators F on mode A and G
    on mode B, <F (x) G> = sum conj(Psi[a,b]) F[a,c] G[b,d] Psi[c,d].
    """
    quads = quadrature_operators(state.n_trunc)
    psi = state.amplitudes
    gamma = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            mode_i, op_i = i // 2, quads[i % 2]
            mode_j, op_j = j // 2, quads[j % 2]
            if mode_i == mode_j:
                sym = op_i @ op_j + op_j @ op_i
                if mode_i == 0:
                    val = np.einsum("ab,ac,cb->", psi.conj(), sym, psi)
                else:
                    val = np.einsum("ab,bc,ac->", psi.conj(), sym, psi)
            else:
                op_a, op_b = (op_i, op_j) if mode_i == 0 else (op_j, op_i)
                val = 2.0 * np.einsum("ab,ac,bd,cd->", psi.conj(), op_a, op_b, psi)
            gamma[i, j] = val.real
    return gamma


def tap_amplitude_table(transmittance: float, n_trunc: int) -> np.ndarray:
    """Beam-splitter amplitudes for |m>|0> -> sum_k table[m,k] |m-k>|k>.

    table[m, k] is the amplitude that k photons end up in the tap arm.
    Computed in log space to stay finite for large m.
    """
    if not 0.0 < transmittance <= 1.0:
        raise DomainError(f"transmittance must lie in (0, 1], got {transmittance}")
    m = np.arange(n_trunc)[:, None].astype(float)
    k = np.arange(n_trunc)[None, :].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_binom = gammaln(m + 1) - gammaln(k + 1) - gammaln(np.maximum(m - k, 0) + 1)
        log_kept = (m - k) / 2.0 * np.log(transmittance)
        log_tapped = np.where(k > 0, k / 2.0 * np.log1p(-transmittance), 0.0)
        table = np.exp(0.5 * log_binom + log_kept + log_tapped)
    table[k > m] = 0.0
    return table * (-1.0) ** k


def pair_projected_state(squeezing: float, transmittance: float,
                         n_trunc: int = DEFAULT_TRUNCATION) -> FockState:
    """State heralded by exactly one photon in each tap arm.

    Projecting both taps onto the single-photon state leaves a pure
    two-mode state with amplitudes proportional to (n+1)(T*lambda)^n.
    """
    coeff = tmsv_amplitudes(squeezing, n_trunc)
    table = tap_amplitude_table(transmittance, n_trunc)
    totals = np.arange(1, n_trunc)
    diag = coeff[totals] * table[totals, 1] ** 2
    norm = np.linalg.norm(diag)
    if norm == 0.0:
        raise InvalidRegimeError("no amplitude survives the photon-pair projection")
    amps = np.zeros((n_trunc, n_trunc), dtype=complex)
    amps[totals - 1, totals - 1] = diag / norm
    return FockState(amplitudes=amps, n_trunc=n_trunc)


def ideal_subtracted_state(squeezing: float, transmittance: float,
                           n_trunc: int = DEFAULT_TRUNCATION
                           ) -> tuple[FockState, float]:
    """Normalized (n+1)(T*lambda)^n |n,n> state and its projection fidelity.

    Returns the closed-form photon-subtracted state together with its
    overlap fidelity against the exact two-beam-splitter photon-pair
    projection at the same finite transmittance.
    """
    if squeezing * transmittance >= 0.95:
        raise DomainError("squeezing * transmittance must stay below 0.95 "
                          "for the truncated representation to converge")
    if squeezing * transmittance == 0.0:
        raise InvalidRegimeError("zero squeezing cannot herald a photon pair")
    n = np.arange(n_trunc)
    diag = (n + 1.0) * (transmittance * squeezing) ** n
    diag /= np.linalg.norm(diag)
    amps = np.zeros((n_trunc, n_trunc), dtype=complex)
    np.fill_diagonal(amps, diag)
    state = FockState(amplitudes=amps, n_trunc=n_trunc)
    projected = pair_projected_state(squeezing, transmittance, n_trunc)
    overlap = complex(np.vdot(projected.amplitudes, state.amplitudes))
    return state, float(abs(overlap) ** 2)


# ---------------------------------------------------------------------------
# click conditioning with lossy on/off detectors


def click_weights(apd_efficiency: float, n_trunc: int) -> np.ndarray:
    """Click probability of an on/off detector seeing k photons.

    Built from the dilation amplitudes of the efficiency beam splitter
    (the detector keeps the transmitted arm): no click means all k
    photons were tapped away into the traced arm.
    """
    table = tap_amplitude_table(apd_efficiency, n_trunc)
    idx = np.arange(n_trunc)
    no_click = table[idx, idx] ** 2
    return 1.0 - no_click


def _click_conditioned_unnormalized(squeezing: float, transmittance: float,
                                    apd_efficiency: float,
                                    n_trunc: int) -> np.ndarray:
    """Unnormalized heralded state; its trace is the double-click probability."""
    if not 0.0 < apd_efficiency <= 1.0:
        raise DomainError(f"apd_efficiency must lie in (0, 1], got {apd_efficiency}")
    coeff = tmsv_amplitudes(squeezing, n_trunc)
    table = tap_amplitude_table(transmittance, n_trunc)
    weights = click_weights(apd_efficiency, n_trunc)
    rho = np.zeros((n_trunc, n_trunc, n_trunc, n_trunc))
    for kc in range(1, n_trunc):
        for kd in range(1, n_trunc):
            totals = np.arange(max(kc, kd), n_trunc)
            vec = coeff[totals] * table[totals, kc] * table[totals, kd]
            contribution = weights[kc] * weights[kd] * np.outer(vec, vec)
            a_idx, b_idx = totals - kc, totals - kd
            rho[a_idx[:, None], b_idx[:, None],
                a_idx[None, :], b_idx[None, :]] += contribution
    return rho


def double_click_probability(squeezing: float, transmittance: float,
                             apd_efficiency: float,
                             n_trunc: int = DEFAULT_TRUNCATION) -> float:
    """Probability that both tap detectors click on one pulse."""
    rho = _click_conditioned_unnormalized(squeezing, transmittance,
                                          apd_efficiency, n_trunc)
    return float(np.einsum("abab->", rho))


def lossy_click_conditioning(squeezing: float, transmittance: float,
                             apd_efficiency: float,
                             n_trunc: int = DEFAULT_TRUNCATION
                             ) -> tuple[FockDensityMatrix, float]:
    """Heralded state of the kept modes and the double-click probability.

    The tap arms are measured by on/off detectors of the given efficiency;
    conditioning on both clicking yields a mixed state block-diagonal in
    the photon-number difference.
    """
    rho = _click_conditioned_unnormalized(squeezing, transmittance,
                                          apd_efficiency, n_trunc)
    p_click = float(np.einsum("abab->", rho))
    if p_click <= 0.0:
        raise InvalidRegimeError(
            f"double-click probability {p_click} vanishes; "
            "no conditional state exists")
    state = FockDensityMatrix(entries=(rho / p_click).astype(complex),
                              n_trunc=n_trunc)
    return state, p_click


def apply_loss(rho: np.ndarray, transmittance: float, mode: int) -> np.ndarray:
    """Pure loss on one mode of a two-mode density array.

    Kraus operators come from coupling the mode to a vacuum ancilla on a
    beam splitter of the given transmittance and tracing the ancilla.
    """
    n = rho.shape[0]
    table = np.abs(tap_amplitude_table(transmittance, n))
    out = np.zeros_like(rho)
    for lost in range(n):
        kept = n - lost
        w = table[lost + np.arange(kept), lost]
        if mode == 0:
            out[:kept, :, :kept, :] += (w[:, None, None, None]
                                        * w[None, None, :, None]
                                        * rho[lost:, :, lost:, :])
        else:
            out[:, :kept, :, :kept] += (w[None, :, None, None]
                                        * w[None, None, None, :]
                                        * rho[:, lost:, :, lost:])
    return out


# ---------------------------------------------------------------------------
# homodyne statistics


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions psi_n(x) for n < n_max, shape (n_max, len(x))."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, n_max):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] \
            - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def signed_quadrature_grid(n_points: int = GRID_POINTS,
                           halfwidth: float = GRID_HALFWIDTH):
    """Gauss-Legendre nodes/weights per half-axis, glued symmetrically.

    Splitting at zero keeps the sign function constant on each panel, so
    the sign-binned integrals converge at quadrature accuracy.
    """
    nodes, wts = np.polynomial.legendre.leggauss(n_points // 2)
    pos = (nodes + 1.0) * halfwidth / 2.0
    w_pos = wts * halfwidth / 2.0
    x = np.concatenate([-pos[::-1], pos])
    w = np.concatenate([w_pos[::-1], w_pos])
    return x, w


def joint_quadrature_density(rho: FockDensityMatrix, theta: float, phi: float,
                             x: np.ndarray) -> np.ndarray:
    """P(x_theta^A, x_phi^B) on the tensor grid x (x) x.

    Rotating a mode by an angle multiplies the amplitudes by photon-number
    phases, after which the density is a double Hermite-function contraction.
    """
    n = rho.n_trunc
    phase_a = np.exp(1j * theta * np.arange(n))
    phase_b = np.exp(1j * phi * np.arange(n))
    rotated = (rho.entries
               * phase_a[:, None, None, None] * phase_b[None, :, None, None]
               * phase_a[None, None, :, None].conj()
               * phase_b[None, None, None, :].conj())
    h = hermite_functions(n, x)
    pair_x = np.einsum("ax,cx->acx", h, h).reshape(n * n, -1)
    pair_y = np.einsum("by,dy->bdy", h, h).reshape(n * n, -1)
    mat = rotated.transpose(0, 2, 1, 3).reshape(n * n, n * n)
    return (pair_x.T @ (mat @ pair_y)).real


def fock_sign_correlation(rho: FockDensityMatrix, theta: float, phi: float,
                          homodyne_efficiency: float = 1.0,
                          n_points: int = GRID_POINTS,
                          halfwidth: float = GRID_HALFWIDTH) -> float:
    """Sign-binned quadrature correlator evaluated in the photon-number basis."""
    entries = rho.entries
    if homodyne_efficiency < 1.0:
        entries = apply_loss(apply_loss(entries, homodyne_efficiency, 0),
                             homodyne_efficiency, 1)
        rho = FockDensityMatrix(entries=entries, n_trunc=rho.n_trunc)
    x, w = signed_quadrature_grid(n_points, halfwidth)
    dens = joint_quadrature_density(rho, theta, phi, x)
    mass = float(w @ dens @ w)
    if abs(mass - 1.0) > 1e-8:
        warnings.warn(f"quadrature mass {mass:.12f} outside [-{halfwidth}, "
                      f"{halfwidth}]^2 exceeds 1e-8", stacklevel=2)
    signed = w * np.sign(x)
    return float(signed @ dens @ signed)


def fock_chsh(rho: FockDensityMatrix,
              angles: tuple[float, float, float, float],
              homodyne_efficiency: float = 1.0) -> float:
    """CHSH combination of four sign correlators for a given heralded state."""
    theta1, theta2, phi1, phi2 = angles
    e = {}
    for theta in (theta1, theta2):
        for phi in (phi1, phi2):
            e[(theta, phi)] = fock_sign_correlation(rho, theta, phi,
                                                    homodyne_efficiency)
    return (e[(theta1, phi1)] + e[(theta1, phi2)]
            + e[(theta2, phi1)] - e[(theta2, phi2)])


def _diag_sign_correlation(diag: np.ndarray, angle_sum: float,
                           x: np.ndarray, w: np.ndarray,
                           h: np.ndarray) -> float:
    """Sign correlator of a pure sum_n g_n |n,n> state (fast scan path)."""
    phased = diag * np.exp(1j * angle_sum * np.arange(diag.size))
    wave = np.einsum("n,nx,ny->xy", phased, h, h)
    dens = np.abs(wave) ** 2
    signed = w * np.sign(x)
    return float(signed @ dens @ signed)


def fock_optimal_product(transmittance: float, n_trunc: int = 60,
                         lam_range: tuple[float, float] = (0.35, 0.80),
                         tol: float = 5e-4) -> tuple[float, float]:
    """Squeezing-transmittance product maximizing S in the Fock pipeline.

    Uses photon-pair projection (perfect photon-resolving detectors) and
    ideal homodynes, which keeps the heralded state pure and the scan
    cheap.  Returns (lambda_opt * T, S_max).
    """
    x, w = signed_quadrature_grid()
    h = hermite_functions(n_trunc, x)
    theta1, theta2, phi1, phi2 = DEFAULT_ANGLES

    def s_value(lam: float) -> float:
        state = pair_projected_state(lam, transmittance, n_trunc)
        diag = np.diag(state.amplitudes)
        e = {}
        for s in {theta1 + phi1, theta1 + phi2, theta2 + phi1, theta2 + phi2}:
            e[s] = _diag_sign_correlation(diag, s, x, w, h)
        return (e[theta1 + phi1] + e[theta1 + phi2]
                + e[theta2 + phi1] - e[theta2 + phi2])

    lo, hi = lam_range
    grid = np.linspace(lo, hi, 16)
    values = [s_value(lam) for lam in grid]
    best = int(np.argmax(values))
    if best in (0, len(grid) - 1):
        raise DomainError("optimal squeezing fell on the scan boundary")
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    a, b = grid[best - 1], grid[best + 1]
    c = b - (b - a) / golden
    d = a + (b - a) / golden
    fc, fd = s_value(c), s_value(d)
    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - (b - a) / golden
            fc = s_value(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) / golden
            fd = s_value(d)
    lam_opt = 0.5 * (a + b)
    return float(lam_opt * transmittance), float(s_value(lam_opt))


# ---------------------------------------------------------------------------
# Wigner function


def wigner_pair_table(n_trunc: int, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Wigner transforms of |m><n| at phase-space points, shape (n, n, npts).

    Closed form in terms of associated Laguerre polynomials; down-weighted
    by the usual factorial ratio, with the conjugate filled in for m < n.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    rsq = x * x + p * p
    alpha = np.sqrt(2.0) * (x - 1j * p)
    table = np.zeros((n_trunc, n_trunc, x.size), dtype=complex)
    base = np.exp(-rsq) / np.pi
    for m in range(n_trunc):
        for n in range(m + 1):
            ratio = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            val = ((-1.0) ** n * ratio * alpha ** (m - n)
                   * eval_genlaguerre(n, m - n, 2.0 * rsq) * base)
            table[m, n] = val
            if m != n:
                table[n, m] = val.conj()
    return table


def wigner_values(rho: FockDensityMatrix, points: np.ndarray) -> np.ndarray:
    """Two-mode Wigner function at phase-space points (..., 4).

    Point components are ordered (x_A, p_A, x_B, p_B) to match the
    covariance-matrix modules.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 4:
        raise DomainError("phase-space points must have 4 components")
    flat = pts.reshape(-1, 4)
    n = rho.n_trunc
    table_a = wigner_pair_table(n, flat[:, 0], flat[:, 1])
    table_b = wigner_pair_table(n, flat[:, 2], flat[:, 3])
    partial = np.einsum("abcd,aci->bdi", rho.entries, table_a)
    values = np.einsum("bdi,bdi->i", partial, table_b)
    return values.real.reshape(pts.shape[:-1])

"""Conditional two-mode state heralded by a double click.

Projecting both tap detectors onto "at least one photon" turns the
Gaussian four-mode output state into a signed mixture of four Gaussians
on the homodyne modes: the inclusion-exclusion expansion of the two
click projectors contributes one term per vacuum-kernel combination,
with integer weights (1, -2, -2, 4).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidRegimeError
from .gaussian import InverseBlocks, block_inverse_decompose, spd_inverse

#: inclusion-exclusion weights of (no kernel, C vacuum, D vacuum, CD vacuum)
CLICK_WEIGHTS = (1, -2, -2, 4)

#: vacuum kernels added to the detector block, in (x_C, p_C, x_D, p_D) order
_KERNELS = (np.zeros(4), np.array([1.0, 1.0, 0.0, 0.0]),
            np.array([0.0, 0.0, 1.0, 1.0]), np.ones(4))

#: heralding probabilities smaller than this are numerically zero
MIN_SUCCESS_PROB = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class MixtureTerm:
    """One signed Gaussian: weight * exp(-r^T precision r) / detector_det_root."""

    weight: int
    precision: np.ndarray       # 4x4, quadratures (x_A, p_A, x_B, p_B)
    detector_det_root: float    # sqrt(det of the augmented detector block)


@dataclass(frozen=True)
class SignedGaussianMixture:
    """Wigner function of the heralded two-mode state.

    W(r) = prefactor * sum_j weight_j / detector_det_root_j
           * exp(-r^T precision_j r)
    """

    terms: tuple[MixtureTerm, ...]
    prefactor: float
    success_prob: float


def _augmented_blocks(blocks: InverseBlocks):
    """The four reduced precisions and detector-determinant roots."""
    precisions, det_roots = [], []
    for kernel in _KERNELS:
        det_block = blocks.detector_block + np.diag(kernel)
        det_inv = spd_inverse(det_block)
        reduced = blocks.homodyne_block - blocks.coupling @ det_inv @ blocks.coupling.T
        precisions.append(0.5 * (reduced + reduced.T))
        det_roots.append(float(np.sqrt(np.linalg.det(det_block))))
    return precisions, det_roots


def conditional_state(cov_out: np.ndarray) -> SignedGaussianMixture:
    """Signed four-Gaussian mixture of the double-click conditional state.

    Raises InvalidRegimeError when the heralding probability is zero or
    numerically indistinguishable from zero (e.g. vacuum input).
    """
    blocks = block_inverse_decompose(cov_out)
    precisions, det_roots = _augmented_blocks(blocks)
    det_out = float(np.linalg.det(cov_out))
    success = 0.0
    for q, prec, root in zip(CLICK_WEIGHTS, precisions, det_roots):
        success += q / (np.sqrt(np.linalg.det(prec)) * root)
    success /= np.sqrt(det_out)
    if not np.isfinite(success) or success < MIN_SUCCESS_PROB:
        raise InvalidRegimeError(
            f"invalid-regime: heralding probability {success:.3e} is not usable; "
            "the input state cannot trigger both detectors")
    terms = tuple(MixtureTerm(weight=q, precision=prec, detector_det_root=root)
                  for q, prec, root in zip(CLICK_WEIGHTS, precisions, det_roots))
    prefactor = 1.0 / (np.pi ** 2 * success * np.sqrt(det_out))
    return SignedGaussianMixture(terms=terms, prefactor=prefactor,
                                 success_prob=float(success))


def success_probability(cov_out: np.ndarray) -> float:
    """Probability that both tap detectors click."""
    return conditional_state(cov_out).success_prob


def normalized_term_weights(state: SignedGaussianMixture) -> np.ndarray:
    """Signed masses of the four terms; they sum to 1."""
    weights = []
    for term in state.terms:
        gauss_norm = np.pi ** 2 / np.sqrt(np.linalg.det(term.precision))
        weights.append(state.prefactor * term.weight / term.detector_det_root
                       * gauss_norm)
    return np.array(weights)


def term_covariances(state: SignedGaussianMixture) -> np.ndarray:
    """4x4 covariance of each term viewed as a normalized Gaussian, shape (4,4,4)."""
    return np.stack([spd_inverse(term.precision) / 2.0 for term in state.terms])


def wigner_value(state: SignedGaussianMixture, points: np.ndarray) -> np.ndarray:
    """Evaluate W at phase-space points of shape (..., 4)."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 4:
        raise DomainError("phase-space points must have 4 components")
    flat = pts.reshape(-1, 4)
    total = np.zeros(flat.shape[0])
    for term in state.terms:
        quad = np.einsum("ni,ij,nj->n", flat, term.precision, flat)
        total += term.weight / term.detector_det_root * np.exp(-quad)
    return (state.prefactor * total).reshape(pts.shape[:-1])


def wigner_cut(state: SignedGaussianMixture, direction: np.ndarray,
               offsets: np.ndarray) -> np.ndarray:
    """W along the line r = offset * direction; returns rows (offset, W).

    `direction` must be a unit 4-vector in (x_A, p_A, x_B, p_B) order.
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (4,):
        raise DomainError("direction must be a 4-vector")
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise DomainError("direction must be normalized")
    offsets = np.asarray(offsets, dtype=float)
    values = wigner_value(state, offsets[:, None] * direction[None, :])
    return np.column_stack([offsets, values])

"""Bell-CHSH statistics of photon-subtracted two-mode squeezed vacuum
measured with balanced homodyne detection.

The package computes the heralded non-Gaussian state and its sign-binned
quadrature correlators three independent ways: a covariance-matrix
pipeline with a closed-form arcsine correlator (`gaussian`,
`conditioning`, `bell`), a truncated photon-number-basis re-derivation
(`fock`), and a pulsed Monte Carlo protocol simulation (`montecarlo`).
"""

from .bell import (BellResult, BivariateMixture, ExperimentParams, chsh,
                   optimize_lambda, rotated_marginal, sign_correlation,
                   sign_correlation_quadrature, sweep)
from .conditioning import (SignedGaussianMixture, conditional_state,
                           success_probability, wigner_cut, wigner_value)
from .errors import (ConfigError, CVBellError, DomainError, EnvelopeError,
                     InvalidRegimeError, OptimizationError,
                     SingularMatrixError, TruncationError)
from .gaussian import (GaussianChannel, apply_channel, apply_symplectic,
                       beamsplitter_symplectic, block_inverse_decompose,
                       db_to_squeezing, detector_loss_channel,
                       embed_with_vacuum_ancillas, output_covariance,
                       squeezing_to_db, symplectic_eigenvalues,
                       tmsv_covariance)
from .montecarlo import (MCResult, ProtocolConfig, acquisition_time,
                         run_protocol, sample_joint_quadratures)

__version__ = "0.1.0"

"""Wong-Zakai approximation lab.

Smooth-driver (polygonal / Ornstein-Uhlenbeck) approximations of SDEs on one
coupled probability space, with the machinery to verify time-uniform error
bounds, exact linear-model variance formulas, Milstein-type decompositions,
spectral stability certificates, and Wong-Zakai integral corrections at desk
scale.
"""

__version__ = "0.1.0"

from .estimators import (ErrorReport, MomentAccumulator, RateFit,
                         coupled_error_experiment, driver_moment_experiment,
                         exact_linear_variance, exact_linear_variance_limit,
                         lg_stable_bound, lg_unstable_envelope,
                         milstein_residual_experiment,
                         moments_uniform_experiment, orthogonality_check,
                         percell_variance, rate_experiment, rate_fit)
from .flows import (CoupledSample, FlowBlowupError, LampertiMap,
                    MilsteinDecomposition, det_flow, ito_flow_fine,
                    lamperti_transform, milstein_terms, simulate_coupled,
                    tangent_decay, wz_flow)
from .meshpaths import (BrownianPath, ConfigurationError, DriverPath, TimeMesh,
                        driver_gap_moments, make_mesh, ou_driver,
                        polygonal_driver, sample_brownian)
from .models import (CommutationReport, SdeModel, bounded_sigma1d,
                     builtin_models, check_commutation, get_model,
                     ito_correction, levy_tensor, linear1d, linear_nd,
                     make_model, stable_nonlinear1d)
from .spectral import (CertificationError, CertReport, certify,
                       jacobi_eigenvalues, lognorm)
from .wzint import (DiscountedKernel, IntegralSample, const_kernel, e_lambda,
                    integral_sample, ito_integral, remainder_experiment,
                    sin_kernel, strato_correction, wz_riemann_integral)

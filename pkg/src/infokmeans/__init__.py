"""Quadratic, robust and information k-means with their generalization bounds."""
from .core import (Density, GaussianLocationParams, InvalidInput, Labeling, PointSet,
                   QuantizerDensity, ReferenceMeasure, make_density, validate_pointset)
from .divergence import (FiniteJoint, bayes_identity_check, gaussian_kl, geometric_mean,
                         gibbs_minimizer, kl_chain_check, kl_density, weighted_kl_to_center)
from .quantize import (FiniteHistogram, GaussianLocation, LloydConfig, RunReport,
                       assign_info, assign_quadratic, criterion_c2, criterion_info,
                       criterion_r2, dsq_seeding, empirical_risk_quadratic, l2_membership_check,
                       lloyd_info, lloyd_quadratic, lloyd_robust, update_info,
                       update_quadratic, update_robust)
from .bounds import (BoundReport, info_bound, info_constants_from_data, linear_bound,
                     max_sq_gaussian_bound, psi, quadratic_bound, robust_bound,
                     simple_inequality_slacks)

__version__ = "0.1.0"

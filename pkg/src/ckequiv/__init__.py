"""Deterministic spectral equivalents of random-feature kernels.

The package splits into a scalar layer (Hermite coefficients, spectral
measures, the multiplicative-convolution fixed point), a matrix layer
(covariance expansions, equivalent resolvents, sampled networks) and a
small batch CLI on top.
"""

from .hermite import (
    ACTIVATIONS,
    Activation,
    QuadratureRule,
    activation_by_name,
    coeff_vector,
    default_rule,
    gaussian_norm_sq,
    hermite_coeff,
    hermite_h,
    hermite_normalized,
    make_rule,
    psi,
)
from .freeconv import (
    DEFAULT_CONFIG,
    DivergenceError,
    FixedPointConfig,
    mp_density_closed,
    mp_stieltjes_closed,
    solve_l,
    solve_l_grid,
)
from .freeconv import mp_boxtimes_stieltjes
from .measures import (
    AffinePush,
    AtomMix,
    DiscreteMeasure,
    Measure,
    MpBoxtimes,
    SignedMeasureError,
    dirac,
    esd_from_eigenvalues,
    kolmogorov_distance,
)
from .gauss_cov import (
    CovModel,
    expansion_tail,
    sigma_approx,
    sigma_expansion,
    sigma_lin,
    sigma_mc_oracle,
)
from .detequiv import (
    EquivalentChain,
    LayerConstants,
    LayerSpec,
    build_chain,
    equicorrelated_equivalent,
    equicorrelated_stieltjes,
    gbox_composed,
    gbox_from_sigma,
    layer_constants,
)
from .netsim import (
    EquicorrelatedData,
    ExplicitData,
    IidData,
    NetworkSpec,
    SimResult,
    SpectralFactory,
    conjugate_kernel,
    empirical_stieltjes,
    orthogonality_stats,
    run_network,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "Activation",
    "AffinePush",
    "CovModel",
    "DEFAULT_CONFIG",
    "DiscreteMeasure",
    "DivergenceError",
    "EquicorrelatedData",
    "EquivalentChain",
    "ExplicitData",
    "FixedPointConfig",
    "IidData",
    "LayerConstants",
    "LayerSpec",
    "AtomMix",
    "Measure",
    "MpBoxtimes",
    "NetworkSpec",
    "QuadratureRule",
    "SignedMeasureError",
    "SimResult",
    "SpectralFactory",
    "activation_by_name",
    "build_chain",
    "coeff_vector",
    "conjugate_kernel",
    "default_rule",
    "dirac",
    "empirical_stieltjes",
    "equicorrelated_equivalent",
    "equicorrelated_stieltjes",
    "esd_from_eigenvalues",
    "expansion_tail",
    "gaussian_norm_sq",
    "gbox_composed",
    "gbox_from_sigma",
    "hermite_coeff",
    "hermite_h",
    "hermite_normalized",
    "kolmogorov_distance",
    "layer_constants",
    "make_rule",
    "mp_boxtimes_stieltjes",
    "mp_density_closed",
    "mp_stieltjes_closed",
    "orthogonality_stats",
    "psi",
    "run_network",
    "sigma_approx",
    "sigma_expansion",
    "sigma_lin",
    "sigma_mc_oracle",
    "solve_l",
    "solve_l_grid",
    "__version__",
]

"""Singular nonlocal operators, their local limits and convergence-rate studies."""

__version__ = "0.1.0"

from .domains import Ball, FullSpace, GraphHalfSpace, Interval  # noqa: E402
from .errors import (  # noqa: E402
    CertificationError,
    CompatibilityError,
    ContractError,
    DegenerateFitError,
    NonlocLabError,
    ParameterError,
    QuadratureError,
    SingularityError,
    UnsupportedError,
)
from .kernel import (  # noqa: E402
    DensitySpec,
    KernelFamily,
    check_dirac_property,
    check_evenness,
    check_growth_bounds,
    check_integrability,
    eval_scaled_density,
    eval_scaled_kernel,
    make_anisotropic_density,
    make_bump_density,
    make_fractional_density,
)
from .moments import MomentumMatrix, moment_cancellation_check, momentum_matrix, sqrt_spd  # noqa: E402
from .operators import (  # noqa: E402
    apply_local,
    apply_nonlocal_domain,
    apply_nonlocal_fullspace,
    apply_nonlocal_pv,
    energy_identity_check,
)
from .quadrature import QuadratureConfig, integrate_over_region, integrate_singular  # noqa: E402
from .testfunctions import (  # noqa: E402
    TestFunction,
    global_extension,
    make_compatible_function,
    make_test_function,
    neumann_compat_check,
)

"""Local hidden variable models for CHSH experiments.

Exact correlations and CHSH values for finite LHV models, random model
pools, the one-model-per-setting-pair stitching construction, finite-N trial
simulation, and a random hunt for CHSH violations.
"""

from .core import (
    HiddenSpace,
    LhvModel,
    ProductLhvModel,
    SettingUniverse,
    chsh,
    correlation,
    factorization_check,
    integrand_values,
    validate_model,
)
from .experiment import empirical_chsh, fluctuation_demo, run_trials
from .optimizer import brute_force_chsh, enumerate_deterministic, hunt
from .pool import (
    QuantumTargets,
    chsh_nonlocal,
    construct_target_model,
    draw_pool,
    random_model,
    select_matching_trials,
    stitch,
)

__version__ = "0.1.0"

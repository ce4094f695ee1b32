"""PDE problems: residuals, conditions, domains and reference solutions."""
from .base import Problem, mean_abs_residual
from .black_scholes import (AmericanPut, BsCoeffs, EuropeanCall, american_put_spec, bs_call_price,
                            bs_call_residual, bs_put_price)
from .execution import (ExecCoeffs, Execution, execution_control_from_value, execution_control_oracle,
                        execution_residual, execution_value_oracle)
from .fokker_planck import (OuCoeffs, OuFokkerPlanck, density_moments, fp_ou_density_oracle,
                            fp_ou_transformed_residual, fp_ou_u_oracle, ou_moments)
from .merton import (Merton, MertonCoeffs, merton_control_from_value, merton_control_oracle,
                     merton_residual, merton_value_oracle)
from .mfg import (MeanFieldExecution, MfgCoeffs, MfgReference, initial_log_density, mfg_fp_transformed_residual,
                  mfg_hjb_residual, mfg_net_flow)
from .systemic import (Systemic, SystemicCoeffs, systemic_control_oracle, systemic_eta, systemic_mu,
                       systemic_residual_i, systemic_value_oracle)

# problem id -> (problem class, coefficient record)
REGISTRY = {
    "european_call": (EuropeanCall, BsCoeffs),
    "american_put": (AmericanPut, BsCoeffs),
    "fokker_planck": (OuFokkerPlanck, OuCoeffs),
    "merton": (Merton, MertonCoeffs),
    "execution": (Execution, ExecCoeffs),
    "systemic": (Systemic, SystemicCoeffs),
    "mfg": (MeanFieldExecution, MfgCoeffs),
}


def make_problem(problem_id: str, coeffs: dict | None = None, **options) -> Problem:
    """Build a problem from its id, coefficient overrides and domain options."""
    if problem_id not in REGISTRY:
        raise KeyError(f"unknown problem {problem_id!r}; known: {sorted(REGISTRY)}")
    cls, rec = REGISTRY[problem_id]
    return cls(rec(**(coeffs or {})), **options)

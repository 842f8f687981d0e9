"""Time-varying state feedback for integrator chains with unmatched disturbances."""

__version__ = "0.1.0"

from .gain import GainSchedule, psi_derivative, psi_value
from .psipoly import (
    PolyMatrix,
    PsiPoly,
    StateLinearForm,
    form_nominal_derivative,
    poly_arith,
    poly_eval,
    polymatrix_inverse_unitriangular,
)
from .controller import (
    ControllerSpec,
    SynthesizedController,
    cancellation_residual,
    eval_control,
    synthesize,
    validate_gains,
)
from .sigma import SigmaSystem, build_sigma_system, sigma_rhs
from .disturbance import ChannelSignal, DisturbanceSpec, disturbance_eval
from .ct_sim import Trajectory, scalar_ct_demo, simulate_ct
from .dt_sim import (
    DtSystem,
    dt_sigma_step,
    dt_state_step,
    limit_matrices,
    make_dt_system,
    resolvent_Z,
    scalar_dt_demo,
    simulate_dt,
)
from .analysis import (
    lemma1_check,
    lemma1_r,
    saturation_tail_bound,
    steady_state_residuals,
    theorem2_bounds,
)

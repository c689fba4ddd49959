"""Propagating cat-state generation with driven four-level emitters in a lossy cavity."""

from .algebra import (Operator, QuantumState, SpaceLayout, basis, commutator, destroy, embed, expectation,
                      fock_populations, identity, ket_bra, ptrace, sigma_x, tensor)
from .analytics import (AnalyticReport, ValidityWarning, analytic_report, decay_probability, f_min,
                        f_min_at_optimum, mode_match, no_jump_prefactor, optimal_kappa_ex, pe_estimate, tau_c,
                        validity_warnings)
from .config import RunConfig, load_config, parse_config
from .dynamics import Trajectory, integrate_master, integrate_no_jump, observable_trajectory
from .errors import *  # noqa: F401,F403
from .model import (CAVITY, VIRTUAL, SystemParams, TimeDependentModel, attach_virtual_cavity, build_effective_model,
                    build_full_model, cavity_number, damped_cavity_model, excited_projector, spin_x)
from .optimizer import SweepResult, maximize_over_kappa_ex, optimize_kappa_ex
from .policy import NumericPolicy, get_policy, set_policy, using_policy
from .protocol import CatRun, simulate_cat
from .pulses import (Envelope, PulsePlan, four_cat_amplitudes, gaussian_envelope, load_envelope, make_pulse_plan,
                     sampled_envelope, virtual_coupling)
from .states import (CatSpec, cat_state, coherent, default_wigner_grid, excited_population_avg, fidelity, four_cat_target,
                     ideal_output_state, postselect, wigner, wigner_norm)

__version__ = "0.1.0"

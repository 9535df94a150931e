"""Reset control toolbox: FOSRE/SOSRE CgLp elements, higher-order
describing functions, exact hybrid simulation and stability checks."""

from .config import (TABLE1, ConfigError, ControllerConfig, build_controller, dump_config,
                     load_config, plant)
from .crone import CroneConfig, ZeroPoleGain, crone_place, normalize_dc, realize_crone
from .elements import (CgLpController, ResetSystem, base_linear, make_fore, make_fosre,
                       make_fosre_lead, make_sore, make_sosre, make_sosre_lead)
from .hosidf import (HOSIDFTable, describing_function, hosidf_sweep, omega_lb_ideal,
                     omega_lb_realized, open_loop_hosidf, psi, theta_d)
from .lti import (RationalFilter, StateSpaceSystem, eigenvalues, freq_response, is_hurwitz,
                  matrix_exponential, series)
from .simulate import (SimConfig, SimulationTrace, Sinusoid, Step, TrackingMetrics, Zero,
                       control_peak, harmonic_extract, simulate_closed_loop, simulate_reset,
                       steady_state_metrics, step_metrics)
from .stability import (ClosedLoopResetSystem, HbetaCertificate, build_closed_loop,
                        lemma1_check, search_hbeta, verify_hbeta)
from .tuning import (TuneSpec, crossover_df, flatten_alpha, phase_margin_df, pick_gamma,
                     pick_kp, tune_fosre)

__version__ = "0.1.0"

"""Marcus-Lushnikov coalescence with cutoff kernels and gelation references."""
from .errors import ConfigError, SolverError
from .kernel import Cutoff, Family, KernelSpec, evaluate, evaluate_cutoff, limit_l, majorant
from .reference import (T1, flory_c, flory_mass, gel_time_upper_bound, band_bound_constant,
                        ode_solve, series_mass, smoluchowski_c, t_star)
from .simulate import (CutoffMode, EnsembleResult, SimConfig, Trajectory, band_integral,
                       run, run_ensemble, sample_pair, step, total_rate_naive,
                       total_rate_product_closed_form)
from .system import ObservableSpec, ParticleSystem, SumTree

__version__ = "0.1.0"

"""Numerical laboratory for recovering the zeroth-order coefficient of a
divergence-form elliptic operator from the internal energy density q u^2."""

__version__ = "0.1.0"

from .grid import (Grid, RegionMask, ScalarField, TensorField, dist_to_zero_set,
                   dump_field, gradient, h1_norm, l2_norm, linf_norm, load_field,
                   make_grid, zero_points)
from .rng import SplitMix64
from .sparse import (SolveReport, SparseMatrix, bicgstab_solve, cg_solve,
                     smallest_singular_estimate, spmv)
from .forward import (Admissibility, Problem, apply_lq, assemble,
                      estimate_admissibility, make_problem, residual_field,
                      solve_forward)
from .data import InternalData, add_noise, data_diff_h1, load_data, save_data, synthesize
from .recon import ReconOptions, ReconResult, reconstruct_w, recover_q, roundtrip
from .stability import (PhiFit, StabilityRecord, interp_check, phi_eval, phi_fit,
                        stability_sweep, weighted_sides, write_stability_csv)

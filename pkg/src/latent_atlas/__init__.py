"""Linear relocation between the latent spaces of small generative models.

The package trains desk-scale autoencoders and adversarial generators on a
deterministic image manifold of Gaussian blobs, ranks latent variables by
reconstruction gain, builds sector-based support sets, and fits and scores
linear maps between latent spaces.
"""

from . import errors, importance, inversion, manifold, mapping, models, numerics, storage, support
from .importance import GainReport, rank_variables, reconstruction_gain, select_top
from .inversion import InversionResult, invert_gradient, invert_recoder, range_probe
from .manifold import Dataset, make_dataset, mean_pairwise_mse, out_of_range_probe_set
from .mapping import EvalReport, LinearMap, evaluate_mapping, fit_linear_map, run_type_matrix
from .support import SupportSet, build_support_set, sector_census, sector_ids

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvalReport",
    "GainReport",
    "InversionResult",
    "LinearMap",
    "SupportSet",
    "build_support_set",
    "errors",
    "evaluate_mapping",
    "fit_linear_map",
    "importance",
    "inversion",
    "invert_gradient",
    "invert_recoder",
    "make_dataset",
    "manifold",
    "mapping",
    "mean_pairwise_mse",
    "models",
    "numerics",
    "out_of_range_probe_set",
    "range_probe",
    "rank_variables",
    "reconstruction_gain",
    "run_type_matrix",
    "sector_census",
    "sector_ids",
    "select_top",
    "storage",
    "support",
]

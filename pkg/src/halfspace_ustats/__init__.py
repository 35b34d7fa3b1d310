"""Local U-statistics of Poisson processes on diverging outer support
halfspaces of convex bodies: samplers, limit constants, and Monte Carlo
verification studies."""

from .densities import (DensityModel, HeavyGenerator, LightGenerator,
                        expectation_normalizer, normalizer, potter_check,
                        tail_params)
from .geometry import (AffineFrame, Egg2D, Halfspace, LpEllipsoid, RotundBody,
                       TabulatedBody2D, UnitBall, check_initial_position,
                       gauge_derivatives, initial_transformation, make_body,
                       outer_halfspace)
from .sampling import (PointCloud, replicate_rng, restrict, sample_conditional,
                       sample_poisson, sample_tail)
from .ustats import (CechSimplexKernel, EdgeKernel, Kernel,
                     LinearCombinationKernel, StatisticValue, SubgraphKernel,
                     VRSimplexKernel, compute_S, compute_S_bruteforce,
                     default_backend, kernel_eval, kernel_from_config,
                     weighted_combination)

__version__ = "0.1.0"

__all__ = [
    "AffineFrame", "CechSimplexKernel", "DensityModel", "Egg2D", "EdgeKernel",
    "Halfspace", "HeavyGenerator", "Kernel", "LightGenerator",
    "LinearCombinationKernel", "LpEllipsoid", "PointCloud", "RotundBody",
    "StatisticValue", "SubgraphKernel", "TabulatedBody2D", "UnitBall",
    "VRSimplexKernel", "check_initial_position", "compute_S",
    "compute_S_bruteforce", "default_backend", "expectation_normalizer",
    "gauge_derivatives",
    "initial_transformation", "kernel_eval", "kernel_from_config", "make_body",
    "normalizer", "outer_halfspace", "potter_check", "replicate_rng",
    "restrict", "sample_conditional", "sample_poisson", "sample_tail",
    "tail_params", "weighted_combination",
]

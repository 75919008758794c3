"""Sticky-particle dynamics in quantile coordinates."""

__version__ = "0.1.0"

from .stepfn import Partition, PwLinearFn, StepFn, legendre, lower_convex_envelope, lp_distance, primitive, refine_common  # noqa: E402
from .cone import PlateauSet, in_polar_cone, in_subdifferential, omega, proj_h, proj_k  # noqa: E402
from .measures import (DiscreteMeasure, MassVelocityState, d_dist, discretize, measure_of,  # noqa: E402
                       quantile, transport_cost, u_dist, wasserstein)
from .particles import CollisionEvent, ParticleSystem  # noqa: E402
from .semigroup import LagrangianState, TransportMap, step, step_from, transport_map  # noqa: E402
from .hopf import CdfSolution, FluxFunction, flux_of, godunov_oracle, hopf_solution  # noqa: E402
from .gradflow import evi_residual, gradient_flow_run, gradient_flow_step, limit_construction, phi  # noqa: E402

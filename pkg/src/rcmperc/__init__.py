"""Marked random connection models on Poisson point processes: sampling,
crossings, resistor networks, exploration and conductivity estimates."""

from .crossings import CrossingQuery, CrossingResult, brute_force_crossings, max_disjoint_crossings
from .errors import (ConvergenceFailure, InsufficientData, InvalidArgument, ProtocolViolation,
                     UnsupportedOperation, ValidationError)
from .exploration import GridDomain, boundary_order, crossings_from_exploration, explore, menger_oracle
from .graph import GeomGraph, build_graph, components
from .models import BooleanModel, KernelModel, MottModel, model_from_spec
from .pointprocess import (DiscreteTable, Dirac, MarkedConfig, MarkedPoint, Mixture, Region,
                           UniformInterval, palm_insert, sample_ppp, thin)
from .resistor import build_rn, solve_potential

__version__ = "0.1.0"

"""Field concentration between two nearly touching conductors with imperfect
interfaces: P1 solver, radial reduction and experiment harness."""
from .fem import (FieldSolution, RobinSystem, assemble, boundary_flux, energy,
                  inclusion_potentials, max_gradient, solve)
from .geometry import (Geometry, MeshParams, NeckWindow, OutOfChartError, gap_width,
                       graph_functions, neck_membership, sizing_field)
from .mesh import Marker, Mesh, generate_mesh, mesh_quality
from .reduced import (ModeParams, RadialProfile, apply_L, blowup_exponent, h_lower_bound_check,
                      mode_exponent, solve_h, subsolution_constant)

__version__ = "0.1.0"

from .benchmarks import (build_cfd300, build_pressure_impulse_channel, inflow_velocity,
                         inlet_pressure, ramp)
from .mesh import TriangularMesh, build_channel_mesh, build_rectangle_mesh, build_step_mesh
from .navier_stokes import NavierStokesProblem
from .space import TaylorHoodSpace

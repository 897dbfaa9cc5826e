"""Backward-facing step flow and a pressure-driven channel transient."""

from __future__ import annotations

import numpy as np

from .mesh import INLET, OUTLET, WALL, build_channel_mesh, build_step_mesh
from .navier_stokes import NavierStokesProblem

CFD300_NU = 0.05
CHANNEL_NU = 0.035


def ramp(t):
    """``(1 - cos(pi t)) / 2`` up to t = 1, then 1. C^1 with a jump in the second derivative at 1."""
    t = np.asarray(t, dtype=float)
    return np.where(t <= 1.0, 0.5 * (1.0 - np.cos(np.pi * t)), 1.0)


def inflow_velocity(t, y):
    """Parabolic inlet profile on y in [2, 5] with peak 5 cm/s once fully ramped."""
    y = np.asarray(y, dtype=float)
    ux = ramp(t) * (20.0 / 9.0) * (y - 2.0) * (5.0 - y)
    return ux, np.zeros_like(ux)


def inlet_pressure(t):
    """``5 (1 - cos(pi t / 0.2))`` up to t = 0.1, then 5."""
    t = np.asarray(t, dtype=float)
    return np.where(t <= 0.1, 5.0 * (1.0 - np.cos(np.pi * t / 0.2)), 5.0)


def _zero(x, y, t):
    return np.zeros_like(x), np.zeros_like(x)


def build_cfd300(refine: int = 0, nu: float = CFD300_NU) -> NavierStokesProblem:
    """Backward-facing step: parabolic inflow, no-slip walls, free outflow."""
    mesh = build_step_mesh(refine)
    return NavierStokesProblem(
        mesh, nu,
        dirichlet={INLET: lambda x, y, t: inflow_velocity(t, y), WALL: _zero},
        name="cfd300",
    )


def build_pressure_impulse_channel(refine: int = 0, nu: float = CHANNEL_NU) -> NavierStokesProblem:
    """Rigid 10 x 2.5 cm channel driven by an inlet traction ``(p_in(t), 0)``.

    The traction equals ``-p_in n`` with the outward normal ``n = (-1, 0)``.
    Walls are no-slip, the outlet is traction free.
    """
    mesh = build_channel_mesh(refine)

    def traction(x, y, t):
        return np.full_like(x, float(inlet_pressure(t))), np.zeros_like(x)

    return NavierStokesProblem(mesh, nu, dirichlet={WALL: _zero}, traction={INLET: traction},
                               name="pressure_impulse")


__all__ = ["ramp", "inflow_velocity", "inlet_pressure", "build_cfd300",
           "build_pressure_impulse_channel", "INLET", "OUTLET", "WALL"]

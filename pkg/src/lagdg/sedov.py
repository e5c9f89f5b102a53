"""Energy constant of the self-similar point-blast solution.

For a blast of energy ``E`` in gas of density ``rho0`` the shock radius is
``r = (E t^2 / (alpha rho0))^(1 / (j + 2))`` with ``j = 1, 2, 3`` for
planar, cylindrical and spherical symmetry.  ``alpha`` is obtained by
integrating the similarity ODEs from the shock inwards.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

_SURFACE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


@lru_cache(maxsize=None)
def blast_energy_constant(gamma: float, j: int, s_min: float = -3.0) -> float:
    """``alpha`` such that the full-space blast energy is ``alpha rho0 r^(j+2) / t^2``.

    The ODEs are written for the scaled velocity ``V``, density ``G`` and
    pressure ``P`` in ``s = ln(xi)``.  Below ``xi = exp(s_min)`` the pressure
    is nearly uniform and the remaining energy is added in closed form.
    """
    if j not in _SURFACE:
        raise ValueError("j must be 1, 2 or 3")
    d = 2.0 / (j + 2)

    def rhs(s, y):
        V, G, lnP, _ = y
        P = np.exp(lnP)
        xi = np.exp(s)
        A = np.array(
            [
                [G, V - 1.0, 0.0],
                [V - 1.0, 0.0, 1.0 / G],
                [0.0, -d * (V - 1.0) * gamma / G, d * (V - 1.0) / P],
            ]
        )
        r = np.array([-j * V * G, -(V * V - V / d + 2.0 * P / G), 2.0 - 2.0 * d * V])
        dV, dG, dP = np.linalg.solve(A, r)
        return [dV, dG, dP / P, -(xi ** (j + 2)) * (0.5 * G * V * V + P / (gamma - 1.0))]

    y0 = [2.0 / (gamma + 1.0), (gamma + 1.0) / (gamma - 1.0), np.log(2.0 / (gamma + 1.0)), 0.0]
    sol = solve_ivp(rhs, [0.0, s_min], y0, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(sol.message)
    integral = sol.y[3, -1]
    xi_min = np.exp(s_min)
    K = xi_min**2 * np.exp(sol.y[2, -1])
    integral += K / (gamma - 1.0) * xi_min**j / j
    return float(d * d * _SURFACE[j] * integral)


def blast_energy(gamma: float, j: int, radius: float, time: float, rho0: float = 1.0, fraction: float = 1.0) -> float:
    """Energy placing the shock at ``radius`` at ``time``; ``fraction`` of full space."""
    return fraction * blast_energy_constant(gamma, j) * rho0 * radius ** (j + 2) / time**2

"""Independent reference computations shared by the test modules."""
import numpy as np
from scipy.integrate import solve_ivp


def ode_amplitudes(coupling, t_eval):
    """Integrate dC1/dt = i(W/2)C2, dC2/dt = i(W/2)C1 - gamma C2 directly."""
    w, g = coupling.rabi, coupling.gamma

    def rhs(_, y):
        c1 = y[0] + 1j * y[1]
        c2 = y[2] + 1j * y[3]
        d1 = 0.5j * w * c2
        d2 = 0.5j * w * c1 - g * c2
        return [d1.real, d1.imag, d2.real, d2.imag]

    sol = solve_ivp(rhs, (0, t_eval[-1]), [1, 0, 0, 0], t_eval=t_eval, method="DOP853", rtol=1e-13, atol=1e-16)
    return sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]

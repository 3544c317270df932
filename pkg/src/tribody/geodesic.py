"""Deterministic integration of the reduced geodesic system.

State is (x, xi) with xi_i = dx_i/ds.  The momentum equations are the
quadratic (Riccati-type) system

    dxi_1/ds = a1*(xi1^2 - xi2^2 - xi3^2 - Lambda^2) + 2*xi1*(a2*xi2 + a3*xi3)

and cyclic permutations, with a_i the logarithmic metric gradient and
Lambda^2 = (J/g)^2.  The three external (Euler-angle) rates decouple
exactly, dx_mu/ds = J_(mu-3)/g, and are recovered by quadrature.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, ForbiddenRegionError
from .metric import EnergySurface, lambda_sq, log_gradient, reduced_hamiltonian

__all__ = [
    "GeodesicState",
    "TrajectoryRecord",
    "momentum_rhs",
    "geodesic_rhs",
    "external_rates",
    "integrate",
    "conservation_report",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

TRAJECTORY_COLUMNS = ["s", "x1", "x2", "x3", "xi1", "xi2", "xi3", "g", "H"]


@dataclass(frozen=True)
class GeodesicState:
    """Internal coordinates, their s-derivatives, and the motion parameter."""

    x: np.ndarray
    xi: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(3))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float).reshape(3))


@dataclass
class TrajectoryRecord:
    """Dense samples of one geodesic plus the exact angular integrals."""

    s: np.ndarray
    x: np.ndarray          # (N, 3)
    xi: np.ndarray         # (N, 3)
    g: np.ndarray          # (N,)
    a: np.ndarray          # (N, 3)
    lam_sq: np.ndarray     # (N,)
    J: tuple[float, float, float]
    termination: str = "s_end"
    mu0: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def J_total(self) -> float:
        return float(np.sqrt(sum(j * j for j in self.J)))


def momentum_rhs(xi, a, lam2):
    """Right-hand side of the quadratic momentum system.

    Broadcasts over leading axes: xi and a may be (..., 3), lam2 (...,).
    Shared with the stochastic drift, which uses the same formulas with
    scheduled coefficients.
    """
    xi = np.asarray(xi, dtype=float)
    a = np.asarray(a, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    q = np.sum(xi * xi, axis=-1)  # xi1^2 + xi2^2 + xi3^2
    # a_i*(2*xi_i^2 - q - lam2) + 2*xi_i*(sum_j a_j xi_j - a_i xi_i)
    s = np.sum(a * xi, axis=-1)
    return a * (2.0 * xi**2 - q[..., None] - lam2[..., None]) + 2.0 * xi * (
        s[..., None] - a * xi
    )


def geodesic_rhs(state: GeodesicState, surf: EnergySurface, J: float):
    """(dx/ds, dxi/ds) at a state; raises in the forbidden region."""
    a = log_gradient(state.x, surf)
    g = (surf.E - surf.potential.evaluate(state.x)) / surf.U0
    lam2 = lambda_sq(g, J)
    return state.xi.copy(), momentum_rhs(state.xi, a, lam2)


def external_rates(g, J1, J2, J3):
    """Exact Euler-angle rates dx_mu/ds = J_(mu-3)/g, mu = 4..6."""
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0.0):
        raise DomainError("g must be positive")
    return np.stack(np.broadcast_arrays(J1 / g, J2 / g, J3 / g), axis=-1)


def integrate(
    state0: GeodesicState,
    surf: EnergySurface,
    J: tuple[float, float, float] = (0.0, 0.0, 0.0),
    s_end: float = 10.0,
    tol: float = 1e-9,
    n_samples: int = 512,
    mu0: float = 1.0,
    max_steps: int = 1_000_000,
) -> TrajectoryRecord:
    """Integrate the reduced system with an adaptive RK 5(4) pair.

    Dense output is sampled at n_samples points; integration stops at
    s_end, on contact with the g <= g_min boundary (recorded, not raised),
    or when the step count budget runs out.
    """
    if not (tol > 0.0):
        raise DomainError(f"tol must be positive, got {tol}")
    if s_end <= state0.s:
        raise DomainError("s_end must exceed the initial s")

    J1, J2, J3 = J
    J_tot = float(np.sqrt(J1 * J1 + J2 * J2 + J3 * J3))

    def rhs(s, y):
        # no floor check here: trial steps may probe past the boundary,
        # the terminal event below owns the stop
        x, xi = y[:3], y[3:]
        e_minus_u = surf.E - surf.potential.evaluate(x)
        if e_minus_u == 0.0:
            e_minus_u = np.finfo(float).tiny
        a = 0.5 * surf.potential.gradient(x) / e_minus_u
        g = e_minus_u / surf.U0
        lam2 = (J_tot / g) ** 2 if g != 0.0 else np.inf
        return np.concatenate([xi, momentum_rhs(xi, a, lam2)])

    nfev = [0]

    def boundary(s, y):
        # doubles as the step budget guard: force a terminal crossing once
        # the RHS evaluation budget (~7 per step) is exhausted
        nfev[0] += 1
        if nfev[0] > 7 * max_steps:
            return -1.0
        return (surf.E - surf.potential.evaluate(y[:3])) / surf.U0 - surf.g_min

    boundary.terminal = True
    boundary.direction = -1

    y0 = np.concatenate([state0.x, state0.xi])
    s_eval = np.linspace(state0.s, s_end, n_samples)
    g0 = (surf.E - surf.potential.evaluate(state0.x)) / surf.U0
    if g0 <= surf.g_min:
        raise ForbiddenRegionError(f"initial state has g = {g0} <= g_min = {surf.g_min}")

    sol = solve_ivp(
        rhs,
        (state0.s, s_end),
        y0,
        method="RK45",
        rtol=tol,
        atol=tol * 1e-3,
        t_eval=s_eval,
        events=boundary,
        dense_output=False,
    )

    if sol.status == 1:
        termination = "max_steps" if nfev[0] > 7 * max_steps else "boundary"
    elif sol.status == 0:
        termination = "s_end"
    else:
        # step-size underflow near the boundary is recorded, not raised
        termination = f"solver_stop: {sol.message}"

    s_arr = sol.t
    x_arr = sol.y[:3].T.copy()
    xi_arr = sol.y[3:].T.copy()
    n = len(s_arr)
    g_arr = np.empty(n)
    a_arr = np.empty((n, 3))
    lam_arr = np.empty(n)
    for i in range(n):
        u = surf.potential.evaluate(x_arr[i])
        g_arr[i] = (surf.E - u) / surf.U0
        a_arr[i] = 0.5 * surf.potential.gradient(x_arr[i]) / (surf.E - u)
        lam_arr[i] = lambda_sq(g_arr[i], J_tot) if g_arr[i] > 0 else np.nan

    return TrajectoryRecord(
        s=s_arr, x=x_arr, xi=xi_arr, g=g_arr, a=a_arr, lam_sq=lam_arr,
        J=(J1, J2, J3), termination=termination, mu0=mu0,
        meta={"tol": tol, "nfev": sol.nfev},
    )


def external_coordinates(traj: TrajectoryRecord, x0_ext=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Euler angles x4..x6 by trapezoidal quadrature of the exact rates."""
    rates = external_rates(traj.g, *traj.J)  # (N, 3)
    ds = np.diff(traj.s)
    out = np.empty_like(rates)
    out[0] = np.asarray(x0_ext, dtype=float)
    increments = 0.5 * (rates[1:] + rates[:-1]) * ds[:, None]
    out[1:] = out[0] + np.cumsum(increments, axis=0)
    return out


def conservation_report(traj: TrajectoryRecord, surf: EnergySurface, mu0: float) -> dict:
    """Max relative drift of H and of the conformal speed along a trajectory."""
    if len(traj.s) == 0:
        raise DomainError("empty trajectory")
    J = traj.J_total
    H = np.array([
        reduced_hamiltonian(traj.x[i], traj.xi[i], J, surf, mu0) for i in range(len(traj.s))
    ])
    speed = traj.g * (np.sum(traj.xi**2, axis=1) + traj.lam_sq)
    def drift(v):
        ref = max(abs(v[0]), 1e-300)
        return float(np.max(np.abs(v - v[0])) / ref)
    return {
        "H0": float(H[0]),
        "H_drift": drift(H) if len(H) > 1 else 0.0,
        "speed_drift": drift(speed) if len(speed) > 1 else 0.0,
        "termination": traj.termination,
    }


def write_trajectory_csv(traj: TrajectoryRecord, surf: EnergySurface, mu0: float, path):
    """Export s, x, xi, g, H with a header row, one sample per line."""
    J = traj.J_total
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(traj.s)):
            H = 0.5 * mu0 * traj.g[i] * (float(np.dot(traj.xi[i], traj.xi[i])) + (J / traj.g[i]) ** 2)
            writer.writerow(
                [repr(float(v)) for v in (
                    traj.s[i], *traj.x[i], *traj.xi[i], traj.g[i], H,
                )]
            )


def read_trajectory_csv(path) -> dict:
    """Load a trajectory CSV back into arrays keyed by column name."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}

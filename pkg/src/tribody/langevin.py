"""Stochastic momentum dynamics under white-noise forcing.

Two noise routes are supported:

* multiplicative -- d(xi_i) = A_i ds + sum_j B_ij(xi) dW_j, stepped with a
  Stratonovich Heun predictor-corrector (the density equation pairs with
  the Stratonovich reading of the state-dependent noise);
* additive -- d(xi_i) = A_i ds + dW_i, Euler-Maruyama (interpretation
  independent).

The drift A and the noise coupling B reuse the deterministic momentum
formulas with coefficients (a_i, Lambda^2) scheduled along a stored
classical trajectory.  Increments are Gaussian with covariance
2*eps*ds, matching the correlator <eta_i(s) eta_j(s')> = 2 eps_ij delta(s-s').
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigError, DomainError
from .geodesic import TrajectoryRecord, momentum_rhs

__all__ = [
    "NoiseModel",
    "CoefficientSchedule",
    "SdeState",
    "EnsembleResult",
    "white_noise_increments",
    "drift",
    "diffusion",
    "sde_step",
    "run_ensemble",
]


@dataclass(frozen=True)
class NoiseModel:
    """Noise power matrix eps_ij (PSD) and the master seed."""

    epsilon: np.ndarray
    seed: int = 0

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float)
        if eps.ndim == 0:
            eps = float(eps) * np.eye(3)
        eps = eps.reshape(3, 3)
        if np.max(np.abs(eps - eps.T)) > 0.0:
            raise ConfigError("epsilon must be symmetric")
        w = np.linalg.eigvalsh(eps)
        if w.min() < -1e-13 * max(1.0, abs(w.max())):
            raise ConfigError(f"epsilon must be positive semidefinite, eigenvalues {w}")
        object.__setattr__(self, "epsilon", eps)

    def scale_matrix(self) -> np.ndarray:
        """S with S S^T = 2*eps; increments are S @ N(0, ds*I)."""
        eps = self.epsilon
        if np.count_nonzero(eps - np.diag(np.diagonal(eps))) == 0:
            return np.diag(np.sqrt(2.0 * np.maximum(np.diagonal(eps), 0.0)))
        w, Q = np.linalg.eigh(2.0 * eps)
        return Q @ np.diag(np.sqrt(np.maximum(w, 0.0)))


@dataclass(frozen=True)
class CoefficientSchedule:
    """Scheduled coefficients (a_bar(s), Lambda_bar^2(s)), linearly interpolated."""

    s: np.ndarray
    a: np.ndarray        # (N, 3)
    lam_sq: np.ndarray   # (N,)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(-1)
        a = np.asarray(self.a, dtype=float).reshape(len(s), 3)
        lam = np.asarray(self.lam_sq, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(lam)):
            raise DomainError("schedule coefficients must be finite")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "lam_sq", lam)

    @classmethod
    def from_trajectory(cls, traj: TrajectoryRecord) -> "CoefficientSchedule":
        return cls(s=traj.s, a=traj.a, lam_sq=traj.lam_sq)

    @classmethod
    def constant(cls, a, lam_sq: float, s_span=(0.0, 1.0)) -> "CoefficientSchedule":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(s=np.array(s_span, dtype=float), a=np.vstack([a, a]),
                   lam_sq=np.array([lam_sq, lam_sq]))

    def at(self, s: float):
        if not (self.s[0] - 1e-12 <= s <= self.s[-1] + 1e-12):
            raise DomainError(f"s = {s} outside schedule span [{self.s[0]}, {self.s[-1]}]")
        a = np.array([np.interp(s, self.s, self.a[:, i]) for i in range(3)])
        return a, float(np.interp(s, self.s, self.lam_sq))


@dataclass(frozen=True)
class SdeState:
    xi: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).reshape(3)
        if not np.all(np.isfinite(xi)):
            raise DomainError("SDE state must be finite")
        object.__setattr__(self, "xi", xi)


def white_noise_increments(ds: float, noise: NoiseModel, rng: np.random.Generator,
                           n: int | None = None) -> np.ndarray:
    """Gaussian increments with covariance 2*eps*ds; one 3-vector, or a
    batch of shape (n, 3) when n is given."""
    if not ds > 0.0:
        raise DomainError(f"ds must be positive, got {ds}")
    shape = (3,) if n is None else (int(n), 3)
    if not np.any(noise.epsilon):
        return np.zeros(shape)
    return rng.standard_normal(shape) @ noise.scale_matrix().T * np.sqrt(ds)


def drift(xi, coeffs) -> np.ndarray:
    """Drift A_i(xi): the deterministic momentum right-hand side with the
    scheduled coefficients (a_bar, Lambda_bar^2).  Broadcasts over (..., 3)."""
    a_bar, lam_sq_bar = coeffs
    return momentum_rhs(xi, a_bar, lam_sq_bar)


def diffusion(xi, lam_sq_bar) -> np.ndarray:
    """Noise coupling B_ij(xi): diagonal 2*xi_i^2 - q - Lambda_bar^2 with
    q = sum xi^2, off-diagonal 2*xi_i*xi_j.  Returns (..., 3, 3)."""
    xi = np.asarray(xi, dtype=float)
    q = np.sum(xi * xi, axis=-1)
    B = 2.0 * xi[..., :, None] * xi[..., None, :]
    idx = np.arange(3)
    B[..., idx, idx] = 2.0 * xi**2 - q[..., None] - lam_sq_bar
    return B


def sde_step(state: SdeState, ds: float, mode: str, coeffs, noise: NoiseModel,
             rng: np.random.Generator) -> SdeState:
    """Advance one step: Euler-Maruyama (additive) or Stratonovich Heun
    (multiplicative, dW entering through B(xi))."""
    if not ds > 0.0:
        raise DomainError(f"ds must be positive, got {ds}")
    dW = white_noise_increments(ds, noise, rng)
    xi = state.xi
    if mode == "additive":
        xi_new = xi + drift(xi, coeffs) * ds + dW
    elif mode == "multiplicative":
        a_pred = drift(xi, coeffs)
        b_pred = diffusion(xi, coeffs[1])
        xi_star = xi + a_pred * ds + b_pred @ dW
        xi_new = xi + 0.5 * (a_pred + drift(xi_star, coeffs)) * ds \
            + 0.5 * (b_pred + diffusion(xi_star, coeffs[1])) @ dW
    else:
        raise ConfigError(f"unknown SDE mode {mode!r}")
    if not np.all(np.isfinite(xi_new)):
        raise BlowUpError(state.s + ds)
    return SdeState(xi=xi_new, s=state.s + ds)


@dataclass
class EnsembleResult:
    """Final states and requested snapshots of an SDE ensemble."""

    s_final: float
    xi_final: np.ndarray                 # (n_traj, 3); NaN rows for blown-up paths
    snapshots: list                      # [(s, (n_traj, 3) array), ...]
    blowups: dict = field(default_factory=dict)   # path index -> s of failure
    meta: dict = field(default_factory=dict)


def run_ensemble(
    n_traj: int,
    schedule: CoefficientSchedule,
    xi0,
    ds: float,
    mode: str,
    noise: NoiseModel,
    s_span=None,
    snapshot_s=(),
) -> EnsembleResult:
    """Propagate n_traj independent paths over the schedule span.

    Noise comes from one counter-based Philox stream keyed by the seed;
    the increment of (path p, step k) sits at a fixed counter offset, so
    ensembles are bit-reproducible for a given (seed, n_traj, ds).  xi0
    may be a single 3-vector (all paths start together) or (n_traj, 3).
    Blown-up paths are frozen as NaN and recorded, not fatal.
    """
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    if not ds > 0.0:
        raise DomainError(f"ds must be positive, got {ds}")
    if s_span is None:
        s_span = (float(schedule.s[0]), float(schedule.s[-1]))
    s0, s1 = s_span
    n_steps = int(round((s1 - s0) / ds))
    if n_steps < 1:
        raise DomainError("span shorter than one step")

    xi = np.broadcast_to(np.asarray(xi0, dtype=float), (n_traj, 3)).copy()
    rng = np.random.Generator(np.random.Philox(key=noise.seed))
    scale = noise.scale_matrix()
    has_noise = bool(np.any(noise.epsilon))

    snapshot_s = sorted(snapshot_s)
    snap_iter = iter(snapshot_s + [np.inf])
    next_snap = next(snap_iter)
    snapshots = []
    blowups: dict[int, float] = {}
    alive = np.ones(n_traj, dtype=bool)

    s = s0
    for k in range(n_steps):
        if has_noise:
            dW = rng.standard_normal((n_traj, 3)) @ scale.T * np.sqrt(ds)
        else:
            dW = 0.0
        coeffs = schedule.at(min(s, schedule.s[-1]))
        # runaway paths overflow before they are frozen; the non-finite
        # check below is the intended detector, so silence the transient
        with np.errstate(over="ignore", invalid="ignore"):
            if mode == "additive":
                xi_new = xi + drift(xi, coeffs) * ds + dW
            elif mode == "multiplicative":
                a_pred = drift(xi, coeffs)
                b_pred = diffusion(xi, coeffs[1])
                bdw = np.einsum("nij,nj->ni", b_pred, dW) if has_noise else 0.0
                xi_star = xi + a_pred * ds + bdw
                coeffs_next = schedule.at(min(s + ds, schedule.s[-1]))
                b_star = diffusion(xi_star, coeffs_next[1])
                bdw2 = 0.5 * np.einsum("nij,nj->ni", b_pred + b_star, dW) if has_noise else 0.0
                xi_new = xi + 0.5 * (a_pred + drift(xi_star, coeffs_next)) * ds + bdw2
            else:
                raise ConfigError(f"unknown SDE mode {mode!r}")

        bad = alive & ~np.all(np.isfinite(xi_new), axis=1)
        for p in np.nonzero(bad)[0]:
            blowups[int(p)] = s + ds
        alive &= ~bad
        xi = np.where(alive[:, None], xi_new, np.nan)
        s = s0 + (k + 1) * ds

        while s >= next_snap - 0.5 * ds:
            snapshots.append((float(next_snap), xi.copy()))
            next_snap = next(snap_iter)

    return EnsembleResult(
        s_final=s,
        xi_final=xi,
        snapshots=snapshots,
        blowups=blowups,
        meta={"seed": noise.seed, "mode": mode, "ds": ds, "n_steps": n_steps},
    )

"""Chaos quantification and asymptotic-channel labels.

The chaos indicator is the Kullback-Leibler distance between two
momentum-density tubes attached to neighboring classical trajectories;
sustained exponential growth D_ab(s) ~ exp(k*s) with k > 0 marks the
motion as quantum-chaotic.  Scattering outcomes are labeled by which
pair, if any, stays bound while the third body escapes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, FitError
from .kinematics import Masses, pair_distances
from .fokker_planck import MomentumGrid

__all__ = [
    "ChannelLabel",
    "ChaosReport",
    "kl_divergence",
    "growth_rate",
    "chaos_report",
    "classify_channel",
]

DEFAULT_KL_FLOOR = 1e-300


class ChannelLabel(Enum):
    BOUND_23_FREE_1 = "bound_23_free_1"
    BOUND_12_FREE_3 = "bound_12_free_3"
    BOUND_13_FREE_2 = "bound_13_free_2"
    FULL_BREAKUP = "full_breakup"
    TRANSIENT = "transient"


def kl_divergence(
    Pa: MomentumGrid,
    Pb: MomentumGrid,
    floor: float = DEFAULT_KL_FLOOR,
    return_diagnostics: bool = False,
):
    """Sum of Pa*ln(Pa/Pb)*cellvol over cells with Pa > 0.

    Cells where Pa > 0 but Pb is at or below the floor use Pb = floor and
    are counted in the support-mismatch diagnostic.  Asymmetric by design:
    the direction is (a || b).
    """
    if not Pa.same_spec(Pb):
        raise DomainError("grids must share an identical spec")
    pa = Pa.P
    pb = Pb.P
    mask = pa > 0.0
    mismatch = int(np.count_nonzero(mask & (pb <= floor)))
    pb_safe = np.maximum(pb, floor)
    val = float(np.sum(pa[mask] * np.log(pa[mask] / pb_safe[mask])) * Pa.cell_volume)
    if return_diagnostics:
        return val, {"support_mismatch_cells": mismatch}
    return val


def growth_rate(s, D, window=None):
    """Least-squares slope k of ln D versus s, plus the RMS log-residual.

    window = (s_lo, s_hi) restricts the fit; samples with D <= 0 are
    excluded; at least 3 usable samples are required.
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    D = np.asarray(D, dtype=float).reshape(-1)
    mask = D > 0.0
    if window is not None:
        mask &= (s >= window[0]) & (s <= window[1])
    if np.count_nonzero(mask) < 3:
        raise FitError("need >= 3 samples with D > 0 in the fit window")
    sf, lf = s[mask], np.log(D[mask])
    k, b = np.polyfit(sf, lf, 1)
    resid = float(np.sqrt(np.mean((lf - (k * sf + b)) ** 2)))
    return float(k), resid


@dataclass
class ChaosReport:
    """KL series, fitted growth rate, and the chaos verdict."""

    s: np.ndarray
    D: np.ndarray
    k: float
    residual: float
    verdict: str
    fit_window: tuple
    direction: str = "a||b"
    thresholds: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "series": [[float(a), float(b)] for a, b in zip(self.s, self.D)],
                "k": self.k,
                "residual": self.residual,
                "verdict": self.verdict,
                "fit_window": list(self.fit_window),
                "direction": self.direction,
                "thresholds": self.thresholds,
            },
            indent=2,
            sort_keys=True,
        )


def chaos_report(
    s,
    D,
    window=None,
    residual_max: float = 0.2,
    min_decades: float = 1.0,
) -> ChaosReport:
    """Fit the KL series and apply the verdict gate.

    "chaotic" requires k > 0, RMS log-residual below residual_max, and at
    least min_decades decades of growth over the fit window; decaying or
    flat series with a clean fit are "regular"; anything else (including
    an unusable fit) is "inconclusive".
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    D = np.asarray(D, dtype=float).reshape(-1)
    if np.any(D < 0.0):
        raise DomainError("KL series must be nonnegative")
    if window is None:
        window = (float(s[0]), float(s[-1]))
    thresholds = {"residual_max": residual_max, "min_decades": min_decades}
    if np.all(D == 0.0):
        # identical tubes: zero distance throughout
        return ChaosReport(s=s, D=D, k=0.0, residual=0.0, verdict="regular",
                           fit_window=window, thresholds=thresholds)
    try:
        k, resid = growth_rate(s, D, window)
    except FitError:
        return ChaosReport(s=s, D=D, k=float("nan"), residual=float("nan"),
                           verdict="inconclusive", fit_window=window, thresholds=thresholds)
    mask = (D > 0) & (s >= window[0]) & (s <= window[1])
    decades = float(np.log10(D[mask].max() / D[mask].min())) if np.any(mask) else 0.0
    if k > 0.0 and resid < residual_max and decades >= min_decades:
        verdict = "chaotic"
    elif resid < residual_max and (k <= 0.0 or decades < min_decades):
        verdict = "regular"
    else:
        verdict = "inconclusive"
    return ChaosReport(s=s, D=D, k=k, residual=resid, verdict=verdict,
                       fit_window=window, thresholds=thresholds)


def _monotone_growing(d, tol_frac=1e-9):
    tol = tol_frac * max(abs(d[0]), abs(d[-1]), 1.0)
    return bool(np.all(np.diff(d) >= -tol) and d[-1] > d[0])


def classify_channel(
    s,
    x,
    masses: Masses = None,
    r_bound: float = 3.0,
    r_free: float = 10.0,
    window_frac: float = 0.2,
    min_window_samples: int = 4,
) -> ChannelLabel:
    """Label the asymptotic outcome of a trajectory.

    A pair is bound when its separation stays below r_bound over the final
    reference window while the third body's distance from the pair's
    center of mass grows monotonically past r_free.  All three separations
    growing past r_free means full breakup; anything else is a transient
    complex.  Defaults recommended: r_bound = 3*d0, r_free = 10*d0 of the
    potential length scale.
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(len(s), 3)
    if masses is None:
        masses = Masses(1.0, 1.0, 1.0)
    n_win = max(min_window_samples, int(math.ceil(window_frac * len(s))))
    if len(s) < min_window_samples:
        raise DomainError("trajectory shorter than the minimum reference window")
    w = slice(len(s) - n_win, len(s))

    d = pair_distances(x[w], masses)          # (n_win, 3) -> columns (d23, d13, d12)
    m = {1: masses.m1, 2: masses.m2, 3: masses.m3}

    def cm_distance(free, i, j):
        # |r_free - cm(i,j)|^2 = (mi*d_fi^2 + mj*d_fj^2)/(mi+mj) - mi*mj*d_ij^2/(mi+mj)^2
        cols = {frozenset((2, 3)): 0, frozenset((1, 3)): 1, frozenset((1, 2)): 2}
        d_fi = d[:, cols[frozenset((free, i))]]
        d_fj = d[:, cols[frozenset((free, j))]]
        d_ij = d[:, cols[frozenset((i, j))]]
        mij = m[i] + m[j]
        val = (m[i] * d_fi**2 + m[j] * d_fj**2) / mij - m[i] * m[j] * d_ij**2 / mij**2
        return np.sqrt(np.maximum(val, 0.0))

    candidates = [
        (ChannelLabel.BOUND_23_FREE_1, 0, (1, 2, 3)),
        (ChannelLabel.BOUND_13_FREE_2, 1, (2, 1, 3)),
        (ChannelLabel.BOUND_12_FREE_3, 2, (3, 1, 2)),
    ]
    for label, col, (free, i, j) in candidates:
        pair_sep = d[:, col]
        third = cm_distance(free, i, j)
        if pair_sep.max() < r_bound and _monotone_growing(third) and third[-1] > r_free:
            return label

    if all(_monotone_growing(d[:, c]) and d[-1, c] > r_free for c in range(3)):
        return ChannelLabel.FULL_BREAKUP
    return ChannelLabel.TRANSIENT

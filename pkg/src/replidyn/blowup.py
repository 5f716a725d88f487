"""Blow-up classification: extrapolate the singular time and map the blow-up set.

Near blow-up the excess mass obeys an essentially quadratic growth law, so the
reciprocal 1/(y-1) is asymptotically affine in time; the singular-time
estimate is the root of an affine fit to its tail.  Rows where the capped
nonlocal coefficient is saturated are excluded: past saturation the
regularized dynamics leave the quadratic regime by construction, and the fit
would be contaminated (this is also what makes the estimate insensitive to
where the sup cap is placed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import Trace

__all__ = [
    "BlowupReport",
    "estimate_tmax",
    "blowup_set_estimate",
    "poincare_blowup_bound",
]

DEFAULT_CHECKPOINT_FRACTIONS = (0.5, 0.7, 0.85, 0.95, 1.0)
DEFAULT_GROWTH_THRESHOLD = 10.0


@dataclass
class BlowupReport:
    t_max_estimate: float
    fit_method: str
    fit_residual: float
    blowup_set_fraction: float
    core_min_growth: dict
    checkpoint_times: list
    growth_factors: np.ndarray


def _affine_root(t: np.ndarray, z: np.ndarray):
    slope, intercept = np.polyfit(t, z, 1)
    if slope >= 0.0:
        return None
    fit = slope * t + intercept
    residual = float(np.sqrt(np.mean((z - fit) ** 2)) / np.mean(np.abs(z)))
    return float(-intercept / slope), residual


def estimate_tmax(trace: Trace, min_rows: int = 10):
    """Root of an affine fit to a reciprocal of the excess mass.

    Usable rows have supercritical corrected mass and an unsaturated nonlocal
    coefficient; the fit runs over their last quartile.  Both 1/(y-1) (exact
    for quadratic growth laws y' = c (y-1)^2) and 1/(y-1)^2 (the affine
    observable when the energy grows like y^2, which is what measured runs do
    near blow-up) are fitted, and the model with the smaller normalized RMS
    residual wins.  Returns (t_max estimate, fit residual).
    """
    y = trace.corrected_mass
    usable = (y > 1.0) & ~trace.saturated()
    if int(usable.sum()) < min_rows:
        raise ValueError(
            f"need at least {min_rows} supercritical unsaturated rows, "
            f"got {int(usable.sum())}"
        )
    t = trace.t[usable]
    z = 1.0 / (y[usable] - 1.0)
    k = max(min_rows, len(t) // 4)
    candidates = []
    for model in (z, z * z):
        fit = _affine_root(t[-k:], model[-k:])
        if fit is not None:
            candidates.append(fit)
    if not candidates:
        raise ValueError("no blow-up signature: 1/(y-1) tail is nondecreasing")
    return min(candidates, key=lambda pair: pair[1])


def blowup_set_estimate(snapshots, checkpoints=None,
                        growth_threshold: float = DEFAULT_GROWTH_THRESHOLD,
                        core_margins=(0.25,)) -> BlowupReport:
    """Classify interior nodes by their growth along checkpoint times.

    A node blows up when its value is increasing over the final checkpoints
    and its total growth factor reaches ``growth_threshold``.  Also reports
    the minimum growth factor over concentric core boxes (global blow-up
    means the fraction is ~1 and core growth is large for every margin).
    """
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots to classify blow-up")
    times = np.array([t for t, _ in snapshots])
    t_last = times[-1]
    if checkpoints is None:
        checkpoints = [f * t_last for f in DEFAULT_CHECKPOINT_FRACTIONS]
    if len(checkpoints) < 3:
        raise ValueError("need at least 3 checkpoint times")
    idx = sorted({int(np.argmin(np.abs(times - c))) for c in checkpoints})
    if len(idx) < 3:
        raise ValueError("checkpoints collapse onto fewer than 3 distinct snapshots")

    grid = snapshots[0][1].grid
    interior = grid.interior_mask
    fields = [snapshots[i][1].values for i in idx]
    base = fields[0]
    growth = [f / base for f in fields]
    final_growth = growth[-1]

    tail = growth[-min(3, len(growth) - 1):]
    increasing = np.ones(grid.shape, dtype=bool)
    for a, b in zip(tail, tail[1:]):
        increasing &= b > a
    blowing = increasing & (final_growth >= growth_threshold)
    fraction = float(blowing[interior].sum() / interior.sum())

    from .mesh import distance_to_boundary
    dist = distance_to_boundary(grid)
    core_min = {}
    for margin in core_margins:
        core = dist >= margin - 1e-12
        if core.any():
            core_min[margin] = float(final_growth[core].min())

    return BlowupReport(
        t_max_estimate=math.nan, fit_method="inverse_excess_mass_affine",
        fit_residual=math.nan, blowup_set_fraction=fraction,
        core_min_growth=core_min,
        checkpoint_times=[float(times[i]) for i in idx],
        growth_factors=final_growth,
    )


def poincare_blowup_bound(y0: float, c_p: float, omega_measure: float) -> float:
    """Upper bound for the blow-up time from the quadratic mass growth law.

    The comparison solution z' = ((y0-1)/(C_P |Omega|)) z^2 started from the
    midpoint z0 = (1+y0)/2 blows up at  C_P |Omega| / ((y0-1) z0).
    """
    if y0 <= 1.0:
        raise ValueError(f"corrected initial mass must exceed 1, got {y0}")
    z0 = 0.5 * (1.0 + y0)
    return c_p * omega_measure / ((y0 - 1.0) * z0)

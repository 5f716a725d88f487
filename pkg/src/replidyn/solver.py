"""Adaptive time stepper for the regularized problem

    u_t = u * (Lap u + min(E(u), 1/eps)),   u = eps on the boundary,

where E(u) is the Dirichlet energy of u.  The default scheme freezes the
degenerate coefficient at the current step and treats the diffusion
implicitly,

    (I - dt * diag(u^n) * Lap_h) u^{n+1} = u^n * (1 + dt * rho_eps(E^n)),

with boundary nodes pinned to eps and the result floored at eps; an explicit
forward-Euler mode is kept for cross-validation.  The step size halves when
the sup norm moves by more than 10% per step and grows by 1.2x when it moves
by less than 1%, capped by the reaction scale 0.5 / rho_eps so the nonlocal
term stays resolved near blow-up.

A run ends in one of three outcomes: Decayed (corrected mass fell below a
fraction of its initial value), RanToEnd, or BlowUp (sup norm crossed the cap,
or the controller starved below dt_min while the sup norm was growing).  Note
the regularized dynamics are globally bounded by  eps + max(Phi)/eps  (the
capped nonlocal term admits that stationary supersolution), so the default
sup cap is clamped below this ceiling; otherwise a cap of 1e4 x the initial
sup norm could never trigger at moderate eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .diagnostics import Trace
from .elliptic import TorsionSolution, phi_weighted_sup, solve_torsion
from .mesh import Field, Grid, dirichlet_energy, integrate

__all__ = [
    "SolverParams",
    "SolverState",
    "SimulationResult",
    "rho_eps",
    "step",
    "run",
    "comparison_upper_bound",
]


def rho_eps(z: float, epsilon: float) -> float:
    """Capped nonlocal coefficient min(z, 1/epsilon); 1-Lipschitz, nondecreasing."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if z < 0.0:
        raise ValueError(f"rho_eps expects a nonnegative argument, got {z}")
    return min(z, 1.0 / epsilon)


@dataclass
class SolverParams:
    epsilon: float
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 5e-2
    cfl_c: float = 0.9
    t_end: float = 5.0
    sup_cap: float | None = None  # None: min(1e4 * initial sup, 0.8 * max(Phi)/eps)
    scheme: str = "semi-implicit"
    snapshot_stride: int = 10
    trace_stride: int = 1
    decay_threshold: float = 0.05
    # dt <= reaction_cap_c / max(rho, 1); 0.5 suffices for stability, smaller
    # values resolve the energy growth for tight identity checks near blow-up.
    reaction_cap_c: float = 0.5

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got "
                f"({self.dt_min}, {self.dt_init}, {self.dt_max})"
            )
        if not (0.0 < self.cfl_c <= 1.0):
            raise ValueError(f"cfl_c must lie in (0,1], got {self.cfl_c}")
        if self.scheme not in ("semi-implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.sup_cap is not None and self.sup_cap <= self.epsilon:
            raise ValueError("sup_cap must exceed epsilon")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.snapshot_stride < 1 or self.trace_stride < 1:
            raise ValueError("strides must be positive integers")
        if not (0.0 < self.reaction_cap_c <= 0.5):
            raise ValueError("reaction_cap_c must lie in (0, 0.5]")


@dataclass
class SolverState:
    t: float
    u: Field
    dt: float
    energy: float
    rho_value: float
    floored: int = 0
    starved: bool = False


@dataclass
class SimulationResult:
    outcome: str  # "Decayed" | "RanToEnd" | "BlowUp"
    t_last: float
    t_max_estimate: float
    fit_residual: float
    trace: Trace
    snapshots: list
    params: SolverParams
    sup_cap: float
    final: Field
    max_floored_fraction: float
    floor_flagged: bool


class _Workspace:
    """Per-grid sparse pieces reused across steps."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.interior = grid.interior_mask
        self.n_interior = int(self.interior.sum())
        self.lap, self.bc = self._interior_operator(grid)
        if grid.dimension == 1:
            h2 = grid.h[0] ** 2
            m = self.n_interior
            self.band_upper = np.full(m, 1.0 / h2)
            self.band_lower = np.full(m, 1.0 / h2)
            self.band_upper[0] = 0.0
            self.band_lower[-1] = 0.0

    @staticmethod
    def _interior_operator(grid: Grid):
        """Dirichlet Laplacian on interior nodes plus the boundary-coupling
        vector: Lap_h u |interior = lap @ u_int + boundary_value * bc."""
        blocks = []
        for k, step in zip(grid.shape, grid.h):
            m = k - 2
            main = np.full(m, -2.0 / step**2)
            off = np.full(m - 1, 1.0 / step**2)
            blocks.append(sp.diags([off, main, off], [-1, 0, 1], format="csr"))
        if grid.dimension == 1:
            lap = blocks[0].tocsr()
        else:
            ax, ay = blocks
            ix = sp.identity(ax.shape[0], format="csr")
            iy = sp.identity(ay.shape[0], format="csr")
            lap = (sp.kron(ax, iy) + sp.kron(ix, ay)).tocsr()
        ones_bc = np.zeros(tuple(k - 2 for k in grid.shape))
        for axis, step in enumerate(grid.h):
            sl = [slice(None)] * grid.dimension
            sl[axis] = 0
            ones_bc[tuple(sl)] += 1.0 / step**2
            sl[axis] = -1
            ones_bc[tuple(sl)] += 1.0 / step**2
        return lap, ones_bc.ravel()

    def laplacian_interior(self, u_int: np.ndarray, boundary_value: float) -> np.ndarray:
        return self.lap @ u_int + boundary_value * self.bc

    def solve_semi_implicit(self, u_int: np.ndarray, dt: float, f: float,
                            eps: float) -> np.ndarray:
        """Solve (diag(1/u) - dt*Lap) u_new = (1 + dt*f) + dt*eps*bc (SPD)."""
        rhs = (1.0 + dt * f) + dt * eps * self.bc
        inv_u = 1.0 / u_int
        if self.grid.dimension == 1:
            h2 = self.grid.h[0] ** 2
            ab = np.vstack([
                -dt * self.band_upper,
                inv_u + 2.0 * dt / h2,
                -dt * self.band_lower,
            ])
            return solve_banded((1, 1), ab, rhs)
        m = -dt * self.lap
        m = m + sp.diags(inv_u)
        return spsolve(m.tocsr(), rhs)


def _default_sup_cap(u0: Field, epsilon: float, torsion: TorsionSolution) -> float:
    sup0 = float(np.max(u0.values))
    ceiling = 0.8 * torsion.max_phi / epsilon
    return min(1e4 * sup0, ceiling)


def step(state: SolverState, params: SolverParams,
         workspace: _Workspace | None = None) -> SolverState:
    """Advance one step; the returned state carries the controller's next dt
    proposal and flags dt starvation instead of raising."""
    grid = state.u.grid
    if workspace is None:
        workspace = _Workspace(grid)
    eps = params.epsilon
    interior = workspace.interior
    u = state.u.values
    u_int = u[interior]

    f = state.rho_value
    want = min(state.dt, params.dt_max, params.reaction_cap_c / max(f, 1.0))
    if params.scheme == "explicit":
        cfl = params.cfl_c * min(grid.h) ** 2 / (2.0 * grid.dimension * float(u.max()))
        want = min(want, cfl)
    starved = want < params.dt_min
    dt = max(want, params.dt_min)

    if params.scheme == "explicit":
        lap_int = workspace.laplacian_interior(u_int, eps)
        new_int = u_int + dt * (u_int * lap_int + u_int * f)
    else:
        new_int = workspace.solve_semi_implicit(u_int, dt, f, eps)

    floored = int(np.sum(new_int < eps - 1e-15))
    new_int = np.maximum(new_int, eps)
    new_values = np.full(grid.shape, eps)
    new_values[interior] = new_int

    rel = float(np.max(np.abs(new_values - u))) / max(float(np.max(np.abs(u))), eps)
    next_dt = dt
    if rel > 0.10:
        next_dt = dt * 0.5
    elif rel < 0.01:
        next_dt = dt * 1.2
    next_dt = min(max(next_dt, params.dt_min), params.dt_max)

    new_field = Field(grid, new_values)
    energy = dirichlet_energy(new_field, eps)
    return SolverState(t=state.t + dt, u=new_field, dt=next_dt, energy=energy,
                       rho_value=rho_eps(energy, eps), floored=floored,
                       starved=starved)


class _TraceBuilder:
    def __init__(self, epsilon: float, omega: float):
        self.rows = []
        self.epsilon = epsilon
        self.omega = omega

    def add(self, state: SolverState, torsion: TorsionSolution) -> None:
        lifted = Field(state.u.grid, state.u.values - self.epsilon)
        self.rows.append((state.t, state.dt, integrate(state.u), state.energy,
                          float(np.max(state.u.values)),
                          phi_weighted_sup(lifted, torsion),
                          state.rho_value, state.floored))

    def build(self) -> Trace:
        data = np.asarray([r[:7] for r in self.rows], dtype=float)
        floored = np.asarray([r[7] for r in self.rows], dtype=int)
        return Trace(data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4],
                     data[:, 5], data[:, 6], floored, self.epsilon, self.omega)


def run(u0eps: Field, params: SolverParams,
        torsion: TorsionSolution | None = None) -> SimulationResult:
    """Integrate from u0eps until t_end, decay, or blow-up."""
    params.validate()
    grid = u0eps.grid
    eps = params.epsilon
    if np.min(u0eps.values) < eps - 1e-12:
        raise ValueError("initial data must respect the positivity floor")
    if np.max(np.abs(u0eps.values[grid.boundary_mask] - eps)) > 1e-12:
        raise ValueError("initial data must equal epsilon on the boundary")
    if torsion is None:
        torsion = solve_torsion(grid)
    sup_cap = params.sup_cap if params.sup_cap is not None else \
        _default_sup_cap(u0eps, eps, torsion)

    workspace = _Workspace(grid)
    e0 = dirichlet_energy(u0eps, eps)
    state = SolverState(t=0.0, u=u0eps.copy(), dt=params.dt_init, energy=e0,
                        rho_value=rho_eps(e0, eps))
    builder = _TraceBuilder(eps, grid.volume)
    snapshots = [(0.0, state.u.copy())]
    builder.add(state, torsion)

    eps_offset = eps * grid.volume
    initial_corrected = integrate(u0eps) - eps_offset
    n_interior = int(grid.interior_mask.sum())
    max_floor_frac = 0.0
    outcome = None
    step_index = 0
    last_recorded_t = 0.0
    last_snapshot_t = 0.0

    while True:
        sup_now = float(np.max(state.u.values))
        if sup_now >= sup_cap:
            outcome = "BlowUp"
            break
        if state.t >= params.t_end - 1e-12:
            corrected = integrate(state.u) - eps_offset
            outcome = "Decayed" if corrected < params.decay_threshold * initial_corrected \
                else "RanToEnd"
            break
        corrected = integrate(state.u) - eps_offset
        if initial_corrected > 0 and corrected < params.decay_threshold * initial_corrected:
            outcome = "Decayed"
            break

        prev_sup = sup_now
        remaining = params.t_end - state.t
        stepped = step(replace(state, dt=min(state.dt, remaining)), params, workspace)
        step_index += 1
        max_floor_frac = max(max_floor_frac, stepped.floored / max(n_interior, 1))

        if step_index % params.trace_stride == 0:
            builder.add(stepped, torsion)
            last_recorded_t = stepped.t
        if step_index % params.snapshot_stride == 0:
            snapshots.append((stepped.t, stepped.u.copy()))
            last_snapshot_t = stepped.t

        if stepped.starved and float(np.max(stepped.u.values)) > prev_sup:
            state = stepped
            outcome = "BlowUp"
            break
        state = stepped

    if state.t > last_recorded_t:
        builder.add(state, torsion)
    if state.t > last_snapshot_t:
        snapshots.append((state.t, state.u.copy()))
    trace = builder.build()

    t_max_estimate = math.nan
    fit_residual = math.nan
    if outcome == "BlowUp":
        from .blowup import estimate_tmax
        try:
            t_max_estimate, fit_residual = estimate_tmax(trace)
        except (ValueError, RuntimeError):
            pass

    return SimulationResult(
        outcome=outcome, t_last=state.t, t_max_estimate=t_max_estimate,
        fit_residual=fit_residual, trace=trace, snapshots=snapshots,
        params=params, sup_cap=sup_cap, final=state.u,
        max_floored_fraction=max_floor_frac,
        floor_flagged=max_floor_frac > 1e-3,
    )


def comparison_upper_bound(m_bound: float, b_bound: float,
                           torsion: TorsionSolution) -> float:
    """A-priori sup bound e^(B+1) * (M + max Phi) valid whenever the initial
    data is below M and the space-time energy integral is below B."""
    if m_bound <= 0:
        raise ValueError("M must be positive")
    if b_bound < 0:
        raise ValueError("B must be nonnegative")
    with np.errstate(over="ignore"):
        return float(np.exp(b_bound + 1.0) * (m_bound + torsion.max_phi))

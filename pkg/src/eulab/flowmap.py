"""Characteristics, deformation gradients, and the inflation experiment.

Tracer positions solve d/dt phi = u(t, phi); their deformation matrices
solve the linearized system d/dt Dphi = (Du)(t, phi) Dphi with Du assembled
from Riesz transforms of the vorticity.  Both ODEs are integrated with the
same classical RK4 as the field solver, either along a stored velocity
trajectory (linear interpolation between snapshots) or co-integrated with
the solver so the stage fields are exact.

On top of the ensembles sit the quantitative diagnostics: the odd-data
functional B, the deformation-growth certificate

    int_0^t |Dphi(s)|_inf^{-4} ds <= (pi/(4B)) log(1 + 4Bt/pi),
    max_{s<=t} |Dphi(s)|_inf >= ((4B/pi) t / log(1 + 4Bt/pi))^{1/4},

the hyperbolicity-at-origin series, the Lagrangian pullback identity for
the Hdot^1 norm, and the norm-inflation experiment.  Matrix norms are the
max-entry norm throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .spectral import GridSpec2D, SpectralField2D, gradient
from .euler2d import RunConfig2D, RunResult, SimState2D, Stepper
from .interpolate import FieldSampler
from . import seeds as seedmod
from .norms import sobolev_norm

__all__ = [
    "FlowMapEnsemble",
    "StoredVelocityTrajectory",
    "AnalyticFlow",
    "DeformationCertificate",
    "InflationReport",
    "ExperimentDeclined",
    "advect",
    "deformation",
    "run_with_tracers",
    "b_functional",
    "b_functional_callable",
    "check_deformation_growth",
    "hyperbolicity_at_origin",
    "lagrangian_h1",
    "inflation_experiment",
    "quadrature_seeds",
    "refined_origin_cluster",
]


# -- velocity sources ----------------------------------------------------------


class StoredVelocityTrajectory:
    """Vorticity spectra saved along a run; velocity/Du synthesized on demand.

    Snapshots are linearly interpolated in time between the stored levels
    when samplers are requested at intermediate times.
    """

    def __init__(self, grid: GridSpec2D, times, omega_coeffs):
        if len(times) != len(omega_coeffs):
            raise ValueError("times and snapshots disagree")
        self.grid = grid
        self.times = np.asarray(times, dtype=np.float64)
        self.snapshots = list(omega_coeffs)
        self._stepper = Stepper(RunConfig2D(grid=grid, dt=0.0, t_end=0.0))
        self._cache_key = None
        self._cache_sampler = None

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def max_cadence(self) -> float:
        if len(self.times) == 1:
            return 0.0
        return float(np.max(np.diff(self.times)))

    def omega_coeffs_at(self, t: float) -> np.ndarray:
        if len(self.times) == 1:
            return self.snapshots[0]
        t = min(max(t, self.times[0]), self.times[-1])
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        i = min(i, len(self.times) - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        th = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        if th == 0.0:
            return self.snapshots[i]
        return (1.0 - th) * self.snapshots[i] + th * self.snapshots[i + 1]

    def sampler_at(self, t: float, need_du: bool) -> FieldSampler:
        key = (round(float(t), 12), need_du)
        if self._cache_key == key:
            return self._cache_sampler
        c = self.omega_coeffs_at(t)
        ws = self._stepper
        fields = list(ws.velocity_coeffs(c))
        if need_du:
            fields.extend(ws.du_coeffs(c))
        sampler = FieldSampler(self.grid, fields)
        self._cache_key = key
        self._cache_sampler = sampler
        return sampler

    def origin_du_series(self):
        """(times, R12 w(t,0), R11 w(t,0), R22 w(t,0)) at the stagnation point."""
        ws = self._stepper
        g = self.grid
        # value at x = 0: sum of coeffs * (-1)^(m1+m2) with rfft weights
        sgn1 = (-1.0) ** np.arange(g.n)[:, None]
        sgn2 = (-1.0) ** np.arange(g.n // 2 + 1)[None, :]
        w = g.rfft_weights()[None, :]
        phase = sgn1 * sgn2 * w / g.n**2
        lam, r11v, r22v = [], [], []
        neg_r12, neg_r22, r11m, _ = ws.mult_du
        for c in self.snapshots:
            lam.append(float(np.sum(np.real((-neg_r12) * c * phase))))
            r11v.append(float(np.sum(np.real(r11m * c * phase))))
            r22v.append(float(np.sum(np.real((-neg_r22) * c * phase))))
        return self.times.copy(), np.array(lam), np.array(r11v), np.array(r22v)


class AnalyticFlow:
    """Closed-form velocity field for validation runs.

    Args:
        u_fn: (t, pts(ns,2)) -> velocities (ns,2).
        du_fn: (t, pts) -> gradient matrices (ns,2,2) with

            du[:, i, j] = d u_i / d x_j.
    """

    def __init__(self, u_fn, du_fn=None, t_end: float = np.inf):
        self.u_fn = u_fn
        self.du_fn = du_fn
        self.t_end = t_end
        self.max_cadence = 0.0

    def velocities(self, t, pts):
        return np.asarray(self.u_fn(t, pts), dtype=np.float64)

    def gradients(self, t, pts):
        if self.du_fn is None:
            raise ValueError("this AnalyticFlow has no velocity gradient")
        return np.asarray(self.du_fn(t, pts), dtype=np.float64)


# -- ensembles ------------------------------------------------------------------


@dataclass
class FlowMapEnsemble:
    """Tracer trajectories with optional deformation matrices.

    positions[k, s] is phi(times[k], seeds[s]); jacobians[k, s] the 2x2
    matrix Dphi.  weights are quadrature weights (zero for probe-only
    seeds); sup_series[k] = max over seeds of the max-entry matrix norm.
    """

    seeds: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    jacobians: np.ndarray | None = None
    weights: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def sup_series(self) -> np.ndarray:
        if self.jacobians is None:
            raise ValueError("ensemble has no jacobians")
        return np.max(np.abs(self.jacobians), axis=(1, 2, 3))

    def det_series(self) -> np.ndarray:
        J = self.jacobians
        return J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]

    def max_det_drift(self) -> float:
        return float(np.max(np.abs(self.det_series() - 1.0)))

    def argmax_deformation(self):
        """(time_index, seed_index, (i, j), value) of the largest |Dphi| entry.

        Ties are broken toward the earliest time, then the lexicographically
        smallest seed index.
        """
        A = np.abs(self.jacobians)
        val = float(np.max(A))
        hits = np.argwhere(A >= val * (1.0 - 1e-12))
        k, s, i, j = min(map(tuple, hits))
        return k, s, (i + 1, j + 1), val

    def time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not among the recorded times")
        return k


def _stage_tracer_derivative(sampler_vals, J):
    """(dP, dJ) from sampled (u1, u2[, du11, du12, du21, du22])."""
    dP = sampler_vals[:, :2]
    dJ = None
    if J is not None:
        g = sampler_vals[:, 2:6]
        A = np.empty((g.shape[0], 2, 2))
        A[:, 0, 0] = g[:, 0]
        A[:, 0, 1] = g[:, 1]
        A[:, 1, 0] = g[:, 2]
        A[:, 1, 1] = g[:, 3]
        dJ = np.einsum("sij,sjk->sik", A, J)
    return dP, dJ


def _integrate_along(source, seeds_arr, t_end, dt, with_jacobians,
                     record_every=1, weights=None, meta=None):
    """RK4 tracer integration along a stored trajectory or analytic flow."""
    seeds_arr = np.atleast_2d(np.asarray(seeds_arr, dtype=np.float64))
    ns = seeds_arr.shape[0]
    P = seeds_arr.copy()
    J = np.tile(np.eye(2), (ns, 1, 1)) if with_jacobians else None
    nsteps = int(round(t_end / dt)) if dt > 0 else 0
    analytic = isinstance(source, AnalyticFlow)

    def derivs(t, P_, J_):
        if analytic:
            dP = source.velocities(t, P_)
            dJ = None
            if J_ is not None:
                A = source.gradients(t, P_)
                dJ = np.einsum("sij,sjk->sik", A, J_)
            return dP, dJ
        sampler = source.sampler_at(t, need_du=J_ is not None)
        return _stage_tracer_derivative(sampler(P_), J_)

    times = [0.0]
    positions = [P.copy()]
    jacobians = [J.copy()] if with_jacobians else None
    for i in range(nsteps):
        t = i * dt
        dP1, dJ1 = derivs(t, P, J)
        dP2, dJ2 = derivs(t + dt / 2, P + dt / 2 * dP1,
                          None if J is None else J + dt / 2 * dJ1)
        dP3, dJ3 = derivs(t + dt / 2, P + dt / 2 * dP2,
                          None if J is None else J + dt / 2 * dJ2)
        dP4, dJ4 = derivs(t + dt, P + dt * dP3,
                          None if J is None else J + dt * dJ3)
        P = P + dt / 6 * (dP1 + 2 * dP2 + 2 * dP3 + dP4)
        if J is not None:
            J = J + dt / 6 * (dJ1 + 2 * dJ2 + 2 * dJ3 + dJ4)
        if (i + 1) % record_every == 0 or i == nsteps - 1:
            times.append((i + 1) * dt)
            positions.append(P.copy())
            if with_jacobians:
                jacobians.append(J.copy())
    return FlowMapEnsemble(
        seeds=seeds_arr, times=np.array(times), positions=np.array(positions),
        jacobians=None if jacobians is None else np.array(jacobians),
        weights=weights, meta=meta or {})


def _default_dt(traj) -> float:
    cad = getattr(traj, "max_cadence", 0.0)
    if cad > 0:
        return cad / 2.0
    return traj.t_end / 256 if np.isfinite(traj.t_end) else 0.01


def _check_cadence(traj, dt):
    cad = getattr(traj, "max_cadence", 0.0)
    if cad > 2.0 * dt * (1.0 + 1e-9):
        raise ValueError(
            f"velocity snapshots too sparse: cadence {cad:.3g} exceeds twice "
            f"the tracer step {dt:.3g}")


def advect(traj, seeds_arr, dt: float | None = None, t_end: float | None = None,
           record_every: int = 1, flag_halfbox: bool = True) -> FlowMapEnsemble:
    """Integrate tracer positions along a velocity source.

    Positions are kept in unwrapped coordinates; seeds escaping the central
    half-box are flagged in meta['escaped'] (the periodic truncation is no
    longer faithful for them).
    """
    t_end = traj.t_end if t_end is None else t_end
    dt = _default_dt(traj) if dt is None else dt
    _check_cadence(traj, dt)
    ens = _integrate_along(traj, seeds_arr, t_end, dt, with_jacobians=False,
                           record_every=record_every)
    if flag_halfbox and hasattr(traj, "grid"):
        lim = traj.grid.box_length / 4.0
        ens.meta["escaped"] = np.unique(
            np.nonzero(np.max(np.abs(ens.positions), axis=(0, 2)) > lim)[0]).tolist()
    return ens


def deformation(traj, seeds_arr, dt: float | None = None,
                t_end: float | None = None, record_every: int = 1,
                weights=None) -> FlowMapEnsemble:
    """Tracer positions plus deformation matrices along a velocity source."""
    t_end = traj.t_end if t_end is None else t_end
    dt = _default_dt(traj) if dt is None else dt
    _check_cadence(traj, dt)
    return _integrate_along(traj, seeds_arr, t_end, dt, with_jacobians=True,
                            record_every=record_every, weights=weights)


def run_with_tracers(config: RunConfig2D, omega0: SpectralField2D, seeds_arr,
                     weights=None, with_jacobians: bool = True,
                     record_every: int | None = None, diag_sink=None,
                     meta: dict | None = None):
    """Co-integrated solver + tracer RK4 (one coupled system, exact stages).

    Returns:
        (RunResult, FlowMapEnsemble); the RunResult carries diagnostics of
        the field solve, the ensemble the tracer records.
    """
    ws = Stepper(config)
    omega0.require_mean_zero()
    c = ws.mask * omega0.coeffs
    seeds_arr = np.atleast_2d(np.asarray(seeds_arr, dtype=np.float64))
    ns = seeds_arr.shape[0]
    P = seeds_arr.copy()
    J = np.tile(np.eye(2), (ns, 1, 1)) if with_jacobians else None
    nsteps = config.n_steps
    if record_every is None:
        record_every = max(1, nsteps // 400)

    def derivs(c_, P_, J_):
        dc = ws.rhs_coeffs(c_)
        fields = list(ws.velocity_coeffs(c_))
        if J_ is not None:
            fields.extend(ws.du_coeffs(c_))
        sampler = FieldSampler(config.grid, fields)
        dP, dJ = _stage_tracer_derivative(sampler(P_), J_)
        return dc, dP, dJ

    diagnostics = []
    times = [0.0]
    positions = [P.copy()]
    jacobians = [J.copy()] if with_jacobians else None
    state = SimState2D(t=0.0, omega=SpectralField2D(config.grid, coeffs=c))
    row = ws.diag_row(0.0, c, state.omega.values)
    diagnostics.append(row)
    if diag_sink:
        diag_sink(row)
    for i in range(nsteps):
        dc1, dP1, dJ1 = derivs(c, P, J)
        umax = ws.last_umax
        cfl = umax * config.dt / config.grid.h
        ws.last_cfl = cfl
        if cfl > config.cfl_limit:
            from .euler2d import CFLError
            raise CFLError(cfl, config.cfl_limit, config.dt)
        dt = config.dt
        dc2, dP2, dJ2 = derivs(c + dt / 2 * dc1, P + dt / 2 * dP1,
                               None if J is None else J + dt / 2 * dJ1)
        dc3, dP3, dJ3 = derivs(c + dt / 2 * dc2, P + dt / 2 * dP2,
                               None if J is None else J + dt / 2 * dJ2)
        dc4, dP4, dJ4 = derivs(c + dt * dc3, P + dt * dP3,
                               None if J is None else J + dt * dJ3)
        c = c + dt / 6 * (dc1 + 2 * dc2 + 2 * dc3 + dc4)
        if ws.filter_mult is not None:
            c = c * ws.filter_mult
        P = P + dt / 6 * (dP1 + 2 * dP2 + 2 * dP3 + dP4)
        if J is not None:
            J = J + dt / 6 * (dJ1 + 2 * dJ2 + 2 * dJ3 + dJ4)
        t = (i + 1) * dt
        if (i + 1) % record_every == 0 or i == nsteps - 1:
            if not (np.all(np.isfinite(c)) and np.all(np.isfinite(P))):
                from .euler2d import NumericalFault
                raise NumericalFault(f"non-finite state at t={t:.4g}")
            state = SimState2D(t=t, omega=SpectralField2D(config.grid, coeffs=c),
                               step_count=i + 1)
            row = ws.diag_row(t, c, state.omega.values)
            diagnostics.append(row)
            if diag_sink:
                diag_sink(row)
            times.append(t)
            positions.append(P.copy())
            if with_jacobians:
                jacobians.append(J.copy())
    state = SimState2D(t=nsteps * config.dt,
                       omega=SpectralField2D(config.grid, coeffs=c),
                       step_count=nsteps)
    ens = FlowMapEnsemble(
        seeds=seeds_arr, times=np.array(times), positions=np.array(positions),
        jacobians=None if jacobians is None else np.array(jacobians),
        weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        meta=meta or {})
    return RunResult(state=state, diagnostics=diagnostics), ens


# -- seed layouts ---------------------------------------------------------------


def quadrature_seeds(bbox, spacing: float, fine_blocks=()):
    """Midpoint-rule seed grid over a rectangle, with optional fine blocks.

    bbox = (x1min, x1max, x2min, x2max).  Each fine block is a
    (center, halfwidth, spacing) triple; coarse cells whose centers fall in
    a fine block are replaced by that block's finer midpoint grid.

    Returns:
        (points (ns,2), weights (ns,)).
    """
    x1min, x1max, x2min, x2max = bbox
    nx = max(1, int(round((x1max - x1min) / spacing)))
    ny = max(1, int(round((x2max - x2min) / spacing)))
    ax = x1min + (np.arange(nx) + 0.5) * (x1max - x1min) / nx
    ay = x2min + (np.arange(ny) + 0.5) * (x2max - x2min) / ny
    X, Y = np.meshgrid(ax, ay, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    w = np.full(pts.shape[0], (x1max - x1min) / nx * (x2max - x2min) / ny)
    keep = np.ones(pts.shape[0], dtype=bool)
    blocks = []
    for center, halfwidth, fine_sp in fine_blocks:
        cx, cy = center
        inside = (np.abs(pts[:, 0] - cx) < halfwidth) & \
                 (np.abs(pts[:, 1] - cy) < halfwidth)
        keep &= ~inside
        m = max(1, int(round(2 * halfwidth / fine_sp)))
        af = np.linspace(cx - halfwidth, cx + halfwidth, m, endpoint=False) \
            + halfwidth / m
        bf = np.linspace(cy - halfwidth, cy + halfwidth, m, endpoint=False) \
            + halfwidth / m
        XF, YF = np.meshgrid(af, bf, indexing="ij")
        bpts = np.column_stack([XF.ravel(), YF.ravel()])
        blocks.append((bpts, np.full(bpts.shape[0], (2 * halfwidth / m) ** 2)))
    pts_list = [pts[keep]]
    w_list = [w[keep]]
    for bpts, bw in blocks:
        pts_list.append(bpts)
        w_list.append(bw)
    return np.concatenate(pts_list), np.concatenate(w_list)


def refined_origin_cluster(base_halfwidth: float, levels: int = 4,
                           per_level: int = 8) -> np.ndarray:
    """Probe seeds dyadically clustered around the origin (weight zero).

    Level l places a per_level x per_level grid on the square of halfwidth
    base_halfwidth / 2^l; the origin itself is always included.
    """
    pts = [np.zeros((1, 2))]
    for l in range(levels):
        hw = base_halfwidth / 2.0**l
        a = np.linspace(-hw, hw, per_level)
        X, Y = np.meshgrid(a, a, indexing="ij")
        pts.append(np.column_stack([X.ravel(), Y.ravel()]))
    return np.unique(np.concatenate(pts), axis=0)


# -- the odd-data functional ----------------------------------------------------


def _b_guard(values: np.ndarray, integrand: np.ndarray, grid: GridSpec2D):
    n = grid.n
    x = grid.axis()
    near = np.abs(x) <= 4.0 * grid.h
    block = integrand[np.ix_(near, near)]
    vmax = np.max(np.abs(values))
    if block.size and np.max(np.abs(block)) > 10.0 * vmax:
        raise ValueError(
            "b_functional quadrature refused: integrand is singular near the "
            "origin (data does not vanish fast enough in a neighborhood of 0)")


def b_functional(omega0: SpectralField2D) -> float:
    """B = integral of omega0(x) * x1 x2 / |x|^4 dx by grid quadrature.

    Requires odd-odd data, nonnegative on the first quadrant, vanishing
    fast enough near the origin for the integrand to stay bounded (data
    only quadratically small at 0 is accepted; slower decay is refused).
    B > 0 is asserted for admissible data.
    """
    g = omega0.grid
    vals = omega0.values
    from .spectral import odd_reflection_residual
    linf = max(omega0.linf(), 1e-300)
    if odd_reflection_residual(omega0, 0) > 1e-8 * linf or \
            odd_reflection_residual(omega0, 1) > 1e-8 * linf:
        raise ValueError("b_functional requires data odd in x1 and x2")
    n = g.n
    if float(np.min(vals[n // 2:, n // 2:])) < -1e-10 * linf:
        raise ValueError("b_functional requires data >= 0 on the first quadrant")
    x1, x2 = g.meshgrid()
    r2 = x1**2 + x2**2
    r2[n // 2, n // 2] = 1.0  # origin cell dropped from the sum
    integrand = vals * x1 * x2 / r2**2
    integrand[n // 2, n // 2] = 0.0
    _b_guard(vals, integrand, g)
    B = float(np.sum(integrand)) * g.h**2
    if omega0.linf() > 0 and B <= 0:
        raise ValueError(f"odd-data functional B = {B:.3e} is not positive")
    return B


def b_functional_callable(fn, box_length: float, n: int = 2048,
                          richardson: bool = True) -> float:
    """B for an analytic field by midpoint quadrature, Richardson-refined.

    The two-grid extrapolation removes the O(h^2) error of the midpoint sum
    (the integrand has a bounded direction-dependent limit at 0).
    """

    def one(m):
        h = box_length / m
        x = -box_length / 2 + h * np.arange(m)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        V = fn(X1, X2)
        R2 = X1**2 + X2**2
        R2[m // 2, m // 2] = 1.0
        I = V * X1 * X2 / R2**2
        I[m // 2, m // 2] = 0.0
        return float(np.sum(I)) * h**2

    if not richardson:
        return one(n)
    b1, b2 = one(n), one(2 * n)
    return (4.0 * b2 - b1) / 3.0


# -- the deformation-growth certificate ------------------------------------------


@dataclass
class DeformationCertificate:
    """Per-time margins of the deformation-growth inequalities."""

    B: float
    t_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    lower_bound: np.ndarray
    running_max: np.ndarray
    slack: float
    det_drift: float
    seed_count: int
    passed: bool
    strict: bool

    def margins(self):
        return self.rhs - self.lhs, self.running_max - self.lower_bound

    def to_json(self) -> str:
        m_up, m_lo = self.margins()
        return json.dumps({
            "format_version": 1,
            "B": self.B,
            "slack": self.slack,
            "det_drift": self.det_drift,
            "seed_count": self.seed_count,
            "passed": bool(self.passed),
            "strict": bool(self.strict),
            "t": self.t_grid.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "lower_bound": self.lower_bound.tolist(),
            "running_max": self.running_max.tolist(),
            "margin_integral": m_up.tolist(),
            "margin_max": m_lo.tolist(),
        }, indent=2)


def check_deformation_growth(ens: FlowMapEnsemble, B: float,
                             slack: float = 0.05) -> DeformationCertificate:
    """Certify the integral inequality and the max-deformation lower bound.

    The sup over seeds under-estimates the true |Dphi|_inf, which
    over-estimates the left-hand integral: the safe direction for the <=
    check.  PASS requires both inequalities to hold within the slack at
    every recorded time.

    Raises:
        ValueError: B <= 0, or the ensemble's det drift exceeds 1e-2
            (certificate refused).
    """
    if B <= 0:
        raise ValueError(f"certificate requires B > 0, got {B}")
    if ens.jacobians is None:
        raise ValueError("ensemble carries no deformation matrices")
    det_drift = ens.max_det_drift()
    if det_drift > 1e-2:
        raise ValueError(
            f"certificate refused: det Dphi drift {det_drift:.3e} > 1e-2")
    t = ens.times
    sup = ens.sup_series
    inv4 = sup**-4.0
    lhs = np.concatenate(([0.0],
                          np.cumsum(0.5 * (inv4[1:] + inv4[:-1]) * np.diff(t))))
    a = 4.0 * B / np.pi
    rhs = np.log1p(a * t) / a
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.where(t > 0, (a * t / np.log1p(a * t)) ** 0.25, 1.0)
    running = np.maximum.accumulate(sup)
    ok_int = lhs <= rhs + slack * np.abs(rhs) + 1e-14
    ok_max = running >= (1.0 - slack) * lower
    strict = bool(np.all(lhs <= rhs + 1e-14) and np.all(running >= lower - 1e-12))
    return DeformationCertificate(
        B=B, t_grid=t.copy(), lhs=lhs, rhs=rhs, lower_bound=lower,
        running_max=running, slack=slack, det_drift=det_drift,
        seed_count=ens.seeds.shape[0],
        passed=bool(np.all(ok_int) and np.all(ok_max)), strict=strict)


def hyperbolicity_at_origin(traj: StoredVelocityTrajectory,
                            ens: FlowMapEnsemble | None = None,
                            B: float | None = None) -> dict:
    """Series of lambda(t) = (R12 w)(t, 0) and the off-diagonal residuals.

    Du(t,0) is diagonal for odd-odd data: the off-diagonal entries
    (-R22 w)(0) and (R11 w)(0) are reported as residuals relative to the
    max |Du| entry.  When an ensemble and B are supplied, the proof-chain
    bound -pi lambda(t) |Dphi(t)|_inf^4 >= B is evaluated as a ratio.
    """
    times, lam, r11v, r22v = traj.origin_du_series()
    ws = traj._stepper
    out = {"t": times, "lam": lam, "offdiag_d2u1": -r22v, "offdiag_d1u2": r11v}
    scale = []
    for c in traj.snapshots:
        m = max(float(np.max(np.abs(np.fft.irfft2(mc * c, s=(traj.grid.n,) * 2))))
                for mc in ws.mult_du)
        scale.append(m)
    out["du_linf"] = np.array(scale)
    if ens is not None and B is not None:
        sup = np.interp(times, ens.times, ens.sup_series)
        out["bound_ratio"] = (-np.pi * lam) * sup**4 / B
    return out


# -- Lagrangian Hdot^1 pullback ---------------------------------------------------


def lagrangian_h1(f: SpectralField2D, ens: FlowMapEnsemble,
                  time_index: int = -1, det_tol: float = 1e-2) -> float:
    """Squared Hdot^1 norm of f transported by the flow, via the pullback identity

        |W(t)|_{Hdot1}^2 = int |grad f . perp(grad Phi_2)|^2
                         + int |grad f . perp(grad Phi_1)|^2 dx,

    evaluated by quadrature over the ensemble's weighted seeds with the
    deformation matrices at the selected time.

    Raises:
        ValueError: missing jacobians/weights, insufficient seed coverage
            of supp f, or det drift beyond det_tol.
    """
    if ens.jacobians is None or ens.weights is None:
        raise ValueError("lagrangian_h1 needs jacobians and quadrature weights")
    J = ens.jacobians[time_index]
    w = ens.weights
    act = w > 0
    dets = J[act, 0, 0] * J[act, 1, 1] - J[act, 0, 1] * J[act, 1, 0]
    drift = float(np.max(np.abs(dets - 1.0))) if act.any() else 0.0
    if drift > det_tol:
        raise ValueError(f"det Dphi drift {drift:.3e} exceeds tolerance {det_tol}")
    # coverage: the quadrature seeds must blanket the support of f
    vals = np.abs(f.values)
    tol = 1e-10 * max(vals.max(), 1e-300)
    ii, jj = np.nonzero(vals > tol)
    if ii.size:
        ax = f.grid.axis()
        sp = math.sqrt(np.max(w[act]))
        for lo, hi, axis_idx in ((ax[ii.min()], ax[ii.max()], 0),
                                 (ax[jj.min()], ax[jj.max()], 1)):
            smin = ens.seeds[act, axis_idx].min() - sp
            smax = ens.seeds[act, axis_idx].max() + sp
            if lo < smin or hi > smax:
                raise ValueError(
                    "quadrature seeds do not cover supp f along axis "
                    f"{axis_idx + 1}: field extends to [{lo:.3g}, {hi:.3g}], "
                    f"seeds to [{smin:.3g}, {smax:.3g}]")
    g1, g2 = gradient(f)
    sampler = FieldSampler(f.grid, [g1.coeffs, g2.coeffs])
    gv = sampler(ens.seeds[act])
    Ja = J[act]
    # perp(grad Phi_i) = (-d2 Phi_i, d1 Phi_i); J[i-1] row = (d1 Phi_i, d2 Phi_i)
    t2 = (-gv[:, 0] * Ja[:, 1, 1] + gv[:, 1] * Ja[:, 1, 0]) ** 2
    t1 = (-gv[:, 0] * Ja[:, 0, 1] + gv[:, 1] * Ja[:, 0, 0]) ** 2
    return float(np.sum(w[act] * (t1 + t2)))


# -- the inflation experiment -----------------------------------------------------


class ExperimentDeclined(RuntimeError):
    """Measured deformation below the configured threshold."""

    def __init__(self, M: float, threshold: float):
        self.M = M
        self.threshold = threshold
        super().__init__(
            f"inflation experiment declined: measured M = {M:.3f} below the "
            f"configured threshold {threshold:g}")


@dataclass
class InflationReport:
    M: float
    t0: float
    x_star: tuple
    entry: tuple
    orientation: int
    delta: float
    threshold: float
    base_h1_sq: float
    sweep: list
    checks: dict

    def ratios(self):
        return [(row["k"], row["ratio"]) for row in self.sweep]

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "M": self.M, "t0": self.t0,
            "x_star": list(self.x_star), "entry": list(self.entry),
            "orientation": self.orientation, "delta": self.delta,
            "threshold": self.threshold,
            "base_h1_sq": self.base_h1_sq,
            "sweep": self.sweep, "checks": self.checks,
        }, indent=2)


def inflation_experiment(config: RunConfig2D, omega0: SpectralField2D,
                         k_sweep, policy: dict | None = None) -> InflationReport:
    """Norm inflation by large Lagrangian deformation, end to end.

    Recipe: run the base flow with tracers, locate (t0, x_star) where the
    deformation matrix entry is largest, build the oscillatory perturbation
    beta tuned to that entry, rerun from omega0 + beta for each wavenumber
    in k_sweep, and compare the transported Hdot^1 norms (computed through
    the Lagrangian pullback identity, which stays accurate after the
    perturbation's fine scales leave the grid's spectral range).

    policy keys (all optional): threshold (min admissible M, default 5),
    delta (bump width; default from x_star and the grid), seed_bbox,
    seed_spacing, record_every, variant, probe_halfwidth.

    Raises:
        ExperimentDeclined: measured M below the threshold.
    """
    policy = dict(policy or {})
    threshold = policy.get("threshold", 5.0)
    grid = config.grid
    sup_r = 0.0
    vals = np.abs(omega0.values)
    tol = 1e-8 * vals.max()
    ii, jj = np.nonzero(vals > tol)
    ax = grid.axis()
    sup_r = max(abs(ax[ii.min()]), abs(ax[ii.max()]),
                abs(ax[jj.min()]), abs(ax[jj.max()]))
    bbox = policy.get("seed_bbox", (-1.1 * sup_r, 1.1 * sup_r,
                                    -1.1 * sup_r, 1.1 * sup_r))
    spacing = policy.get("seed_spacing", (bbox[1] - bbox[0]) / 64.0)
    pts, w = quadrature_seeds(bbox, spacing)
    probes = refined_origin_cluster(policy.get("probe_halfwidth", sup_r / 4.0))
    seeds_all = np.concatenate([pts, probes])
    w_all = np.concatenate([w, np.zeros(probes.shape[0])])
    base_result, base_ens = run_with_tracers(
        config, omega0, seeds_all, weights=w_all,
        record_every=policy.get("record_every"))

    k_t, s_idx, entry, M = base_ens.argmax_deformation()
    if M < threshold:
        raise ExperimentDeclined(M, threshold)
    t0 = float(base_ens.times[k_t])
    x_star = tuple(base_ens.seeds[s_idx])
    orientation = 2 if entry[1] == 1 else 1

    min_nz = min((abs(c) for c in x_star if abs(c) > 8 * grid.h), default=np.inf)
    delta = policy.get("delta")
    if delta is None:
        delta = max(8.0 * grid.h, min(0.12 * sup_r,
                                      min_nz / 4.0 if np.isfinite(min_nz) else np.inf))
    base_h1 = lagrangian_h1(omega0, base_ens, time_index=k_t)

    cfg0 = RunConfig2D(grid=grid, dt=config.dt, t_end=t0, filter=config.filter,
                       filter_order=config.filter_order,
                       filter_strength=config.filter_strength,
                       diag_every=config.diag_every, cfl_limit=config.cfl_limit,
                       support_policy=config.support_policy,
                       support_tol=config.support_tol)
    sweep = []
    for k in k_sweep:
        beta = seedmod.make_perturbation_beta(
            grid, k, M, x_star, delta,
            variant=policy.get("variant", "prop"), orientation=orientation)
        pert0 = omega0 + beta
        _, pert_ens = run_with_tracers(
            cfg0, pert0, seeds_all, weights=w_all,
            record_every=policy.get("record_every"))
        pert_h1 = lagrangian_h1(pert0, pert_ens, time_index=pert_ens.time_index(t0))
        box = grid.box_length
        ledger = {
            "beta_L1": beta.l1(),
            "beta_Linf": beta.linf(),
            "beta_Hdot1": sobolev_norm(beta.values, box, 1.0),
            "beta_Hdot-1": sobolev_norm(beta.values, box, -1.0),
        }
        sweep.append({
            "k": float(k),
            "ratio": math.sqrt(pert_h1 / base_h1),
            "lagrangian_base_sq": base_h1,
            "lagrangian_pert_sq": pert_h1,
            "ledger": ledger,
        })
    k_max_row = max(sweep, key=lambda r: r["k"])
    checks = {
        "grad_beta_sq_lt_inv_M": k_max_row["ledger"]["beta_Hdot1"] ** 2 < 1.0 / M,
        "beta_h1_le_1.1_Minvhalf":
            k_max_row["ledger"]["beta_Hdot1"] <= 1.1 / math.sqrt(M),
        "ratios_nondecreasing": all(
            sweep[i + 1]["ratio"] >= sweep[i]["ratio"] - 1e-12
            for i in range(len(sweep) - 1)),
    }
    return InflationReport(
        M=M, t0=t0, x_star=x_star, entry=entry, orientation=orientation,
        delta=delta, threshold=threshold, base_h1_sq=base_h1,
        sweep=sweep, checks=checks)

"""Pseudo-spectral time integration of the incompressible MHD system

    u_t + (u.grad)u - (B.grad)B + grad p = lap u
    B_t + (u.grad)B - (B.grad)u = delta lap B,   div u = div B = 0

with pressure removed by Leray projection.  Two integrators are provided:
an integrating-factor RK4 stepper (exact heat multipliers, classical RK4 on
the quadratic terms) and a Picard iteration of the Duhamel formula used to
cross-validate it.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from . import diagnostics as dg
from .errors import ConfigurationError, NumericalBlowupError, PicardDivergenceError, TimeStepError
from .fields import prepare
from .spectral import Grid, l2_norm_sq, leray_project

SCHEMES = ("if-rk4", "picard")


class UnderResolvedWarning(RuntimeWarning):
    """The magnetic spectrum reached the truncation band."""


@dataclass(frozen=True)
class MHDState:
    t: float
    u: np.ndarray
    B: np.ndarray
    delta: float
    grid: Grid

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigurationError(f"magnetic diffusivity must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class SolverConfig:
    """Integration settings.

    ``record_every`` and ``snapshot_every`` count steps; the first and last
    steps are always recorded.  ``snapshot_every=0`` keeps only the initial
    and final states.
    """

    dt: float
    T: float
    dealias: bool = True
    scheme: str = "if-rk4"
    picard_iterations: int = 6
    record_every: int = 1
    nonlinear: bool = True
    snapshot_every: int = 0
    cfl: float = 0.5

    def __post_init__(self):
        errors = []
        if not self.dt > 0:
            errors.append(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            errors.append(f"T must be >= 0, got {self.T}")
        if self.scheme not in SCHEMES:
            errors.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.picard_iterations < 1:
            errors.append(f"picard_iterations must be >= 1, got {self.picard_iterations}")
        if self.record_every < 1:
            errors.append(f"record_every must be >= 1, got {self.record_every}")
        if self.snapshot_every < 0:
            errors.append(f"snapshot_every must be >= 0, got {self.snapshot_every}")
        if errors:
            raise ConfigurationError("; ".join(errors))

    @property
    def steps(self):
        return max(0, math.ceil(self.T / self.dt - 1e-9))


def _product_mask(grid, dealias):
    return grid.dealias_mask if dealias else grid.nyquist_free


def _physical_pair(u_hat, B_hat, grid):
    both = scipy.fft.ifftn(np.concatenate([u_hat, B_hat]), axes=grid.axes, norm="forward").real
    return both[: grid.n], both[grid.n:]


def _rhs(u_hat, B_hat, grid, dealias):
    """Projected nonlinear terms plus the max physical component magnitude.

    Divergence forms are used: ``(B.grad)B - (u.grad)u = d_j(B_j B_i - u_j u_i)``
    and ``(B.grad)u - (u.grad)B = d_j(B_j u_i - u_j B_i)``.
    """
    n = grid.n
    u, B = _physical_pair(u_hat, B_hat, grid)
    sym = [(i, j) for i in range(n) for j in range(i, n)]
    anti = [(i, j) for i in range(n) for j in range(i + 1, n)]
    prods = [B[i] * B[j] - u[i] * u[j] for i, j in sym]
    prods += [B[j] * u[i] - u[j] * B[i] for i, j in anti]
    P = scipy.fft.fftn(np.stack(prods), axes=grid.axes, norm="forward")
    P *= _product_mask(grid, dealias)
    iK = 1j * grid.K
    Nu = np.zeros_like(u_hat)
    NB = np.zeros_like(B_hat)
    for idx, (i, j) in enumerate(sym):
        Nu[i] += iK[j] * P[idx]
        if i != j:
            Nu[j] += iK[i] * P[idx]
    for idx, (i, j) in enumerate(anti):
        a = P[len(sym) + idx]
        NB[i] += iK[j] * a
        NB[j] -= iK[i] * a
    umax = max(float(np.max(np.abs(u))), float(np.max(np.abs(B))))
    return leray_project(Nu, grid), NB, umax


def _check_finite(state):
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.B))):
        raise NumericalBlowupError(f"non-finite input state at t={state.t}", t=state.t)


def nonlinear_rhs(state, dealias=True):
    """``(P FT[(B.grad)B - (u.grad)u], FT[(B.grad)u - (u.grad)B])``."""
    _check_finite(state)
    Nu, NB, _ = _rhs(state.u, state.B, state.grid, dealias)
    return Nu, NB


def advective_terms(state, dealias=True):
    """Unprojected ``FT[(u.grad)u]`` and ``FT[(B.grad)B]``."""
    g = state.grid
    n = g.n
    u, B = _physical_pair(state.u, state.B, g)
    prods = [u[i] * u[j] for i in range(n) for j in range(n)]
    prods += [B[i] * B[j] for i in range(n) for j in range(n)]
    P = scipy.fft.fftn(np.stack(prods), axes=g.axes, norm="forward")
    P *= _product_mask(g, dealias)
    P = P.reshape((2, n, n) + g.shape)
    iK = 1j * g.K
    # (v.grad)v_i = d_j (v_j v_i)
    uu = np.einsum("j...,ji...->i...", iK, P[0])
    BB = np.einsum("j...,ji...->i...", iK, P[1])
    return uu, BB


def recover_pressure(state, dealias=True):
    """Total pressure from ``lap p = d_j d_k (B_j B_k - u_j u_k)``; ``p_hat(0) = 0``."""
    _check_finite(state)
    g = state.grid
    n = g.n
    u, B = _physical_pair(state.u, state.B, g)
    T = np.stack([B[i] * B[j] - u[i] * u[j] for i in range(n) for j in range(n)])
    T_hat = scipy.fft.fftn(T, axes=g.axes, norm="forward") * _product_mask(g, dealias)
    T_hat = T_hat.reshape((n, n) + g.shape)
    kk = np.einsum("i...,j...,ij...->...", g.K, g.K, T_hat)
    return kk * g.inv_k2


class _Stepper:
    """Integrating-factor RK4 with multipliers cached for one step size."""

    def __init__(self, grid, delta, dt, dealias=True, nonlinear=True, cfl=0.5):
        self.grid, self.delta, self.dt = grid, delta, dt
        self.dealias, self.nonlinear, self.cfl = dealias, nonlinear, cfl
        self.Eu = np.exp(-grid.k2 * dt)
        self.Eu2 = np.exp(-grid.k2 * dt / 2)
        self.EB = np.exp(-delta * grid.k2 * dt)
        self.EB2 = np.exp(-delta * grid.k2 * dt / 2)
        self.last_umax = 0.0

    def _eval(self, u, B, t, stage):
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(B))):
            raise NumericalBlowupError(
                f"non-finite values entering RK stage {stage} at t={t:.6g}", t=t, stage=stage)
        return _rhs(u, B, self.grid, self.dealias)

    def step(self, state):
        dt, t = self.dt, state.t
        u, B = state.u, state.B
        if not self.nonlinear:
            return replace(state, t=t + dt, u=self.Eu * u, B=self.EB * B)
        Eu, Eu2, EB, EB2 = self.Eu, self.Eu2, self.EB, self.EB2
        a_u, a_B, umax = self._eval(u, B, t, 1)
        self.last_umax = umax
        if umax > 0 and dt > self.cfl * self.grid.dx / umax:
            raise TimeStepError(
                f"dt={dt:.3g} exceeds {self.cfl} dx / max|u,B| = "
                f"{self.cfl * self.grid.dx / umax:.3g} at t={t:.6g}", t=t, stage=1)
        h = 0.5 * dt
        b_u, b_B, _ = self._eval(Eu2 * (u + h * a_u), EB2 * (B + h * a_B), t + h, 2)
        c_u, c_B, _ = self._eval(Eu2 * u + h * b_u, EB2 * B + h * b_B, t + h, 3)
        d_u, d_B, _ = self._eval(Eu * u + dt * Eu2 * c_u, EB * B + dt * EB2 * c_B, t + dt, 4)
        u_new = Eu * u + (dt / 6) * (Eu * a_u + 2 * Eu2 * (b_u + c_u) + d_u)
        B_new = EB * B + (dt / 6) * (EB * a_B + 2 * EB2 * (b_B + c_B) + d_B)
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(B_new))):
            raise NumericalBlowupError(f"non-finite update at t={t + dt:.6g}", t=t + dt, stage=5)
        return MHDState(t=t + dt, u=u_new, B=B_new, delta=state.delta, grid=state.grid)


def step_ifrk4(state, dt, dealias=True, nonlinear=True, cfl=0.5):
    """Advance ``state`` by one integrating-factor RK4 step."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    return _Stepper(state.grid, state.delta, dt, dealias, nonlinear, cfl).step(state)


def spectral_tail_ratio(v_hat, grid, dealias=True):
    """Peak coefficient in the outer third of the retained band over the global peak."""
    cutoff = grid.N / 3.0 if dealias else grid.N / 2.0
    amp = np.sqrt(np.sum(np.abs(v_hat) ** 2, axis=0))
    peak = amp.max()
    if peak == 0:
        return 0.0
    band = (grid.max_index > 2.0 * cutoff / 3.0) & (grid.max_index <= cutoff)
    return float(amp[band].max(initial=0.0) / peak)


TAIL_LIMIT = 1e-6


def _initial_state(u0, B0, delta, grid, dealias):
    if delta < 0:
        raise ConfigurationError(f"magnetic diffusivity must be >= 0, got {delta}")
    u0 = prepare(u0, grid, dealias)
    B0 = prepare(B0, grid, dealias)
    return MHDState(t=0.0, u=u0, B=B0, delta=float(delta), grid=grid)


def _densities(state):
    return (dg.dissipation_density(state.u, state.grid),
            dg.dissipation_density(state.B, state.grid))


def run(u0, B0, delta, cfg, grid, lq_orders=(), split="gaussian_t"):
    """Integrate from ``(u0, B0)`` (spectral) to ``cfg.T`` and collect diagnostics.

    Initial data are symmetrized, projected, made mean-zero and (with
    ``cfg.dealias``) truncated before the first record.  Dissipation
    integrals are accumulated on every step, mode by mode, with
    :func:`mhdlab.diagnostics.dissipation_increment`.
    Returns a :class:`mhdlab.diagnostics.Series`.
    """
    if delta == 0 and not cfg.dealias and cfg.nonlinear:
        raise ConfigurationError("delta = 0 runs require dealias = true")
    if cfg.scheme == "picard":
        return _run_picard(u0, B0, delta, cfg, grid, lq_orders, split)
    state = _initial_state(u0, B0, delta, grid, cfg.dealias)
    series = dg.Series(records=[], delta=float(delta), grid=grid, dealias=cfg.dealias,
                       nonlinear=cfg.nonlinear)
    dens = _densities(state)
    grads = (float(dens[0].sum()), float(dens[1].sum()))
    cum_u = cum_B = 0.0
    watch_tail = delta == 0 and cfg.nonlinear
    warned = False

    def record():
        nonlocal warned
        rec = dg.make_record(state, cum_u, cum_B, lq_orders, split, grads=grads)
        series.records.append(rec)
        series.max_abs_B = max(series.max_abs_B, rec.maxB)
        if watch_tail and not warned:
            tail = spectral_tail_ratio(state.B, grid, cfg.dealias)
            if tail > TAIL_LIMIT:
                warned = True
                warnings.warn(
                    f"magnetic spectrum tail {tail:.2e} of peak exceeds {TAIL_LIMIT:g} "
                    f"at t={state.t:.4g}; the delta = 0 run may be under-resolved",
                    UnderResolvedWarning, stacklevel=3)

    record()
    series.snapshots.append(state)
    steps = cfg.steps
    stepper = _Stepper(grid, delta, cfg.dt, cfg.dealias, cfg.nonlinear, cfg.cfl)
    for k in range(1, steps + 1):
        if k == steps:
            remaining = cfg.T - state.t
            if abs(remaining - cfg.dt) > 1e-12 * max(1.0, cfg.T):
                stepper = _Stepper(grid, delta, remaining, cfg.dealias, cfg.nonlinear, cfg.cfl)
        h = stepper.dt
        state = stepper.step(state)
        if k == steps:
            state = replace(state, t=float(cfg.T))
        new = _densities(state)
        cum_u += dg.dissipation_increment(dens[0], new[0], h)
        cum_B += dg.dissipation_increment(dens[1], new[1], h)
        dens = new
        grads = (float(dens[0].sum()), float(dens[1].sum()))
        if k % cfg.record_every == 0 or k == steps:
            record()
        if (cfg.snapshot_every and k % cfg.snapshot_every == 0) or k == steps:
            series.snapshots.append(state)
    return series


def _nodes(T, nodes):
    if np.isscalar(nodes):
        count = int(nodes)
        if count < 2:
            raise ConfigurationError(f"need at least 2 quadrature nodes, got {count}")
        return np.linspace(0.0, T, count)
    t = np.asarray(nodes, dtype=float)
    if t.ndim != 1 or len(t) < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ConfigurationError("nodes must start at 0 and increase strictly")
    return t


def _pair_norm(u, B, grid):
    return math.sqrt(l2_norm_sq(u, grid) + l2_norm_sq(B, grid))


def picard_history(u0, B0, delta, T, n_iter, nodes, grid, dealias=True):
    """Picard iterates of the Duhamel formula on time nodes.

    Iterate 0 is the heat evolution ``(exp(t lap) u0, exp(delta t lap) B0)``;
    iterate ``j + 1`` adds the trapezoid-rule Duhamel integral of the
    nonlinear terms of iterate ``j``.  Returns ``(times, u, B, distances)``
    where ``u, B`` have a leading node axis and ``distances[j]`` is the
    sup-over-nodes L2 distance between iterates ``j + 1`` and ``j``.
    """
    if not delta > 0:
        raise ConfigurationError(f"Picard iteration needs delta > 0, got {delta}")
    if n_iter < 0:
        raise ConfigurationError(f"n_iter must be >= 0, got {n_iter}")
    times = _nodes(T, nodes)
    u0 = prepare(u0, grid, dealias)
    B0 = prepare(B0, grid, dealias)
    U0 = np.stack([np.exp(-grid.k2 * t) * u0 for t in times])
    B0t = np.stack([np.exp(-delta * grid.k2 * t) * B0 for t in times])
    u_it, B_it = U0.copy(), B0t.copy()
    start = _pair_norm(u0, B0, grid)
    distances = []
    for it in range(n_iter):
        Iu = np.zeros_like(u0)
        IB = np.zeros_like(B0)
        u_new, B_new = np.empty_like(U0), np.empty_like(B0t)
        prev = None
        for i, t in enumerate(times):
            Nu, NB, _ = _rhs(u_it[i], B_it[i], grid, dealias)
            if prev is not None:
                h = t - times[i - 1]
                Iu = np.exp(-grid.k2 * h) * (Iu + 0.5 * h * prev[0]) + 0.5 * h * Nu
                IB = np.exp(-delta * grid.k2 * h) * (IB + 0.5 * h * prev[1]) + 0.5 * h * NB
            prev = (Nu, NB)
            u_new[i] = U0[i] + Iu
            B_new[i] = B0t[i] + IB
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(B_new))):
            raise PicardDivergenceError(f"non-finite Picard iterate {it + 1}")
        size = max(_pair_norm(u_new[i], B_new[i], grid) for i in range(len(times)))
        if size > 10.0 * start:
            raise PicardDivergenceError(
                f"Picard iterate {it + 1} norm {size:.3e} exceeds 10x initial {start:.3e}")
        distances.append(max(_pair_norm(u_new[i] - u_it[i], B_new[i] - B_it[i], grid)
                             for i in range(len(times))))
        u_it, B_it = u_new, B_new
    return times, u_it, B_it, distances


def picard_iterate(u0, B0, delta, T, n_iter, nodes, grid, dealias=True):
    """The ``n_iter``-th Picard iterate at time ``T`` as an :class:`MHDState`."""
    times, u, B, _ = picard_history(u0, B0, delta, T, n_iter, nodes, grid, dealias)
    return MHDState(t=float(times[-1]), u=u[-1], B=B[-1], delta=float(delta), grid=grid)


def _run_picard(u0, B0, delta, cfg, grid, lq_orders, split):
    times, u, B, _ = picard_history(u0, B0, delta, cfg.T, cfg.picard_iterations,
                                    cfg.steps + 1, grid, cfg.dealias)
    series = dg.Series(records=[], delta=float(delta), grid=grid, dealias=cfg.dealias,
                       nonlinear=cfg.nonlinear)
    cum_u = cum_B = 0.0
    prev = None
    last = len(times) - 1
    for i, t in enumerate(times):
        st = MHDState(t=float(t), u=u[i], B=B[i], delta=float(delta), grid=grid)
        dens = _densities(st)
        grads = (float(dens[0].sum()), float(dens[1].sum()))
        if prev is not None:
            h = t - times[i - 1]
            cum_u += dg.dissipation_increment(prev[0], dens[0], h)
            cum_B += dg.dissipation_increment(prev[1], dens[1], h)
        prev = dens
        if i % cfg.record_every == 0 or i == last:
            rec = dg.make_record(st, cum_u, cum_B, lq_orders, split, grads=grads)
            series.records.append(rec)
            series.max_abs_B = max(series.max_abs_B, rec.maxB)
        if i == 0 or i == last or (cfg.snapshot_every and i % cfg.snapshot_every == 0):
            series.snapshots.append(st)
    return series

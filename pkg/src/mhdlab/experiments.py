"""Scaled-data decay experiments.

Whole-space quantities use a radial Fourier profile integrated with
composite Gauss-Legendre quadrature.  Simulations of the scaled family
``u0_a(x) = a^(n/2) u0(a x)`` run on boxes that grow like ``1/a`` so the
low-frequency content the decay depends on stays represented.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import Series
from .errors import BoxPolicyError, ConfigurationError, MHDLabError
from .fields import FieldSpec, sample
from .solver import SolverConfig, run
from .spectral import Grid, heat_multiplier, to_physical, transform_forward

BOX_POLICIES = ("fixed-dx", "fixed-n", "fixed")
_GL_ORDER = 16


def sphere_area(n):
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class RadialProfile:
    """Quadrature nodes, weights and amplitudes ``|u0_hat|(rho)`` in R^n.

    For non-radial data ``amplitudes`` holds the root-mean-square of
    ``|u0_hat|`` over each sphere, which is all the heat semigroup sees.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0) or self.nodes[0] <= 0:
            raise ConfigurationError("profile nodes must be positive and strictly increasing")
        if np.any(self.weights <= 0):
            raise ConfigurationError("profile weights must be positive")


def _composite_gl(R, panels):
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(0.0, R, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def radial_profile(amplitude, n, rtol=1e-10, tail_tol=1e-14, max_panels=4096):
    """Build a :class:`RadialProfile` for ``amplitude(rho)`` on ``[0, R]``.

    ``R`` doubles until the integral of ``a^2 rho^(n-1)`` over ``[R, 2R]``
    is below ``tail_tol`` of the total; the panel count then doubles until
    successive integrals agree to ``rtol``.
    """
    def integral(R, panels):
        x, w = _composite_gl(R, panels)
        return float(np.sum(w * amplitude(x) ** 2 * x ** (n - 1))), x, w

    R = 1.0
    for _ in range(60):
        total, _, _ = integral(R, 8)
        nodes, weights = _composite_gl(R, 8)
        tail = float(np.sum(weights * amplitude(R + nodes) ** 2 * (R + nodes) ** (n - 1)))
        if total > 0 and tail <= tail_tol * total:
            break
        R *= 2.0
    else:
        raise ConfigurationError("amplitude profile does not decay fast enough")
    panels = 4
    prev, x, w = integral(R, panels)
    while panels < max_panels:
        panels *= 2
        cur, x, w = integral(R, panels)
        if abs(cur - prev) <= rtol * abs(cur):
            break
        prev = cur
    return RadialProfile(n=n, nodes=x, weights=w, amplitudes=amplitude(x))


def gaussian_profile(n, width=1.0, amplitude=1.0):
    """``|u0_hat|(rho) = amplitude * exp(-width^2 rho^2 / 2)``."""
    return radial_profile(lambda r: amplitude * np.exp(-0.5 * (width * r) ** 2), n)


def gaussian_bump_profile(n, amplitude=1.0, width=1.0):
    """Spherical RMS of ``|u0_hat|`` for the ``gaussian-bump`` generator.

    Transform convention ``u_hat(xi) = int exp(-i xi x) u(x) dx``.
    """
    s = width
    if n == 2:
        c = 2.0 * math.pi * amplitude * s**4
        return lambda r: c * r * np.exp(-0.5 * (s * r) ** 2)
    # 3D swirl about z: |xi_perp|^2 averages to (2/3)|xi|^2 over the sphere.
    c = math.sqrt(2.0 / 3.0) * amplitude * s**2 * (2.0 * math.pi) ** 1.5 * s**3
    return lambda r: c * r * np.exp(-0.5 * (s * r) ** 2)


def field_profile(spec, n):
    if spec.kind != "gaussian-bump":
        raise ConfigurationError(
            f"semi-analytic profile available for gaussian-bump data only, got {spec.kind!r}")
    return radial_profile(gaussian_bump_profile(n, spec.amplitude, spec.width), n)


def heat_semigroup_norm(profile, alpha, t):
    """Whole-space ``||exp(t lap) u0_alpha||_2`` from the radial profile."""
    p = profile
    dens = p.weights * p.amplitudes**2 * p.nodes ** (p.n - 1)
    damp = np.exp(-2.0 * p.nodes**2 * alpha**2 * t)
    total = sphere_area(p.n) * np.sum(dens * damp) / (2.0 * math.pi) ** p.n
    return float(math.sqrt(total))


def scale_data(f, alpha):
    """``x -> alpha^(n/2) f(alpha x)``: L2-preserving, gradient energy times alpha^2."""
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"scale factor must be in (0, 1], got {alpha}")

    def g(X):
        return alpha ** (X.shape[0] / 2.0) * f(alpha * X)
    return g


def scaled_grid(base, alpha, policy="fixed-dx"):
    """Box for the ``alpha``-scaled data.

    ``fixed-dx`` grows the period to ``L/alpha`` and the point count to
    ``N/alpha`` (must come out an even integer); ``fixed-n`` grows only the
    period; ``fixed`` keeps the base box.
    """
    if policy not in BOX_POLICIES:
        raise ConfigurationError(f"unknown box policy {policy!r}; choose from {BOX_POLICIES}")
    if not 0 < alpha <= 1:
        raise ConfigurationError(f"scale factor must be in (0, 1], got {alpha}")
    if policy == "fixed":
        return base
    L = base.L / alpha
    if policy == "fixed-n":
        return Grid(base.n, base.N, L)
    N = base.N / alpha
    if abs(N - round(N)) > 1e-9 * N or round(N) % 2:
        raise ConfigurationError(f"N/alpha = {N:g} is not an even integer for alpha={alpha}")
    return Grid(base.n, int(round(N)), L)


def check_support(v, grid, tol=1e-8):
    """Raise :class:`BoxPolicyError` if ``v`` (physical) is not small on the box faces."""
    mag = np.sqrt(np.sum(np.asarray(v) ** 2, axis=0))
    peak = mag.max()
    if peak == 0:
        return
    edge = max(float(np.max(np.take(mag, 0, axis=ax))) for ax in range(grid.n))
    if edge > tol * peak:
        raise BoxPolicyError(
            f"field magnitude {edge / peak:.2e} of peak on the boundary of the "
            f"L={grid.L:g} box; scaled data do not fit")


def sample_scaled(f, alpha, base, policy="fixed-dx", tol=1e-8):
    """Grid and spectral coefficients of the ``alpha``-scaled data."""
    grid = scaled_grid(base, alpha, policy)
    v = scale_data(f, alpha)(grid.coords())
    check_support(v, grid, tol)
    return grid, transform_forward(v, grid)


def _zero_pad(v_hat, grid, N_big):
    """Embed coefficients in a larger lattice (trigonometric interpolation)."""
    out = np.zeros(v_hat.shape[: v_hat.ndim - grid.n] + (N_big,) * grid.n, dtype=complex)
    idx = np.concatenate([np.arange(grid.N // 2), np.arange(N_big - grid.N // 2, N_big)])
    out[(Ellipsis,) + np.ix_(*([idx] * grid.n))] = v_hat
    return out


def self_similarity_check(f, alpha, t, base, policy="fixed-dx"):
    """Relative L2 gap between two evaluations of the heat flow of scaled data.

    Left: heat multiplier applied to the ``alpha``-scaled data on the large
    box.  Right: the unscaled data evolved to ``alpha^2 t`` on the base box,
    then rescaled as ``alpha^(n/2) v(alpha x)`` onto the large-box points.
    """
    big, scaled_hat = sample_scaled(f, alpha, base, policy)
    left = to_physical(heat_multiplier(big, t) * scaled_hat, big)
    v_hat = sample(f, base) * heat_multiplier(base, alpha**2 * t)
    if big.N < base.N:
        raise BoxPolicyError("large box must have at least as many points as the base box")
    fine = Grid(base.n, big.N, base.L)
    right = alpha ** (base.n / 2.0) * to_physical(_zero_pad(v_hat, base, big.N), fine)
    denom = np.sqrt(np.sum(right**2))
    return float(np.sqrt(np.sum((left - right) ** 2)) / denom) if denom > 0 else 0.0


def singular_quadrature(times, values, T):
    """``int_0^T (T - s)^(-1/2) Q(s) ds`` with ``Q`` piecewise linear on ``times``."""
    s = np.asarray(times, dtype=float)
    q = np.asarray(values, dtype=float)
    total = 0.0
    for i in range(len(s) - 1):
        a, b = T - s[i + 1], T - s[i]  # tau interval
        if b <= a:
            continue
        slope = (q[i] - q[i + 1]) / (b - a)
        base = q[i + 1] - slope * a
        # int_a^b tau^(-1/2) (base + slope tau) dtau
        total += 2.0 * base * (math.sqrt(b) - math.sqrt(a))
        total += (2.0 / 3.0) * slope * (b**1.5 - a**1.5)
    return total


def duhamel_bound(series, T):
    """Upper bound on ``||u(T) - exp(T lap) u0||_2`` from recorded L4 norms.

    Uses ``|P k . FT(M)(k)| exp(-|k|^2 tau) <= (2 e tau)^(-1/2) |FT(M)(k)|``
    with ``M = u u - B B`` and ``||u u||_2 = ||u||_4^2``; the projection
    (pressure) has mode-wise norm at most one.
    """
    recs = series.records
    if not recs or 4.0 not in recs[0].lq:
        raise ConfigurationError("duhamel_bound needs L4 norms in the records")
    times = [r.t for r in recs]
    Q = [r.lq[4.0][0] ** 2 + r.lq[4.0][1] ** 2 for r in recs]
    return singular_quadrature(times, Q, T) / math.sqrt(2.0 * math.e)


@dataclass(frozen=True)
class ScaledFamilyConfig:
    """Inputs for :func:`nonuniform_decay_experiment`."""

    u_data: FieldSpec
    B_data: FieldSpec
    alphas: tuple
    T: float
    epsilon: float
    base_grid: Grid
    dt: float
    delta: float = 1.0
    box_policy: str = "fixed-dx"
    nonlinear: bool = True
    dealias: bool = True
    threads: int = 1

    def __post_init__(self):
        errors = []
        a = list(self.alphas)
        if not a:
            errors.append("alpha list is empty")
        if any(not 0 < x <= 1 for x in a):
            errors.append(f"alpha values must lie in (0, 1], got {a}")
        if any(x <= y for x, y in zip(a, a[1:])):
            errors.append(f"alpha values must be distinct and descending, got {a}")
        if not self.T > 0:
            errors.append(f"T must be positive, got {self.T}")
        if not 0 < self.epsilon < 1:
            errors.append(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.box_policy not in BOX_POLICIES:
            errors.append(f"unknown box policy {self.box_policy!r}")
        if not self.delta > 0:
            errors.append(f"non-uniform decay needs delta > 0, got {self.delta}")
        if not self.u_data.analytic or not self.B_data.analytic:
            errors.append("scaled families need analytic (physical-space) generators")
        if errors:
            raise ConfigurationError("; ".join(errors))


@dataclass(frozen=True)
class NonuniformRow:
    alpha: float
    linear_ratio: float
    duhamel_bound: float
    simulated_ratio: float
    passed: bool
    within_bound: bool = False
    error: str = ""

    def row(self):
        return [self.alpha, self.linear_ratio, self.duhamel_bound, self.simulated_ratio,
                1.0 if self.passed else 0.0]


NONUNIFORM_COLUMNS = ("alpha", "linear_ratio", "duhamel_bound", "simulated_ratio", "pass")


def _scaled_run(cfg, alpha):
    fu = cfg.u_data.function(cfg.base_grid.n, cfg.base_grid.L)
    fB = cfg.B_data.function(cfg.base_grid.n, cfg.base_grid.L)
    grid, u0 = sample_scaled(fu, alpha, cfg.base_grid, cfg.box_policy)
    _, B0 = sample_scaled(fB, alpha, cfg.base_grid, cfg.box_policy)
    scfg = SolverConfig(dt=cfg.dt, T=cfg.T, dealias=cfg.dealias, nonlinear=cfg.nonlinear)
    return run(u0, B0, cfg.delta, scfg, grid, lq_orders=(4.0,))


def _row(cfg, profile, alpha):
    lin = heat_semigroup_norm(profile, alpha, cfg.T) / heat_semigroup_norm(profile, alpha, 0.0)
    try:
        series = _scaled_run(cfg, alpha)
    except MHDLabError as exc:
        return NonuniformRow(alpha, lin, math.nan, math.nan, False, False, str(exc))
    E0, ET = series.records[0].E_u, series.records[-1].E_u
    sim = math.sqrt(ET / E0)
    bound = float(duhamel_bound(series, cfg.T) / math.sqrt(E0))
    within = bool(abs(sim - lin) <= bound)
    passed = bool(lin - bound >= 1.0 - cfg.epsilon) and within
    return NonuniformRow(alpha, lin, bound, sim, passed, within)


def nonuniform_decay_experiment(cfg):
    """One table row per scale factor, ordered as ``cfg.alphas``.

    Rows are independent and run on ``cfg.threads`` worker threads; a
    failed simulation is reported in its row without aborting the others.
    """
    profile = field_profile(cfg.u_data, cfg.base_grid.n)
    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        rows = list(pool.map(lambda a: _row(cfg, profile, a), cfg.alphas))
    return rows


def nonuniform_verdict(rows):
    """Every row inside its Duhamel bound and the smallest-alpha row passing."""
    if not rows:
        return False
    smallest = min(rows, key=lambda r: r.alpha)
    return all(r.within_bound for r in rows) and smallest.passed


@dataclass(frozen=True)
class ProdiReport:
    phi0: float
    scaling_ratio: float  # phi(0) / (alpha^2 phi_base); nan without a base value
    sup_ratio: float  # sup_t phi(t) / phi(0)
    growth_constant: float  # smallest C with the n-dependent Prodi bound at all records
    alpha_threshold: float  # n = 3: largest alpha for which sup phi <= 2 phi(0) is implied
    n: int

    @property
    def scaling_ok(self):
        return math.isnan(self.scaling_ratio) or abs(self.scaling_ratio - 1.0) <= 1e-4

    @property
    def bounded(self):
        return self.sup_ratio <= 2.0


def prodi_bound_check(series, alpha, n, phi_base=None):
    """Check the gradient-energy bounds along a scaled-data run.

    ``n = 2``: reports the smallest ``C`` with
    ``phi(t) <= phi(0) exp(C int_0^t phi)`` at every record.
    ``n = 3``: reports the smallest ``C`` with
    ``1/phi(0) - 1/phi(t) <= C int_0^t phi`` and the scale factor below
    which that constant forces ``sup phi <= 2 phi(0)``.
    """
    recs = series.records
    if not recs:
        raise ConfigurationError("series has no records")
    phi = np.array([r.D_u + r.D_B for r in recs])
    if not np.all(np.isfinite(phi)):
        raise ConfigurationError("series lacks gradient norms")
    integ = np.array([r.diss_u_cum + r.diss_B_cum for r in recs])
    phi0 = float(phi[0])
    ratio = math.nan
    if phi_base is not None and phi_base > 0:
        ratio = phi0 / (alpha**2 * phi_base)
    if phi0 == 0:
        return ProdiReport(0.0, ratio, 0.0, 0.0, math.inf, n)
    sup_ratio = float(phi.max() / phi0)
    mask = integ > 0
    if n == 2:
        cands = np.log(phi[mask] / phi0) / integ[mask]
    else:
        cands = (1.0 / phi0 - 1.0 / phi[mask]) / integ[mask]
    C = float(max(0.0, cands.max(initial=0.0)))
    threshold = math.inf
    if n == 3 and C > 0:
        E0 = recs[0].E_u + recs[0].E_B
        total = E0 / (2.0 * min(1.0, series.delta))
        # phi0 scales like alpha^2: phi0(a) <= 1/(2 C total) keeps the bound below 2 phi0.
        threshold = alpha * math.sqrt(1.0 / (2.0 * C * total * phi0))
    return ProdiReport(phi0, ratio, sup_ratio, C, threshold, n)


@dataclass(frozen=True)
class OscillationReport:
    u_final_fraction: float
    M: float
    plateau_spread: float
    monotone: bool
    sup_maxB: float
    saturation: float
    series: Series = field(repr=False)

    def passed(self, u_fraction=0.1, spread=0.02, saturation=1e-3):
        return (self.monotone and self.u_final_fraction <= u_fraction and self.M > 0
                and self.plateau_spread <= spread * self.M and self.saturation < saturation)

    def summary(self):
        return (f"M={self.M:.17g} plateau_spread={self.plateau_spread:.17g} "
                f"u_final_fraction={self.u_final_fraction:.17g} sup_maxB={self.sup_maxB:.17g} "
                f"saturation={self.saturation:.17g} monotone={self.monotone}")


def compensated_oscillation_experiment(u0, B0, grid, T, dt, record_every=10, slack=1e-8,
                                       window=0.2, lq_orders=()):
    """Run without magnetic diffusion and summarize the late-time energies.

    ``M`` is the mean of ``||B||_2`` over the final ``window`` fraction of
    records and ``plateau_spread`` its max - min there.  ``saturation`` is
    the share of ``int_0^T ||grad u||^2`` gained over the last tenth of the
    run.  Monotonicity allows ``slack`` times the initial energy between
    consecutive records.
    """
    cfg = SolverConfig(dt=dt, T=T, dealias=True, record_every=record_every)
    series = run(u0, B0, 0.0, cfg, grid, lq_orders=lq_orders)
    recs = series.records
    total = np.array([r.E_u + r.E_B for r in recs])
    monotone = bool(np.all(np.diff(total) <= slack * total[0]))
    Eu0 = recs[0].E_u
    frac = math.sqrt(recs[-1].E_u / Eu0) if Eu0 > 0 else 0.0
    t = series.times
    late = t >= t[-1] - window * (t[-1] - t[0])
    normB = np.sqrt(series.column("E_B")[late])
    cum = series.column("diss_u_cum")
    if cum[-1] > 0:
        before = np.interp(0.9 * t[-1], t, cum)
        saturation = float((cum[-1] - before) / cum[-1])
    else:
        saturation = 0.0
    return OscillationReport(
        u_final_fraction=frac, M=float(normB.mean()), plateau_spread=float(np.ptp(normB)),
        monotone=monotone, sup_maxB=series.max_abs_B, saturation=saturation, series=series)


def oscillation_rows(series):
    return [[r.t, r.E_u, r.E_B] for r in series.records]


def with_threads(cfg, threads):
    return replace(cfg, threads=threads)

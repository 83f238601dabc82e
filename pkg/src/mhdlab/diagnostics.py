"""Scalar and spectral observables of an MHD run.

Everything here is a pure function of states (objects with ``t, u, B,
delta, grid``) or of a :class:`Series` produced by :func:`mhdlab.solver.run`.
Norms are box integrals (see :mod:`mhdlab.spectral`).
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, MissingSnapshotError
from .spectral import gradient_norm_sq, l2_norm_sq, to_physical

BASE_COLUMNS = (
    "t", "E_u", "E_B", "D_u", "D_B", "diss_u_cum", "diss_B_cum",
    "low_u", "high_u", "low_B", "high_B", "amp_ratio", "maxB",
)
SPLIT_WEIGHTS = ("gaussian_t", "gaussian_fixed")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Observables at one recorded time.

    ``diss_u_cum`` and ``diss_B_cum`` are the running integrals of ``D_u``
    and ``D_B`` (no factor 2, no diffusivity).  ``lq`` maps each configured
    exponent ``q`` to ``(||u||_q, ||B||_q)``.
    """

    t: float
    E_u: float
    E_B: float
    D_u: float
    D_B: float
    diss_u_cum: float
    diss_B_cum: float
    low_u: float
    high_u: float
    low_B: float
    high_B: float
    amp_ratio: float
    maxB: float
    lq: dict = field(default_factory=dict)

    @property
    def phi(self):
        """Gradient energy ``||grad u||^2 + ||grad B||^2``."""
        return self.D_u + self.D_B

    def row(self):
        values = [getattr(self, c) for c in BASE_COLUMNS]
        for q in sorted(self.lq):
            values.extend(self.lq[q])
        return values


@dataclass
class Series:
    """Output of a run: records, optional snapshots, and run metadata."""

    records: list
    delta: float
    grid: object
    dealias: bool = True
    nonlinear: bool = True
    snapshots: list = field(default_factory=list)
    max_abs_B: float = 0.0

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self):
        return self.column("t")

    def snapshot_at(self, t, tol=1e-9):
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise MissingSnapshotError(f"no snapshot stored at t={t}")


def _qname(q):
    return f"{float(q):g}"


def csv_columns(lq_orders=()):
    cols = list(BASE_COLUMNS)
    for q in sorted(lq_orders):
        cols += [f"uq{_qname(q)}", f"Bq{_qname(q)}"]
    return cols


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(fh, header, rows):
    """Comma-separated rows at 17 significant digits with a header line."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def series_csv(series):
    buf = io.StringIO()
    qs = sorted(series.records[0].lq) if series.records else []
    write_csv(buf, csv_columns(qs), (r.row() for r in series.records))
    return buf.getvalue()


def energy(state):
    """Squared L2 norms ``(||u||^2, ||B||^2)``."""
    return l2_norm_sq(state.u, state.grid), l2_norm_sq(state.B, state.grid)


def gradient_energies(state):
    return gradient_norm_sq(state.u, state.grid), gradient_norm_sq(state.B, state.grid)


def dissipation_density(v_hat, grid):
    """Per-mode ``L^n |k|^2 |v_hat(k)|^2``; sums to the box integral of ``|grad v|^2``."""
    return grid.volume * grid.k2 * np.sum(np.abs(v_hat) ** 2, axis=0)


def dissipation_increment(before, after, h):
    """``int |grad v|^2`` over one step from per-mode densities at its ends.

    Each mode is integrated as the exponential through its end values (the
    logarithmic mean), which is exact for heat-flow decay and reduces to the
    trapezoid rule when the end values are close.
    """
    pos = (before > 0) & (after > 0)
    a, b = before[pos], after[pos]
    d = np.log(b / a)
    close = np.abs(d) < 1e-6
    lm = np.empty_like(a)
    lm[close] = 0.5 * (a[close] + b[close]) * (1.0 - d[close] ** 2 / 12.0)
    far = ~close
    lm[far] = (b[far] - a[far]) / d[far]
    return float(h * np.sum(lm))


def split_weight(grid, weight, t):
    if weight == "gaussian_t":
        return np.exp(-grid.k2 * t)
    if weight == "gaussian_fixed":
        return np.exp(-grid.k2)
    raise ConfigurationError(f"unknown split weight {weight!r}; choose from {SPLIT_WEIGHTS}")


def frequency_split(state, weight="gaussian_t"):
    """Low/high frequency norms ``||phi v||, ||(1 - phi) v||`` for u and B."""
    g = state.grid
    phi = split_weight(g, weight, state.t)
    out = []
    for v in (state.u, state.B):
        out.append(np.sqrt(l2_norm_sq(phi * v, g)))
        out.append(np.sqrt(l2_norm_sq((1.0 - phi) * v, g)))
    return tuple(out)


def _continuum_amplitude(v_hat, grid):
    # Fourier-series coefficient times box volume approximates the
    # whole-space transform  int exp(-i k x) v(x) dx.
    return grid.volume * np.sqrt(np.sum(np.abs(v_hat) ** 2, axis=0))


def amplitude_bound_ratio(state):
    """``max_{k != 0} |u_hat(k)| / (1 + 1/|k|)`` in continuum normalization."""
    g = state.grid
    amp = _continuum_amplitude(state.u, g)
    nz = g.k2 > 0
    return float(np.max(amp[nz] / (1.0 + 1.0 / g.kmag[nz]), initial=0.0))


def modewise_amplitude_bound(initial, state, constant=None):
    """Mode-wise bound ``|u0_hat| + C (1 - exp(-|k|^2 t)) / |k|`` at ``state.t``.

    ``C`` defaults to the initial total energy, which bounds ``|H(k)|/|k|``
    for the discrete system (``|FT(u u^T)| <= ||u||_2^2``).
    """
    g = state.grid
    if constant is None:
        constant = sum(energy(initial))
    nz = g.k2 > 0
    amp0 = _continuum_amplitude(initial.u, g)[nz]
    k = g.kmag[nz]
    dt = state.t - initial.t
    return amp0 + constant * (1.0 - np.exp(-k**2 * dt)) / k


def modewise_amplitude_bound_excess(initial, state, constant=None):
    """Largest ratio of ``|u_hat(k, t)|`` to :func:`modewise_amplitude_bound`."""
    g = state.grid
    nz = g.k2 > 0
    amp = _continuum_amplitude(state.u, g)[nz]
    bound = modewise_amplitude_bound(initial, state, constant)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, amp / bound, np.where(amp > 0, np.inf, 0.0))
    return float(np.max(r, initial=0.0))


def lq_norm(v_hat, grid, q):
    """Box Lq norm of the Euclidean magnitude, by collocation quadrature."""
    if not q >= 2 or not np.isfinite(q):
        raise ConfigurationError(f"Lq exponent must be finite and >= 2, got {q}")
    v = to_physical(v_hat, grid)
    mag = np.sqrt(np.sum(v**2, axis=0))
    return float((grid.dx**grid.n * np.sum(mag**q)) ** (1.0 / q))


def max_magnitude(v_hat, grid):
    v = to_physical(v_hat, grid)
    return float(np.sqrt(np.max(np.sum(v**2, axis=0))))


def make_record(state, diss_u_cum=0.0, diss_B_cum=0.0, lq_orders=(), split="gaussian_t",
                grads=None, maxB=None):
    E_u, E_B = energy(state)
    D_u, D_B = gradient_energies(state) if grads is None else grads
    lo_u, hi_u, lo_B, hi_B = frequency_split(state, split)
    if maxB is None:
        maxB = max_magnitude(state.B, state.grid)
    lq = {float(q): (lq_norm(state.u, state.grid, q), lq_norm(state.B, state.grid, q))
          for q in lq_orders}
    return DiagnosticsRecord(
        t=float(state.t), E_u=E_u, E_B=E_B, D_u=D_u, D_B=D_B,
        diss_u_cum=float(diss_u_cum), diss_B_cum=float(diss_B_cum),
        low_u=lo_u, high_u=hi_u, low_B=lo_B, high_B=hi_B,
        amp_ratio=amplitude_bound_ratio(state), maxB=maxB, lq=lq,
    )


def energy_balance_residual(series):
    """Max relative defect of ``E_u + E_B + 2 int D_u + 2 delta int D_B = E(0)``."""
    if not series.records:
        raise ValueError("empty series")
    r0 = series.records[0]
    rhs = r0.E_u + r0.E_B
    worst = 0.0
    for r in series.records:
        lhs = r.E_u + r.E_B + 2.0 * r.diss_u_cum + 2.0 * series.delta * r.diss_B_cum
        worst = max(worst, abs(lhs - rhs))
    return worst / rhs if rhs > 0 else worst


@dataclass(frozen=True)
class SplittingSchedule:
    """Fourier-splitting weight ``E(t)`` and radius ``G(t)`` with ``E' = 2 E G^2``.

    ``variant="polynomial"`` uses exponent ``param > 3``; ``"exponential"``
    uses rate ``param > 0``.
    """

    variant: str
    param: float

    def __post_init__(self):
        if self.variant == "polynomial":
            if not self.param > 3:
                raise ConfigurationError(f"polynomial schedule needs exponent > 3, got {self.param}")
        elif self.variant == "exponential":
            if not self.param > 0:
                raise ConfigurationError(f"exponential schedule needs rate > 0, got {self.param}")
        else:
            raise ConfigurationError(f"unknown schedule variant {self.variant!r}")


def splitting_schedule(t, sch):
    if t < 0:
        raise ConfigurationError(f"schedule time must be >= 0, got {t}")
    if sch.variant == "polynomial":
        a = sch.param
        return (1.0 + t) ** a, np.sqrt(a / (2.0 * (1.0 + t)))
    return np.exp(sch.param * t), np.sqrt(sch.param / 2.0)


def gaussian_mollifier(width=1.0):
    """Fourier multiplier ``exp(-width^2 |k|^2)``."""
    return lambda grid: np.exp(-(width**2) * grid.k2)


def unit_mollifier(grid):
    return np.ones_like(grid.k2)


@dataclass(frozen=True)
class MollifiedCheck:
    lhs: float
    heat_term: float
    nonlinear_term: float

    @property
    def rhs(self):
        return self.heat_term + self.nonlinear_term

    @property
    def residual(self):
        return self.lhs - self.rhs


def _pairing(f_hat, g_hat, grid):
    return float(grid.volume * np.sum(np.real(f_hat * np.conj(g_hat))))


def mollified_energy_check(series, s, t, mollifier=unit_mollifier):
    """Evaluate the heat-propagated mollified energy inequality on ``[s, t]``.

    ``lhs = ||phi u(t)||^2`` and the right side is
    ``||exp(-|k|^2 (t-s)) phi u(s)||^2`` plus twice the trapezoid integral of
    ``|<(u.grad)u, g>| + |<(B.grad)B, g>|`` with
    ``g = exp(-2|k|^2 (t - tau)) phi^2 u(tau)`` over the stored snapshots.
    """
    from .solver import advective_terms

    if t < s:
        raise ConfigurationError(f"need s <= t, got s={s}, t={t}")
    g = series.grid
    start, end = series.snapshot_at(s), series.snapshot_at(t)
    phi = mollifier(g)
    lhs = l2_norm_sq(phi * end.u, g)
    heat = l2_norm_sq(np.exp(-g.k2 * (t - s)) * phi * start.u, g)
    nodes = sorted(
        (sn for sn in series.snapshots if s - 1e-12 <= sn.t <= t + 1e-12),
        key=lambda sn: sn.t,
    )
    vals = []
    for sn in nodes:
        w = np.exp(-2.0 * g.k2 * (t - sn.t)) * phi**2 * sn.u
        if series.nonlinear:
            uu, BB = advective_terms(sn, series.dealias)
            vals.append(abs(_pairing(uu, w, g)) + abs(_pairing(BB, w, g)))
        else:
            vals.append(0.0)
    taus = np.array([sn.t for sn in nodes])
    nonlin = 2.0 * float(np.trapezoid(vals, taus)) if len(nodes) > 1 else 0.0
    return MollifiedCheck(lhs=lhs, heat_term=heat, nonlinear_term=nonlin)


def kato_weight(n, p, q):
    return (n / p - n / q) / 2.0


def kato_observable(series, p, q, t_min=1.0):
    """``(t, t^((n/p - n/q)/2) (||u||_q + ||B||_q))`` for records with ``t >= t_min``."""
    if not t_min > 0:
        raise ConfigurationError(f"t_min must be positive, got {t_min}")
    q = float(q)
    if q < 2:
        raise ConfigurationError(f"Lq exponent must be >= 2, got {q}")
    a = kato_weight(series.grid.n, p, q)
    out = []
    for r in series.records:
        if r.t < t_min:
            continue
        if q not in r.lq:
            raise MissingSnapshotError(f"series has no L{_qname(q)} norms recorded")
        uq, Bq = r.lq[q]
        out.append((r.t, r.t**a * (uq + Bq)))
    return out

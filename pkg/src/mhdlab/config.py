"""Run-configuration files.

Format: UTF-8 ``key = value`` lines, ``#`` comments, optional ``[section]``
headers.  Key names are unique across sections, so a key may also be given
before the first header.  Lists are comma-separated.  Every problem found is
reported with its line number; parsing never stops at the first error.
"""

import math
from dataclasses import dataclass, field, fields

from .errors import ConfigurationError
from .experiments import BOX_POLICIES
from .fields import KINDS, FieldSpec
from .solver import SCHEMES, SolverConfig
from .spectral import Grid

EXPERIMENTS = ("simulate", "nonuniform", "oscillation", "kato", "picard-validate")
_U64 = 2**64


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _int(s):
    return int(s, 10)


def _float(s):
    x = float(s)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {s!r}")
    return x


def _floats(s):
    return tuple(_float(p.strip()) for p in s.split(",") if p.strip())


def _str(s):
    return s


def _choice(options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


# key -> (section, parser)
SCHEMA = {
    "experiment": ("run", _choice(EXPERIMENTS)),
    "out": ("run", _str),
    "seed": ("run", _int),
    "n": ("grid", _int),
    "N": ("grid", _int),
    "L": ("grid", _float),
    "dt": ("solver", _float),
    "T": ("solver", _float),
    "delta": ("solver", _float),
    "dealias": ("solver", _bool),
    "record_every": ("solver", _int),
    "snapshot_every": ("solver", _int),
    "scheme": ("solver", _choice(SCHEMES)),
    "picard_iterations": ("solver", _int),
    "nonlinear": ("solver", _bool),
    "data": ("data", _choice(KINDS)),
    "amplitude": ("data", _float),
    "width": ("data", _float),
    "center": ("data", _floats),
    "mode": ("data", _int),
    "k_lo": ("data", _float),
    "k_hi": ("data", _float),
    "B_data": ("data", _choice(KINDS)),
    "B_amplitude": ("data", _float),
    "B_width": ("data", _float),
    "B_center": ("data", _floats),
    "B_mode": ("data", _int),
    "B_k_lo": ("data", _float),
    "B_k_hi": ("data", _float),
    "alphas": ("experiment", _floats),
    "epsilon": ("experiment", _float),
    "box_policy": ("experiment", _choice(BOX_POLICIES)),
    "lq": ("experiment", _floats),
    "p": ("experiment", _float),
    "t_min": ("experiment", _float),
    "window": ("experiment", _float),
}
SECTIONS = ("run", "grid", "solver", "data", "experiment")
REQUIRED = ("n", "N", "L", "dt", "T", "delta", "data")


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a configuration file."""

    n: int
    N: int
    L: float
    dt: float
    T: float
    delta: float
    u_data: FieldSpec
    B_data: FieldSpec = field(default_factory=FieldSpec)
    experiment: str = "simulate"
    seed: int = 0
    out: str = "out"
    dealias: bool = True
    record_every: int = 1
    snapshot_every: int = 0
    scheme: str = "if-rk4"
    picard_iterations: int = 6
    nonlinear: bool = True
    alphas: tuple = ()
    epsilon: float = 0.05
    box_policy: str = "fixed-dx"
    lq: tuple = ()
    p: float = 2.0
    t_min: float = 1.0
    window: float = 0.2

    @property
    def grid(self):
        return Grid(self.n, self.N, self.L)

    def solver_config(self):
        return SolverConfig(dt=self.dt, T=self.T, dealias=self.dealias, scheme=self.scheme,
                            picard_iterations=self.picard_iterations,
                            record_every=self.record_every, nonlinear=self.nonlinear,
                            snapshot_every=self.snapshot_every)

    def to_text(self):
        """Canonical text form; ``parse_config(cfg.to_text()) == cfg``."""
        values = _flatten(self)
        lines = []
        for section in SECTIONS:
            lines.append(f"[{section}]")
            for key, (sec, _) in SCHEMA.items():
                if sec == section:
                    lines.append(f"{key} = {_render(values[key])}")
            lines.append("")
        return "\n".join(lines)


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


_SPEC_KEYS = ("amplitude", "width", "center", "mode", "k_lo", "k_hi")


def _flatten(cfg):
    out = {f.name: getattr(cfg, f.name) for f in fields(cfg)
           if f.name not in ("u_data", "B_data")}
    out["data"] = cfg.u_data.kind
    out["B_data"] = cfg.B_data.kind
    for k in _SPEC_KEYS:
        out[k] = getattr(cfg.u_data, k)
        out["B_" + k] = getattr(cfg.B_data, k)
    return out


def _lex(text):
    """Yield ``(lineno, key, raw_value)`` and collect syntax errors."""
    errors, items = [], []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {raw.strip()!r}")
                continue
            section = line[1:-1].strip()
            if section not in SECTIONS:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        items.append((lineno, section, key, value))
    return items, errors


def _validate(v, line_of, skip=()):
    """Invariant checks on the typed values; returns error strings.

    Keys in ``skip`` already failed to parse and are not reported again.
    """
    errors = []

    def bad(key, msg):
        if key in skip:
            return
        where = f"line {line_of[key]}: " if key in line_of else ""
        errors.append(f"{where}{key}: {msg}")

    if v["n"] not in (2, 3):
        bad("n", f"must be 2 or 3, got {v['n']}")
    if v["N"] < 8 or v["N"] % 2:
        bad("N", f"must be an even integer >= 8, got {v['N']}")
    if not v["L"] > 0:
        bad("L", f"must be positive, got {v['L']}")
    if not v["dt"] > 0:
        bad("dt", f"must be positive, got {v['dt']}")
    if not v["T"] > 0:
        bad("T", f"must be positive, got {v['T']}")
    if v["delta"] < 0:
        bad("delta", f"must be >= 0, got {v['delta']}")
    if v["delta"] == 0 and not v["dealias"]:
        bad("dealias", "runs with delta = 0 require dealias = true")
    if v["record_every"] < 1:
        bad("record_every", f"must be >= 1, got {v['record_every']}")
    if v["snapshot_every"] < 0:
        bad("snapshot_every", f"must be >= 0, got {v['snapshot_every']}")
    if v["picard_iterations"] < 1:
        bad("picard_iterations", f"must be >= 1, got {v['picard_iterations']}")
    if not 0 <= v["seed"] < _U64:
        bad("seed", f"must be an unsigned 64-bit integer, got {v['seed']}")
    for q in v["lq"]:
        if q < 2:
            bad("lq", f"exponents must be >= 2, got {q}")
    for prefix in ("", "B_"):
        if v[prefix + "amplitude"] < 0:
            bad(prefix + "amplitude", "must be >= 0")
        if not v[prefix + "width"] > 0:
            bad(prefix + "width", "must be positive")
        if v[prefix + "k_lo"] > v[prefix + "k_hi"]:
            bad(prefix + "k_hi", "must be >= k_lo")
        c = v[prefix + "center"]
        if c and len(c) != v["n"]:
            bad(prefix + "center", f"needs {v['n']} entries, got {len(c)}")

    kind = v["experiment"]
    if kind == "nonuniform":
        a = v["alphas"]
        if not a:
            bad("alphas", "required for the nonuniform experiment")
        elif any(not 0 < x <= 1 for x in a) or any(x <= y for x, y in zip(a, a[1:])):
            bad("alphas", f"must be distinct, descending and in (0, 1], got {list(a)}")
        if not 0 < v["epsilon"] < 1:
            bad("epsilon", f"must lie in (0, 1), got {v['epsilon']}")
        if not v["delta"] > 0:
            bad("delta", "the nonuniform experiment needs delta > 0")
        if v["data"] != "gaussian-bump":
            bad("data", "the nonuniform experiment needs gaussian-bump velocity data")
        if v["B_data"] == "random-solenoidal":
            bad("B_data", "scaled families need a physical-space generator")
    if kind == "oscillation":
        if v["delta"] != 0:
            bad("delta", "the oscillation experiment runs with delta = 0")
        if not 0 < v["window"] <= 1:
            bad("window", f"must lie in (0, 1], got {v['window']}")
    if kind == "kato":
        if not v["lq"]:
            bad("lq", "the kato experiment needs at least one exponent")
        if v["p"] < 1:
            bad("p", f"must be >= 1, got {v['p']}")
        if not 0 < v["t_min"] < v["T"]:
            bad("t_min", f"must lie in (0, T), got {v['t_min']}")
    if kind == "picard-validate":
        if not v["delta"] > 0:
            bad("delta", "Picard iteration needs delta > 0")
        if v["picard_iterations"] < 3:
            bad("picard_iterations", "need at least 3 iterations to measure contraction")
    return errors


def parse_config(text):
    """Parse and validate; raises :class:`ConfigurationError` listing every problem."""
    items, errors = _lex(text)
    defaults = _flatten(RunConfig(n=2, N=8, L=1.0, dt=1.0, T=1.0, delta=1.0,
                                  u_data=FieldSpec()))
    values, line_of, failed = dict(defaults), {}, set()
    for lineno, section, key, raw in items:
        if key not in SCHEMA:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        home, parse = SCHEMA[key]
        if section is not None and section != home:
            errors.append(f"line {lineno}: key {key!r} belongs in [{home}], not [{section}]")
            continue
        if key in line_of:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {line_of[key]})")
            continue
        line_of[key] = lineno
        try:
            values[key] = parse(raw)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: {exc}")
            failed.add(key)
    for key in REQUIRED:
        if key not in line_of:
            errors.append(f"missing required key {key!r}")
    errors.extend(_validate(values, line_of, skip=failed))
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
    specs = {}
    for prefix, name in (("", "u_data"), ("B_", "B_data")):
        specs[name] = FieldSpec(kind=values[prefix + "data"],
                                **{k: values[prefix + k] for k in _SPEC_KEYS})
    plain = {k: values[k] for k in (f.name for f in fields(RunConfig))
             if k not in ("u_data", "B_data")}
    return RunConfig(u_data=specs["u_data"], B_data=specs["B_data"], **plain)

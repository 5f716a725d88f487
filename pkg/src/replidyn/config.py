"""Flat key=value experiment configuration with dotted section prefixes.

The format is intentionally minimal so sweep summaries stay diffable:

    grid.n = 201
    init.mass = 1.5
    solver.epsilon = 1e-3

Unknown keys, type mismatches, and invariant violations raise ConfigError
carrying the key name and line number.  Defaults are applied for everything
not mentioned.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ConfigError", "ExperimentConfig", "SweepSpec", "parse_config",
           "SWEEP_AXES", "config_to_text"]


class ConfigError(ValueError):
    pass


# key -> (type kind, default).  Kinds: int, float, str, bool, ints, floats.
_SCHEMA: dict[str, tuple[str, object]] = {
    "grid.dimension": ("int", 1),
    "grid.extents": ("floats", [1.0]),
    "grid.n": ("ints", [201]),
    "init.profile": ("str", "torsion"),
    "init.mass": ("float", 1.0),
    "init.mollify_radius": ("float", 0.0),   # 0 = auto
    "init.margin_rho": ("float", 0.0),       # 0 = auto
    "init.margin_theta": ("float", 0.0),     # 0 = auto
    "init.bound_l": ("float", 0.0),          # 0 = auto
    "solver.epsilon": ("float", 1e-3),
    "solver.dt_init": ("float", 1e-3),
    "solver.dt_min": ("float", 1e-12),
    "solver.dt_max": ("float", 5e-2),
    "solver.cfl_c": ("float", 0.9),
    "solver.t_end": ("float", 5.0),
    "solver.sup_cap": ("float", 0.0),        # 0 = auto
    "solver.scheme": ("str", "semi-implicit"),
    "solver.snapshot_stride": ("int", 10),
    "solver.trace_stride": ("int", 1),
    "solver.decay_threshold": ("float", 0.05),
    "solver.reaction_cap_c": ("float", 0.5),
    "diagnostics.enabled": ("bool", True),
    "diagnostics.margin": ("float", 0.25),
    "diagnostics.q": ("float", 0.5),
    "diagnostics.mass_ode_tol": ("float", 0.05),
    "diagnostics.h_identity_tol": ("float", 0.05),
    "diagnostics.bound_slack": ("float", 0.1),
    "diagnostics.phi_norm_slack": ("float", 0.05),
    "replicator.enabled": ("bool", False),
    "replicator.strategies": ("int", 2),
    "replicator.payoff": ("str", "coordination"),
    "replicator.sigma": ("float", 0.05),
    "replicator.grid_n": ("int", 201),
    "replicator.t_end": ("float", 10.0),
    "replicator.dt": ("float", 0.01),
    "replicator.p0": ("floats", []),
    "output.dir": ("str", "out"),
    "seed": ("int", 0),
}

SWEEP_AXES = {
    "initial_mass": "init.mass",
    "epsilon": "solver.epsilon",
    "n": "grid.n",
    "dt_init": "solver.dt_init",
    "margin": "diagnostics.margin",
}


@dataclass
class ExperimentConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str):
        return self.values[key]

    def with_value(self, key: str, value) -> "ExperimentConfig":
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        new = dict(self.values)
        new[key] = value
        cfg = ExperimentConfig(new)
        _validate(cfg)
        return cfg


@dataclass
class SweepSpec:
    base: ExperimentConfig
    axis: str
    values: list
    parallelism: int = 1

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(
                f"unknown sweep axis {self.axis!r}; valid axes: {sorted(SWEEP_AXES)}"
            )
        if not self.values:
            raise ConfigError("sweep values list must be nonempty")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def configs(self) -> list[ExperimentConfig]:
        key = SWEEP_AXES[self.axis]
        out = []
        for v in self.values:
            if key == "grid.n":
                out.append(self.base.with_value(key, [int(v)] * self.base["grid.dimension"]))
            else:
                out.append(self.base.with_value(key, float(v)))
        return out


def _convert(key: str, kind: str, raw: str, lineno: int):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return [int(tok) for tok in raw.split()]
        if kind == "floats":
            return [float(tok) for tok in raw.split()]
    except ValueError:
        raise ConfigError(
            f"line {lineno}: value {raw!r} for key {key!r} is not a valid {kind}"
        ) from None
    raise ConfigError(f"line {lineno}: unhandled kind {kind}")


def _fail(key: str, msg: str, lineno: int | None = None):
    where = f"line {lineno}: " if lineno is not None else ""
    raise ConfigError(f"{where}key {key!r}: {msg}")


def _validate(cfg: ExperimentConfig, lines: dict | None = None) -> None:
    lines = lines or {}
    v = cfg.values

    def ln(key):
        return lines.get(key)

    dim = v["grid.dimension"]
    if dim not in (1, 2):
        _fail("grid.dimension", f"must be 1 or 2, got {dim}", ln("grid.dimension"))
    for key in ("grid.extents", "grid.n"):
        vals = v[key]
        if len(vals) == 1 and dim == 2:
            v[key] = vals * 2
        elif len(vals) != dim:
            _fail(key, f"expected {dim} entries, got {len(vals)}", ln(key))
    if any(e <= 0 for e in v["grid.extents"]):
        _fail("grid.extents", "extents must be positive", ln("grid.extents"))
    if any(n < 3 for n in v["grid.n"]):
        _fail("grid.n", "need at least 3 nodes per axis", ln("grid.n"))
    if not (0.0 < v["solver.epsilon"] < 1.0):
        _fail("solver.epsilon", f"must lie in (0,1), got {v['solver.epsilon']}",
              ln("solver.epsilon"))
    if v["init.mass"] <= 0:
        _fail("init.mass", "must be positive", ln("init.mass"))
    if v["init.profile"] not in ("torsion", "constructed"):
        _fail("init.profile", f"unknown profile {v['init.profile']!r}",
              ln("init.profile"))
    if not (0 < v["solver.dt_min"] <= v["solver.dt_init"] <= v["solver.dt_max"]):
        _fail("solver.dt_init", "need 0 < dt_min <= dt_init <= dt_max",
              ln("solver.dt_init"))
    if not (0 < v["solver.cfl_c"] <= 1.0):
        _fail("solver.cfl_c", "must lie in (0,1]", ln("solver.cfl_c"))
    if v["solver.scheme"] not in ("semi-implicit", "explicit"):
        _fail("solver.scheme", f"unknown scheme {v['solver.scheme']!r}",
              ln("solver.scheme"))
    if v["solver.t_end"] <= 0:
        _fail("solver.t_end", "must be positive", ln("solver.t_end"))
    if v["solver.sup_cap"] < 0:
        _fail("solver.sup_cap", "must be >= 0 (0 selects the automatic cap)",
              ln("solver.sup_cap"))
    for key in ("solver.snapshot_stride", "solver.trace_stride"):
        if v[key] < 1:
            _fail(key, "must be a positive integer", ln(key))
    if not (0 < v["solver.reaction_cap_c"] <= 0.5):
        _fail("solver.reaction_cap_c", "must lie in (0, 0.5]",
              ln("solver.reaction_cap_c"))
    if not (0 < v["diagnostics.q"] < 1):
        _fail("diagnostics.q", "must lie in (0,1)", ln("diagnostics.q"))
    if v["diagnostics.margin"] <= 0:
        _fail("diagnostics.margin", "must be positive", ln("diagnostics.margin"))
    if v["replicator.enabled"]:
        if v["replicator.strategies"] < 2:
            _fail("replicator.strategies", "need at least 2 strategies",
                  ln("replicator.strategies"))
        if v["replicator.payoff"] not in ("coordination", "kernel", "identity"):
            _fail("replicator.payoff", f"unknown payoff {v['replicator.payoff']!r}",
                  ln("replicator.payoff"))
        if v["replicator.dt"] <= 0 or v["replicator.t_end"] <= 0:
            _fail("replicator.dt", "time step and horizon must be positive",
                  ln("replicator.dt"))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat key=value configuration."""
    values = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in _SCHEMA.items()}
    lines_seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        kind, _ = _SCHEMA[key]
        values[key] = _convert(key, kind, raw, lineno)
        lines_seen[key] = lineno
    cfg = ExperimentConfig(values)
    _validate(cfg, lines_seen)
    return cfg


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize back to the flat format (stable key order)."""
    out = []
    for key in _SCHEMA:
        val = cfg.values[key]
        if isinstance(val, list):
            rendered = " ".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        elif isinstance(val, bool):
            rendered = "true" if val else "false"
        elif isinstance(val, float):
            rendered = repr(val)
        else:
            rendered = str(val)
        out.append(f"{key} = {rendered}")
    return "\n".join(out) + "\n"

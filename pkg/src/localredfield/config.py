"""INI experiment configuration: parsing, validation and round-trip serialization.

Example::

    [model]
    kind = xxz
    energy_unit = h
    L = 6
    J = 1.0

    [bath:left]
    site = first
    family = ohmic
    gamma = 0.25
    T = 2.2

    [method]
    methods = exact-redfield, local-redfield:4
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .bath import BathError, BathFamily, BathSpec
from .experiments import Method, OpenSystem
from .models import (SIGMA_X, SIGMA_Z, BoseHubbardSpec, XxzSpec, bose_hubbard_chain,
                     exchange_channels, hermitian_channel, xxz_chain)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending section and key."""


MODEL_KEYS = {
    "xxz": {"L": int, "J": float, "Delta": float, "h": float, "delta": float},
    "bose-hubbard": {"L": int, "J": float, "U": float, "trap": float, "n_cut": int},
}
SWEEP_PARAMETERS = ("T", "eps0", "order", "J", "gamma")
OBSERVABLES = ("populations", "coherences", "magnetization", "currents", "purity",
               "energy", "min_eig", "trace")


@dataclass(frozen=True)
class BathConfig:
    name: str
    site: str
    family: str
    gamma: float
    T: float
    operator: str = "sigma_x"
    E_D: Optional[float] = None
    mu: Optional[float] = None
    mu_over_T: Optional[float] = None


@dataclass(frozen=True)
class MethodEntry:
    method: str
    order: int = 1
    eps0: Optional[float] = None

    def label(self) -> str:
        out = f"{self.method}:{self.order}"
        return out if self.eps0 is None else f"{out}:{self.eps0!r}"


@dataclass(frozen=True)
class RunConfig:
    initial_state: str = "x-polarized"
    t_max: float = 4.0
    n_times: int = 200
    tau_r: Optional[float] = None
    ss_method: str = "auto"
    ss_tol: float = 1e-10
    rtol: float = 1e-8
    atol: float = 1e-10
    observables: tuple = ("populations", "magnetization", "currents", "purity")


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class TrajectoryOptions:
    n_traj: int = 100
    seed: int = 0
    dt_max: float = math.inf
    jump_tol: float = 1e-8
    refine_jumps: bool = True
    record_jumps: bool = False


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    format: str = "csv"
    prefix: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str
    energy_unit: str
    model: tuple  # sorted (key, value) pairs
    baths: tuple
    methods: tuple
    run: RunConfig = RunConfig()
    sweep: Optional[SweepConfig] = None
    trajectories: TrajectoryOptions = TrajectoryOptions()
    output: OutputConfig = OutputConfig()

    @property
    def model_params(self) -> dict:
        return dict(self.model)

    @property
    def L(self) -> int:
        return int(self.model_params["L"])

    def with_parameter(self, name: str, value) -> "ExperimentConfig":
        """Copy with one sweep parameter replaced.

        ``T`` rescales all bath temperatures so that the first bath has T = value.
        """
        if name == "T":
            scale = float(value) / self.baths[0].T
            baths = tuple(replace(b, T=b.T * scale) for b in self.baths)
            return replace(self, baths=baths)
        if name == "gamma":
            return replace(self, baths=tuple(replace(b, gamma=float(value)) for b in self.baths))
        if name in ("eps0", "order"):
            conv = float if name == "eps0" else int
            return replace(self, methods=tuple(replace(m, **{name: conv(value)}) for m in self.methods))
        if name in self.model_params:
            params = dict(self.model)
            params[name] = MODEL_KEYS[self.model_kind][name](value)
            return replace(self, model=tuple(sorted(params.items())))
        raise ConfigError(f"[sweep] parameter: cannot sweep {name!r}")

    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.run.t_max, self.run.n_times)

    def tau_r(self) -> float:
        if self.run.tau_r is not None:
            return self.run.tau_r
        gammas = [b.gamma for b in self.baths if b.gamma > 0]
        if not gammas:
            raise ConfigError("[run] tau_r is required when no bath is coupled")
        return 1.0 / gammas[0]

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


# parsing -------------------------------------------------------------------

def _get(section, key, conv, default=None, required=False):
    name = section.name
    if key not in section:
        if required:
            raise ConfigError(f"[{name}] missing required field {key!r}")
        return default
    raw = section[key].strip()
    try:
        if conv is bool:
            return section.getboolean(key)
        if conv is float and raw.lower() in ("inf", "infinity"):
            return math.inf
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{name}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _float_list(section, key) -> tuple:
    raw = section[key]
    try:
        return tuple(float(x) for x in raw.replace("\n", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: expected comma-separated numbers, got {raw!r}") from None


def _grid(section) -> tuple:
    if "values" in section:
        vals = _float_list(section, "values")
    elif "grid" in section:
        raw = section["grid"].strip()
        parts = raw.split(":")
        try:
            kind, lo, hi, n = parts[0], float(parts[1]), float(parts[2]), int(parts[3])
        except (IndexError, ValueError):
            raise ConfigError(f"[sweep] grid = {raw!r}: expected lin:lo:hi:n or log:lo:hi:n") from None
        if kind == "lin":
            vals = tuple(float(x) for x in np.linspace(lo, hi, n))
        elif kind == "log":
            if lo <= 0 or hi <= 0:
                raise ConfigError("[sweep] grid: log grid needs positive bounds")
            vals = tuple(float(x) for x in np.geomspace(lo, hi, n))
        else:
            raise ConfigError(f"[sweep] grid: unknown spacing {kind!r}")
    else:
        raise ConfigError("[sweep] needs 'values' or 'grid'")
    if not vals:
        raise ConfigError("[sweep] grid is empty")
    return vals


def parse_method_entry(text: str) -> MethodEntry:
    parts = [p.strip() for p in text.strip().split(":")]
    try:
        method = Method(parts[0]).value
    except ValueError:
        valid = ", ".join(m.value for m in Method)
        raise ConfigError(f"[method] unknown method {parts[0]!r} (valid: {valid})") from None
    try:
        default = 0 if method in ("exact-redfield", "standard-local-lindblad") else 1
        order = int(parts[1]) if len(parts) > 1 and parts[1] else default
        eps0 = float(parts[2]) if len(parts) > 2 and parts[2] else None
    except ValueError:
        raise ConfigError(f"[method] cannot parse {text!r}; expected name[:order[:eps0]]") from None
    if order < 0 or len(parts) > 3:
        raise ConfigError(f"[method] cannot parse {text!r}; expected name[:order[:eps0]]")
    return MethodEntry(method, order, eps0)


def _parse_bath(name: str, sec) -> BathConfig:
    family = _get(sec, "family", str, required=True).strip()
    if family not in {f.value for f in BathFamily}:
        raise ConfigError(f"[{sec.name}] family = {family!r}: expected ohmic, drude or reservoir")
    default_op = "exchange" if family == "reservoir" else "sigma_x"
    cfg = BathConfig(
        name=name,
        site=_get(sec, "site", str, required=True).strip(),
        family=family,
        gamma=_get(sec, "gamma", float, required=True),
        T=_get(sec, "T", float, required=True),
        operator=_get(sec, "operator", str, default_op).strip(),
        E_D=_get(sec, "E_D", float),
        mu=_get(sec, "mu", float),
        mu_over_T=_get(sec, "mu_over_T", float),
    )
    if cfg.gamma < 0:
        raise ConfigError(f"[{sec.name}] gamma must be >= 0, got {cfg.gamma}")
    if cfg.operator not in ("sigma_x", "sigma_z", "exchange"):
        raise ConfigError(f"[{sec.name}] operator = {cfg.operator!r}: expected sigma_x, sigma_z or exchange")
    if (cfg.operator == "exchange") != (family == "reservoir"):
        raise ConfigError(f"[{sec.name}] operator: reservoirs couple by 'exchange', other baths by a Hermitian operator")
    if family == "drude" and cfg.E_D is None:
        raise ConfigError(f"[{sec.name}] missing required field 'E_D' for a Drude-Lorentz bath")
    if family == "reservoir" and (cfg.mu is None) == (cfg.mu_over_T is None):
        raise ConfigError(f"[{sec.name}] reservoir needs exactly one of 'mu' or 'mu_over_T'")
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case sensitive (T, E_D, Delta vs delta)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"model", "method", "run", "sweep", "trajectories", "output"}
    for name in cp.sections():
        if name not in known and not name.startswith("bath:"):
            raise ConfigError(f"unknown section [{name}]")
    if "model" not in cp:
        raise ConfigError("missing [model] section")
    msec = cp["model"]
    kind = _get(msec, "kind", str, required=True).strip()
    if kind not in MODEL_KEYS:
        raise ConfigError(f"[model] kind = {kind!r}: expected xxz or bose-hubbard")
    unit = _get(msec, "energy_unit", str, required=True).strip()
    params = {}
    for key in msec:
        if key in ("kind", "energy_unit"):
            continue
        if key not in MODEL_KEYS[kind]:
            raise ConfigError(f"[model] unknown field {key!r} for model {kind}")
        params[key] = _get(msec, key, MODEL_KEYS[kind][key])
    if "L" not in params:
        raise ConfigError("[model] missing required field 'L'")

    baths = tuple(_parse_bath(name.split(":", 1)[1], cp[name]) for name in cp.sections()
                  if name.startswith("bath:"))
    methods = (MethodEntry("exact-redfield", 0),)
    if "method" in cp:
        sec = cp["method"]
        if "methods" in sec:
            methods = tuple(parse_method_entry(t) for t in sec["methods"].split(",") if t.strip())
        if not methods:
            raise ConfigError("[method] methods list is empty")

    run = RunConfig()
    if "run" in cp:
        sec = cp["run"]
        obs = tuple(o.strip() for o in sec.get("observables", ",".join(run.observables)).split(",") if o.strip())
        for o in obs:
            if o not in OBSERVABLES:
                raise ConfigError(f"[run] observables: unknown observable {o!r}")
        run = RunConfig(
            initial_state=_get(sec, "initial_state", str, run.initial_state).strip(),
            t_max=_get(sec, "t_max", float, run.t_max),
            n_times=_get(sec, "n_times", int, run.n_times),
            tau_r=_get(sec, "tau_r", float, run.tau_r),
            ss_method=_get(sec, "ss_method", str, run.ss_method).strip(),
            ss_tol=_get(sec, "ss_tol", float, run.ss_tol),
            rtol=_get(sec, "rtol", float, run.rtol),
            atol=_get(sec, "atol", float, run.atol),
            observables=obs,
        )
        if run.n_times < 1 or run.t_max < 0:
            raise ConfigError("[run] t_max must be >= 0 and n_times >= 1")
        if run.ss_method not in ("auto", "propagate", "nullspace"):
            raise ConfigError(f"[run] ss_method = {run.ss_method!r}: expected auto, propagate or nullspace")

    sweep = None
    if "sweep" in cp:
        sec = cp["sweep"]
        param = _get(sec, "parameter", str, required=True).strip()
        if param not in SWEEP_PARAMETERS and param not in MODEL_KEYS[kind]:
            raise ConfigError(f"[sweep] parameter = {param!r} cannot be swept")
        sweep = SweepConfig(param, _grid(sec))

    traj = TrajectoryOptions()
    if "trajectories" in cp:
        sec = cp["trajectories"]
        traj = TrajectoryOptions(
            n_traj=_get(sec, "n_traj", int, traj.n_traj),
            seed=_get(sec, "seed", int, traj.seed),
            dt_max=_get(sec, "dt_max", float, traj.dt_max),
            jump_tol=_get(sec, "jump_tol", float, traj.jump_tol),
            refine_jumps=_get(sec, "refine_jumps", bool, traj.refine_jumps),
            record_jumps=_get(sec, "record_jumps", bool, traj.record_jumps),
        )
        if traj.n_traj < 1:
            raise ConfigError("[trajectories] n_traj must be >= 1")
        if not 0 <= traj.seed < 2**64:
            raise ConfigError("[trajectories] seed must be an unsigned 64-bit integer")

    out = OutputConfig()
    if "output" in cp:
        sec = cp["output"]
        out = OutputConfig(_get(sec, "directory", str, out.directory).strip(),
                           _get(sec, "format", str, out.format).strip(),
                           _get(sec, "prefix", str, out.prefix).strip())
        if out.format not in ("csv", "json"):
            raise ConfigError(f"[output] format = {out.format!r}: expected csv or json")

    cfg = ExperimentConfig(kind, unit, tuple(sorted(params.items())), baths, methods, run, sweep, traj, out)
    build_system(cfg)  # surfaces physics errors (bad sites, Drude resonance, ...) at parse time
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# serialization -------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["model"] = {"kind": cfg.model_kind, "energy_unit": cfg.energy_unit,
                   **{k: _fmt(v) for k, v in cfg.model}}
    for b in cfg.baths:
        sec = {"site": b.site, "family": b.family, "gamma": _fmt(b.gamma), "T": _fmt(b.T),
               "operator": b.operator}
        for key in ("E_D", "mu", "mu_over_T"):
            if getattr(b, key) is not None:
                sec[key] = _fmt(getattr(b, key))
        cp[f"bath:{b.name}"] = sec
    cp["method"] = {"methods": ", ".join(m.label() for m in cfg.methods)}
    run = {f.name: getattr(cfg.run, f.name) for f in fields(cfg.run)}
    run["observables"] = ", ".join(cfg.run.observables)
    cp["run"] = {k: _fmt(v) for k, v in run.items() if v is not None}
    if cfg.sweep is not None:
        cp["sweep"] = {"parameter": cfg.sweep.parameter,
                       "values": ", ".join(_fmt(float(v)) for v in cfg.sweep.values)}
    cp["trajectories"] = {f.name: _fmt(getattr(cfg.trajectories, f.name)) for f in fields(cfg.trajectories)}
    cp["output"] = {f.name: _fmt(getattr(cfg.output, f.name)) for f in fields(cfg.output)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# system construction ---------------------------------------------------------

def _site_index(text: str, L: int, where: str) -> int:
    if text == "first":
        return 0
    if text == "last":
        return L - 1
    try:
        i = int(text)
    except ValueError:
        raise ConfigError(f"{where} site = {text!r}: expected an index, 'first' or 'last'") from None
    if not 0 <= i < L:
        raise ConfigError(f"{where} site = {i} out of range for L = {L} (sites are 0-based)")
    return i


def _bath_spec(b: BathConfig) -> BathSpec:
    try:
        if b.family == "ohmic":
            return BathSpec.ohmic(b.gamma, b.T)
        if b.family == "drude":
            return BathSpec.drude(b.gamma, b.T, b.E_D)
        mu = b.mu if b.mu is not None else b.mu_over_T * b.T
        return BathSpec.reservoir(b.gamma, b.T, mu)
    except BathError as exc:
        raise ConfigError(f"[bath:{b.name}] {exc}") from None


def build_system(cfg: ExperimentConfig) -> OpenSystem:
    p = cfg.model_params
    try:
        if cfg.model_kind == "xxz":
            model = xxz_chain(XxzSpec(**p))
        else:
            model = bose_hubbard_chain(BoseHubbardSpec(**p))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[model] {exc}") from None
    channels = []
    for b in cfg.baths:
        where = f"[bath:{b.name}]"
        site = _site_index(b.site, model.L, where)
        if b.gamma == 0:
            continue  # decoupled bath: unitary dynamics
        spec = _bath_spec(b)
        if b.operator == "exchange":
            channels.extend(exchange_channels(model, site, spec, b.name))
        else:
            if model.kind != "xxz":
                raise ConfigError(f"{where} operator {b.operator} needs a spin chain")
            op = SIGMA_X if b.operator == "sigma_x" else SIGMA_Z
            channels.append(hermitian_channel(model, site, op, spec, b.name))
    return OpenSystem(model, tuple(channels))

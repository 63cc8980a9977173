"""TOML run configuration: parsing, defaults, validation and object construction.

A configuration has the sections ``model``, ``noise``, ``initial``,
``numerics``, ``sweep`` and ``output``.  Every key has a default (listed in
``DEFAULTS``) except ``model.gamma`` for kinetic runs and ``model.lambda`` (or
``model.sigma2``) wherever diffusion is involved.  Unknown sections and keys
are rejected, and every error names the offending line and field.

The resolved form (all defaults filled in, lambda and sigma2 both present) is a
plain dict; feeding it back through :func:`resolve` rebuilds the identical run.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import (
    InitialCondition,
    KineticParams,
    RelevanceFunction,
    ScaledNoise,
    SqrtRegularized,
    TruncatedGaussianNoise,
    check_gamma,
    compromise_function,
    default_noise,
    diffusion_function,
)
from .errors import ConfigError
from .fokker_planck import FullFP, GeneralP, PureDiffusion, PureDrift, SznajdDrift
from .kinetic import SimConfig
from .limit_lab import METRICS, SweepConfig, limit_diffusion
from .stationary import StationarySpec

COMMANDS = ("simulate", "fp-solve", "steady-state", "limit-sweep", "moment-check")
EQUATIONS = ("full", "general_p", "pure_diffusion", "pure_drift", "sznajd")
NOISE_KINDS = ("uniform", "truncated_gaussian", "scaled")

DEFAULTS = {
    "model": {
        "gamma": None,
        "lambda": None,
        "sigma2": None,
        "P": "constant",
        "D": "one_minus_abs",
        "p": 2.0 / 3.0,
        "equation": "full",
    },
    "noise": {"kind": "uniform", "cutoff": 3.0, "base": "uniform"},
    "initial": {"kind": "uniform", "mean": 0.0},
    "numerics": {
        "N": 10000,
        "t_end": 100.0,
        "record_every": 1.0,
        "bins": 100,
        "realizations": 1,
        "seed": 0,
        "K": 400,
        "tau_end": 10.0,
        "tau_record_every": 0.1,
        "residual_tol": 1e-9,
    },
    "sweep": {
        "gammas": [0.1, 0.05, 0.02, 0.01],
        "tau_end": 6.0,
        "metric": "L1",
        "fp_refine": 4,
        "n_boot": 200,
    },
    "output": {"gnuplot": False},
}

DEFAULTS_HELP = """configuration keys and defaults (TOML):
  [model]    gamma (required for kinetic runs), lambda or sigma2 (sigma2 = lambda * gamma),
             P = "constant" | "one_minus_w2" | {name = "tabulated", abs_w = [...], values = [...]},
             D = "one_minus_abs" | "one_minus_w2" | "sqrt_one_minus_w2" | "sqrt_regularized" | table,
             p = 2/3 (sqrt_regularized exponent),
             equation = "full" | "general_p" | "pure_diffusion" | "pure_drift" | "sznajd"
  [noise]    kind = "uniform" (variance sigma2, clipped to the admissible width with a warning)
             | "truncated_gaussian" (cutoff = 3.0) | "scaled" (base = uniform|rademacher|triangular)
  [initial]  kind = "uniform" | "tilted" (density (1 + 3 mean w)/2), mean = 0.0
  [numerics] N = 10000, t_end = 100 (sweeps), record_every = 1, bins = 100, realizations = 1,
             seed = 0, K = 400, tau_end = 10, tau_record_every = 0.1, residual_tol = 1e-9
  [sweep]    gammas = [0.1, 0.05, 0.02, 0.01], tau_end = 6, metric = "L1" | "Wasserstein1",
             fp_refine = 4, n_boot = 200
  [output]   gnuplot = false
"""


def _line_of(text, section, key):
    """1-based line of ``key`` inside ``[section]`` of a TOML text, if present."""
    if text is None:
        return None
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        head = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", s)
        if head:
            current = head.group(1)
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None and re.match(rf"^\"?{re.escape(key)}\"?\s*=", s):
            return n
    return None


def _locate(text, raw, field):
    """Best (section, key) match for an error field name."""
    if field is None:
        return None, None
    if "." in field:
        section, key = field.split(".", 1)
        if section in DEFAULTS:
            return section, key
    for section in DEFAULTS:
        if field in raw.get(section, {}):
            return section, field
    for section, keys in DEFAULTS.items():
        if field in keys:
            return section, field
    return None, field


def _fail(text, raw, err: ConfigError):
    section, key = _locate(text, raw, err.field)
    name = f"{section}.{key}" if section else key
    raise ConfigError(err.message, field=name, line=_line_of(text, section, key)) from None


@dataclass
class RunConfig:
    """A validated configuration for one command."""

    command: str
    resolved: dict

    @property
    def seed(self):
        return self.resolved["numerics"]["seed"]

    def section(self, name):
        return self.resolved[name]

    def _relevance(self, which):
        model = self.resolved["model"]
        spec = model[which]
        if isinstance(spec, dict):
            kw = {k: v for k, v in spec.items() if k != "name"}
            name = spec.get("name")
            if name is None:
                raise ConfigError("inline function table needs a name", field=f"model.{which}")
            if "abs_w" in kw:
                kw["abs_w"] = tuple(kw["abs_w"])
                kw["values"] = tuple(kw.get("values", ()))
        else:
            name, kw = spec, {}
        if which == "P":
            return compromise_function(name, **kw)
        if name == "sqrt_regularized":
            if model["gamma"] is None:
                raise ConfigError("sqrt_regularized needs model.gamma", field="model.gamma")
            return SqrtRegularized(model["p"], model["gamma"])
        return diffusion_function(name, **kw)

    @property
    def P(self) -> RelevanceFunction:
        return self._relevance("P")

    @property
    def D(self) -> RelevanceFunction:
        return self._relevance("D")

    @property
    def initial(self) -> InitialCondition:
        ini = self.resolved["initial"]
        return InitialCondition(ini["kind"], float(ini["mean"]))

    def params(self) -> KineticParams:
        model = self.resolved["model"]
        return KineticParams(model["gamma"], model["sigma2"])

    def noise(self, params, D):
        nz = self.resolved["noise"]
        sigma = math.sqrt(params.sigma2)
        if nz["kind"] == "uniform":
            return default_noise(params, D)
        if nz["kind"] == "truncated_gaussian":
            return TruncatedGaussianNoise(sigma, nz["cutoff"])
        return ScaledNoise(nz["base"], sigma)

    def sim_config(self) -> SimConfig:
        num = self.resolved["numerics"]
        params = self.params()
        D = self.D
        return SimConfig(n=num["N"], params=params, P=self.P, D=D, noise=self.noise(params, D),
                         t_end=num["t_end"], record_every=num["record_every"],
                         histogram_bins=num["bins"], realizations=num["realizations"],
                         seed=num["seed"], initial=self.initial)

    def fp_equation(self):
        model = self.resolved["model"]
        eq = model["equation"]
        D = self.D
        if isinstance(D, SqrtRegularized):
            D = limit_diffusion(D)
        lam = model["lambda"]
        if eq in ("full", "general_p", "pure_diffusion") and lam is None:
            raise ConfigError("this equation needs lambda (or sigma2 and gamma)", field="model.lambda")
        if eq == "full":
            return FullFP(D, lam)
        if eq == "general_p":
            return GeneralP(D, lam, self.P)
        if eq == "pure_diffusion":
            return PureDiffusion(D, lam)
        if eq == "pure_drift":
            return PureDrift(self.P)
        return SznajdDrift()

    def stationary_spec(self) -> StationarySpec:
        model = self.resolved["model"]
        if model["lambda"] is None:
            raise ConfigError("steady-state needs lambda", field="model.lambda")
        D = self.D
        if isinstance(D, SqrtRegularized):
            D = limit_diffusion(D)
        return StationarySpec.from_diffusion(D, float(self.resolved["initial"]["mean"]),
                                             model["lambda"])

    def sweep_config(self) -> SweepConfig:
        model = self.resolved["model"]
        num = self.resolved["numerics"]
        sw = self.resolved["sweep"]
        if model["lambda"] is None:
            raise ConfigError("limit-sweep needs lambda", field="model.lambda")
        D = self.D
        if isinstance(D, SqrtRegularized):
            D = SqrtRegularized(model["p"], sw["gammas"][0])
        return SweepConfig(tuple(sw["gammas"]), model["lambda"], D, num["N"], num["realizations"],
                           sw["tau_end"], P=self.P, metric=sw["metric"], bins=num["bins"],
                           seed=num["seed"], initial=self.initial, fp_refine=sw["fp_refine"],
                           n_boot=sw["n_boot"])

    def validate(self):
        """Build every object the command needs, surfacing any precondition failure."""
        if self.command in ("simulate", "moment-check"):
            self.sim_config()
        elif self.command == "fp-solve":
            self.fp_equation()
        elif self.command == "steady-state":
            self.stationary_spec()
        elif self.command == "limit-sweep":
            self.sweep_config()


def _check_types(raw, text):
    for section, body in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]; allowed: {sorted(DEFAULTS)}",
                              field=section, line=_line_of(text, section, None))
        if not isinstance(body, dict):
            raise ConfigError("expected a table", field=section, line=_line_of(text, section, None))
        for key in body:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key; allowed: {sorted(DEFAULTS[section])}",
                                  field=f"{section}.{key}", line=_line_of(text, section, key))


_INT_KEYS = {("numerics", "N"), ("numerics", "bins"), ("numerics", "realizations"),
             ("numerics", "seed"), ("numerics", "K"), ("sweep", "fp_refine"), ("sweep", "n_boot")}
_STR_CHOICES = {("noise", "kind"): NOISE_KINDS, ("model", "equation"): EQUATIONS,
                ("sweep", "metric"): METRICS}


def _coerce(resolved, text):
    for section, keys in resolved.items():
        for key, value in keys.items():
            here = dict(field=f"{section}.{key}", line=_line_of(text, section, key))
            if (section, key) in _INT_KEYS:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"expected an integer, got {value!r}", **here)
                if value < 0:
                    raise ConfigError("must be non-negative", **here)
            elif (section, key) in _STR_CHOICES:
                if value not in _STR_CHOICES[section, key]:
                    raise ConfigError(f"expected one of {_STR_CHOICES[section, key]}, got {value!r}",
                                      **here)
            elif key in ("P", "D"):
                if not isinstance(value, (str, dict)):
                    raise ConfigError("expected a name or an inline table", **here)
            elif key == "gammas":
                if not isinstance(value, list) or not all(
                        isinstance(g, (int, float)) and not isinstance(g, bool) for g in value):
                    raise ConfigError("expected a list of numbers", **here)
            elif key == "gnuplot":
                if not isinstance(value, bool):
                    raise ConfigError("expected true or false", **here)
            elif key in ("kind", "base"):
                if not isinstance(value, str):
                    raise ConfigError("expected a string", **here)
            elif value is not None:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"expected a number, got {value!r}", **here)
                if not math.isfinite(value):
                    raise ConfigError("must be finite", **here)
                keys[key] = float(value)


def _lambda_bookkeeping(model, text):
    gamma, lam, sigma2 = model["gamma"], model["lambda"], model["sigma2"]
    if gamma is not None:
        try:
            check_gamma(gamma)
        except ConfigError as e:
            raise ConfigError(e.message, field="model.gamma",
                              line=_line_of(text, "model", "gamma")) from None
    if lam is not None and sigma2 is not None:
        if gamma is None or not math.isclose(sigma2, lam * gamma, rel_tol=1e-12):
            raise ConfigError("give either lambda or sigma2, not inconsistent both",
                              field="model.sigma2", line=_line_of(text, "model", "sigma2"))
    elif sigma2 is not None:
        if gamma is None:
            raise ConfigError("sigma2 needs gamma to fix lambda = sigma2 / gamma",
                              field="model.sigma2", line=_line_of(text, "model", "sigma2"))
        model["lambda"] = KineticParams(gamma, sigma2).lam
    elif lam is not None and gamma is not None:
        model["sigma2"] = KineticParams.from_lambda(gamma, lam).sigma2


def resolve(raw: dict, command: str, text=None) -> RunConfig:
    """Validate a parsed mapping, fill defaults and build the command's objects."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}", field="command")
    _check_types(raw, text)
    resolved = {s: {**d, **raw.get(s, {})} for s, d in DEFAULTS.items()}
    resolved["sweep"]["gammas"] = list(resolved["sweep"]["gammas"])
    _coerce(resolved, text)
    model = resolved["model"]
    _lambda_bookkeeping(model, text)
    if command in ("simulate", "moment-check"):
        if model["gamma"] is None:
            raise ConfigError("kinetic runs need gamma", field="model.gamma",
                              line=_line_of(text, "model", None))
        if model["sigma2"] is None:
            model["sigma2"] = 0.0
            model["lambda"] = 0.0
    run = RunConfig(command, resolved)
    try:
        run.validate()
    except ConfigError as e:
        _fail(text, raw, e)
    return run


def parse_config(text: str, command: str) -> RunConfig:
    """Parse TOML text for ``command``; errors carry line and field."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"malformed TOML: {e}", line=int(m.group(1)) if m else None) from None
    return resolve(raw, command, text)


def load_config(path, command) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, command)

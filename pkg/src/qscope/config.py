"""Flat `key = value` run configuration with [section] headers.

The format is deliberately minimal so any language can parse it: sections
grid, problem, admissibility, recon, stability, probes, output; one
assignment per line; `#` starts a comment. Unknown sections or keys and
constraint violations are rejected with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .data import NOISE_MODELS
from .recon import ReconOptions


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Config:
    # [grid]
    n: int = 129
    # [problem]
    tag: str = "k1"
    a11_path: str = ""
    a12_path: str = ""
    a22_path: str = ""
    q_path: str = ""
    g_path: str = ""
    noise_model: str = "deterministic"
    noise_eps: float = 0.0
    # [admissibility]
    q0: float = 1.0
    k: float = 0.5
    q_star: float = 0.0
    # [recon]
    recon: ReconOptions = field(default_factory=ReconOptions)
    # [stability]
    eps_list: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    theta: float = 0.2
    mode: str = "noise"
    # [probes]
    probe_set: tuple = ()
    lattice: int = 5
    r: float = 0.04
    delta: float = 1.0
    kappa: float = 3.0
    lambda_c: float = 2.0
    tau_list: tuple = (4.0, 8.0, 16.0, 32.0)
    r_star: float = 0.3
    # [output]
    out_dir: str = "out"
    seed: int = 0


PROBE_TAGS = ("caccioppoli", "doubling", "reverse_holder", "muckenhoupt",
              "three_spheres", "ucp", "carleman", "delta_star")

PROBLEM_TAGS = ("k1", "k2", "varcoef", "custom")

# section -> key -> (Config attribute, converter)
_SCHEMA = {
    "grid": {"n": ("n", int)},
    "problem": {
        "tag": ("tag", str),
        "a11_path": ("a11_path", str),
        "a12_path": ("a12_path", str),
        "a22_path": ("a22_path", str),
        "q_path": ("q_path", str),
        "g_path": ("g_path", str),
        "noise_model": ("noise_model", str),
        "noise_eps": ("noise_eps", float),
    },
    "admissibility": {
        "q0": ("q0", float),
        "k": ("k", float),
        "q_star": ("q_star", float),
    },
    "recon": {
        "w_floor": ("w_floor", float),
        "damping": ("damping", float),
        "max_picard": ("max_picard", int),
        "picard_tol": ("picard_tol", float),
        "trust_threshold": ("trust_threshold", float),
        "linear_tol": ("linear_tol", float),
        "pin_factor": ("pin_factor", float),
        "mu_lo": ("mu_lo", float),
        "mu_hi": ("mu_hi", float),
    },
    "stability": {
        "eps_list": ("eps_list", lambda s: tuple(float(x) for x in s.split(",") if x.strip())),
        "theta": ("theta", float),
        "mode": ("mode", str),
    },
    "probes": {
        "set": ("probe_set", lambda s: tuple(x.strip() for x in s.split(",") if x.strip())),
        "lattice": ("lattice", int),
        "r": ("r", float),
        "delta": ("delta", float),
        "kappa": ("kappa", float),
        "lambda_c": ("lambda_c", float),
        "tau_list": ("tau_list", lambda s: tuple(float(x) for x in s.split(",") if x.strip())),
        "r_star": ("r_star", float),
    },
    "output": {
        "dir": ("out_dir", str),
        "seed": ("seed", int),
    },
}

_RECON_KEYS = set(_SCHEMA["recon"])


def _validate(cfg: Config) -> None:
    for check in _KEY_CHECKS.values():
        check(cfg)
    if cfg.tag == "custom":
        for name in ("a11_path", "a22_path", "q_path", "g_path"):
            if not getattr(cfg, name):
                raise ConfigError(f"custom problem requires problem.{name}")


def _check_n(c):
    if c.n < 3:
        raise ConfigError("grid.n must be at least 3")


def _check_tag(c):
    if c.tag not in PROBLEM_TAGS:
        raise ConfigError(f"unknown problem tag {c.tag!r}")


def _check_noise_model(c):
    if c.noise_model not in NOISE_MODELS:
        raise ConfigError(f"unknown noise model {c.noise_model!r}")


def _check_noise_eps(c):
    if c.noise_eps < 0.0:
        raise ConfigError("problem.noise_eps must be nonnegative")


def _check_k(c):
    if not (0.0 < c.k < 1.0):
        raise ConfigError("admissibility.k must lie in (0, 1)")


def _check_q0(c):
    if c.q0 <= 0.0:
        raise ConfigError("admissibility.q0 must be positive")


def _check_theta(c):
    if not (0.0 < c.theta < 0.25):
        raise ConfigError("stability.theta must lie in (0, 1/4)")


def _check_mode(c):
    if c.mode not in ("noise", "bump"):
        raise ConfigError(f"unknown sweep mode {c.mode!r}")


def _check_eps_list(c):
    if any(e < 0.0 for e in c.eps_list):
        raise ConfigError("stability.eps_list entries must be nonnegative")


def _check_probe_set(c):
    for tag in c.probe_set:
        if tag not in PROBE_TAGS:
            raise ConfigError(f"unknown probe tag {tag!r}")


def _check_lattice(c):
    if c.lattice < 1:
        raise ConfigError("probes.lattice must be at least 1")


def _check_kappa(c):
    if c.kappa <= 1.0:
        raise ConfigError("probes.kappa must exceed 1")


def _check_tau_list(c):
    if any(t <= 0.0 for t in c.tau_list):
        raise ConfigError("probes.tau_list entries must be positive")


def _check_seed(c):
    if c.seed < 0:
        raise ConfigError("output.seed must be a nonnegative integer")


def _positive(name):
    def check(c):
        if getattr(c, name) <= 0.0:
            raise ConfigError(f"probes.{name} must be positive")
    return check


_KEY_CHECKS = {
    "n": _check_n,
    "tag": _check_tag,
    "noise_model": _check_noise_model,
    "noise_eps": _check_noise_eps,
    "k": _check_k,
    "q0": _check_q0,
    "theta": _check_theta,
    "mode": _check_mode,
    "eps_list": _check_eps_list,
    "probe_set": _check_probe_set,
    "lattice": _check_lattice,
    "kappa": _check_kappa,
    "tau_list": _check_tau_list,
    "seed": _check_seed,
    "r": _positive("r"),
    "delta": _positive("delta"),
    "lambda_c": _positive("lambda_c"),
    "r_star": _positive("r_star"),
}


def parse_config(text: str) -> Config:
    cfg = Config()
    recon_kwargs = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected `key = value`, got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("assignment before any [section] header", lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        attr, conv = _SCHEMA[section][key]
        try:
            converted = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}", lineno) from None
        # surface single-key constraint violations with the offending line
        if section == "recon":
            recon_kwargs[attr] = converted
            try:
                ReconOptions(**recon_kwargs)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno) from None
        else:
            cfg = replace(cfg, **{attr: converted})
            check = _KEY_CHECKS.get(attr)
            if check is not None:
                try:
                    check(cfg)
                except ConfigError as exc:
                    raise ConfigError(str(exc).split(": ", 1)[-1], lineno) from None
    if recon_kwargs:
        cfg = replace(cfg, recon=ReconOptions(**recon_kwargs))
    _validate(cfg)
    return cfg


def load_config(path) -> Config:
    with open(path) as fh:
        return parse_config(fh.read())


def config_echo(cfg: Config) -> str:
    """Normalized config text; reparsing it yields an equal Config."""
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v)

    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            src = cfg.recon if section == "recon" else cfg
            val = getattr(src, attr)
            lines.append(f"{key} = {fmt(val)}")
        lines.append("")
    return "\n".join(lines)

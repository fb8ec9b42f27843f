"""Run configuration: parsing, validation, fingerprinting.

The config file is flat key-value text with sections (INI syntax).  Unknown
sections or keys are rejected so that typos fail closed.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # problem
    problem: str = "diffusion"        # diffusion | convection
    forcing: float = 100.0
    eps: float = 1.0                  # convection only
    # noise
    noise: str = "colored"            # colored | white
    corr_length: float = 0.25
    sigma: float = 0.1                # white only
    n_global_modes: int = 100         # N (colored)
    kl_grid: int = 64                 # coarse cells per side for KL
    gamma: float | None = None        # box half-width; default 5 (colored) / 5 sigma
    # discretization
    mesh_n: int = 64
    sx: int = 8
    sy: int = 8
    # reduction
    n_local_modes: int = 6            # N_s (colored; white noise forces 1)
    m_interface: int = 6              # M_{s,j}
    m_interior: int = 19              # M_s
    poly_order: int = 9               # p
    k_solution: int = 500             # K_u
    k_matrix: int = 1000              # K_y
    # run
    seed: int = 0

    def __post_init__(self):
        if self.problem not in ("diffusion", "convection"):
            raise ConfigError(f"unknown problem kind {self.problem!r}")
        if self.noise not in ("colored", "white"):
            raise ConfigError(f"unknown noise kind {self.noise!r}")
        if self.problem == "convection" and self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.mesh_n < 2 or (self.mesh_n & (self.mesh_n - 1)) != 0:
            raise ConfigError(f"mesh_n must be a power of two >= 2, got {self.mesh_n}")
        for name, s in (("sx", self.sx), ("sy", self.sy)):
            if s < 1 or self.mesh_n % s:
                raise ConfigError(f"{name}={s} must divide mesh_n={self.mesh_n}")
        if self.noise == "colored":
            if self.corr_length <= 0:
                raise ConfigError(f"corr_length must be positive, got {self.corr_length}")
            if self.kl_grid % self.sx or self.kl_grid % self.sy:
                raise ConfigError(
                    f"kl_grid={self.kl_grid} must be divisible by sx and sy")
            if self.n_global_modes > self.kl_grid**2:
                raise ConfigError("n_global_modes exceeds KL grid cell count")
            local_cells = (self.kl_grid // self.sx) * (self.kl_grid // self.sy)
            if self.n_local_modes > local_cells:
                raise ConfigError("n_local_modes exceeds local KL cell count")
        else:
            if self.sigma < 0:
                raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
        for name, v in (("n_local_modes", self.n_local_modes),
                        ("m_interface", self.m_interface),
                        ("m_interior", self.m_interior),
                        ("k_solution", self.k_solution),
                        ("k_matrix", self.k_matrix)):
            if v < 1:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.poly_order < 0:
            raise ConfigError(f"poly_order must be nonnegative, got {self.poly_order}")

    @property
    def n_subdomains(self) -> int:
        return self.sx * self.sy

    @property
    def local_dim(self) -> int:
        return 1 if self.noise == "white" else self.n_local_modes

    @property
    def gamma_bound(self) -> float:
        if self.gamma is not None:
            return self.gamma
        return 5.0 * self.sigma if self.noise == "white" else 5.0

    @property
    def global_dim(self) -> int:
        return self.n_subdomains if self.noise == "white" else self.n_global_modes

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


_SCHEMA = {
    "problem": {"kind": str, "forcing": float, "eps": float},
    "noise": {"kind": str, "corr_length": float, "sigma": float,
              "n_global_modes": int, "kl_grid": int, "gamma": float},
    "discretization": {"mesh_n": int, "sx": int, "sy": int},
    "reduction": {"n_local_modes": int, "m_interface": int, "m_interior": int,
                  "poly_order": int, "k_solution": int, "k_matrix": int},
    "run": {"seed": int},
}

_FIELD_RENAMES = {("problem", "kind"): "problem", ("noise", "kind"): "noise"}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    kwargs = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            name = _FIELD_RENAMES.get((section, key), key)
            caster = _SCHEMA[section][key]
            try:
                kwargs[name] = caster(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_from_dict(d: dict) -> RunConfig:
    return RunConfig(**d)

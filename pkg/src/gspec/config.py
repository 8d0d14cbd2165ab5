"""Run configuration: a strict YAML schema validated with pydantic."""

import math
import os
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .nonlinear import critical_sigma


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class GridSpec(_Strict):
    n: int = Field(ge=1)
    N: int
    L: float

    @field_validator("N")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2:
            raise ValueError("N must be an even integer >= 8")
        return v

    @field_validator("L")
    @classmethod
    def _positive(cls, v):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("L must be positive and finite")
        return v


SymbolName = Literal["fractional_laplacian", "bessel", "bilaplacian", "polynomial", "boosted_halfwave"]


class SymbolSpec(_Strict):
    name: SymbolName
    s: Optional[float] = None
    mu: Optional[float] = None
    v: Optional[Union[float, List[float]]] = None
    terms: Optional[List[Tuple[List[int], float]]] = None

    @model_validator(mode="after")
    def _params(self):
        needed = {
            "fractional_laplacian": {"s"},
            "bessel": {"s"},
            "bilaplacian": {"mu"},
            "polynomial": {"terms"},
            "boosted_halfwave": {"v"},
        }[self.name]
        given = {k for k in ("s", "mu", "v", "terms") if getattr(self, k) is not None}
        if given != needed:
            raise ValueError(f"symbol {self.name} takes parameters {sorted(needed)}, got {sorted(given)}")
        if self.s is not None and not self.s > 0:
            raise ValueError("s must be positive")
        return self

    @property
    def order_s(self):
        if self.name in ("fractional_laplacian", "bessel"):
            return self.s
        if self.name == "bilaplacian":
            return 2.0
        if self.name == "boosted_halfwave":
            return 0.5
        return max(sum(a) for a, _ in self.terms) / 2

    def build(self, dim):
        from . import symbols

        if self.name == "polynomial":
            return symbols.polynomial([(tuple(a), c) for a, c in self.terms])
        if self.name == "boosted_halfwave":
            return symbols.boosted_halfwave(self.v)
        if self.name == "bilaplacian":
            return symbols.bilaplacian(self.mu, dim=dim)
        return symbols.builtin_symbol(self.name, s=self.s, dim=dim)


class PotentialSpec(_Strict):
    name: Optional[Literal["gaussian_well"]] = None
    depth: float = 4.0
    width: float = 1.0
    center: Union[float, List[float]] = 0.0
    file: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.name is None) == (self.file is None):
            raise ValueError("potential needs exactly one of 'name' or 'file'")
        return self


class SolverSpec(_Strict):
    method: Optional[Literal["dense", "iterative", "birman_schwinger", "petviashvili"]] = None
    tol: float = 1e-10
    max_iters: int = Field(default=500, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    lambda_bracket: Optional[Tuple[float, float]] = None
    gradient_check: bool = False

    @field_validator("tol")
    @classmethod
    def _tol(cls, v):
        if not v > 0:
            raise ValueError("tol must be positive")
        return v

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v):
        if not v:
            raise ValueError("at least one seed is required")
        return v


class ToleranceSpec(_Strict):
    structural: float = 1e-9
    support: float = 1e-8
    fullness: float = 1e-8


class RearrangeSpec(_Strict):
    samples: int = Field(default=100, ge=1)
    band: Optional[int] = None
    sigmas: List[int] = Field(default_factory=lambda: [1, 2])
    pd_points: int = Field(default=16, ge=2)


class UMPSpec(_Strict):
    p: float
    max_freq: int = Field(ge=0, le=6)
    n_points: int = Field(default=4096, ge=16)
    allow_even: bool = False
    lift_lambda: Optional[float] = None


class VerifySpec(_Strict):
    field: str
    problem: Literal["linear", "nonlinear"]


Mode = Literal["solve_linear", "solve_nonlinear", "rearrange", "ump_search", "verify_only"]


class RunConfig(_Strict):
    mode: Mode
    grid: Optional[GridSpec] = None
    symbol: Optional[SymbolSpec] = None
    potential: Optional[PotentialSpec] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    sigma: Optional[int] = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    rearrange: Optional[RearrangeSpec] = None
    ump: Optional[UMPSpec] = None
    verify: Optional[VerifySpec] = None
    seed: int = 1
    output: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        problem = self.mode
        if self.mode == "verify_only":
            if self.verify is None:
                raise ValueError("verify_only needs a 'verify' section")
            problem = "solve_" + self.verify.problem
        if problem in ("solve_linear", "solve_nonlinear"):
            for key in ("grid", "symbol"):
                if getattr(self, key) is None:
                    raise ValueError(f"mode {self.mode} needs '{key}'")
        if problem == "solve_nonlinear":
            if self.lam is None or self.sigma is None:
                raise ValueError(f"mode {self.mode} needs 'lambda' and 'sigma'")
            if self.sigma < 1:
                raise ValueError("sigma: must be a positive integer")
            crit = critical_sigma(self.grid.n, self.symbol.order_s)
            if not self.sigma < crit:
                raise ValueError(
                    f"sigma: {self.sigma} is not below the critical exponent "
                    f"2s/(n-2s) = {crit:g} for n={self.grid.n}, s={self.symbol.order_s:g}"
                )
        if problem == "solve_linear" and self.potential is None:
            raise ValueError(f"mode {self.mode} needs 'potential'")
        if self.mode == "ump_search" and self.ump is None:
            raise ValueError("ump_search needs an 'ump' section")
        if self.mode == "rearrange" and self.grid is None:
            raise ValueError("rearrange needs 'grid'")
        if self.grid is not None and self.grid.n not in (1, 2, 3):
            raise ValueError(f"grid.n: dimension must be 1, 2 or 3, got {self.grid.n}")
        return self


def _format_errors(err):
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        msg = e["msg"]
        if e["type"] == "extra_forbidden":
            msg = f"unknown key '{e['loc'][-1]}'"
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def parse_config(text, base_dir=None):
    """Validated :class:`RunConfig` from YAML text.

    Relative file paths in the document are resolved against ``base_dir``.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"syntax error{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    if base_dir is not None:
        for spec, key in ((cfg.potential, "file"), (cfg.verify, "field")):
            path = getattr(spec, key, None) if spec is not None else None
            if path and not os.path.isabs(path):
                setattr(spec, key, os.path.join(base_dir, path))
    for spec, key in ((cfg.potential, "file"), (cfg.verify, "field")):
        path = getattr(spec, key, None) if spec is not None else None
        if path and not os.path.exists(path):
            raise ConfigError(f"{key}: file not found: {path}")
    return cfg


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def dump_config(cfg):
    data = cfg.model_dump(mode="json", by_alias=True, exclude_none=True)
    return yaml.safe_dump(data, sort_keys=True)

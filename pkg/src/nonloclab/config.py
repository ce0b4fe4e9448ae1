"""JSON run-file schema and builders turning configs into library objects."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .domains import Ball, Domain, FullSpace, GraphHalfSpace, Interval, rotation_2d
from .kernel import (
    DensitySpec,
    make_anisotropic_density,
    make_bump_density,
    make_fractional_density,
    make_polynomial_density,
    make_shifted_pair_density,
    make_singular_bump_density,
)
from .quadrature import QuadratureConfig

__all__ = [
    "RunConfig",
    "load_config",
    "build_density",
    "build_domain",
    "build_test_function",
    "build_quadrature",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Dim = Annotated[int, Field(ge=1, le=3)]
Alpha = Annotated[float, Field(gt=0.0, lt=2.0)]
Matrix = List[List[float]]


class BumpDensity(_Strict):
    kind: Literal["bump"]
    dim: Dim = 1
    alpha: Alpha = 1.0
    mass: Optional[float] = Field(default=None, gt=0.0)
    radius: float = Field(default=1.0, gt=0.0)


class SingularBumpDensity(_Strict):
    kind: Literal["singular_bump"]
    dim: Dim = 1
    alpha: Alpha = 1.5
    mass: Optional[float] = Field(default=None, gt=0.0)
    radius: float = Field(default=1.0, gt=0.0)


class PolynomialDensity(_Strict):
    kind: Literal["polynomial"]
    dim: Dim = 1
    degree: int = Field(default=3, ge=2)
    alpha: Alpha = 1.0
    mass: Optional[float] = Field(default=None, gt=0.0)
    radius: float = Field(default=1.0, gt=0.0)


class FractionalDensity(_Strict):
    kind: Literal["fractional"]
    dim: Dim = 1
    s: float = Field(gt=0.0, lt=1.0)
    cutoff_radius: float = Field(default=1.0, gt=0.0)
    transition_width: float = Field(default=1.0, gt=0.0)


RadialDensity = Annotated[
    Union[BumpDensity, SingularBumpDensity, PolynomialDensity, FractionalDensity],
    Field(discriminator="kind"),
]


class AnisotropicDensity(_Strict):
    kind: Literal["anisotropic"]
    base: RadialDensity
    b_matrix: Matrix


class ShiftedPairDensity(_Strict):
    kind: Literal["shifted_pair"]
    base: RadialDensity
    shift: List[float]


DensityConfig = Annotated[
    Union[BumpDensity, SingularBumpDensity, PolynomialDensity, FractionalDensity,
          AnisotropicDensity, ShiftedPairDensity],
    Field(discriminator="kind"),
]


class FullSpaceDomain(_Strict):
    kind: Literal["full_space"]
    dim: Dim = 1


class IntervalDomain(_Strict):
    kind: Literal["interval"]
    a: float = 0.0
    b: float = 1.0

    @model_validator(mode="after")
    def _order(self):
        if not self.b > self.a:
            raise ValueError("interval needs a < b")
        return self


class BallDomain(_Strict):
    kind: Literal["ball"]
    dim: Dim = 2
    center: Optional[List[float]] = None
    radius: float = Field(default=1.0, gt=0.0)
    transform: Optional[Matrix] = None
    exterior: bool = False


class HalfSpaceDomain(_Strict):
    kind: Literal["half_space_graph"]
    dim: Annotated[int, Field(ge=2, le=3)] = 2
    amplitude: float = 0.0
    rotation_angle: Optional[float] = None
    rotation: Optional[Matrix] = None
    slab_half_width: float = Field(default=5.0, gt=0.0)


DomainConfig = Annotated[
    Union[FullSpaceDomain, IntervalDomain, BallDomain, HalfSpaceDomain],
    Field(discriminator="kind"),
]


class TestFunctionConfig(_Strict):
    recipe: Literal["constant", "linear", "quadratic", "bump", "cos_k", "radial", "halfspace_bump"]
    value: Optional[float] = None
    gradient: Optional[List[float]] = None
    hessian: Optional[Matrix] = None
    offset: Optional[float] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(default=None, gt=0.0)
    amplitude: Optional[float] = None
    k: Optional[int] = Field(default=None, ge=1)
    margin: Optional[float] = Field(default=None, gt=0.0)
    width: Optional[float] = Field(default=None, gt=0.0)
    tangential_radius: Optional[float] = Field(default=None, gt=0.0)
    normal_radius: Optional[float] = Field(default=None, gt=0.0)
    correction_radius: Optional[float] = Field(default=None, gt=0.0)

    def params(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if k != "recipe" and v is not None}


class QuadratureSection(_Strict):
    near_split_factor: Optional[float] = Field(default=None, gt=0.0)
    radial_nodes: Optional[int] = Field(default=None, ge=2)
    angular_nodes: Optional[int] = Field(default=None, ge=2)
    far_truncation: Optional[Union[Literal["support"], Annotated[float, Field(gt=0.0)]]] = None
    rel_tol: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    abs_tol: Optional[float] = Field(default=None, ge=0.0)
    geometric_levels: Optional[int] = Field(default=None, ge=0)
    edge_panels: Optional[int] = Field(default=None, ge=1)
    segment_panels: Optional[int] = Field(default=None, ge=1)
    max_refinements: Optional[int] = Field(default=None, ge=0)


class KernelCheckSection(_Strict):
    delta: float = Field(default=0.5, gt=0.0)
    dirac_epsilons: List[Annotated[float, Field(gt=0.0)]] = [0.4, 0.2, 0.1]
    evenness_samples: int = Field(default=1000, ge=1)
    growth_samples: int = Field(default=512, ge=8)
    zn_samples: List[float] = [-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0]
    moment_tolerance: Optional[float] = Field(default=None, gt=0.0)


class ApplySection(_Strict):
    x: List[float]
    epsilon: float = Field(gt=0.0)
    route: Literal["complement_decomposition", "regularized", "pv_limit"] = "complement_decomposition"


class ProfileSection(_Strict):
    epsilon: float = Field(gt=0.0)
    start: List[float]
    end: List[float]
    count: int = Field(default=50, ge=2)


class RunConfig(_Strict):
    """Validated run file; sections not needed by a subcommand may be omitted."""

    name: Optional[str] = None
    description: Optional[str] = None
    density: DensityConfig
    domain: Optional[DomainConfig] = None
    test_function: Optional[TestFunctionConfig] = None
    p_values: Optional[List[Annotated[float, Field(ge=1.0)]]] = None
    epsilons: Optional[List[Annotated[float, Field(gt=0.0)]]] = None
    grid: Optional[Annotated[int, Field(ge=2)]] = None
    route: Literal["complement_decomposition", "regularized"] = "complement_decomposition"
    max_failed_fraction: float = Field(default=0.01, ge=0.0, le=1.0)
    quadrature: QuadratureSection = QuadratureSection()
    kernel_check: KernelCheckSection = KernelCheckSection()
    apply: Optional[ApplySection] = None
    profile: Optional[ProfileSection] = None

    @field_validator("epsilons")
    @classmethod
    def _decreasing(cls, v):
        if v is not None and any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        return v

    @property
    def dim(self) -> int:
        d = self.density
        return d.base.dim if hasattr(d, "base") else d.dim

    def require_study(self):
        missing = [k for k in ("test_function", "p_values", "epsilons") if getattr(self, k) is None]
        if missing:
            raise ValueError(f"study needs the keys {missing}")
        if len(self.epsilons) < 4:
            raise ValueError("a study needs at least 4 epsilons")
        if not self.p_values:
            raise ValueError("p_values must not be empty")

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)


def load_config(path) -> RunConfig:
    """Parse and validate a run file (raises ``pydantic.ValidationError``)."""
    text = Path(path).read_text()
    return RunConfig.model_validate_json(text)


# ---------------------------------------------------------------------------
# builders


def build_density(cfg) -> DensitySpec:
    kind = cfg.kind
    if kind == "bump":
        return make_bump_density(cfg.dim, mass=cfg.mass, alpha=cfg.alpha, radius=cfg.radius)
    if kind == "singular_bump":
        return make_singular_bump_density(cfg.dim, alpha=cfg.alpha, mass=cfg.mass, radius=cfg.radius)
    if kind == "polynomial":
        return make_polynomial_density(cfg.dim, degree=cfg.degree, mass=cfg.mass, alpha=cfg.alpha,
                                       radius=cfg.radius)
    if kind == "fractional":
        return make_fractional_density(cfg.s, cfg.cutoff_radius, cfg.transition_width, dim=cfg.dim)
    if kind == "anisotropic":
        return make_anisotropic_density(build_density(cfg.base), np.asarray(cfg.b_matrix))
    if kind == "shifted_pair":
        return make_shifted_pair_density(build_density(cfg.base), np.asarray(cfg.shift))
    raise ValueError(f"unknown density kind {kind!r}")


def build_domain(cfg, dim: int) -> Domain:
    if cfg is None or cfg.kind == "full_space":
        d = dim if cfg is None else cfg.dim
        return FullSpace(d)
    if cfg.kind == "interval":
        return Interval(cfg.a, cfg.b)
    if cfg.kind == "ball":
        return Ball(cfg.dim, center=cfg.center, radius=cfg.radius, transform=cfg.transform,
                    exterior=cfg.exterior)
    if cfg.kind == "half_space_graph":
        rot = cfg.rotation
        if cfg.rotation_angle is not None:
            if cfg.dim != 2:
                raise ValueError("rotation_angle is only meaningful in 2D")
            rot = rotation_2d(cfg.rotation_angle)
        return GraphHalfSpace(cfg.dim, amplitude=cfg.amplitude, rotation=rot,
                              slab_half_width=cfg.slab_half_width)
    raise ValueError(f"unknown domain kind {cfg.kind!r}")


_COMPATIBLE = {"cos_k", "radial", "halfspace_bump"}


def build_test_function(cfg: TestFunctionConfig, domain: Domain, m):
    from .testfunctions import make_compatible_function, make_test_function

    if cfg.recipe in _COMPATIBLE:
        return make_compatible_function(domain, m, cfg.recipe, **cfg.params())
    return make_test_function(cfg.recipe, domain.dim, **cfg.params())


def build_quadrature(section: QuadratureSection) -> QuadratureConfig:
    return QuadratureConfig(**{k: v for k, v in section.model_dump().items() if v is not None})


@lru_cache(maxsize=8)
def build_all(canonical: str):
    """Density, domain, momentum matrix, test function and quadrature for a run file.

    Keyed by the canonical JSON so worker processes can rebuild (sympy
    evaluators do not pickle) and reuse the objects.
    """
    from .moments import momentum_matrix

    cfg = RunConfig.model_validate_json(canonical)
    density = build_density(cfg.density)
    domain = build_domain(cfg.domain, density.dim)
    if domain.dim != density.dim:
        raise ValueError("domain and density dimensions differ")
    quad = build_quadrature(cfg.quadrature)
    m = momentum_matrix(density, quad)
    u = build_test_function(cfg.test_function, domain, m) if cfg.test_function is not None else None
    return cfg, density, domain, m, u, quad

"""Flat JSON experiment configurations.

Every key of :class:`ExperimentConfig` may appear in a config file; unknown
keys are rejected.  The config hash covers every field except the output
directory and worker count, so it identifies the numerical content of a run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..potential import CanonicalPotential, RawPotential, reduce_potential
from ..propagators import harmonic_cosine_potential, polynomial_potential, quartic_potential
from ..spectral import GaussianProfile, make_grid

EXPERIMENTS = (
    "inside_layer", "beyond_layer", "matching", "corollary_frame", "general_subquadratic",
    "conservation_suite", "rigidity_demo", "dispersion_suite",
)

GENERAL_POTENTIALS = {
    "half_x2_cos_t": harmonic_cosine_potential,
    "quartic": quartic_potential,
    # built from quad/lin/const_term, evaluated in the original coordinates
    "polynomial": None,
}

_HASH_EXCLUDE = ("output_dir", "workers")


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    Potential: ``potential_form`` is ``"canonical"`` (``delta``, ``omega``,
    ``b``, ``c``), ``"raw"`` (``quad``, ``lin``, ``const_term``, reduced before
    use) or ``"general"`` (``general_potential`` names a built-in callable;
    ``"polynomial"`` uses the raw coefficients without reduction).
    """

    experiment: str
    dim: int = 1
    potential_form: str = "canonical"
    delta: Optional[list] = None
    omega: Optional[list] = None
    b: Optional[list] = None
    c: float = 0.0
    quad: Optional[list] = None
    lin: Optional[list] = None
    const_term: float = 0.0
    general_potential: Optional[str] = None
    sigma: float = 2.0
    small_data: bool = False
    profile: str = "gaussian"
    profile_width: float = 1.0
    profile_amplitude: float = 1.0
    eps_list: list = field(default_factory=lambda: [0.125, 0.0625, 0.03125])
    lambda_list: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    T: float = 0.8
    N: int = 4096
    L: float = 8.0
    dt: Optional[float] = None
    dt_list: Optional[list] = None
    n_snapshots: int = 80
    layer_snapshots: int = 8
    both_directions: bool = True
    scatter_N: int = 16384
    scatter_L: float = 1280.0
    t_ref: float = 128.0
    scatter_tol: float = 1e-4
    scatter_dt: float = 0.01
    scatter_extrapolation: int = 2
    x0: Optional[list] = None
    xi0: Optional[list] = None
    r_list: list = field(default_factory=lambda: [4.0])
    probe_times: list = field(default_factory=lambda: [0.0, math.pi])
    control_N: int = 4096
    control_L: float = 6.0
    n_steps: int = 10000
    observable_t: float = 0.5
    lemma: Optional[dict] = None
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.potential_form not in ("canonical", "raw", "general"):
            raise ConfigError(f"unknown potential_form {self.potential_form!r}")
        if self.potential_form == "general" and self.general_potential not in GENERAL_POTENTIALS:
            raise ConfigError(f"general_potential must be one of {sorted(GENERAL_POTENTIALS)}")
        if any(not e > 0 for e in self.eps_list) or any(not l > 0 for l in self.lambda_list):
            raise ConfigError("eps_list and lambda_list entries must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        try:
            make_grid(self.dim, self.N, self.L)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # --- serialization ---------------------------------------------------

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' key")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def config_hash(self):
        payload = {k: v for k, v in self.to_dict().items() if k not in _HASH_EXCLUDE}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # --- derived objects -------------------------------------------------

    def canonical_potential(self) -> CanonicalPotential:
        if self.potential_form == "raw":
            raw = RawPotential(self.quad, self.lin, self.const_term)
            if raw.dim != self.dim:
                raise ConfigError("raw potential dimension does not match dim")
            return reduce_potential(raw)
        if self.potential_form == "general":
            raise ConfigError("general potentials have no canonical form")
        delta = [0] * self.dim if self.delta is None else self.delta
        omega = [1.0] * self.dim if self.omega is None else self.omega
        try:
            p = CanonicalPotential(delta, omega, self.b, self.c)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if p.dim != self.dim:
            raise ConfigError("potential dimension does not match dim")
        return p

    def evolution_potential(self):
        """Potential passed to the propagators (canonical or general)."""
        if self.potential_form == "general":
            if self.general_potential == "polynomial":
                return polynomial_potential(self.quad, self.lin, self.const_term)
            return GENERAL_POTENTIALS[self.general_potential]()
        return self.canonical_potential()

    def grid(self):
        return make_grid(self.dim, self.N, self.L)

    def profile_function(self):
        if self.profile == "gaussian":
            return GaussianProfile(self.profile_width, self.profile_amplitude)
        from ..fieldio import read_field

        return read_field(self.profile)

    def quick(self):
        """Smoke-test variant: half the grid points and each eps doubled.

        The scattering grid is left alone, since its resolution and width are
        set by the long-time solve rather than by eps.
        """
        return self.replace(N=max(self.N // 2, 16), control_N=max(self.control_N // 2, 16),
                            eps_list=[2.0 * e for e in self.eps_list])


def validate_config(cfg: ExperimentConfig):
    """Run every load-time validation the experiment will need.

    Returns a list of notes; raises :class:`ConfigError` (or an assumption
    error) on failure.
    """
    from ..potential import validate_potential_assumption
    from ..propagators import validate_sigma

    notes = []
    if cfg.experiment == "rigidity_demo":
        # linear evolution under fixed quadratic and quartic potentials
        return notes
    if cfg.potential_form == "general":
        gp = cfg.evolution_potential()
        gp.require_zero_at_origin()
        gp.check_gradient(np.linspace(-2, 2, 5)[:, None] * np.ones(cfg.dim), times=(0.0, 0.7))
        gp.hessian_bound(cfg.grid(), times=(0.0, cfg.T))
    else:
        p = cfg.canonical_potential()
        notes += list(p.diagnostics)
        horizon = {
            "inside_layer": max(cfg.lambda_list) * max(cfg.eps_list),
            "general_subquadratic": max(cfg.lambda_list) * max(cfg.eps_list),
        }.get(cfg.experiment, cfg.T)
        allow = cfg.experiment in ("dispersion_suite", "conservation_suite")
        notes += validate_potential_assumption(p, T=horizon, allow_refocus=allow)
    if cfg.experiment != "dispersion_suite":
        # the dispersion suite is purely linear
        notes += validate_sigma(cfg.dim, cfg.sigma, cfg.small_data)
    if cfg.experiment == "dispersion_suite" and len(cfg.eps_list) < 3:
        raise ConfigError("slope fits need at least three eps values")
    if cfg.experiment == "corollary_frame" and cfg.potential_form != "general":
        if np.any(cfg.canonical_potential().b):
            raise ConfigError("moving-frame experiment requires b = 0")
    return notes

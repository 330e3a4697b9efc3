"""Experiment configuration schema, validation, and JSON (de)serialization.

One experiment is one JSON file with the sections below.  Exact solutions are
referenced by name from a fixed catalog instead of parsed expressions:

- ``product_of_sines`` with optional per-coordinate ``modes`` m_i (default all
  1): u = prod_i sin(m_i pi x_i) on the unit box.  Its eigenvalue follows from
  the operator: sum (m_i pi)^2 for the negative Laplacian, and
  c - sum (m_i pi)^2 for Laplacian-plus-constant.
- ``exp_neg_potential``: u = exp(-V) for the Fokker-Planck operator,
  eigenvalue 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import problems as pb
from ..errors import ConfigError

_OPERATORS = (pb.NEG_LAPLACIAN, pb.LAPLACIAN_PLUS_CONSTANT, pb.FOKKER_PLANCK)
_BOUNDARIES = ("dirichlet", "periodic")
_METHODS = ("pmnn", "ipmnn")
_EXACT_NAMES = ("product_of_sines", "exp_neg_potential")


@dataclass(frozen=True)
class ProblemConfig:
    operator: str
    dimension: int
    boundary: str
    shift: float = 0.0
    constant: float = 100.0           # laplacian_plus_constant only
    potential_coeffs: tuple | None = None   # fokker_planck; None = documented default


@dataclass(frozen=True)
class ArchitectureConfig:
    layer_sizes: tuple
    modes: int | None = None          # periodic embedding mode count k


@dataclass(frozen=True)
class TrainingSection:
    method: str
    n_samples: int
    n_epochs: int
    learning_rate: float = 1e-3
    seed: int = 0
    record_every: int = 100
    epsilon: float | None = None
    norm_detached: bool = False


@dataclass(frozen=True)
class OutputsConfig:
    histogram_bins: int = 50
    density_points: int = 100000


@dataclass(frozen=True)
class ExactConfig:
    name: str
    modes: tuple | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    problem: ProblemConfig
    architecture: ArchitectureConfig
    training: TrainingSection
    exact: ExactConfig | None = None
    outputs: OutputsConfig = field(default_factory=OutputsConfig)


def validate_config(config):
    """Collect every violation; raise ConfigError listing all of them."""
    bad = []
    p, a, t = config.problem, config.architecture, config.training
    d = p.dimension
    if p.operator not in _OPERATORS:
        bad.append(f"problem.operator must be one of {_OPERATORS}, got {p.operator!r}")
    if d < 1:
        bad.append(f"problem.dimension must be >= 1, got {d}")
    if p.boundary not in _BOUNDARIES:
        bad.append(f"problem.boundary must be one of {_BOUNDARIES}, got {p.boundary!r}")
    if not math.isfinite(p.shift):
        bad.append(f"problem.shift must be finite, got {p.shift}")
    if p.operator == pb.FOKKER_PLANCK:
        if p.boundary != "periodic":
            bad.append("fokker_planck runs use the periodic boundary")
        coeffs = p.potential_coeffs
        if coeffs is not None:
            if len(coeffs) != d:
                bad.append(f"potential_coeffs has {len(coeffs)} entries for dimension {d}")
            elif any(not 0.1 <= c <= 1.0 for c in coeffs):
                bad.append(f"potential_coeffs must lie in [0.1, 1], got {coeffs}")
    sizes = tuple(a.layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        bad.append(f"architecture.layer_sizes must be >= 2 positive ints, got {sizes}")
    else:
        if sizes[-1] != 1:
            bad.append(f"output width must be 1, got {sizes[-1]}")
        if p.boundary == "dirichlet" and sizes[0] != d:
            bad.append(f"dirichlet input width must equal dimension {d}, got {sizes[0]}")
        if p.boundary == "periodic":
            if a.modes is None or a.modes < 1:
                bad.append("periodic boundary needs architecture.modes >= 1")
            else:
                expected = 2 * d * a.modes
                if sizes[0] != expected:
                    bad.append(
                        f"periodic input width must be 2*d*k = {expected} "
                        f"(d={d}, k={a.modes}), got {sizes[0]}")
    if t.method not in _METHODS:
        bad.append(f"training.method must be one of {_METHODS}, got {t.method!r}")
    if t.n_samples < 1:
        bad.append(f"training.n_samples must be >= 1, got {t.n_samples}")
    if t.n_epochs < 1:
        bad.append(f"training.n_epochs must be >= 1, got {t.n_epochs}")
    if not t.learning_rate > 0:
        bad.append(f"training.learning_rate must be > 0, got {t.learning_rate}")
    if t.record_every < 1:
        bad.append(f"training.record_every must be >= 1, got {t.record_every}")
    if config.outputs.histogram_bins < 2:
        bad.append(f"outputs.histogram_bins must be >= 2, got {config.outputs.histogram_bins}")
    if config.exact is not None:
        e = config.exact
        if e.name not in _EXACT_NAMES:
            bad.append(f"exact.name must be one of {_EXACT_NAMES}, got {e.name!r}")
        if e.name == "product_of_sines" and e.modes is not None and len(e.modes) != d:
            bad.append(f"exact.modes has {len(e.modes)} entries for dimension {d}")
        if e.name == "exp_neg_potential" and p.operator != pb.FOKKER_PLANCK:
            bad.append("exp_neg_potential only pairs with the fokker_planck operator")
    if bad:
        raise ConfigError(bad)
    return config


# -- exact-solution catalog ------------------------------------------------------


def exact_solution(config):
    """(lambda_true, u_true callable) from the named catalog, or None."""
    if config.exact is None:
        return None
    p = config.problem
    d = p.dimension
    if config.exact.name == "exp_neg_potential":
        pot = potential_of(config)
        return 0.0, lambda pts: np.exp(-pb.potential_values(pot, pts))
    modes = config.exact.modes or (1,) * d
    msq = sum((m * math.pi) ** 2 for m in modes)
    if p.operator == pb.NEG_LAPLACIAN:
        lam = msq
    elif p.operator == pb.LAPLACIAN_PLUS_CONSTANT:
        lam = p.constant - msq
    else:
        raise ConfigError([f"no product_of_sines eigenvalue for {p.operator}"])
    marr = np.asarray(modes, dtype=np.float64)

    def u_true(pts):
        return np.prod(np.sin(math.pi * marr * np.asarray(pts)), axis=1)

    return lam, u_true


def potential_of(config):
    p = config.problem
    if p.potential_coeffs is not None:
        return pb.PotentialSpec(tuple(p.potential_coeffs))
    return pb.default_potential(p.dimension)


def domain_box(config):
    """Dirichlet experiments live on [0,1]^d, periodic ones on [0,2pi]^d."""
    if config.problem.boundary == "periodic":
        return (0.0, 2.0 * math.pi)
    return (0.0, 1.0)


# -- (de)serialization -----------------------------------------------------------


def config_to_dict(config):
    out = asdict(config)
    # asdict turns tuples into lists already; keep None sections explicit
    return out


def _tupled(seq):
    return None if seq is None else tuple(seq)


def config_from_dict(raw):
    try:
        problem = ProblemConfig(
            operator=raw["problem"]["operator"],
            dimension=int(raw["problem"]["dimension"]),
            boundary=raw["problem"]["boundary"],
            shift=float(raw["problem"].get("shift", 0.0)),
            constant=float(raw["problem"].get("constant", 100.0)),
            potential_coeffs=_tupled(raw["problem"].get("potential_coeffs")),
        )
        arch = ArchitectureConfig(
            layer_sizes=tuple(raw["architecture"]["layer_sizes"]),
            modes=raw["architecture"].get("modes"),
        )
        tr = raw["training"]
        training = TrainingSection(
            method=tr["method"],
            n_samples=int(tr["n_samples"]),
            n_epochs=int(tr["n_epochs"]),
            learning_rate=float(tr.get("learning_rate", 1e-3)),
            seed=int(tr.get("seed", 0)),
            record_every=int(tr.get("record_every", 100)),
            epsilon=None if tr.get("epsilon") is None else float(tr["epsilon"]),
            norm_detached=bool(tr.get("norm_detached", False)),
        )
        exact = None
        if raw.get("exact") is not None:
            exact = ExactConfig(name=raw["exact"]["name"],
                                modes=_tupled(raw["exact"].get("modes")))
        outs = raw.get("outputs") or {}
        outputs = OutputsConfig(
            histogram_bins=int(outs.get("histogram_bins", 50)),
            density_points=int(outs.get("density_points", 100000)),
        )
        return ExperimentConfig(name=raw["name"], problem=problem,
                                architecture=arch, training=training,
                                exact=exact, outputs=outputs)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError([f"malformed config: {err!r}"]) from err


def save_config(config, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2)


def load_config(path):
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def with_profile(config, profile):
    """'full' keeps the shipped settings; 'desk' shrinks to N=2000, 20000 epochs."""
    if profile == "full":
        return config
    if profile == "desk":
        training = replace(config.training, n_samples=2000, n_epochs=20000)
        return replace(config, training=training)
    raise ConfigError([f"unknown profile {profile!r} (expected 'full' or 'desk')"])

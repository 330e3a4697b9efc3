"""The shipped experiment catalog.

Sixteen training configurations (power and inverse runs in d = 1, 2, 5, 10,
Fokker-Planck in the same dimensions, four interior-shift runs) plus the 2D
grid-refinement comparison against the finite-difference baseline.  The
full-scale sample counts, epoch budgets and layer widths follow the published
experiment settings; the desk profile (see ``with_profile``) shrinks every
run to N=2000 samples and 20000 epochs for test-suite use.
"""

from __future__ import annotations

from .config import (ArchitectureConfig, ExactConfig, ExperimentConfig,
                     OutputsConfig, ProblemConfig, TrainingSection)

_PMNN_SCALE = {
    1: (10000, 50000, (1, 20, 20, 20, 20, 1)),
    2: (20000, 50000, (2, 20, 20, 20, 20, 1)),
    5: (50000, 50000, (5, 40, 40, 40, 40, 1)),
    10: (100000, 100000, (10, 80, 80, 80, 80, 1)),
}

_FP_SCALE = {
    1: (10000, 50000, (6, 20, 20, 20, 20, 1)),
    2: (20000, 50000, (12, 40, 40, 40, 40, 1)),
    5: (50000, 50000, (30, 60, 60, 60, 60, 1)),
    10: (100000, 100000, (60, 80, 80, 80, 80, 1)),
}

_FP_MODES = 3
_FP_SHIFT = 1.0

_INTERIOR_ALPHAS = {36.0: 2, 81.0: 3, 144.0: 4, 225.0: 5}


def _dirichlet_entry(name, method, operator, d, shift=0.0, modes=None):
    n, epochs, layers = _PMNN_SCALE[d]
    return ExperimentConfig(
        name=name,
        problem=ProblemConfig(operator=operator, dimension=d,
                              boundary="dirichlet", shift=shift),
        architecture=ArchitectureConfig(layer_sizes=layers),
        training=TrainingSection(method=method, n_samples=n, n_epochs=epochs),
        exact=ExactConfig(name="product_of_sines", modes=modes),
        outputs=OutputsConfig(),
    )


def _fp_entry(name, d):
    n, epochs, layers = _FP_SCALE[d]
    return ExperimentConfig(
        name=name,
        problem=ProblemConfig(operator="fokker_planck", dimension=d,
                              boundary="periodic", shift=_FP_SHIFT),
        architecture=ArchitectureConfig(layer_sizes=layers, modes=_FP_MODES),
        training=TrainingSection(method="ipmnn", n_samples=n, n_epochs=epochs),
        exact=ExactConfig(name="exp_neg_potential"),
        outputs=OutputsConfig(),
    )


def registry():
    """Name -> ExperimentConfig for every shipped experiment."""
    entries = {}
    for d in (1, 2, 5, 10):
        entries[f"pmnn-d{d}"] = _dirichlet_entry(
            f"pmnn-d{d}", "pmnn", "laplacian_plus_constant", d)
        entries[f"ipmnn-d{d}"] = _dirichlet_entry(
            f"ipmnn-d{d}", "ipmnn", "neg_laplacian", d)
        entries[f"ipmnn-fp-d{d}"] = _fp_entry(f"ipmnn-fp-d{d}", d)
    for alpha, mode in _INTERIOR_ALPHAS.items():
        name = f"ipmnn-interior-a{int(alpha)}"
        entries[name] = _dirichlet_entry(
            name, "ipmnn", "neg_laplacian", 1, shift=alpha, modes=(mode,))
    return entries


# the 2D FDM-versus-network comparison sweep
SWEEP_GRID_SIZES = (8, 16, 32, 64)


def sweep_base_config():
    """The inverse-run settings reused at every grid size of the 2D sweep."""
    cfg = _dirichlet_entry("fdm-ipmnn-sweep-2d", "ipmnn", "neg_laplacian", 2)
    return cfg

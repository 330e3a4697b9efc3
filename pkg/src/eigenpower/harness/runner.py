"""Run orchestration: build the problem from a config, train, emit artifacts.

Every run owns a fresh artifact directory.  Directories are never reused: if
the requested one exists, a numbered sibling is created instead, so re-runs
append rather than overwrite.  All CSVs carry headers and print numbers with
17 significant digits.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import fdm
from .. import network as nw
from .. import problems as pb
from .. import sampling as sp
from .. import training as tr
from . import config as cf
from .density import density_histogram


@dataclass(frozen=True)
class RunReport:
    config: dict
    final_lambda: float
    relative_error: float | None   # |lam - lam_true| / |lam_true|; absolute when lam_true = 0
    wall_time_s: float
    artifacts: dict


def _fresh_dir(root, name):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    candidate = root / name
    k = 1
    while candidate.exists():
        k += 1
        candidate = root / f"{name}-{k}"
    candidate.mkdir()
    return candidate


def build_problem(config):
    """(operator, boundary, box) triple from a validated config."""
    p = config.problem
    if p.operator == pb.NEG_LAPLACIAN:
        op = pb.neg_laplacian()
    elif p.operator == pb.LAPLACIAN_PLUS_CONSTANT:
        op = pb.laplacian_plus_constant(p.constant)
    else:
        op = pb.fokker_planck(cf.potential_of(config))
    if p.boundary == "periodic":
        bc = pb.periodic(p.dimension, modes=config.architecture.modes)
    else:
        bc = pb.dirichlet_box()
    return op, bc, cf.domain_box(config)


def _train_config(config):
    t = config.training
    return tr.TrainConfig(
        method=t.method,
        layer_sizes=tuple(config.architecture.layer_sizes),
        n_samples=t.n_samples,
        n_epochs=t.n_epochs,
        learning_rate=t.learning_rate,
        epsilon=t.epsilon,
        seed=t.seed,
        record_every=t.record_every,
        norm_detached=t.norm_detached,
    )


def execute(config, samples=None):
    """Train per config; returns (estimate, records, exact or None)."""
    cf.validate_config(config)
    op, bc, box = build_problem(config)
    exact = cf.exact_solution(config)
    tcfg = _train_config(config)
    if config.problem.shift != 0.0:
        est, recs = tr.solve_interior(tcfg, op, config.problem.shift, bc, box,
                                      exact=exact, samples=samples)
    else:
        est, recs = tr.run_solver(tcfg, (op, bc, box), exact=exact, samples=samples)
    return est, recs, exact


def _uniform_points(config, n_points, seed_key):
    d = config.problem.dimension
    lo, hi = cf.domain_box(config)
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=config.training.seed, spawn_key=(seed_key,)))
    return lo + (hi - lo) * rng.random((n_points, d))


def _write_eigenfunction_csv(path, points, values):
    d = points.shape[1]
    with open(path, "w") as fh:
        fh.write(",".join(f"x{j}" for j in range(d)) + ",u\n")
        for row, v in zip(points, values):
            fh.write(",".join(f"{c:.17g}" for c in row) + f",{v:.17g}\n")


def _write_density_csv(path, edges, heights, exact_heights=None):
    with open(path, "w") as fh:
        if exact_heights is None:
            fh.write("bin_left,bin_right,density\n")
            for i, h in enumerate(heights):
                fh.write(f"{edges[i]:.17g},{edges[i+1]:.17g},{h:.17g}\n")
        else:
            fh.write("bin_left,bin_right,density,exact_density\n")
            for i, h in enumerate(heights):
                fh.write(f"{edges[i]:.17g},{edges[i+1]:.17g},{h:.17g},"
                         f"{exact_heights[i]:.17g}\n")


def run(config, out_root, profile="full", seed=None):
    """Execute one experiment and write its artifact set.

    Artifacts: records.csv (iteration trace), eigenfunction.csv (values on
    the collocation set), density.csv (value-density histogram, with the
    exact density alongside when the exact solution is known),
    checkpoint.json (trained network), report.json (summary).
    """
    cf.validate_config(config)
    config = cf.with_profile(config, profile)
    if seed is not None:
        config = replace(config, training=replace(config.training, seed=int(seed)))
    t0 = time.perf_counter()
    est, recs, exact = execute(config)
    wall = time.perf_counter() - t0

    out_dir = _fresh_dir(out_root, config.name)
    records_csv = out_dir / "records.csv"
    tr.records_to_csv(recs, records_csv)

    sample_points = _sample_points_of(config)
    eig_csv = out_dir / "eigenfunction.csv"
    _write_eigenfunction_csv(eig_csv, sample_points, est.eigenfunction)

    # density on uniform random points, shared between prediction and exact
    upoints = _uniform_points(config, config.outputs.density_points, seed_key=7)
    pred = sp.normalize(est.trial.values(upoints, est.mlp.flatten()))
    exact_heights = None
    if exact is not None and exact[1] is not None:
        ex_vals = sp.normalize(exact[1](upoints))
        pred = tr.sign_align(pred, ex_vals)
        edges, heights = density_histogram(pred, config.outputs.histogram_bins)
        exact_heights, _ = np.histogram(ex_vals, bins=edges, density=True)
    else:
        edges, heights = density_histogram(pred, config.outputs.histogram_bins)
    density_csv = out_dir / "density.csv"
    _write_density_csv(density_csv, edges, heights, exact_heights)

    checkpoint = out_dir / "checkpoint.json"
    nw.save_mlp(est.mlp, checkpoint)

    rel = None
    if exact is not None and exact[0] is not None:
        lam_true = exact[0]
        err = abs(est.lam - lam_true)
        rel = err / abs(lam_true) if lam_true != 0.0 else err
    report = RunReport(
        config=cf.config_to_dict(config),
        final_lambda=est.lam,
        relative_error=rel,
        wall_time_s=wall,
        artifacts={
            "records_csv": str(records_csv),
            "eigenfunction_csv": str(eig_csv),
            "density_csv": str(density_csv),
            "checkpoint": str(checkpoint),
            "directory": str(out_dir),
        },
    )
    with open(out_dir / "report.json", "w") as fh:
        json.dump({
            "config": report.config,
            "final_lambda": report.final_lambda,
            "relative_error": report.relative_error,
            "wall_time_s": report.wall_time_s,
            "artifacts": report.artifacts,
        }, fh, indent=2)
    return report


def _sample_points_of(config):
    """Rebuild the collocation set the run trained on (same seed derivation)."""
    d = config.problem.dimension
    lo, hi = cf.domain_box(config)
    seed_sample, _ = np.random.SeedSequence(config.training.seed).spawn(2)
    return sp.lhs_sample(config.training.n_samples, d, (lo, hi),
                         np.random.default_rng(seed_sample)).points


def load_report(directory):
    with open(Path(directory) / "report.json") as fh:
        return json.load(fh)


def fdm_vs_nn_sweep(n_h_list, config, out_path):
    """Grid-refinement comparison in 2D: train on each uniform grid and run
    the matrix baseline on the same grid; one CSV row per grid size."""
    cf.validate_config(config)
    if config.problem.dimension != 2:
        raise cf.ConfigError(["the FDM comparison sweep is defined for dimension 2"])
    lam_true = 2.0 * math.pi ** 2
    rows = []
    for n_h in n_h_list:
        grid = sp.uniform_grid(n_h, 2, (0.0, 1.0))
        fdm_lam_err, fdm_u_err = fdm.fdm_reference_error(2, n_h)
        cfg_n = replace(config, training=replace(config.training,
                                                 n_samples=grid.n))
        est, _, _ = execute(cfg_n, samples=grid)
        exact_vals = sp.normalize(fdm.product_of_sines(grid.points))
        nn_vals = tr.sign_align(sp.normalize(est.eigenfunction), exact_vals)
        nn_u_err = float(np.max(np.abs(nn_vals - exact_vals)))
        nn_lam_err = abs(est.lam - lam_true)
        rows.append((n_h, fdm_lam_err, fdm_u_err, nn_lam_err, nn_u_err))
    with open(out_path, "w") as fh:
        fh.write("n_h,fdm_lambda_err,fdm_u_err,nn_lambda_err,nn_u_err\n")
        for n_h, a, b, c, d_ in rows:
            fh.write(f"{n_h},{a:.17g},{b:.17g},{c:.17g},{d_:.17g}\n")
    return rows

"""Power and inverse-power iteration drivers for network trial functions.

Each epoch is one full-batch regression step:

- power variant: the target is the normalized operator image of the current
  trial, P = L U, target = P / ||P||, held constant while the parameters are
  updated to pull U toward it; the loss is mean((U - target)^2).
- inverse variant: the stored previous iterate T is the constant target and
  the differentiated quantity is the normalized operator image of the current
  trial; the loss is mean((L U / ||L U|| - T)^2).  By default the norm is
  differentiated through; ``norm_detached`` freezes it for comparison runs.

Both use the discretized RMS norm over the fixed collocation set, a single
Adam update per epoch, and report the Rayleigh quotient of the current trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import network as nw
from . import problems as pb
from . import sampling as sp
from .errors import DegeneracyError, ShapeError, SolverDivergedError

_NORM_FLOOR = 1e-30

PMNN = "pmnn"
IPMNN = "ipmnn"


@dataclass(frozen=True)
class TrainConfig:
    method: str
    layer_sizes: tuple
    n_samples: int
    n_epochs: int
    learning_rate: float = 1e-3
    epsilon: float | None = None   # None: run the fixed number of epochs
    seed: int = 0
    record_every: int = 100
    norm_detached: bool = False    # inverse variant only

    def __post_init__(self):
        bad = []
        if self.method not in (PMNN, IPMNN):
            bad.append(f"method must be '{PMNN}' or '{IPMNN}', got {self.method!r}")
        if self.n_samples < 1:
            bad.append(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_epochs < 1:
            bad.append(f"n_epochs must be >= 1, got {self.n_epochs}")
        if not self.learning_rate > 0:
            bad.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if bad:
            raise ShapeError("; ".join(bad))


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(n_params):
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(state, params, grads, lr):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(
            f"length mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)


@dataclass(frozen=True)
class IterationRecord:
    epoch: int
    loss: float
    lam: float
    lambda_err_max: float   # nan when no exact eigenvalue was supplied
    u_err_max: float        # nan when no exact eigenfunction was supplied


@dataclass(frozen=True)
class EigenEstimate:
    lam: float
    eigenfunction: np.ndarray   # values on the collocation set, RMS norm 1
    final_loss: float
    epochs_run: int
    mlp: nw.Mlp
    trial: pb.Trial


def sign_align(values, reference):
    """Flip the sign of ``values`` if it points away from ``reference``."""
    return values if float(values @ reference) >= 0.0 else -values


# -- per-epoch engines --------------------------------------------------------


class _PowerEngine:
    """Shared machinery; subclasses define loss/gradient for their variant."""

    def __init__(self, trial, op, points):
        self.trial = trial
        self.points = np.asarray(points, dtype=np.float64)
        self.n = self.points.shape[0]
        self.u_expr = trial.expr
        self.lu_expr = pb.operator_expr(op, trial)


class PmnnEngine(_PowerEngine):
    def __init__(self, trial, op, points):
        super().__init__(trial, op, points)
        self.sess = ad.Session([self.u_expr, self.lu_expr], self.points)

    def epoch(self, params):
        """Returns (loss, lambda, gradient, trial values at the loss point)."""
        self.sess.forward(params)
        uv = self.sess.value(self.u_expr)[:, 0]
        pv = self.sess.value(self.lu_expr)[:, 0]
        nrm = math.sqrt(float(pv @ pv) / self.n)
        if nrm < _NORM_FLOOR:
            raise DegeneracyError(
                f"operator image norm {nrm:.3e}: trial annihilated by the operator")
        target = pv / nrm
        diff = uv - target
        loss = float(diff @ diff) / self.n
        denom = float(uv @ uv)
        if denom < _NORM_FLOOR:
            raise DegeneracyError("trial collapsed to zero on the sample set")
        lam = float(pv @ uv) / denom
        grad = self.sess.backward({self.u_expr: (2.0 / self.n) * diff})
        return loss, lam, grad, uv


class IpmnnEngine(_PowerEngine):
    def __init__(self, trial, op, points, norm_detached=False):
        super().__init__(trial, op, points)
        self.norm_detached = norm_detached
        if norm_detached:
            self.loss_expr = None
            self.sess = ad.Session([self.u_expr, self.lu_expr], self.points)
        else:
            normalized = self.lu_expr * ad.recip(ad.rms(self.lu_expr))
            self.loss_expr = ad.mean(ad.square(normalized - ad.data("target")))
            self.sess = ad.Session([self.u_expr, self.lu_expr, self.loss_expr],
                                   self.points)
        self.val_sess = ad.Session([self.u_expr], self.points)

    def epoch(self, params, target):
        self.sess.forward(params, None if self.norm_detached
                          else {"target": target})
        uv = self.sess.value(self.u_expr)[:, 0]
        pv = self.sess.value(self.lu_expr)[:, 0]
        nrm = math.sqrt(float(pv @ pv) / self.n)
        if nrm < _NORM_FLOOR:
            raise DegeneracyError(
                f"operator image norm {nrm:.3e}: trial annihilated by the operator")
        denom = float(uv @ uv)
        if denom < _NORM_FLOOR:
            raise DegeneracyError("trial collapsed to zero on the sample set")
        lam = float(pv @ uv) / denom
        if self.norm_detached:
            diff = pv / nrm - target
            loss = float(diff @ diff) / self.n
            grad = self.sess.backward({self.lu_expr: (2.0 / (self.n * nrm)) * diff})
        else:
            loss = float(self.sess.value(self.loss_expr)[0, 0])
            grad = self.sess.backward({self.loss_expr: np.ones((1, 1))})
        return loss, lam, grad, uv

    def refresh_target(self, params):
        """U / ||U|| under the post-update parameters, detached."""
        self.val_sess.forward(params)
        uv = self.val_sess.value(self.u_expr)[:, 0]
        nrm = math.sqrt(float(uv @ uv) / self.n)
        if nrm < _NORM_FLOOR:
            raise DegeneracyError("updated trial collapsed to zero; cannot renormalize")
        return uv / nrm


# -- one-shot epoch functions (convenience wrappers over the engines) ----------


def pmnn_epoch(mlp, op, bc, samples, adam, lr=1e-3):
    """One power-variant epoch.  Returns (loss, lambda, mlp', adam')."""
    trial = pb.wrap_trial(mlp, bc)
    eng = PmnnEngine(trial, op, getattr(samples, "points", samples))
    params = mlp.flatten()
    loss, lam, grad, _ = eng.epoch(params)
    params, adam = adam_step(adam, params, grad, lr)
    return loss, lam, mlp.with_params(params), adam


def ipmnn_epoch(mlp, op, bc, samples, adam, target, lr=1e-3, norm_detached=False):
    """One inverse-variant epoch.  Returns (loss, lambda, new_target, mlp', adam')."""
    target = np.asarray(target, dtype=np.float64)
    trial = pb.wrap_trial(mlp, bc)
    eng = IpmnnEngine(trial, op, getattr(samples, "points", samples), norm_detached)
    params = mlp.flatten()
    loss, lam, grad, _ = eng.epoch(params, target)
    params, adam = adam_step(adam, params, grad, lr)
    new_target = eng.refresh_target(params)
    return loss, lam, new_target, mlp.with_params(params), adam


# -- full solver ---------------------------------------------------------------


def run_solver(config, problem, exact=None, samples=None):
    """Train one eigensolver run.

    ``problem`` is (operator, boundary, box); ``exact`` is an optional
    (lambda_true, u_true) pair with u_true a callable over (N, d) points,
    used only for error reporting.  ``samples`` overrides the default Latin
    hypercube set (the grid-comparison sweep trains on uniform grids).
    Returns (EigenEstimate, records).
    """
    op, bc, box = problem
    if bc.kind == "periodic":
        d = len(bc.periods)
    else:
        d = config.layer_sizes[0]
    root = np.random.SeedSequence(config.seed)
    seed_sample, seed_init = root.spawn(2)
    if samples is None:
        samples = sp.lhs_sample(config.n_samples, d, box,
                                np.random.default_rng(seed_sample))
    mlp = nw.init_mlp(config.layer_sizes, np.random.default_rng(seed_init))
    trial = pb.wrap_trial(mlp, bc)
    params = mlp.flatten()
    adam = init_adam(params.size)

    lam_true = u_true_vals = None
    if exact is not None:
        lam_true, u_fn = exact
        if u_fn is not None:
            u_true_vals = sp.normalize(u_fn(samples.points))

    if config.method == PMNN:
        engine = PmnnEngine(trial, op, samples.points)
    else:
        engine = IpmnnEngine(trial, op, samples.points, config.norm_detached)
        target = np.ones(samples.n)   # constant start, RMS norm already 1

    records = []

    def record(epoch, loss, lam, uv):
        lam_err = abs(lam - lam_true) if lam_true is not None else math.nan
        if u_true_vals is not None:
            nrm = sp.discrete_norm(uv)
            if nrm < _NORM_FLOOR:
                u_err = math.nan
            else:
                aligned = sign_align(uv / nrm, u_true_vals)
                u_err = float(np.max(np.abs(aligned - u_true_vals)))
        else:
            u_err = math.nan
        records.append(IterationRecord(epoch, loss, lam, lam_err, u_err))

    epochs_run = 0
    for k in range(1, config.n_epochs + 1):
        if config.method == PMNN:
            loss, lam, grad, uv = engine.epoch(params)
        else:
            loss, lam, grad, uv = engine.epoch(params, target)
        if not (math.isfinite(loss) and math.isfinite(lam)):
            record(k, loss, lam, uv)
            raise SolverDivergedError(
                f"non-finite loss at epoch {k}", epoch=k, records=records)
        params, adam = adam_step(adam, params, grad, config.learning_rate)
        if config.method == IPMNN:
            target = engine.refresh_target(params)
        epochs_run = k
        stop = config.epsilon is not None and loss < config.epsilon
        if k == 1 or k == config.n_epochs or k % config.record_every == 0 or stop:
            record(k, loss, lam, uv)
        if stop:
            break

    mlp_final = mlp.with_params(params)
    trial_final = pb.Trial(trial.x, trial.expr, mlp_final, bc, trial.d)
    lam_final = pb.rayleigh_quotient(op, trial_final, samples, params)
    u_final = sp.normalize(trial_final.values(samples.points, params))
    if u_true_vals is not None:
        u_final = sign_align(u_final, u_true_vals)
    estimate = EigenEstimate(lam_final, u_final, records[-1].loss, epochs_run,
                             mlp_final, trial_final)
    return estimate, records


def solve_interior(config, base_op, alpha, bc, box, exact=None, samples=None):
    """Inverse iteration on the shifted operator, reporting lambda + alpha.

    ``exact``, if given, refers to the unshifted operator; the records and
    the estimate are mapped back to unshifted eigenvalues.
    """
    if not math.isfinite(alpha):
        raise ShapeError(f"shift must be finite, got {alpha}")
    shifted_exact = None
    if exact is not None:
        lam_true, u_fn = exact
        shifted_exact = (lam_true - alpha if lam_true is not None else None, u_fn)
    est, recs = run_solver(config, (base_op.shifted(alpha), bc, box),
                           shifted_exact, samples=samples)
    est = replace(est, lam=est.lam + alpha)
    recs = [replace(r, lam=r.lam + alpha) for r in recs]
    return est, recs


def fit_to_samples(mlp, bc, samples, values, laplacian_values=None,
                   epochs=2000, lr=1e-3):
    """Least-squares pretraining of a wrapped trial toward sample values.

    Useful for seeding an iteration near a known function.  When
    ``laplacian_values`` is given the objective also matches the trial's
    Laplacian (scaled to balance the two terms), which controls the operator
    image of the fit, not just its values.  Returns the fitted network.
    """
    pts = getattr(samples, "points", samples)
    trial = pb.wrap_trial(mlp, bc)
    y = np.asarray(values, dtype=np.float64)
    loss = ad.mean(ad.square(trial.expr - ad.data("y")))
    bindings = {"y": y}
    if laplacian_values is not None:
        ly = np.asarray(laplacian_values, dtype=np.float64)
        w = 1.0 / max(1.0, float(np.mean(ly * ly)))
        loss = loss + ad.scale(ad.mean(ad.square(ad.laplacian(trial.expr)
                                                 - ad.data("ly"))), w)
        bindings["ly"] = ly
    sess = ad.Session([loss], np.asarray(pts, dtype=np.float64))
    params = mlp.flatten()
    adam = init_adam(params.size)
    for _ in range(epochs):
        sess.forward(params, bindings)
        grad = sess.backward({loss: np.ones((1, 1))})
        params, adam = adam_step(adam, params, grad, lr)
    return mlp.with_params(params)


def records_to_csv(records, path):
    """Iteration trace with stable headers and 17-significant-digit numbers."""
    with open(path, "w") as fh:
        fh.write("epoch,loss,lambda,lambda_err_max,u_err_max\n")
        for r in records:
            fh.write(f"{r.epoch},{r.loss:.17g},{r.lam:.17g},"
                     f"{r.lambda_err_max:.17g},{r.u_err_max:.17g}\n")

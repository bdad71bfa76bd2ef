"""Numerical self-checks: gradient vs finite differences, stationarity probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from graphrep.embed import EmbeddingParams, init_params
from graphrep.graph import GraphConfig
from graphrep.propagation import PropagationConfig
from graphrep.training import backward, finite_diff_grad, forward, frozen_loss


@dataclass
class Instance:
    params: EmbeddingParams
    X: np.ndarray
    Y0: np.ndarray
    val_idx: np.ndarray
    Y_val: np.ndarray
    gcfg: GraphConfig
    pcfg: PropagationConfig
    loss: str = "sq"

    def forward(self, params=None, edges=None, sigma_sq=None):
        p = self.params if params is None else params
        return forward(p, self.X, self.Y0, self.val_idx, self.Y_val, self.gcfg, self.pcfg,
                       edges, sigma_sq, loss=self.loss)


def random_instance(seed, n=12, d=4, d_prime=2, k=3, T=5, alpha=0.8, kind="linear",
                    hidden=3, c=2, n_seed=4, n_val=4, scale=1.0, loss="sq") -> Instance:
    """Small random problem; labels alternate so every class has seeds and targets."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.arange(n) % c
    order = rng.permutation(n)
    # stable sort by class keeps roles balanced across classes
    order = order[np.argsort(y[order], kind="stable")]
    per = n // c
    seeds, val = [], []
    for cls in range(c):
        members = order[cls * per : (cls + 1) * per]
        seeds.extend(members[: n_seed // c])
        val.extend(members[n_seed // c : n_seed // c + n_val // c])
    seeds, val = np.sort(seeds), np.sort(val)
    Y0 = np.zeros((n, c))
    Y0[seeds, y[seeds]] = 1.0
    params = init_params(kind, d, d_prime, hidden, "gaussian", scale, seed)
    return Instance(params, X, Y0, val, np.eye(c)[y[val]], GraphConfig(k),
                    PropagationConfig(alpha, T), loss)


@dataclass
class BlockCheck:
    block: str
    max_rel_err: float  # over coordinates with |analytic| > small
    max_abs_err: float  # over the remaining coordinates
    passed: bool


def compare_gradients(analytic, numeric, rtol=1e-4, atol=1e-6, small=1e-8):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    big = np.abs(analytic) > small
    rel = np.abs(analytic - numeric)[big] / np.abs(analytic[big])
    ab = np.abs(analytic - numeric)[~big]
    max_rel = float(rel.max()) if rel.size else 0.0
    max_abs = float(ab.max()) if ab.size else 0.0
    return max_rel, max_abs, bool(max_rel <= rtol and max_abs <= atol)


def gradcheck_instance(inst: Instance, h=1e-5, rtol=1e-4, atol=1e-6) -> list[BlockCheck]:
    fw = inst.forward()
    analytic = backward(fw)
    numeric = inst.params.with_flat(
        finite_diff_grad(frozen_loss(fw, inst.Y0, inst.gcfg, inst.pcfg), inst.params.flat(), h)
    )
    out = []
    for name, block in analytic.blocks().items():
        rel, ab, ok = compare_gradients(block, numeric.blocks()[name], rtol, atol)
        out.append(BlockCheck(name, rel, ab, ok))
    return out


def fd_error_sweep(inst: Instance, steps=(1e-4, 1e-5, 1e-6)) -> dict[float, float]:
    """Max abs deviation of central differences from the analytic gradient per step size."""
    fw = inst.forward()
    analytic = backward(fw).flat()
    fn = frozen_loss(fw, inst.Y0, inst.gcfg, inst.pcfg)
    return {h: float(np.max(np.abs(finite_diff_grad(fn, inst.params.flat(), h) - analytic)))
            for h in steps}


@dataclass
class StationarityResult:
    grad_norm: float
    loss: float
    curvature: float
    # (h, direction index, |L(θ+hu) - L(θ)|, bound)
    probes: list[tuple[float, int, float, float]]
    passed: bool


def converge(inst: Instance, gtol=1e-10, maxiter=5000):
    """Minimize the frozen-selection loss: BFGS, then a Newton trust-region polish
    on a Hessian differenced from the analytic gradient.

    Returns ``(params, edges, sigma_sq, grad_norm)``.
    """
    fw = inst.forward()
    edges, sigma_sq = fw.graph.edges.copy(), fw.graph.sigma_sq
    template = inst.params

    def fun(theta):
        f = inst.forward(template.with_flat(theta), edges, sigma_sq)
        return f.loss, backward(f).flat()

    def hess(theta, step=1e-6):
        H = np.empty((theta.size, theta.size))
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = step
            H[:, i] = (fun(theta + e)[1] - fun(theta - e)[1]) / (2.0 * step)
        return 0.5 * (H + H.T)

    res = optimize.minimize(fun, template.flat(), jac=True, method="BFGS",
                            options={"gtol": gtol, "maxiter": maxiter})
    res = optimize.minimize(fun, res.x, jac=True, hess=hess, method="trust-exact",
                            options={"gtol": gtol, "maxiter": 200})
    gnorm = float(np.linalg.norm(fun(res.x)[1]))
    return template.with_flat(res.x), edges, sigma_sq, gnorm


def stationarity_probe(inst: Instance, steps=(1e-3, 1e-4), n_dirs=10, factor=5.0, seed=0,
                       gtol=1e-6):
    """Check that a converged point is flat to first order.

    Curvature is estimated from second differences along the same random
    directions; the loss change at step ``h`` must stay below
    ``factor * h² * curvature`` plus the evaluation noise measured at
    displacements of 1e-12.
    """
    params, edges, sigma_sq, gnorm = converge(inst)
    fn = frozen_loss(inst.forward(params, edges, sigma_sq), inst.Y0, inst.gcfg, inst.pcfg)
    theta = params.flat()
    f0 = fn(theta)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, theta.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    evals = {(h, i): (fn(theta + h * u), fn(theta - h * u))
             for h in steps for i, u in enumerate(dirs)}
    curvature = max(abs(fp + fm - 2.0 * f0) / h**2 for (h, _), (fp, fm) in evals.items())
    # evaluation noise: displacements far too small to move L by more than rounding
    jitter = max(abs(fn(theta + 1e-12 * u) - f0) for u in dirs)
    noise = 2.0 * max(jitter, 8.0 * np.finfo(float).eps * max(abs(f0), 1.0))
    probes, ok = [], gnorm < gtol
    for (h, i), (fp, _) in evals.items():
        change = abs(fp - f0)
        bound = factor * h**2 * curvature + noise
        probes.append((h, i, change, bound))
        ok = ok and change <= bound
    return StationarityResult(gnorm, f0, curvature, probes, ok)

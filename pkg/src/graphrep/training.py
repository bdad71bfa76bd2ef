"""Held-out-label loss, its reverse-mode gradient, and the training loop.

Gradient path: loss -> propagation trajectory -> normalized operator ->
edge weights -> squared distances -> embedded points -> parameters. Edge
selection and bandwidth are frozen within one evaluation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from graphrep import kernels
from graphrep.data import Dataset, Role
from graphrep.embed import EmbeddingParams, Kind, embed, hidden_activations, init_params
from graphrep.errors import ConsistencyError, DivergenceError, InvalidConfigError
from graphrep.graph import ISOLATED_TOL, Graph, GraphConfig, build_graph, sym_normalize
from graphrep.propagation import PropagationConfig, predict, propagate_iterative

# keeps class shares differentiable on rows that received no mass
SHARE_EPS = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 1.0
    alpha: float = 0.9
    T: int = 30
    k: int = 10
    sigma: float | None = None
    kind: str = "linear"
    d_prime: int = 2
    hidden: int | None = None
    init: str = "gaussian"
    init_scale: float = 0.1
    seed: int = 0
    # "share": squared error on per-row class shares; "sq": on raw scores
    loss: str = "share"
    # scale gradient columns acting on input features by 1/variance
    precondition: bool = True

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidConfigError(f"loss must be one of {sorted(LOSSES)}, got {self.loss!r}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise InvalidConfigError(f"epochs must be a positive integer, got {self.epochs}")
        if not (math.isfinite(self.lr) and self.lr >= 0):
            raise InvalidConfigError(f"lr must be finite and >= 0, got {self.lr}")
        self.graph_config()
        self.propagation_config()

    def graph_config(self) -> GraphConfig:
        return GraphConfig(self.k, self.sigma)

    def propagation_config(self) -> PropagationConfig:
        return PropagationConfig(self.alpha, self.T)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_accuracy: float
    grad_norm: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    params: EmbeddingParams | None = None

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.records)


@dataclass
class Forward:
    """Everything one pipeline evaluation produced; input to :func:`backward`."""

    params: EmbeddingParams
    X: np.ndarray
    Z: np.ndarray
    D: np.ndarray
    graph: Graph
    S: object
    s_values: np.ndarray
    trajectory: np.ndarray
    alpha: float
    val_idx: np.ndarray
    Y_val: np.ndarray
    loss: float
    loss_grad: np.ndarray  # dL/dF at the final iterate
    loss_kind: str = "sq"

    @property
    def F(self) -> np.ndarray:
        return self.trajectory[-1]


def loss_sq(F, Y_val, val_idx) -> float:
    """Mean over held-out rows of the squared error between scores and one-hot targets."""
    val_idx = np.asarray(val_idx)
    if val_idx.size == 0:
        raise InvalidConfigError("validation set is empty")
    resid = np.asarray(F)[val_idx] - np.asarray(Y_val)
    return float(np.sum(resid * resid) / val_idx.size)


def loss_sq_grad(F, Y_val, val_idx) -> np.ndarray:
    G = np.zeros(np.shape(F))
    G[val_idx] = (2.0 / len(val_idx)) * (np.asarray(F)[val_idx] - Y_val)
    return G


def _shares(F, val_idx):
    rows = np.asarray(F)[val_idx]
    mass = rows.sum(axis=1, keepdims=True) + SHARE_EPS
    return rows / mass, mass


def loss_share(F, Y_val, val_idx) -> float:
    """Squared error between one-hot targets and per-row class shares F_i / sum(F_i)."""
    val_idx = np.asarray(val_idx)
    if val_idx.size == 0:
        raise InvalidConfigError("validation set is empty")
    P, _ = _shares(F, val_idx)
    resid = P - np.asarray(Y_val)
    return float(np.sum(resid * resid) / val_idx.size)


def loss_share_grad(F, Y_val, val_idx) -> np.ndarray:
    P, mass = _shares(F, val_idx)
    dP = (2.0 / len(val_idx)) * (P - Y_val)
    G = np.zeros(np.shape(F))
    G[val_idx] = (dP - np.sum(dP * P, axis=1, keepdims=True)) / mass
    return G


LOSSES = {"sq": (loss_sq, loss_sq_grad), "share": (loss_share, loss_share_grad)}


def forward(params, X, Y0, val_idx, Y_val, gcfg: GraphConfig, pcfg: PropagationConfig,
            edges=None, sigma_sq=None, loss="sq") -> Forward:
    Z = embed(params, X)
    graph, D = build_graph(Z, gcfg, edges=edges, sigma_sq=sigma_sq)
    op = sym_normalize(graph)
    _, traj = propagate_iterative(op.matrix, Y0, pcfg.alpha, pcfg.T)
    value_fn, grad_fn = LOSSES[loss]
    val_idx, Y_val = np.asarray(val_idx), np.asarray(Y_val, dtype=np.float64)
    return Forward(params, np.asarray(X, dtype=np.float64), Z, D, graph, op.matrix, op.values,
                   traj, pcfg.alpha, val_idx, Y_val, value_fn(traj[-1], Y_val, val_idx),
                   grad_fn(traj[-1], Y_val, val_idx), loss)


def dist_grad_from_weight_grad(dw, weights, sigma_sq):
    """dL/dD on edges given dL/dw, with w = exp(-D/sigma²)."""
    return -(weights / sigma_sq) * dw


def backward(fw: Forward) -> EmbeddingParams:
    """Analytic gradient of ``fw.loss`` with respect to ``fw.params``."""
    traj, S, graph = fw.trajectory, fw.S, fw.graph
    T = traj.shape[0] - 1
    n, c = traj.shape[1:]
    if S.shape != (n, n) or fw.Z.shape[0] != n or graph.n != n:
        raise ConsistencyError("trajectory, operator and embedding disagree on n")
    if fw.s_values.shape != graph.weights.shape:
        raise ConsistencyError("operator values not aligned with graph edges")

    if fw.loss_grad.shape != (n, c):
        raise ConsistencyError("loss gradient shape does not match the trajectory")
    G = fw.loss_grad
    # column block t-1 pairs G^t with F^{t-1}; dL/dS_ij = alpha * sum_t G^t_i . F^{t-1}_j
    G_stack = np.empty((n, T * c))
    F_stack = np.empty((n, T * c))
    ST = S.T
    for t in range(T, 0, -1):
        G_stack[:, (t - 1) * c : t * c] = G
        F_stack[:, (t - 1) * c : t * c] = traj[t - 1]
        G = fw.alpha * (ST @ G)

    dw = kernels.edge_weight_grad(graph.edges, fw.s_values, graph.degrees, G_stack, F_stack,
                                  fw.alpha, ISOLATED_TOL)
    dD = dist_grad_from_weight_grad(dw, graph.weights, graph.sigma_sq)
    dZ = kernels.scatter_point_grad(graph.edges, dD, fw.Z)
    return params_grad(fw.params, fw.X, dZ)


def params_grad(params: EmbeddingParams, X, dZ) -> EmbeddingParams:
    if params.kind is Kind.LINEAR:
        return EmbeddingParams(Kind.LINEAR, dZ.T @ X)
    H = hidden_activations(params, X)
    delta = (dZ @ params.w_out) * (1.0 - H * H)
    return EmbeddingParams(Kind.MLP1, dZ.T @ H, delta.T @ X, delta.sum(axis=0))


def finite_diff_grad(fn, theta, h=1e-5) -> np.ndarray:
    """Central differences of scalar ``fn`` at flat vector ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for idx in range(theta.size):
        step = np.zeros_like(theta)
        step[idx] = h
        grad[idx] = (fn(theta + step) - fn(theta - step)) / (2.0 * h)
    return grad


def frozen_loss(fw: Forward, Y0, gcfg, pcfg):
    """Loss as a function of flat parameters, edges and bandwidth fixed to ``fw``'s."""
    edges, sigma_sq = fw.graph.edges.copy(), fw.graph.sigma_sq

    def fn(theta):
        p = fw.params.with_flat(theta)
        return forward(p, fw.X, Y0, fw.val_idx, fw.Y_val, gcfg, pcfg, edges, sigma_sq,
                       loss=fw.loss_kind).loss

    return fn


def sgd_step(params: EmbeddingParams, grad: EmbeddingParams, lr) -> EmbeddingParams:
    return params.with_flat(params.flat() - lr * grad.flat())


def feature_scaling(X) -> np.ndarray:
    """Per-feature inverse variance; constant features get 1."""
    var = np.var(np.asarray(X, dtype=np.float64), axis=0)
    out = np.ones_like(var)
    nz = var > 0
    out[nz] = 1.0 / var[nz]
    return out


def precondition(grad: EmbeddingParams, scaling) -> EmbeddingParams:
    """Rescale the columns of the input-facing weight gradient.

    Same update as plain descent on standardized features, while the
    model itself keeps acting on the raw ones.
    """
    if grad.kind is Kind.LINEAR:
        return EmbeddingParams(Kind.LINEAR, grad.w_out * scaling)
    return EmbeddingParams(Kind.MLP1, grad.w_out, grad.w_hidden * scaling, grad.b_hidden)


def accuracy(labels, abstain, truth) -> float:
    """Fraction correct; abstentions always count as errors."""
    truth = np.asarray(truth)
    if truth.size == 0:
        return float("nan")
    return float(np.mean((labels == truth) & ~abstain))


def initial_params(ds: Dataset, cfg: TrainConfig) -> EmbeddingParams:
    return init_params(cfg.kind, ds.X.shape[1], cfg.d_prime, cfg.hidden, cfg.init,
                       cfg.init_scale, cfg.seed)


def train(ds: Dataset, cfg: TrainConfig, params: EmbeddingParams | None = None):
    """Full-batch gradient descent; returns ``(best_params, history)``.

    Epoch ``e`` records the state *before* its update, so epoch 0 is the
    initialization. Best validation accuracy wins, earliest epoch on ties.
    """
    val_idx = ds.indices(Role.VALIDATION)
    seeds = ds.indices(Role.SEED)
    if val_idx.size == 0:
        raise InvalidConfigError("dataset has no validation points")
    for cls in range(ds.n_classes):
        if not np.any(ds.y[seeds] == cls) or not np.any(ds.y[val_idx] == cls):
            raise InvalidConfigError(f"class {ds.class_names[cls]!r} lacks a seed or validation point")
    if ds.n_classes < 2:
        raise InvalidConfigError("need labeled points in at least two classes")

    Y0 = ds.seed_matrix()
    Y_val = np.eye(ds.n_classes)[ds.y[val_idx]]
    gcfg, pcfg = cfg.graph_config(), cfg.propagation_config()
    if gcfg.k > ds.n - 1:
        raise InvalidConfigError(f"k={gcfg.k} must be at most n-1={ds.n - 1}")
    params = initial_params(ds, cfg) if params is None else params.copy()
    scaling = feature_scaling(ds.X) if cfg.precondition else None

    history = TrainHistory()
    best_acc, best_params = -1.0, params
    for epoch in range(cfg.epochs):
        fw = forward(params, ds.X, Y0, val_idx, Y_val, gcfg, pcfg, loss=cfg.loss)
        grad = backward(fw)
        gnorm = float(np.linalg.norm(grad.flat()))
        if not (math.isfinite(fw.loss) and math.isfinite(gnorm)):
            raise DivergenceError(epoch, gnorm, fw.loss)
        labels, abstain = predict(fw.F[val_idx])
        acc = accuracy(labels, abstain, ds.y[val_idx])
        history.records.append(EpochRecord(epoch, fw.loss, acc, gnorm))
        if acc > best_acc:
            best_acc, best_params, history.best_epoch = acc, params, epoch
        if scaling is not None:
            grad = precondition(grad, scaling)
        with np.errstate(over="ignore", invalid="ignore"):
            theta = params.flat() - cfg.lr * grad.flat()
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(epoch, gnorm, fw.loss)
        params = params.with_flat(theta)
    history.params = best_params
    return best_params, history

"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 200 400 1000] [--repeat 5]

Reports the best-of-``repeat`` wall time per call for each kernel and for one
full training epoch (forward + backward) on the nuisance two-moons task.
"""

import argparse
import contextlib
import timeit

import numpy as np

from graphrep import kernels
from graphrep.data import Role, gen_two_moons, split_labels
from graphrep.graph import GraphConfig, build_graph, sym_normalize
from graphrep.propagation import PropagationConfig, propagate_iterative
from graphrep.training import TrainConfig, backward, forward, initial_params


@contextlib.contextmanager
def using(backend):
    saved = kernels._impl
    kernels._impl = kernels.BACKENDS[backend]
    try:
        yield
    finally:
        kernels._impl = saved


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(n, rng):
    Z = rng.normal(size=(n, 2))
    D = kernels.pairwise_sq_dists(Z, backend="python")
    graph, _ = build_graph(Z, GraphConfig(10))
    op = sym_normalize(graph)
    Y0 = np.zeros((n, 2))
    Y0[:10, 0] = Y0[10:20, 1] = 1.0
    _, traj = propagate_iterative(op.matrix, Y0, 0.9, 30)
    # the backward pass hands over all T steps stacked column-wise: (n, T * c)
    F_stack = np.ascontiguousarray(traj[:-1].transpose(1, 0, 2).reshape(n, -1))
    G_stack = rng.normal(size=F_stack.shape)
    dD = rng.normal(size=len(graph.edges))
    return {
        "pairwise_sq_dists": lambda b: kernels.pairwise_sq_dists(Z, backend=b),
        "knn_select": lambda b: kernels.knn_select(D, 10, backend=b),
        "edge_weight_grad": lambda b: kernels.edge_weight_grad(
            graph.edges, op.values, graph.degrees, G_stack, F_stack, 0.9, 1e-12, backend=b),
        "scatter_point_grad": lambda b: kernels.scatter_point_grad(graph.edges, dD, Z, backend=b),
    }


def epoch_case(n):
    ds = split_labels(gen_two_moons(n, 0.1, 8, 3.0, seed=1), 10, 0.5, seed=1)
    cfg = TrainConfig(seed=1)
    params = initial_params(ds, cfg)
    val_idx = ds.indices(Role.VALIDATION)
    Y_val = np.eye(ds.n_classes)[ds.y[val_idx]]
    Y0 = ds.seed_matrix()

    def run(backend):
        with using(backend):
            fw = forward(params, ds.X, Y0, val_idx, Y_val, cfg.graph_config(),
                         PropagationConfig(cfg.alpha, cfg.T), loss=cfg.loss)
            backward(fw)

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 1000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = sorted(kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled extension not available; only the NumPy fallback will be timed")
    rng = np.random.default_rng(0)
    header = f"{'case':<22}{'n':>6}" + "".join(f"{b + ' (ms)':>16}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for n in args.sizes:
        cases = kernel_cases(n, rng)
        cases["epoch (fwd+bwd)"] = epoch_case(n)
        for name, fn in cases.items():
            times = [best_time(lambda: fn(b), args.repeat) * 1e3 for b in backends]
            row = f"{name:<22}{n:>6}" + "".join(f"{t:>16.3f}" for t in times)
            if len(times) == 2:
                row += f"{times[1] / times[0]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()

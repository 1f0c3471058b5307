"""Compare the pure-Python and numba-compiled kernel implementations.

Run with numba enabled (default). The script times both variants from
igpfix._kernels.IMPLEMENTATIONS on identical inputs and prints a speedup
table. JIT warm-up calls are excluded from the timings.

    python benchmarks/bench_kernels.py [--n 120] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from igpfix import _kernels
from igpfix.netmodel import WaxmanParams, assign_random_weights, generate_waxman, random_demands
from igpfix.paths import graph_arrays


def _inputs(n: int, seed: int):
    inst = generate_waxman(WaxmanParams(n=n, seed=seed), w_max=50)
    w = assign_random_weights(inst, seed=seed)
    ga = graph_arrays(inst)
    warr = ga.weight_array(w)
    demands = random_demands(inst, pairs=3 * n, seed=seed)
    vec = np.zeros(len(ga.nodes))
    dest = ga.index[inst.nodes[-1]]
    for (s, d), mbps in demands.entries.items():
        if ga.index[d] == dest:
            vec[ga.index[s]] += mbps
    vec[ga.index[inst.nodes[0]]] += 500.0  # guarantee nonzero demand
    return ga, warr, vec, dest


def _sim_inputs(n_nodes: int, n_paths: int, steps: int, seed: int):
    rng = np.random.default_rng(seed)
    order_counts = rng.integers(1, 5, n_nodes)
    order_ptr = np.zeros(n_nodes + 1, np.int64)
    order_ptr[1:] = np.cumsum(order_counts)
    order_path = rng.integers(0, n_paths, order_ptr[-1])
    path_next = rng.integers(-1, n_nodes, n_paths)
    path_tail = rng.integers(-2, n_paths, n_paths)
    node_cyclic = np.zeros(n_nodes, np.bool_)
    dom_ptr = np.zeros(n_paths + 1, np.int64)
    dom_path = np.zeros(0, np.int64)
    sched = rng.integers(0, n_nodes, steps)
    traj = np.full((steps, n_nodes), -1, np.int32)
    return (order_ptr, order_path, path_next, path_tail, node_cyclic,
            dom_ptr, dom_path, sched, n_nodes, traj, steps)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=120, help="topology size")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if "numba" not in _kernels.IMPLEMENTATIONS:
        raise SystemExit("numba variant unavailable (IGPFIX_NO_NUMBA set or numba missing)")

    ga, warr, vec, dest = _inputs(args.n, args.seed)
    sim_args = _sim_inputs(200, 800, 20000, args.seed)

    cases = {
        "dijkstra": lambda f: f(ga.adj_ptr, ga.adj_node, ga.adj_link, warr, dest),
        "ecmp_loads": None,  # needs dist; bound below
        "simulate_run": lambda f: f(*sim_args[:8], sim_args[8],
                                    sim_args[9].copy(), sim_args[10]),
    }
    dist = _kernels.IMPLEMENTATIONS["python"]["dijkstra"](
        ga.adj_ptr, ga.adj_node, ga.adj_link, warr, dest
    )
    cases["ecmp_loads"] = lambda f: f(ga.adj_ptr, ga.adj_node, ga.adj_link, warr, dist, vec)

    print(f"{'kernel':<14} {'python (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, call in cases.items():
        times = {}
        for variant in ("python", "numba"):
            fn = _kernels.IMPLEMENTATIONS[variant][name]
            call(fn)  # warm-up (JIT compile for numba)
            times[variant] = min(
                timeit.repeat(lambda: call(fn), number=1, repeat=args.repeat)
            )
        print(f"{name:<14} {times['python'] * 1e3:>12.3f} "
              f"{times['numba'] * 1e3:>12.3f} {times['python'] / times['numba']:>8.1f}x")


if __name__ == "__main__":
    main()

"""Compiled vs pure-Python kernels, per call and end to end.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

The end-to-end number trains fine-tuning Q-learning on cart-pole once with
each backend, in a subprocess so the backend choice happens at import.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from cltree import _kernels_py

try:
    from cltree import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    values = np.ascontiguousarray(rng.normal(size=(2401, 2)))
    counts = np.zeros((2401, 2), dtype=np.int64)
    edges = np.ascontiguousarray(np.tile(np.linspace(-1, 1, 5), (4, 1)))
    state = np.ascontiguousarray(rng.uniform(-1.5, 1.5, size=4))
    n = 1000
    batch = (rng.integers(0, 2401, n), rng.integers(0, 2, n), rng.normal(size=n),
             rng.integers(0, 2401, n), (rng.random(n) < 0.05).astype(np.uint8))
    return {
        "cartpole_step": lambda k: k.cartpole_step(0.01, 0.02, 0.03, 0.04, 1, 9.8, 1.0, 0.1,
                                                   0.5, 10.0, 0.02),
        "greedy_action": lambda k: k.greedy_action(values, 17),
        "q_update": lambda k: k.q_update(values, counts, 5, 1, 1.0, 9, False, 0.1, 0.99),
        "q_update_batch[1000]": lambda k: k.q_update_batch(values, counts, *batch, 0.1, 0.99),
        "discretize": lambda k: k.discretize(state, edges),
    }


def per_call(repeat: int, number: int) -> list[dict]:
    rows = []
    for name, fn in _cases(np.random.default_rng(0)).items():
        py = min(timeit.repeat(lambda: fn(_kernels_py), repeat=repeat, number=number)) / number
        row = {"kernel": name, "python_us": py * 1e6, "compiled_us": None, "speedup": None}
        if _kernels is not None:
            c = min(timeit.repeat(lambda: fn(_kernels), repeat=repeat, number=number)) / number
            row.update(compiled_us=c * 1e6, speedup=py / c)
        rows.append(row)
    return rows


_E2E = """
import json, time
from cltree import kernels
from cltree.evaluation import Setting
from cltree.methods import make_descriptor
s = Setting.create("incremental_rl", "cartpole", 2, 5000)
t = time.perf_counter()
r = s.apply(make_descriptor("base"), 0)
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t,
                  "rows": r.matrix.rows.tolist()}))
"""


def end_to_end() -> dict:
    out = {}
    for pure in ("1", "0"):
        env = dict(os.environ, CLTREE_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True,
                             text=True, check=True)
        d = json.loads(res.stdout)
        out[d["backend"]] = d
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=2000)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; timing the Python twins only")
    print(f"{'kernel':<22}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for r in per_call(args.repeat, args.number):
        c = "-" if r["compiled_us"] is None else f"{r['compiled_us']:.3f}"
        s = "-" if r["speedup"] is None else f"{r['speedup']:.1f}x"
        print(f"{r['kernel']:<22}{r['python_us']:>12.3f}{c:>14}{s:>10}")
    if args.end_to_end:
        res = end_to_end()
        for backend, d in res.items():
            print(f"end to end ({backend}): {d['seconds']:.2f} s")
        if len(res) == 2:
            same = res["python"]["rows"] == res["compiled"]["rows"]
            print(f"transfer matrices identical across backends: {same}")


if __name__ == "__main__":
    main()

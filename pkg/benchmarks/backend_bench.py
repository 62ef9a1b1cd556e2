"""Timing comparison of the compiled and fallback kernel backends.

Runs every hot kernel plus one end-to-end sweep under both values of
``TWRC_BACKEND`` (each in a fresh interpreter, since the flag is read at
import) and prints per-workload wall times with the speedup ratio.
First-call JIT compilation is measured separately so the steady-state
numbers stay comparable; ``cache=True`` makes recompilation a one-off
per machine.

    python3 benchmarks/backend_bench.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads(repeats):
    import numpy as np

    import twrc._kernels as k
    import twrc.montecarlo as mc
    from twrc.montecarlo import Scenario, rayleigh_sample, run_scenario
    from twrc.optimize import OptimizerSettings

    rng = np.random.default_rng(31337)

    def cplx(rows, cols):
        return (rng.standard_normal((rows, cols))
                + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)

    HA, HB = cplx(4, 2), cplx(4, 2)
    QA = np.zeros((2, 2), dtype=np.complex128)
    QB = np.zeros((2, 2), dtype=np.complex128)
    s2a = np.array([0.9, 0.4])
    s2b = 1.0 - s2a
    rt2 = np.array([1.7, 0.6])
    ch = rayleigh_sample(2, 2, 4, trial_seed=7)
    prep = mc._TrialPrep(ch, ("sd",))
    fracs = np.linspace(0.0, 1.0, 11)

    def bench(fn, n):
        fn()  # first call outside the timed loop
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        return (time.perf_counter() - t0) / n

    def run_iwf():
        QA[:] = 0.0
        QB[:] = 0.0
        k.mac_sum_iwf(HA, HB, 10.0, 10.0, 1.0, QA, QB, 200, 1e-10)

    def run_split():
        mc._eval_scheme("sd", prep, 316.227766, fracs, 400)

    def run_alloc():
        k.pnc_allocate(s2a, s2b, rt2, 10.0, 10.0, 1.0, 1.0, 1.0, True, 400, 1e-10)

    def run_single_pass():
        k.equal_power_sum_rate(HA, HB, 10.0, 10.0, 1.0)
        k.ub_sum_waterfill(s2a, s2b, 10.0, 10.0, 1.0)
        k.water_fill(rt2, 10.0)

    sc = Scenario(
        n_A=2, n_B=2, n_R=4, snr_db_list=(10.0, 20.0), trials=30, seed=5,
        settings=OptimizerSettings(power_split_grid=tuple(np.linspace(0, 1, 6))),
    )

    def run_sweep():
        run_scenario(sc)

    return k.BACKEND, [
        ("mac_sum_iwf 4x2", lambda: bench(run_iwf, repeats)),
        ("sd_split_search (2,2,4)", lambda: bench(run_split, repeats)),
        ("pnc_allocate 2 pairs", lambda: bench(run_alloc, repeats)),
        ("single-pass kernels", lambda: bench(run_single_pass, repeats)),
        ("run_scenario 30 trials", lambda: bench(run_sweep, max(1, repeats // 20))),
    ]


def child(repeats):
    t0 = time.perf_counter()
    backend, work = _workloads(repeats)
    compile_s = time.perf_counter() - t0
    results = [(name, fn()) for name, fn in work]
    print(json.dumps({"backend": backend, "import_and_first_call_s": compile_s,
                      "results": results}))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=100)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        child(args.repeats)
        return 0

    try:
        import numba  # noqa: F401
        backends = ("numba", "numpy")
    except ImportError:
        backends = ("numpy",)
        print("numba not importable; timing the fallback only", file=sys.stderr)

    reports = {}
    for backend in backends:
        env = dict(os.environ, TWRC_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--child", "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True,
        )
        reports[backend] = json.loads(out.stdout.splitlines()[-1])

    names = [n for n, _ in reports[backends[0]]["results"]]
    width = max(len(n) for n in names)
    header = f"{'workload':<{width}}" + "".join(f"  {b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for i, name in enumerate(names):
        times = [reports[b]["results"][i][1] for b in backends]
        line = f"{name:<{width}}" + "".join(f"  {t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"  {times[1] / times[0]:>7.1f}x"
        print(line)
    for b in backends:
        print(f"import + first call ({b}): "
              f"{reports[b]['import_and_first_call_s']:.2f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""
Monte Carlo cross-check of the analytic value functions.

Simulates the threshold policy for the GBM benchmark configuration in
both simulator formulations (full: simulate catastrophe marks; thinned:
absorb them into the idle discount rate), compares the estimates with
the analytic values, and runs a common-random-number scan showing that
deviating from the solved threshold only loses value.

Runs in roughly 15 seconds. Run from repo root:
    python3 demos/demo_policy_simulation.py
"""

import math

import entrysolve as es


def main() -> None:
    spec = es.gbm(alpha=0.05, beta=0.25)
    params = es.ProblemParams(r=0.1, lam=1.0, p=0.5, K=1.0, C=1.0,
                              h=es.power(0.5))
    sol = es.solve(spec, params)
    print(f"analytic threshold x* = {sol.x_star:.6f}")

    print("\n=== Simulated vs analytic idle value (20k paths) ===")
    print(f" {'x0':>5} {'formulation':>12} {'MC mean':>10} {'stderr':>9}"
          f" {'analytic':>10} {'dev/sigma':>10}")
    for x0 in (2.0, 8.0):
        for form in (es.Formulation.FULL, es.Formulation.THINNED):
            cfg = es.SimConfig(n_paths=20_000, seed=11, dt=0.05,
                               formulation=form)
            est = es.simulate_idle_value(spec, params, sol.x_star, x0, cfg)
            target = float(sol.value_idle(x0))
            dev = (est.mean - target) / est.stderr
            print(f" {x0:5.1f} {form.value:>12} {est.mean:10.5f}"
                  f" {est.stderr:9.5f} {target:10.5f} {dev:10.2f}")

    print("\n=== Threshold suboptimality scan (common random numbers) ===")
    multipliers = (0.7, 0.85, 1.0, 1.15, 1.3)
    cfg = es.SimConfig(n_paths=20_000, seed=11, dt=0.05,
                       formulation=es.Formulation.THINNED)
    rows = es.threshold_suboptimality_scan(spec, params, 2.0, multipliers, cfg)
    base = rows[multipliers.index(1.0)]
    print(f" start state x0 = 2.0, thresholds m * x*")
    print(f" {'m':>5} {'threshold':>10} {'MC mean':>10} {'gap to m=1':>11}")
    for m, row in zip(multipliers, rows):
        gap = row.mean - base.mean
        tag = "  <- solved threshold" if m == 1.0 else ""
        print(f" {m:5.2f} {m * sol.x_star:10.4f} {row.mean:10.5f}"
              f" {gap:11.2e}{tag}")
    print(" (shared paths cancel most noise, so the gaps are resolved"
          " far below one stderr)")

    print("\n=== Never-enter sanity check ===")
    # cap the payoff below the break-even flow: entering cannot pay
    ne_params = es.ProblemParams(r=0.1, lam=1.0, p=0.5, K=1.0, C=1.0,
                                 h=es.saturating(2.0, 0.4))
    ne_sol = es.solve(spec, ne_params)
    cfg = es.SimConfig(n_paths=20_000, seed=11, dt=0.05,
                       formulation=es.Formulation.THINNED)
    est = es.simulate_idle_value(spec, ne_params, 1.0, 1.5, cfg)
    print(f" mode = {ne_sol.mode.value}; forcing entry at threshold 1.0"
          f" earns {est.mean:.4f} +- {est.stderr:.4f} (negative)")


if __name__ == "__main__":
    main()

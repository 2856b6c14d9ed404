"""
Entry threshold for the geometric Brownian motion model.

Solves the benchmark configuration (alpha=0.05, beta=0.25, r=0.1,
lambda=1, p=0.5, K=C=1, h(x)=sqrt(x)), checks the root against the
closed form available for the square-root payoff, and tabulates the
idle and active value functions around the threshold.

Run from repo root:
    python3 demos/demo_gbm_threshold.py
"""

import math

import entrysolve as es


def main() -> None:
    spec = es.gbm(alpha=0.05, beta=0.25)
    params = es.ProblemParams(r=0.1, lam=1.0, p=0.5, K=1.0, C=1.0,
                              h=es.power(0.5))
    sol = es.solve(spec, params)

    print("=== Threshold ===")
    kappa = params.break_even
    print(f" break-even flow kappa = C + (r + lam) K = {kappa:.4f}")
    print(f" break-even state x_C  = kappa^2 = {kappa ** 2:.6f}")
    print(f" entry threshold x*    = {sol.x_star:.9f}")

    # closed form for h(x) = sqrt(x): x* = (kappa (1/2 - a) / (-a))^2,
    # a the negative root of (beta^2/2) t (t-1) + alpha t = r + lam
    half = 0.5 - spec.alpha / spec.beta ** 2
    a = half - math.sqrt(half * half + 2.0 * (params.r + params.lam)
                         / spec.beta ** 2)
    closed = (kappa * (0.5 - a) / (-a)) ** 2
    print(f" closed-form value     = {closed:.9f}")
    print(f" relative difference   = {abs(sol.x_star - closed) / closed:.2e}")

    print("\n=== Coefficients ===")
    print(f" idle psi coefficient below x*   c_i1 = {sol.c_i1:.6e}")
    print(f" idle phi coefficient above x*   d_i2 = {sol.d_i2:.6e}")
    print(f" active psi coefficient          c_a1 = {sol.c_a1:.6e}")

    print("\n=== Values around the threshold ===")
    print(f" {'x':>8} {'G_idle':>12} {'G_active':>12} {'G_a - G_i':>12}")
    for x in (2.0, 4.0, sol.x_star, 6.0, 8.0):
        gi = float(sol.value_idle(x))
        ga = float(sol.value_active(x))
        tag = "  <- x* (gap = K)" if x == sol.x_star else ""
        print(f" {x:8.4f} {gi:12.6f} {ga:12.6f} {ga - gi:12.6f}{tag}")

    print("\n=== Diagnostics ===")
    d = sol.diagnostics
    print(f" threshold equation residual |F(x*)| = {d.root_residual:.2e}")
    print(f" value pasting gap at x*             = {d.pasting_gap_value:.2e}")
    print(f" slope pasting gap at x*             = {d.pasting_gap_slope:.2e}")
    print(f" growth condition margin             = {d.growth_margin:.4f}")


if __name__ == "__main__":
    main()

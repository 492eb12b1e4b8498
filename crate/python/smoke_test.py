#!/usr/bin/env python3
"""Smoke test for the bayesprice_py extension module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p bayesprice-py` (debug or release), stages it under the
importable name, and exercises one slice of every exposed surface.

Run from the repository root:

    cargo build -p bayesprice-py
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libbayesprice_py.so", "bayesprice_py.so")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built extension found; run `cargo build -p bayesprice-py` first")

    stage = Path(tempfile.mkdtemp(prefix="bayesprice_py_"))
    shutil.copy2(built, stage / "bayesprice_py.so")
    sys.path.insert(0, str(stage))
    import bayesprice_py

    return bayesprice_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    bp = load_module()

    # Bessel and GIG: half-integer closed forms
    # K_{1/2}(2) = sqrt(pi / 4) e^{-2}
    approx(bp.ln_bessel_k(0.5, 2.0), 0.5 * math.log(math.pi / 4.0) - 2.0, 1e-12)
    mean, var = bp.gig_moments(0.5, 1.0, 1.0)
    approx(mean, 2.0, 1e-10)
    approx(var, 3.0, 1e-10)
    assert bp.gig_density(1.0, 0.5, 1.0, 1.0) > 0.0
    draws = bp.gig_sample(0.5, 1.0, 1.0, 4000, seed=1)
    assert len(draws) == 4000 and all(x > 0.0 for x in draws)
    approx(sum(draws) / len(draws), mean, 0.2)

    # simulation round trip through CSV
    grid = [i / 12.0 for i in range(13)]
    path = bp.simulate_gbm(100.0, 0.05, 0.2, grid, seed=7)
    assert len(path) == 13 and path.s0() == 100.0
    with tempfile.TemporaryDirectory() as d:
        csv = str(Path(d) / "path.csv")
        path.write_csv(csv)
        back = bp.PricePath.read_csv(csv)
        assert back.times == path.times and back.prices == path.prices
    jump = bp.simulate_jump_diffusion(
        100.0, 0.05, 0.2, 20.0, [-0.05, 0.04], [0.5, 0.5], grid, seed=7
    )
    assert jump.prices != path.prices

    # likelihood profile peaks at the flat-prior posterior mean
    ln_ratio, horizon = path.log_return()
    anchor = ln_ratio / horizon + 0.04 / 2.0
    at_peak = bp.ln_likelihood_gbm(ln_ratio, horizon, anchor, 0.04, r=0.05)
    off_peak = bp.ln_likelihood_gbm(ln_ratio, horizon, anchor + 0.3, 0.04, r=0.05)
    assert at_peak > off_peak

    # Esscher tilt collapses to Girsanov when jumps vanish
    theta = bp.esscher_theta(0.08, 0.04, 0.05, 0.0, [0.01], [1.0])
    approx(theta, (0.05 - 0.08) / 0.04, 1e-10)

    # Gibbs inference and posterior-integrated pricing
    long_grid = [i / 52.0 for i in range(5 * 52 + 1)]
    long_path = bp.simulate_gbm(100.0, 0.08, 0.2, long_grid, seed=3)
    draws = bp.gibbs_run(
        long_path,
        r=0.05,
        prior_mu="normal:0.05,0.25",
        prior_sigma2="gig:-1,0.3,6",
        n_draws=2000,
        burn_in=500,
        seed=11,
    )
    assert len(draws) == 2000 and draws.seed == 11
    s = draws.summary()
    assert s["sigma2"]["q05"] < s["sigma2"]["mean"] < s["sigma2"]["q95"]
    assert 0.0 < s["sigma2"]["mean"] < 0.5
    again = bp.PosteriorDraws.from_json(draws.to_json())
    assert again.mu == draws.mu and again.sigma2 == draws.sigma2

    strike, maturity, r = 100.0, long_path.last_time() + 1.0, 0.05
    mean_price, se, n = bp.price_posterior(long_path, strike, maturity, r, draws)
    assert n == 2000 and se > 0.0
    spot = long_path.last_price()
    assert max(spot - strike * math.exp(-r), 0.0) - 1e-9 <= mean_price <= spot
    fixed = bp.bs_call(100.0, 100.0, 1.0, 0.0, 0.0, 0.04)
    approx(fixed, 7.965567455405796, 1e-10)

    # model averaging arithmetic
    posts = bp.model_posterior([2.0, 1.0], [0.5, 0.5])
    approx(posts[0], 2.0 / 3.0, 1e-12)
    approx(posts[1], 1.0 / 3.0, 1e-12)

    # errors surface as ValueError
    try:
        bp.gig_moments(1.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate GIG must raise ValueError")

    print("PASS: bayesprice_py smoke test")


if __name__ == "__main__":
    main()

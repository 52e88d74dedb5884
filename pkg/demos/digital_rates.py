"""Delta vs quadratic hedging of a digital option under CGMY.

For Y in (1.5, 2) the delta-hedging error of a digital decays like
h^(1 - 1/Y) while the quadratic-hedging error decays like h^(3/Y - 1).
This script estimates both on shared paths and sets them against the
predicted rates and constants.

    python demos/digital_rates.py [n_paths]
"""
import sys

from hedgelab import constants, levy, payoffs
from hedgelab import montecarlo as mc

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
pair = levy.MarketPair.from_historical(levy.cgmy(0.5, 5.0, 10.0, 1.8))
pay = payoffs.digital(1.0)
n_list = [4, 8, 16, 32, 64]
cfg = mc.SimConfig(n_paths=n_paths, seed=1, m=32, eps=5e-3)

res = mc.estimate_errors(pair, pay, ["delta", "quadratic"], n_list, cfg)
for s, est in res.items():
    pred = constants.predict(pair, pay, s, 1.0)
    fit = mc.rate_fit(est, check_signal=False)
    print(f"{s}: {pred.theorem}, predicted beta={pred.rate_exponent:.3f}, fitted {fit.slope:.3f}")
    print("     n    mean_sq      se         ratio to c h^beta")
    for e in est:
        ratio = e.mean_sq / (pred.constant * e.h**pred.rate_exponent)
        print(f"  {e.n:4d}  {e.mean_sq:.4e}  {e.std_err:.2e}  {ratio:.3f}")

"""Price, delta and quadratic hedge ratio of a digital across spot.

Under pure diffusion the two hedge ratios agree; with jumps the quadratic
ratio is flatter near the strike, which is what keeps its discretization
error small.

    python demos/strategies.py
"""
import numpy as np

from hedgelab import fourier, levy, payoffs

pay = payoffs.digital(1.0)
models = {
    "bs": levy.black_scholes(0.2),
    "merton": levy.merton(0.1, 1.0, -0.1, 0.15),
    "cgmy 1.5": levy.cgmy(0.5, 5.0, 10.0, 1.5),
}
t = 0.9
for name, m in models.items():
    pair = levy.MarketPair.from_historical(m)
    print(f"{name} (t={t}, T=1)")
    print("     S    price    delta    quadratic")
    for S in np.linspace(0.9, 1.1, 9):
        p = fourier.price(pair, pay, t, S)
        d = fourier.delta_strategy(pair, pay, t, S)
        q = fourier.quad_strategy(pair, pay, t, S)
        print(f"  {S:.3f}  {p:.4f}  {d:7.4f}  {q:7.4f}")

"""Density of states and analyticity inside the certified regime.

Inside the small-hopping region the averaged Green function difference is
analytic, so the Stieltjes inversion gives n(E) = 0 there.  The Cauchy probe
checks the mean-value property on a small circle and estimates how far the
function continues analytically.
"""
from pointdos import SingleSiteLaw, analyticity_probe, dos_density
from pointdos.dos import Truncation

law = SingleSiteLaw.uniform(-2.0, -1.0)
trunc = Truncation(n_max=8, r_hop=2)

for E in (-1.4, -1.0, -0.8):
    pt = dos_density(E, law, 1, truncation=trunc)
    print(f"E={E:5.2f}  Re dG={pt.re:.6f}  n(E)={pt.n:+.2e}  "
          f"extrapolation err={pt.extrapolation_error:.1e}  tail<={pt.tail_bound:.2e}")

probe = analyticity_probe(-1.0, 0.05, law, 1, trunc)
print(f"\nCauchy residual {probe.cauchy_residual:.1e} at |dG|={abs(probe.value_at_center):.3f}; "
      f"Taylor radius estimate {probe.taylor_radius_estimate:.3f}")

"""Where does the random-walk expansion converge?

For a uniform coupling law we compute the pole gap certificate, then sweep
the energy and compare the hopping row sum S(E) with the gap.  Energies
with S/gap < 1 are certified; the expansion is only used there.
"""
import numpy as np

from pointdos import SingleSiteLaw, SpectralPoint, lattice_sum_S, pole_gap
from pointdos.sites import gap_at

law = SingleSiteLaw.uniform(-2.0, -1.0)

for d, interval in [(1, (-1.5, -0.8)), (3, (-9.0, -4.0))]:
    cert = pole_gap(law, d, I=interval)
    print(f"d={d}  I={interval}  delta*={cert.delta_star:.6f}  "
          f"Schur ratio={cert.schur_ratio:.3f}  certified={cert.small_hopping_ok}")

print("\nd=3 energy sweep")
print("      E        S(E)      gap    ratio")
for E in np.linspace(-12.0, -0.5, 10):
    p = SpectralPoint(E, 3)
    S = lattice_sum_S(p).upper
    gap = gap_at(law, p)
    ratio = S / gap if gap > 0 else np.inf
    print(f"{E:8.3f}  {S:9.5f}  {gap:7.4f}  {ratio:7.3f}{'  *' if ratio < 1 else ''}")

"""Do periodic bands ever reach the certified region?

On a band energy the periodic symbol 1/q0 - rho - sum T e^{i theta n}
vanishes, so |1/q0 - rho| <= S(E) and the Schur ratio of any law whose
support contains q0 is at least one.  The regime map shows this directly.
"""
import numpy as np

from pointdos import SingleSiteLaw, band_window, regime_map

q0 = -6.0
law = SingleSiteLaw.uniform(q0 - 0.25, q0 + 0.25)
bw = band_window(1, q0, theta_samples=9, d1_sign_flip=True)
print(f"d=1 flip band for q0={q0}: [{bw.E_minus:.4f}, {bw.E_plus:.4f}]")

grid = np.linspace(bw.E_minus - 0.5, bw.E_plus + 0.5, 15)
rows = regime_map(law, 1, grid, q0, d1_sign_flip=True)
for r in rows:
    tag = ("band " if r["in_band"] else "     ") + ("certified" if r["certified"] else "")
    print(f"E={r['E']:8.4f}  ratio={r['ratio']:8.3f}  {tag}")
print("overlap points:", sum(r["in_band"] and r["certified"] for r in rows))

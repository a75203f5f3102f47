"""Laurent coefficients and contour criteria for the planar Beltrami field.

    python3 demos/beltrami_contour.py
"""

import numpy as np

from twistorial import catalogue
from twistorial.sampling import base_samples
from twistorial.series_engine import einstein_and_selfdual_criteria, laurent_from_closed_form, laurent_residuals
from twistorial.soliton_check import SolitonCandidate

data = catalogue.get("bel.planar", fiber=(0.7, 1.5))
chart = data.chart.extend("rho", data.fiber_interval)
pts = base_samples(catalogue.CATALOGUE["bel.planar"].box)

# x + i y = exp(-i rho^-2), f = z = 0, a = 0
cand = SolitonCandidate.parse(chart, x="cos(rho^(-2))", y="-sin(rho^(-2))")
series = laurent_from_closed_form(cand, (-8, 0), K=128)
print("nonzero Laurent coefficients of x and y:")
for j in sorted(series.coeffs):
    for k in ("x", "y"):
        e = series.get(j, k)
        if not e.is_zero():
            print(f"  {k}_{j:<3} = {complex(e.value).real:+.6f}")

rep = laurent_residuals(data, series, pts)
for fam, s in rep["families"].items():
    print(f"family {fam}: max residual {s['max']:.2e}")

crit = einstein_and_selfdual_criteria(data, cand, pts[::5], K=128)
print(f"|M_1| = {crit['M1_norm']:.3e}, obstruction |2Ric - 4h| = {crit['obstruction_norm']:.3f}")
print(f"Einstein: contour {crit['einstein_contour']}, metric {crit['einstein_metric']}; "
      f"gap {crit['obstruction_gap']:.1e}")
print(f"self-dual: contour {crit['selfdual_contour']}, metric {crit['selfdual_metric']} "
      f"(ASD Weyl {crit['weyl_asd']:.2e})")
print("imaginary part of the obstruction:", np.format_float_scientific(crit["imag_part"], 2))

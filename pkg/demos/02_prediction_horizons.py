"""Light vs heavy prediction on a curving road.

The vehicle's light predictor fits a straight line to its last five positions;
the roadside heavy predictor fits a constant turn rate to twenty. Both errors grow
with lookahead, but the straight line drifts off the curve faster, and by five
seconds it is more than twice as far off as the turn model.

    python demos/02_prediction_horizons.py
"""

from __future__ import annotations

from iaad_sim.experiments import prediction_error_curves
from iaad_sim.scenario import arc

curves = prediction_error_curves(arc(), "arc1", range(20))
print(f"noise floor (one detection): {curves.noise_floor:.3f} m\n")
print(f"{'lookahead':>9} {'light m':>8} {'heavy m':>8} {'ratio':>6}")
for k in (1, 2, 5, 10, 20, 30, 50):
    light, heavy = curves.light[k - 1], curves.heavy[k - 1]
    print(f"{k * 0.1:>8.1f}s {light:>8.2f} {heavy:>8.2f} {light / heavy:>6.1f}")

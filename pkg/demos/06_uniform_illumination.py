"""Is the scene lit by one light? Compare achromatic regions.

The left half of the scene is lit by a 5000 K Planckian, the right half by
a warmer one picked to sit 1.8 degrees away in camera RGB.
"""

import numpy as np
from scipy.optimize import brentq

from ccbench.evaluation import angular_error
from ccbench.hygiene import uniform_illumination_check
from ccbench.synthetic import CameraModel, SpectralScene, planckian_spd, render

cam = CameraModel.gaussian(gain=0.05)
spd1 = planckian_spd(5000)
e1 = cam.response(spd1)
cct2 = brentq(lambda t: angular_error(e1, cam.response(planckian_spd(t))) - 1.8, 2000, 5000)
print(f"second illuminant: {cct2:.0f} K")

illumination = np.zeros((20, 40), int)
illumination[:, 20:] = 1
scene = SpectralScene(np.stack([spd1, planckian_spd(cct2)]), np.full((1, 31), 0.6),
                      np.zeros((20, 40), int), illumination)
img, _ = render(scene, cam)

regions = {"left": [[2, 2], [18, 2], [18, 18], [2, 18]],
           "right": [[22, 2], [38, 2], [38, 18], [22, 18]]}
report = uniform_illumination_check(img, regions)
print(f"pairwise angles:\n{np.round(report.angles, 3)}")
for f in report.findings:
    print(f"{f.severity}: {f.message}")

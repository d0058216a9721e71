"""The Minkowski family of statistics-based estimators on a small synthetic set."""

from ccbench import EstimatorSpec, evaluate, make_benchmark, subtract_black
from ccbench.estimators import estimate
from ccbench.imaging import saturation_mask

dataset = make_benchmark(40, seed=5)
gt = dataset.ground_truth()
images = {}
for item in dataset.items:
    img = subtract_black(dataset.render_item(item)[0])
    images[item.image_id] = (img, saturation_mask(img))

specs = [
    EstimatorSpec.gray_world(),
    EstimatorSpec.white_patch(),
    EstimatorSpec.shades_of_gray(4),
    EstimatorSpec.gray_edge(order=1, p=6, sigma=2),
    EstimatorSpec.gray_edge(order=2, p=6, sigma=2),
]
print(f"{'estimator':32s} {'mean':>6s} {'median':>6s} {'worst25':>7s}")
for spec in specs:
    est = {k: estimate(img, spec, mask) for k, (img, mask) in images.items()}
    s = evaluate(est, gt, spec.describe(), "subtracted", "synthetic").stats
    print(f"{spec.describe():32s} {s.mean:6.2f} {s.median:6.2f} {s.worst25_mean:7.2f}")

# The chart is part of every scene, so these numbers flatter the estimators
# compared with real photographs. Treat them as a smoke test, not a ranking.

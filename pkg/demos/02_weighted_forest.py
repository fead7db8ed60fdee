# Weighted multitask forest: point forecasts and demand samples
# --------------------------------------------------------------
# One forest is trained across every (facility, product) row. Its trees
# double as a demand distribution: each tree's output is one scenario
# sample for the allocation stage. Row weights shape what the forest
# spends its capacity on.

import numpy as np

from stockalloc import FeatureTable, Forest, ForestParams, train_forest

rng = np.random.default_rng(0)

# A toy multitask dataset: demand depends on the first feature with a kink.
n = 400
X = rng.uniform(0, 10, size=(n, 3))
y = np.where(X[:, 0] < 5, 2 * X[:, 0], 10 + 0.5 * (X[:, 0] - 5)) + rng.normal(0, 0.3, n)
y = np.clip(y, 0, None)

table = FeatureTable.from_arrays(X, y)
params = ForestParams(n_trees=50, max_depth=8, min_leaf_weight=2.0)
forest = train_forest(table, params, seed=7)

probe = np.array([[2.0, 5.0, 5.0], [8.0, 5.0, 5.0]])
print("point forecasts:", forest.predict_point(probe).round(2))

samples = forest.predict_samples(probe)
print("per-tree sample spread (facility 0):",
      samples[0].min().round(2), "...", samples[0].max().round(2))
print("sample mean equals the point forecast:",
      np.allclose(samples.mean(axis=1), forest.predict_point(probe)))

# Weights steer capacity. Downweight the region x0 >= 5 and the fit there
# degrades while the left branch sharpens.
w = np.where(X[:, 0] < 5, 1.0, 0.05)
weighted = train_forest(table.with_weights(w), params, seed=7)
left = X[:, 0] < 5
for name, model in (("uniform", forest), ("downweighted right", weighted)):
    pred = model.predict_point(X)
    mse_left = float(np.mean((pred[left] - y[left]) ** 2))
    mse_right = float(np.mean((pred[~left] - y[~left]) ** 2))
    print(f"{name:>20}: mse left {mse_left:.3f} | mse right {mse_right:.3f}")

# Scaling all weights by a constant changes nothing about the model.
scaled = train_forest(table.with_weights(np.full(n, 3.0)), params, seed=7)
print("uniform*3 equals uniform:",
      np.allclose(scaled.predict_point(probe), forest.predict_point(probe)))

# Forests serialize to a portable JSON format, exactly.
blob = forest.to_json()
print("serialized size:", len(blob), "bytes; round-trip exact:",
      Forest.from_json(blob).to_json() == blob)

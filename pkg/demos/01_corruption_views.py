"""Corrupted views of a single row, with and without class conditioning.

Builds a toy table where the two classes live in different value ranges,
then prints several views of one anchor so the difference between the two
sampling schemes is visible by eye.
"""

import numpy as np

from tabcontrast import CorruptionContext, CorruptionPlan, corrupt

rng = np.random.default_rng(0)

# class 0 rows sit near 0, class 1 rows near 100; five features
pool = np.vstack([
    rng.normal(0.0, 1.0, size=(8, 5)),
    rng.normal(100.0, 1.0, size=(8, 5)),
])
classes = np.array([0] * 8 + [1] * 8)
anchor = pool[0]

print("anchor (class 0):", np.round(anchor, 2))
print()

ctx_uniform = CorruptionContext(pool)
plan_uniform = CorruptionPlan(p=0.6)  # ceil(5 * 0.6) = 3 features replaced
print("table-uniform corruption: replacement values come from ANY row,")
print("so class-1 values near 100 leak into a class-0 anchor")
for _ in range(4):
    view = corrupt(anchor, plan_uniform, ctx_uniform, rng)
    print(f"  corrupted {view.corrupted_set.tolist()} ->", np.round(view.values, 2))
print()

ctx_class = CorruptionContext(pool, classes, class_count=2)
plan_class = CorruptionPlan(p=0.6, value_mode="class_conditioned")
print("class-conditioned corruption: replacements only from class-0 rows,")
print("so every view stays in the anchor's own value range")
for _ in range(4):
    view = corrupt(anchor, plan_class, ctx_class, rng, anchor_class=0)
    print(f"  corrupted {view.corrupted_set.tolist()} ->", np.round(view.values, 2))

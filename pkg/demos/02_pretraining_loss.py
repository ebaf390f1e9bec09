"""Contrastive pretraining loss for the three corruption arms.

Runs a shortened schedule on the bundled wdbc table and prints the loss
every 10 epochs. The oracle arm (true labels during corruption) should sit
at or below the pseudo-labeled class-conditioned arm, and both below the
unconditioned random arm.
"""

from tabcontrast import TrainConfig, get_builtin, make_split, pretrain

EPOCHS = 60

table = get_builtin("wdbc")
split = make_split(table, labeled_fraction=0.1, test_fraction=0.2, seed=1)
print(f"wdbc: {table.n_rows} rows, {len(split.labeled_idx)} labeled, "
      f"{len(split.unlabeled_idx)} unlabeled, {len(split.test_idx)} test")

curves = {}
for method in ("random", "class_conditioned", "oracle"):
    cfg = TrainConfig(
        method=method,
        pretrain_epochs=EPOCHS,
        pseudo_update_interval=10,
        seed=1,
    )
    _, curve = pretrain(table, split, cfg)
    curves[method] = curve
    print(f"{method}: final epoch loss {curve[-1]:.4f}")

print()
print("epoch  " + "".join(f"{m:>20}" for m in curves))
for e in range(9, EPOCHS, 10):
    row = "".join(f"{curves[m][e]:>20.4f}" for m in curves)
    print(f"{e + 1:>5}  {row}")

"""A miniature benchmark sweep end to end: run, store, report.

Three methods, three seeds, reduced schedule on the bundled iris table.
Everything lands under demo_out/ - records, loss curves, checkpoints,
projections - and the report step prints the accuracy table plus the
significance-filtered win matrix.

Rerunning the script is cheap: finished (method, seed) cells are found in
the store and skipped.
"""

from tabcontrast import RunManifest, execute, write_report

manifest = RunManifest(
    dataset="builtin:iris",
    out_dir="demo_out",
    methods=("no_pretrain", "random", "class_conditioned"),
    seeds=(1, 2, 3),
    pretrain_epochs=40,
    finetune_epochs=60,
    pseudo_update_interval=10,
    hidden_width=64,
    encoder_hidden_layers=2,
    projection_width=32,
)

records = execute(manifest, log=print)
print(f"\n{len(records)} records in the store")

texts = write_report(manifest.out_dir)
print("\naccuracy (mean ± sample std over seeds, percent):")
print(texts["accuracy"])
print("win matrix (row beats column, significant comparisons only):")
print(texts["win_matrix"])

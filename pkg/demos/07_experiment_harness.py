# %% [markdown]
# # Experiment harness
#
# The `fracnls` command wraps everything above. The same functions are
# available from Python. This script runs a small matrix of cells, an omega
# sweep and a snapshot dump into ./demo_output.

# %%
from pathlib import Path

from fracnls.cli import ExperimentConfig, dump_solution, run_experiment, run_with_snapshots

out = Path("demo_output")
cfg = ExperimentConfig(case="cnls", alpha=(1.3, 1.7), M=(800, 1600), out=str(out))
code, cells = run_experiment(cfg)
print((out / "cells.csv").read_text())

# %%
sweep = ExperimentConfig(case="dnls", alpha=(1.5,), M=(1600,), omega_sweep=(0.02, 0.6, 0.02), out=str(out / "sweep"))
run_experiment(sweep)
print((out / "sweep" / "cells.csv").read_text())

# %%
snap = ExperimentConfig(case="dnls", t_end=0.5, snapshot_every=25, reference=True)
res, ref = run_with_snapshots(snap, 1.5, 400)
files = dump_solution(res, out / "snapshots", ref)
print(f"{len(files)} files, e.g. {files[0]}")
print((out / "snapshots" / "error_summary.csv").read_text())

# %% [markdown]
# Command-line equivalents:
#
#     fracnls run --case cnls --alpha 1.3,1.7 --m 800,1600 --out demo_output
#     fracnls sweep --case dnls --alpha 1.5 --m 1600 --omega-sweep 0.02:0.6:0.02 --out demo_output/sweep
#     fracnls dump --case dnls --alpha 1.5 --m 400 --t-end 0.5 --snapshot-every 25 --reference --out demo_output
#     fracnls tables --table table1 --out demo_output/tables

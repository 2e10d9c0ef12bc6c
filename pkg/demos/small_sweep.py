"""A short transmit-power sweep; use the CLI or more trials for real numbers."""

from privisac import profile
from privisac.harness import SweepSpec, run_sweep, table_csv

spec = SweepSpec("p_max", [29.0, 35.0, 41.0], 10, profile("desk"))
table = run_sweep(spec, base_seed=0)
print(table_csv(table.rows))

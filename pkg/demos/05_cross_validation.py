"""Grid search with one sequence held out at a time, on a small synthetic dataset."""

import sys
import tempfile
from pathlib import Path

from bbinit.evaluation import ParamGrid, load_dataset, run_cv
from bbinit.synthetic import write_square_dataset

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
ds = load_dataset(write_square_dataset(root / "dataset"))
print("frames scored:", [f.key for f in ds.selected_frames()])

# baseline: the whole box as the object
_, base = run_cv(ds, ParamGrid("entire-bb", {}))
print(f"entire box: phi_all {base.overall_phi_all:.3f}, phi_bb {base.overall_phi_bb:.3f}")

grid = ParamGrid("lbdm", {"tau": [0.7, 0.8, 0.9, 1.0], "lambda": [1e-2, 1e-4]})
table, report = run_cv(ds, grid, measure="bb", cache_dir=root / "cache")
print(report.summary())

# a second run is served from the cache
table, _ = run_cv(ds, grid, measure="bb", cache_dir=root / "cache")
print("cache hits", table.cache_hits, "misses", table.cache_misses)

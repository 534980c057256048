"""
The whole pipeline from the command line interface, on a small corpus
=====================================================================

Equivalent to::

    cvrpxai run-all --config demo_config.json --out demo_out

It writes the corpus, features, scenario datasets, models, explanations,
the unified ranking and SVG reports under ``demo_out/``, then prints the
manifest summary.  A few minutes on one core.
"""

import json
import sys
from pathlib import Path

from cvrpxai.cli import main
from cvrpxai.pipeline import PipelineConfig

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
cfg = PipelineConfig.from_dict({
    "corpus": {"n_instances": 60, "n_min": 15, "n_max": 25},
    "solver": {"max_iterations": 300},
    "explain": {"max_rows": 40},
    "out": str(out),
})
cfg_path = out.with_suffix(".json")
cfg_path.write_text(cfg.to_text())

code = main(["run-all", "--config", str(cfg_path)])
if code:
    sys.exit(code)

manifest = json.loads((out / "manifest.json").read_text())
print("optimal-class regimes:", manifest["regimes"])
for sid, row in manifest["classifiers"].items():
    best = max(row, key=lambda k: row[k]["f1"])
    print(f"{sid}: best {best} F1 {row[best]['f1']:.3f}, explained {manifest['explained'][sid]['classifier']}")
print("unified top 10:", [r["feature"] for r in manifest["unified"][:10]])
print("reports in", out / "reports")

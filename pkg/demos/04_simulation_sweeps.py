"""Run both bundled sweeps at reduced size and print the average-error tables.

The full-size runs are ``freshsched simulate --recipe sigma_sweep`` and
``--recipe weight_sweep``.
"""

import csv
import io
from contextlib import redirect_stdout

from freshsched.cli import main


def table(recipe, reps):
    buf = io.StringIO()
    with redirect_stdout(buf):
        main(["simulate", "--recipe", recipe, "--replications", str(reps)])
    rows = [r for r in csv.DictReader(buf.getvalue().splitlines()[1:]) if r["metric"] == "average_error"]
    policies = list(dict.fromkeys(r["policy"] for r in rows))
    print(f"{recipe}\n{'sweep':>6} " + " ".join(f"{p:>14}" for p in policies))
    for v in dict.fromkeys(r["sweep"] for r in rows):
        vals = {r["policy"]: float(r["value"]) for r in rows if r["sweep"] == v}
        print(f"{v:>6} " + " ".join(f"{vals[p]:14.4f}" for p in policies))
    print()


table("sigma_sweep", 2)
table("weight_sweep", 2)

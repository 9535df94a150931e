"""Full case study: tuning, tracking tables, step responses, stability.

Writes every artifact to ./case_study_out and prints the summary report.
Takes about two minutes.
"""

import sys

from resetlab.repro import cmd_repro

out = sys.argv[1] if len(sys.argv) > 1 else "case_study_out"
report = cmd_repro(out, seed=0)
print(open(f"{out}/report.txt").read())

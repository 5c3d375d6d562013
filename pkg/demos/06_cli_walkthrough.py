# %% [markdown]
# Command-line walkthrough
#
# The same steps as the library demos, through the ``batchalloc`` command:
# generate an instance, run an algorithm, certify the trace, and bench.

# %%
import subprocess
import sys
import tempfile
from pathlib import Path


def sh(*args):
    cmd = [sys.executable, "-m", "batchalloc", *args]
    print("$ batchalloc", " ".join(args))
    res = subprocess.run(cmd, capture_output=True, text=True)
    print(res.stdout[-600:] + res.stderr, end="")
    print(f"(exit {res.returncode})\n")
    return res


work = Path(tempfile.mkdtemp())
inst, trace = work / "inst.json", work / "trace.json"
sh("gen", "--kind", "vwm", "--K", "3", "--seed", "7", "--n-online", "4", "--out", str(inst))
sh("run", "--algo", "pr-mwm", "--instance", str(inst), "--trace", str(trace), "--certify-grade", "--no-timing")
sh("certify", "--trace", str(trace), "--out", str(work / "report.json"))
sh("bench", "--scenario", "tightness", "--K", "2", "3", "--mc", "3", "--no-timing")

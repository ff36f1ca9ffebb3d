"""
The ``cflab`` command
=====================

Every verb writes CSV/JSON/SVG files plus a ``manifest.json`` with the
effective configuration, its SHA-256 and the hash of every artifact.
Re-running a command with the same configuration and seed reproduces the
files byte for byte.  The same calls work from a shell, e.g.
``cflab simulate --scenario sin2d --x0 0.3,0.26 --t 40``.
"""

import json
import os
import sys

from cflab.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "notebook-out"

# %% Trajectory CSV with phase and winding plots
main(["simulate", "--scenario", "sin2d", "--x0", "0.3,0.26", "--t", "40", "--out", os.path.join(out, "simulate")])
print(sorted(os.listdir(os.path.join(out, "simulate"))))

# %% Parameters override with --param; configs can also come from a JSON file
main(["cycle", "--scenario", "lee2d", "--param", "b=1.7320508075688772", "--t", "500",
      "--out", os.path.join(out, "cycle")])
with open(os.path.join(out, "cycle", "cycle.json")) as fh:
    print(json.load(fh)["cycle"])

# %% A malformed request exits with status 2 and names the key
print("exit code:", main(["simulate", "--scenario", "lee2d", "--param", "c=1", "--out", os.path.join(out, "bad")]))

# %% Verification of one scenario
code = main(["verify", "--scenario", "lee_twisted", "--out", os.path.join(out, "verify")])
print("verify exit code:", code)

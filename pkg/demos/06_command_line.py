"""
The command-line tool
=====================

Everything above is also available from the shell.  Payload goes to stdout
and the exit code reports the outcome.
"""

import subprocess
import sys

from cloudcalc import program_path

DB = str(program_path("db.cld"))
FRAMED = str(program_path("db_framed.cld"))
PHI = str(program_path("phiDB.pol"))


def cloudcalc(*args):
    proc = subprocess.run([sys.executable, "-m", "cloudcalc", *args],
                          capture_output=True, text=True)
    print("$ cloudcalc", " ".join(args))
    print(proc.stdout, end="")
    print(f"[exit {proc.returncode}]\n")


#%%
cloudcalc("run", FRAMED, "--invoke", "Q=syscmd;q2")
cloudcalc("check-policy", PHI, "--history", "open(db),syscmd")
cloudcalc("simulate", DB, FRAMED, "--invoke", "Q=_")
cloudcalc("run", DB, "--invoke", "Q=sel", "--invoke", "Q=q", "--seed", "7")

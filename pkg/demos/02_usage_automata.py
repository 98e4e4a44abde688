"""
Usage automata
==============

A usage automaton reads a history and rejects it as soon as it reaches an
offending state.  Events the automaton does not mention leave it in place.
"""

from cloudcalc import load_policy, parse_history, permits_next, policy_accepts, program_path
from cloudcalc.parser import format_automaton

#%%
# The database policy forbids system commands while a connection is open.

phi = load_policy(program_path("phiDB.pol"))
print(format_automaton(phi))

#%%
# ``policy_accepts`` returns a verdict; a rejection carries the length of the
# shortest rejected prefix.

for text in ["open(db),dbcmd,close(db)", "open(db),close(db),syscmd",
             "open(db),dbcmd,syscmd", "open(db),syscmd,close(db)"]:
    print(f"{text:32} {policy_accepts(phi, parse_history(text))}")

#%%
# The monitor asks a narrower question before each emission: would this one
# event push the history into an offending state?

h = parse_history("open(db)")
for name in ["dbcmd", "syscmd"]:
    (ev,) = parse_history(name)
    print(name, "permitted" if permits_next(phi, h, ev) else "refused")

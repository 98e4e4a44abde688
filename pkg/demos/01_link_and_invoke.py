"""
Publishing and invoking a service
=================================

A server publishes ``Eform`` under the name ``Q`` and a client request then
spawns it on a query string.  Every observable action lands in the history.
"""

from cloudcalc import Str, load_program, program_path, reap, run
from cloudcalc.parser import format_configuration

#%%
# Load the bundled database server and run it with no client requests.
# The only visible step is the publication itself.

db = load_program(program_path("db.cld"))
result = run(db.configuration())
print([str(lbl) for lbl in result.trace])
print(format_configuration(reap(result.config)))

#%%
# A pending request ``Q("sel")`` is admitted once ``Q`` is in the store.
# Tau steps are internal; the rest is the history.

result = run(db.configuration(), [("Q", Str("sel"))])
for lbl in result.trace:
    print(lbl)
print("history:", " . ".join(map(str, result.config.history)))

#%%
# A query starting with ``syscmd;`` makes ``query`` issue a system command
# before the database command.

result = run(db.configuration(), [("Q", Str("syscmd;q2"))])
print([str(lbl) for lbl in result.visible])

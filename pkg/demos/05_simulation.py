"""
Bounded weak simulation
=======================

``bounded_weak_simulation`` asks whether every visible move of the left
server can be matched by the right one, skipping internal steps.  Adding a
frame should only remove behaviour, never add it.
"""

from cloudcalc import SimulationQuery, bounded_weak_simulation, load_program, program_path

db = load_program(program_path("db.cld")).configuration()
framed = load_program(program_path("db_framed.cld")).configuration()
pending = (("Q", None),)

#%%
# The framed server is simulated by the unframed one.

r = bounded_weak_simulation(SimulationQuery(framed, db, 12, pending=pending))
print(r, f"({r.pairs} pairs checked)")

#%%
# The converse fails.  The witness is the visible prefix after which the
# unframed server does something the framed one cannot match.

r = bounded_weak_simulation(SimulationQuery(db, framed, 12, pending=pending))
print(r)

#%%
# The history-dependent pair differs on its very first visible step.

a = load_program(program_path("seqpolicy_a.cld")).configuration()
b = load_program(program_path("seqpolicy_b.cld")).configuration()
print(bounded_weak_simulation(SimulationQuery(a, b, 4)))

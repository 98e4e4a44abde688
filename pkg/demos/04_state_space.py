"""
Exploring every interleaving
============================

``explore`` builds the labelled transition system of a server up to a
depth.  States equal up to renaming and thread numbering are shared.
"""

from cloudcalc import explore, load_program, program_path, weak_traces

#%%
# An open request ``("Q", None)`` is answered with every value of the
# domain, by default ``unit``, ``"q"`` and ``"syscmd;q"``.

db = load_program(program_path("db.cld"))
g = explore(db.configuration(), [("Q", None)], depth=20)
print(len(g.configs), "states,", len(g.edges), "edges, truncated:", g.truncated)

#%%
# Weak traces drop the tau steps.  The unframed server has a trace with a
# system command in it.

for t in sorted(weak_traces(g), key=len):
    print(" . ".join(map(str, t)))

#%%
# The framed server has none.

framed = load_program(program_path("db_framed.cld"))
g = explore(framed.configuration(), [("Q", None)], depth=20)
print(any(str(e.label) == "ev syscmd" for e in g.edges))

#%%
# Graphs export to JSON and Graphviz.

print(g.to_dot()[:300])

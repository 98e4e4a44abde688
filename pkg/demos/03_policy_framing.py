"""
Policy framing
==============

``frame phiDB { e }`` checks every event emitted by ``e`` against the whole
history.  A refused event is simply not a possible step, so the thread
stays where it is.
"""

from cloudcalc import Str, load_program, program_path, run

#%%
# The framed server runs the injected query up to the point where the
# system command would be issued.

framed = load_program(program_path("db_framed.cld"))
result = run(framed.configuration(), [("Q", Str("syscmd;q2"))])
print(result.stop_reason)
print([str(lbl) for lbl in result.visible])
for tid, diag in result.blocked:
    print(f"thread {tid}: {diag}")

#%%
# An ordinary query is unaffected by the frame.

result = run(framed.configuration(), [("Q", Str("sel"))])
print(result.stop_reason, [str(lbl) for lbl in result.visible])

#%%
# Enforcement depends on the past.  Both servers below frame ``gamma`` under
# a policy forbidding ``alpha`` followed by ``beta``.  Only the first one gets
# to emit ``gamma``; the second cannot even enter its frame.

for name in ["seqpolicy_a.cld", "seqpolicy_b.cld"]:
    r = run(load_program(program_path(name)).configuration())
    print(name, r.stop_reason, [str(lbl) for lbl in r.visible], [str(b) for _, b in r.blocked])

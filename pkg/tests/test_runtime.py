import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cloudcalc.parser import parse_program
from cloudcalc.policy import InvokeEntry, LinkEntry, policy_accepts
from cloudcalc.runtime import (
    TAU, Blocked, Configuration, Ev, Invoke, NonGroundEvent, StopReason, StuckError,
    Tau, UnknownService, blocked, enabled_steps, history_entry, invoke, reap, run,
)
from cloudcalc.syntax import UNIT, App, Const, Emit, Event, Lam, Ref, Resource, Str
from strategies import policy_tables, safe_exprs

OPEN = Event("open", (Resource("db"),))
CLOSE = Event("close", (Resource("db"),))


def visible(trace):
    return [str(lbl) for lbl in trace if not isinstance(lbl, Tau)]


def test_link_step(db):
    c = db.configuration()
    steps = enabled_steps(c)
    assert [str(s.label) for s in steps] == ["link Q"]
    after = steps[0].config
    assert after.history == (LinkEntry("Q"),)
    assert after.service("Q").code == Ref("Eform")
    assert after.exprs == (Const(UNIT), Ref("E"))


def test_invoke_step(db):
    linked = enabled_steps(db.configuration())[0].config
    steps = enabled_steps(linked, [("Q", Str("sel"))])
    assert steps[0].label == Invoke("Q", Str("sel"))
    c = steps[0].config
    assert c.history == (LinkEntry("Q"), InvokeEntry("Q", Str("sel")))
    assert c.threads[-1].expr == App(Ref("Eform"), Const(Str("sel")))
    assert c.service("Q") == linked.service("Q")  # services persist
    assert steps[0].pending == ()


def test_terminal_configuration_has_no_steps():
    assert enabled_steps(Configuration.make([Const(UNIT)])) == []


def test_pending_waits_for_link(db):
    steps = enabled_steps(db.configuration(), [("Q", Str("sel"))])
    assert [str(s.label) for s in steps] == ["link Q"]
    assert steps[0].pending == (("Q", Str("sel")),)


def test_open_request_ranges_over_domain(db):
    linked = enabled_steps(db.configuration())[0].config
    steps = enabled_steps(linked, [("Q", None)], domain=(UNIT, Str("a")))
    assert [str(s.label) for s in steps[:2]] == ["invoke Q unit", 'invoke Q "a"']


def test_safe_run(db):
    r = run(db.configuration(), [("Q", Str("sel"))])
    assert r.stop_reason is StopReason.TERMINATED
    assert visible(r.trace) == ['link Q', 'invoke Q "sel"', "ev open(db)", "ev dbcmd",
                                "ev close(db)"]
    # query takes exactly one tau before its event and one after
    i = r.trace.index(Ev(Event("dbcmd")))
    assert r.trace[i - 1] == TAU and r.trace[i + 1] == TAU


def test_injection_run(db):
    r = run(db.configuration(), [("Q", Str("syscmd;q2"))])
    assert visible(r.trace)[2:] == ["ev open(db)", "ev syscmd", "ev dbcmd", "ev close(db)"]
    assert r.config.history[2:] == (OPEN, Event("syscmd"), Event("dbcmd"), CLOSE)


def test_blocked_injection(db_framed):
    r = run(db_framed.configuration(), [("Q", Str("syscmd;q2"))])
    assert r.stop_reason is StopReason.DEADLOCKED
    assert visible(r.trace)[-1] == "ev open(db)"
    assert [b for _, b in r.blocked] == [Blocked(Event("syscmd"), "phiDB")]
    assert str(r.blocked[0][1]) == "BLOCKED syscmd by phiDB"
    stuck = [t for t in r.config.threads if t.tid == r.blocked[0][0]][0]
    assert stuck.policies == ("phiDB",)


def test_frame_exit_releases_policy(phi_db):
    prog = parse_program('resource db; use policy phiDB from "x.pol";'
                         "server { run frame phiDB { emit open(db) }; emit syscmd(); }",
                         policies={"phiDB": phi_db})
    r = run(prog.configuration())
    assert r.stop_reason is StopReason.TERMINATED
    assert visible(r.trace) == ["ev open(db)", "ev syscmd"]


def test_nested_frames_are_conjunctive(phi_db, phi_seq):
    prog = parse_program('use policy phiSeq from "a"; use policy phiDB from "b";'
                         "server { run frame phiDB { frame phiSeq { emit alpha(); emit beta() } }; }",
                         policies={"phiDB": phi_db, "phiSeq": phi_seq})
    r = run(prog.configuration())
    assert r.stop_reason is StopReason.DEADLOCKED
    assert r.blocked[0][1] == Blocked(Event("beta"), "phiSeq")


def test_frame_entry_refused_on_violating_history(programs_dir):
    from cloudcalc import load_program
    r = run(load_program(programs_dir / "seqpolicy_b.cld").configuration())
    assert visible(r.trace) == ["ev alpha", "ev beta"]
    assert r.blocked[0][1] == Blocked(None, "phiSeq")
    assert blocked(r.config) == r.blocked


def test_unframed_threads_emit_unconditionally(phi_seq):
    prog = parse_program('use policy phiSeq from "a"; server { run emit alpha(); emit beta(); }',
                         policies={"phiSeq": phi_seq})
    assert run(prog.configuration()).stop_reason is StopReason.TERMINATED


def test_relink_replaces_binding():
    prog = parse_program("A = fun x -> unit; B = fun y -> y;"
                         "server { run link Q = A; link Q = B; }")
    r = run(prog.configuration())
    assert r.config.history == (LinkEntry("Q"), LinkEntry("Q"))
    entry = r.config.service("Q")
    assert entry.code == Ref("B") and entry.published_at == 1


def test_store_block_publishes_before_running():
    prog = parse_program("A = fun x -> emit got(x);"
                         "server { history [link Q]; run unit; store Q -> A; }")
    r = run(prog.configuration(), [("Q", Str("hi"))])
    assert visible(r.trace) == ['invoke Q "hi"', 'ev got("hi")']


def test_unknown_service():
    c = Configuration.make([Const(UNIT)])
    with pytest.raises(UnknownService):
        invoke(c, "Nope", UNIT)
    with pytest.raises(UnknownService) as info:
        run(c, [("Nope", UNIT)])
    assert info.value.step == 0


def test_non_ground_event():
    c = Configuration.make([Emit("e", (Const(UNIT),))])
    with pytest.raises(NonGroundEvent):
        enabled_steps(c)


def test_applying_a_non_function_is_stuck():
    with pytest.raises(StuckError):
        run(Configuration.make([App(Const(UNIT), Const(UNIT))]))


def test_step_budget(db):
    r = run(db.configuration(), [("Q", Str("sel"))], max_steps=3)
    assert r.stop_reason is StopReason.STEP_BUDGET and len(r.trace) == 3
    assert run(db.configuration(), max_steps=0).stop_reason is StopReason.STEP_BUDGET


def test_reap():
    c = Configuration.make([Const(UNIT), Ref("E")])
    assert reap(c).exprs == (Ref("E"),)
    untouched = Configuration.make([Emit("a")])
    assert reap(untouched) == untouched


def test_seeded_runs_are_reproducible(db):
    pending = [("Q", Str("sel")), ("Q", Str("syscmd;x"))]
    for seed in range(5):
        a = run(db.configuration(), pending, scheduler=seed)
        b = run(db.configuration(), pending, scheduler=seed)
        assert a.trace == b.trace and a.log == b.log


def test_seeded_scheduler_interleaves(db):
    pending = [("Q", Str("sel")), ("Q", Str("q"))]
    traces = {tuple(map(str, run(db.configuration(), pending, scheduler=s).trace))
              for s in range(20)}
    assert len(traces) > 1


# -- properties ---------------------------------------------------------------

@st.composite
def servers(draw):
    policies = draw(policy_tables())
    exprs = draw(st.lists(safe_exprs(), min_size=1, max_size=2))
    pending = draw(st.sampled_from([(), (("S", None),)]))
    store = {"S": Lam("w", draw(safe_exprs(depth=2)))} if pending else {}
    return Configuration.make(exprs, store=store, policies=policies), pending


@settings(max_examples=200, deadline=None)
@given(servers(), st.integers(0, 2 ** 16))
def test_history_matches_visible_labels(server, seed):
    c, pending = server
    r = run(c, pending, scheduler=seed, max_steps=60, domain=(UNIT,))
    expected = tuple(history_entry(lbl) for lbl in r.trace if not isinstance(lbl, Tau))
    assert r.config.history[len(c.history):] == expected
    for rec in r.log:
        assert rec.history_len == sum(not isinstance(l, Tau) for l in r.trace[:rec.step])


@settings(max_examples=200, deadline=None)
@given(servers(), st.integers(0, 2 ** 16))
def test_tau_steps_change_neither_history_nor_store_and_store_grows(server, seed):
    c, pending = server
    rng = random.Random(seed)
    for _ in range(40):
        steps = enabled_steps(c, pending, (UNIT,))
        if not steps:
            break
        s = rng.choice(steps)
        if isinstance(s.label, Tau):
            assert s.config.history == c.history and s.config.store == c.store
        assert set(c.store_map) <= set(s.config.store_map)
        c, pending = s.config, s.pending


@settings(max_examples=200, deadline=None)
@given(policy_tables(), safe_exprs(depth=4), st.integers(0, 2 ** 16))
def test_enforcement_soundness_single_thread(policies, e, seed):
    c = Configuration.make([e], policies=policies)
    rng = random.Random(seed)
    for _ in range(60):
        for th in c.threads:
            for p in th.policies:
                assert policy_accepts(policies[p], c.history)
        steps = enabled_steps(c)
        if not steps:
            break
        c = rng.choice(steps).config

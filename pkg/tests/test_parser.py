import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cloudcalc.parser import (
    ParseError, format_automaton, format_configuration, format_program, parse_configuration,
    parse_expr, parse_history, parse_literal, parse_policy, parse_program, pretty_print,
)
from cloudcalc.policy import InvokeEntry, LinkEntry
from cloudcalc.runtime import Configuration, ServiceEntry, reap, run
from cloudcalc.syntax import (
    QUERY, UNIT, App, Const, Emit, Event, Frame, Lam, Ref, Resource, Seq, Str, Var,
)
from strategies import DEFINITIONS, POLICY_NAMES, RESOURCES, any_automata, any_exprs

PHI_DB_TEXT = """
policy phiDB {
  states q0 q1 q2;
  initial q0;
  offending q2;
  q0 -- open(db) --> q1;
  q1 -- close(db) --> q0;
  q1 -- dbcmd --> q1;
  q1 -- syscmd --> q2;
}
"""

DB = Const(Resource("db"))


def test_parse_eproc():
    prog = parse_program("""
        resource db;
        Eproc = fun y -> emit open(db); (query db y); emit close(db);
        Eform = fun q -> Eproc q;
        server { history []; run Eform "sel"; }
    """)
    eproc = prog.definitions["Eproc"]
    assert eproc == Lam("y", Seq(Emit("open", (DB,)),
                                 Seq(App(App(Const(QUERY), DB), Var("y")), Emit("close", (DB,)))))
    eform = prog.definitions["Eform"]
    assert eform == Lam("q", App(Ref("Eproc"), Var("q")))
    assert eform.body.fn.target is eproc


def test_empty_file_is_missing_configuration():
    with pytest.raises(ParseError, match="missing configuration block"):
        parse_program("")


@pytest.mark.parametrize("text, message", [
    ("server { run nope; }", "unknown identifier nope"),
    ("A = unit; A = unit; server { run A; }", "duplicate definition A"),
    ("server { run frame phiX { unit }; }", "unknown policy phiX"),
    ("server { run emit e(x); }", "unknown identifier x"),
    ("server { run fun x -> y; }", "unknown identifier y"),
    ("server { run link Q = (fun x -> unit) }", "expected"),
    ('use policy phiDB from "does-not-exist.pol"; server { run unit; }', "cannot read policy"),
])
def test_program_errors(text, message):
    with pytest.raises(ParseError, match=message) as info:
        parse_program(text)
    assert info.value.line >= 1 and info.value.col >= 1


def test_error_location():
    with pytest.raises(ParseError) as info:
        parse_program("resource db;\nserver {\n  run emit open(db) ) ;\n}")
    assert (info.value.line, info.value.col) == (3, 21)
    assert "';'" in str(info.value)


def test_definitions_do_not_swallow_next_definition():
    prog = parse_program("A = emit a(); emit b();\nB = A; A;\nserver { run B; }")
    assert prog.definitions["A"] == Seq(Emit("a"), Emit("b"))
    assert prog.definitions["B"] == Seq(Ref("A"), Ref("A"))


def test_policy_import_and_frames(programs_dir):
    prog = parse_program((programs_dir / "db_framed.cld").read_text(), base_dir=programs_dir)
    assert set(prog.policies) == {"phiDB"}
    assert prog.definitions["Eform"] == Lam("q", Frame("phiDB", App(Ref("Eproc"), Var("q"))))


def test_parse_phi_db():
    a = parse_policy(PHI_DB_TEXT)
    assert a.states == ("q0", "q1", "q2")
    assert a.initial == "q0" and a.offending == {"q2"}
    assert len(a.transitions) == 4
    assert a.alphabet == {"open", "close", "dbcmd", "syscmd"}


def test_policy_without_offending_states_accepts_everything():
    a = parse_policy("policy p { states a; initial a; offending ; }")
    assert a.offending == frozenset() and a.transitions == ()


def test_policy_overlap_rejected():
    text = PHI_DB_TEXT.replace("q1 -- syscmd --> q2;", "q1 -- syscmd --> q2;\n  q1 -- dbcmd --> q2;")
    with pytest.raises(ParseError, match="nondeterministic overlap at q1/dbcmd"):
        parse_policy(text)


@pytest.mark.parametrize("text, message", [
    ("policy p { states a; initial b; offending ; }", "undeclared state"),
    ("policy p { states a b; initial a; offending b; b -- e --> a; }", "offending"),
    ("policy p { states a; initial a; offending ; a - e --> a; }", "unexpected character"),
    ("policy p { states a; initial a; offending ; a -- e(db --> a; }", "expected"),
])
def test_policy_errors(text, message):
    with pytest.raises(ParseError, match=message):
        parse_policy(text)


def test_round_trip_eproc(db):
    e = db.definitions["Eproc"]
    assert parse_expr(pretty_print(e), resources=db.resources) == e


def test_round_trip_phi_db():
    a = parse_policy(PHI_DB_TEXT)
    assert parse_policy(format_automaton(a)) == a


def test_round_trip_program(db_framed, programs_dir):
    text = format_program(db_framed)
    again = parse_program(text, base_dir=programs_dir)
    assert again.definitions == db_framed.definitions
    assert again.run == db_framed.run
    assert format_program(again) == text


def test_post_link_configuration_rendering(db):
    result = run(db.configuration())
    c = reap(result.config)
    text = format_configuration(c)
    assert text == "link Q |> E <| [Q -> Eform]"
    # before reaping the finished link thread is still there
    assert format_configuration(result.config) == "link Q |> unit || E <| [Q -> Eform]"
    back = parse_configuration(text, db.resources, db.policies, db.definitions)
    assert back.history == c.history and back.exprs == c.exprs and back.store == c.store


def test_configuration_round_trip_with_everything(phi_db):
    c = Configuration.make(
        [Frame("phiDB", Seq(Emit("dbcmd"), Const(Str("x"))), True), Lam("x", Var("x"))],
        history=[LinkEntry("Q"), InvokeEntry("Q", Str("a b")), Event("open", (Resource("db"),))],
        store={"Q": ServiceEntry(Lam("q", Emit("e", (Var("q"),))))},
        policies={"phiDB": phi_db})
    text = format_configuration(c)
    assert text.startswith('link Q . invoke Q("a b") . open(db) |> phiDB[')
    back = parse_configuration(text, ("db",), {"phiDB": phi_db})
    assert back == c


def test_literals():
    assert parse_literal('"sel"') == Str("sel")
    assert parse_literal("sel") == Str("sel")
    assert parse_literal("syscmd;q2") == Str("syscmd;q2")
    assert parse_literal("unit") == UNIT
    assert parse_literal("db", ("db",)) == Resource("db")


def test_history_literal():
    assert parse_history("") == ()
    assert parse_history("open(db),dbcmd,close(db)") == (
        Event("open", (Resource("db"),)), Event("dbcmd"), Event("close", (Resource("db"),)))
    assert parse_history('link Q, invoke Q("x")') == (LinkEntry("Q"), InvokeEntry("Q", Str("x")))
    with pytest.raises(ParseError):
        parse_history("open(db")


# -- properties ---------------------------------------------------------------

from cloudcalc.policy import UsageAutomaton  # noqa: E402

_DUMMY = {p: UsageAutomaton(p, ("s",), "s", ()) for p in POLICY_NAMES}


def reparse(e):
    return parse_expr(pretty_print(e), RESOURCES, _DUMMY, DEFINITIONS)


@settings(max_examples=1000, suppress_health_check=[HealthCheck.too_slow])
@given(any_exprs())
def test_expr_round_trip(e):
    assert reparse(e) == e


@settings(max_examples=1000, suppress_health_check=[HealthCheck.too_slow])
@given(any_automata())
def test_automaton_round_trip(a):
    assert parse_policy(pretty_print(a)) == a


PARSERS = [
    parse_program,
    parse_policy,
    lambda t: parse_expr(t, RESOURCES, _DUMMY, DEFINITIONS),
    lambda t: parse_configuration(t, RESOURCES, _DUMMY, DEFINITIONS),
    parse_history,
]


def _only_parse_errors(data):
    for parse in PARSERS:
        try:
            parse(data)
        except ParseError as err:
            assert err.line >= 0 and err.col >= 0


@settings(max_examples=500)
@given(st.binary(max_size=200))
def test_fuzz_bytes(data):
    _only_parse_errors(data)


_fragments = st.sampled_from([
    "fun", "x", "->", ";", "(", ")", "emit", "a", "frame", "p1", "{", "}", "[", "]", "link",
    "Q", "=", "server", "run", "history", "store", "||", "|>", "<|", "policy", "states",
    "initial", "offending", "--", "-->", "_", ",", '"s"', "unit", "db", "resource", "use",
    "from", ".", "eps", "invoke", "\n", "#c\n", "query",
])


@settings(max_examples=1000)
@given(st.lists(_fragments, max_size=30))
def test_fuzz_token_soup(parts):
    _only_parse_errors(" ".join(parts))


def test_deep_nesting_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_expr("(" * 100000 + "unit" + ")" * 100000)


def test_invalid_utf8():
    with pytest.raises(ParseError, match="UTF-8"):
        parse_program(b"server { run \xff; }")

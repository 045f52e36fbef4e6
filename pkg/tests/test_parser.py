import pytest

from arcforge.errors import QuerySyntaxError
from arcforge.query import ast as A
from arcforge.query import parse, parse_script


def rel(text):
    return parse(text).clauses[0].patterns[0].rels[0]


def test_unclosed_node_reports_offset_and_expected():
    with pytest.raises(QuerySyntaxError) as info:
        parse("MATCH (n")
    err = info.value
    assert err.offset == 8
    assert (err.line, err.column) == (1, 9)
    assert err.expected == {")", ":", "{"}


def test_error_position_on_second_line():
    with pytest.raises(QuerySyntaxError) as info:
        parse("MATCH (n:person)\nRETURN n LIMIT")
    assert info.value.line == 2
    assert info.value.offset == len("MATCH (n:person)\nRETURN n LIMIT")


@pytest.mark.parametrize("text,bounds", [
    ("MATCH (a)-[:knows]->(b) RETURN b", (1, 1, False)),
    ("MATCH (a)-[:knows*2]->(b) RETURN b", (2, 2, True)),
    ("MATCH (a)-[:knows * 2]->(b) RETURN b", (2, 2, True)),
    ("MATCH (a)-[:knows*1..3]->(b) RETURN b", (1, 3, True)),
    ("MATCH (a)-[:knows*..4]->(b) RETURN b", (1, 4, True)),
    ("MATCH (a)-[:knows*2..]->(b) RETURN b", (2, 10, True)),
    ("MATCH (a)-[:knows*]->(b) RETURN b", (1, 10, True)),
])
def test_hop_forms(text, bounds):
    r = rel(text)
    assert (r.min_hops, r.max_hops, r.var_length) == bounds


@pytest.mark.parametrize("text", [
    "MATCH (a)-[*3..1]->(b) RETURN b",
    "MATCH (a)-[*0]->(b) RETURN b",
    "MATCH (a)-[*11]->(b) RETURN b",
])
def test_bad_hop_bounds(text):
    with pytest.raises(QuerySyntaxError):
        parse(text)


@pytest.mark.parametrize("arrow,direction", [("-[:knows]->", "out"), ("<-[:knows]-", "in"), ("-[:knows]-", "both")])
def test_directions(arrow, direction):
    assert rel(f"MATCH (a){arrow}(b) RETURN b").direction == direction


def test_return_clause_parts():
    q = parse("MATCH (m:person) RETURN DISTINCT m.firstName AS f ORDER BY f DESC SKIP 2 LIMIT 5")
    ret = q.ret
    assert ret.distinct
    assert ret.items[0].alias == "f"
    assert ret.items[0].expr == A.Prop(A.Var("m"), "firstName")
    assert ret.order_by[0].descending
    assert ret.skip == A.Literal(2) and ret.limit == A.Literal(5)


def test_keywords_are_case_insensitive():
    assert A.to_data(parse("match (m:person) return m limit 3")) == \
        A.to_data(parse("MATCH (m:person) RETURN m LIMIT 3"))


def test_operator_precedence():
    where = parse("MATCH (m) WHERE m.a = 1 OR m.b = 2 AND NOT m.c = 3 RETURN m").clauses[0].where
    assert where.op.upper() == "OR"
    assert where.right.op.upper() == "AND"


def test_explain_and_script():
    assert isinstance(parse("EXPLAIN MATCH (m) RETURN m"), A.Explain)
    stmts = parse_script("MATCH (m) RETURN m; MATCH (n) RETURN n;\n")
    assert len(stmts) == 2


@pytest.mark.parametrize("text", [
    "",
    "RETURN",
    "MATCH (m:person RETURN m",
    "MATCH (m)-[e:knows]->(n RETURN n",
    "MATCH (m) RETURN m LIMIT 'x' extra",
    "MATCH (m) RETURN m.",
    "MATCH (m) WHERE RETURN m",
    "MATCH (m) RETURN 'unterminated",
])
def test_malformed_queries_raise_syntax_errors(text):
    with pytest.raises(QuerySyntaxError):
        parse(text)

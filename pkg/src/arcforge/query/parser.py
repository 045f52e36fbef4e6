"""Recursive-descent parser producing :mod:`arcforge.query.ast` trees."""

from __future__ import annotations

from typing import Any

from . import ast as A
from .lexer import Token, syntax_error, tokenize

MAX_HOPS = 10

_COMPARISONS = ("=", "<>", "!=", "<", "<=", ">", ">=")
_EXPR_START = ("an expression",)


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers --------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def error(self, expected, message: str | None = None):
        t = self.tok
        msg = message or f"unexpected {t.describe()}"
        return syntax_error(self.text, t.offset, msg, expected)

    def accept_kw(self, *words: str) -> Token | None:
        if self.tok.is_kw(*words):
            return self.advance()
        return None

    def accept_punct(self, *marks: str) -> Token | None:
        if self.tok.is_punct(*marks):
            return self.advance()
        return None

    def expect_kw(self, word: str) -> Token:
        if not self.tok.is_kw(word):
            raise self.error([word])
        return self.advance()

    def expect_punct(self, mark: str) -> Token:
        if not self.tok.is_punct(mark):
            raise self.error([mark])
        return self.advance()

    def expect_ident(self, what: str = "identifier", allow_keywords: bool = False) -> str:
        t = self.tok
        if t.kind == "IDENT" or (allow_keywords and t.kind == "KEYWORD"):
            self.advance()
            return t.text if t.kind == "KEYWORD" else t.value
        raise self.error([what])

    def source(self, start: int, end_tok: int) -> str:
        """Original text between token ``start`` and the token before ``end_tok``."""
        a = self.tokens[start].offset
        last = self.tokens[end_tok - 1]
        return self.text[a:last.offset + len(last.text)]

    # -- statements -----------------------------------------------------------

    def parse_statement(self) -> Any:
        if self.accept_kw("EXPLAIN"):
            return A.Explain(self._statement_body())
        return self._statement_body()

    def _statement_body(self) -> Any:
        if self.tok.is_kw("CREATE") and self.peek().is_kw("VECTOR"):
            return self.parse_create_index()
        return self.parse_query()

    def parse_create_index(self) -> A.CreateVectorIndex:
        self.expect_kw("CREATE")
        self.expect_kw("VECTOR")
        self.expect_kw("INDEX")
        name = self.expect_ident("index name")
        self.expect_kw("ON")
        label = self.expect_ident("label")
        self.expect_punct("(")
        field = self.expect_ident("field", allow_keywords=True)
        self.expect_punct(")")
        options = A.MapLit(())
        if self.accept_kw("OPTIONS"):
            if not self.tok.is_punct("{"):
                raise self.error(["{"])
            options = self.parse_map()
        return A.CreateVectorIndex(name, label, field, options)

    def parse_query(self) -> A.Query:
        clauses = []
        while True:
            t = self.tok
            if t.is_kw("MATCH"):
                clauses.append(self.parse_match())
            elif t.is_kw("CALL"):
                clauses.append(self.parse_call())
            elif t.is_kw("CREATE"):
                self.advance()
                clauses.append(A.CreateClause(self.parse_patterns()))
            else:
                break
        ret = None
        if self.tok.is_kw("RETURN"):
            ret = self.parse_return()
        elif not clauses:
            raise self.error(["MATCH", "CALL", "CREATE", "RETURN", "EXPLAIN"])
        elif self.tok.kind != "EOF" and not self.tok.is_punct(";"):
            expected = ["MATCH", "CALL", "CREATE", "RETURN", ";", "end of input"]
            last = clauses[-1]
            if not isinstance(last, A.CreateClause) and last.where is None:
                expected.append("WHERE")
            raise self.error(expected)
        return A.Query(tuple(clauses), ret)

    def parse_match(self) -> A.MatchClause:
        self.expect_kw("MATCH")
        patterns = self.parse_patterns()
        where = self.parse_expr() if self.accept_kw("WHERE") else None
        return A.MatchClause(patterns, where)

    def parse_call(self) -> A.CallClause:
        self.expect_kw("CALL")
        name = self.expect_ident("procedure name", allow_keywords=True)
        while self.accept_punct("."):
            name += "." + self.expect_ident("procedure name", allow_keywords=True)
        self.expect_punct("(")
        args = self.parse_args(")")
        yields = None
        if self.accept_kw("YIELD"):
            items = []
            while True:
                col = self.expect_ident("column")
                alias = self.expect_ident("alias") if self.accept_kw("AS") else None
                items.append((col, alias))
                if not self.accept_punct(","):
                    break
            yields = tuple(items)
        where = self.parse_expr() if self.accept_kw("WHERE") else None
        return A.CallClause(name, args, yields, where)

    def parse_return(self) -> A.ReturnClause:
        self.expect_kw("RETURN")
        distinct = bool(self.accept_kw("DISTINCT"))
        items = []
        while True:
            start = self.pos
            if self.tok.is_punct("*") and not items:
                self.advance()
                items.append(A.ReturnItem(A.Var("*"), None, "*"))
            else:
                expr = self.parse_expr()
                text = self.source(start, self.pos)
                alias = self.expect_ident("alias", allow_keywords=True) if self.accept_kw("AS") else None
                items.append(A.ReturnItem(expr, alias, text))
            if not self.accept_punct(","):
                break
        order = []
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            while True:
                start = self.pos
                expr = self.parse_expr()
                text = self.source(start, self.pos)
                desc = False
                if self.accept_kw("DESC", "DESCENDING"):
                    desc = True
                else:
                    self.accept_kw("ASC", "ASCENDING")
                order.append(A.SortItem(expr, desc, text))
                if not self.accept_punct(","):
                    break
        skip = self.parse_expr() if self.accept_kw("SKIP") else None
        limit = self.parse_expr() if self.accept_kw("LIMIT") else None
        return A.ReturnClause(tuple(items), distinct, tuple(order), skip, limit)

    # -- patterns -------------------------------------------------------------

    def parse_patterns(self) -> tuple:
        pats = [self.parse_path()]
        while self.accept_punct(","):
            pats.append(self.parse_path())
        return tuple(pats)

    def parse_path(self) -> A.PathPattern:
        nodes = [self.parse_node()]
        rels = []
        while self.tok.is_punct("-", "<-"):
            rels.append(self.parse_rel())
            nodes.append(self.parse_node())
        return A.PathPattern(tuple(nodes), tuple(rels))

    def parse_node(self) -> A.NodePattern:
        self.expect_punct("(")
        var = label = props = None
        if self.tok.kind == "IDENT":
            var = self.advance().value
        if self.accept_punct(":"):
            label = self.expect_ident("label")
        if self.tok.is_punct("{"):
            props = self.parse_map()
        if not self.tok.is_punct(")"):
            expected = [")"]
            if props is None:
                expected.append("{")
                if label is None:
                    expected.append(":")
            raise self.error(expected)
        self.advance()
        return A.NodePattern(var, label, props)

    def parse_rel(self) -> A.RelPattern:
        incoming = self.advance().value == "<-"
        var = label = props = None
        lo = hi = 1
        var_length = False
        if self.accept_punct("["):
            if self.tok.kind == "IDENT":
                var = self.advance().value
            if self.accept_punct(":"):
                label = self.expect_ident("edge label")
            if self.tok.is_punct("*"):
                star = self.advance()
                var_length = True
                lo, hi = self.parse_hops(star)
            if self.tok.is_punct("{"):
                props = self.parse_map()
            if not self.tok.is_punct("]"):
                raise self.error(["]", ":", "*", "{"] if label is None else ["]", "*", "{"])
            self.advance()
        if incoming:
            self.expect_punct("-")
            direction = "in"
        elif self.accept_punct("->"):
            direction = "out"
        elif self.accept_punct("-"):
            direction = "both"
        else:
            raise self.error(["->", "-"])
        return A.RelPattern(var, label, direction, lo, hi, var_length, props)

    def parse_hops(self, star: Token) -> tuple[int, int]:
        lo = hi = None
        if self.tok.kind == "INT":
            lo = self.advance().value
            hi = lo
        if self.accept_punct(".."):
            hi = self.advance().value if self.tok.kind == "INT" else MAX_HOPS
            if lo is None:
                lo = 1
        if lo is None:
            lo, hi = 1, MAX_HOPS
        if not 1 <= lo <= hi <= MAX_HOPS:
            raise syntax_error(self.text, star.offset,
                               f"variable-length bounds {lo}..{hi} must satisfy 1 <= min <= max <= {MAX_HOPS}")
        return lo, hi

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> Any:
        return self.parse_or()

    def parse_or(self) -> Any:
        left = self.parse_xor()
        while self.accept_kw("OR"):
            left = A.BinOp("OR", left, self.parse_xor())
        return left

    def parse_xor(self) -> Any:
        left = self.parse_and()
        while self.accept_kw("XOR"):
            left = A.BinOp("XOR", left, self.parse_and())
        return left

    def parse_and(self) -> Any:
        left = self.parse_not()
        while self.accept_kw("AND"):
            left = A.BinOp("AND", left, self.parse_not())
        return left

    def parse_not(self) -> Any:
        if self.accept_kw("NOT"):
            return A.UnaryOp("NOT", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Any:
        left = self.parse_additive()
        while True:
            if self.tok.is_punct(*_COMPARISONS):
                op = self.advance().value
                if op == "!=":
                    op = "<>"
                left = A.BinOp(op, left, self.parse_additive())
            elif self.tok.is_kw("IS"):
                self.advance()
                negated = bool(self.accept_kw("NOT"))
                self.expect_kw("NULL")
                left = A.IsNull(left, negated)
            else:
                return left

    def parse_additive(self) -> Any:
        left = self.parse_multiplicative()
        while self.tok.is_punct("+", "-"):
            op = self.advance().value
            left = A.BinOp(op, left, self.parse_multiplicative())
        return left

    def parse_multiplicative(self) -> Any:
        left = self.parse_unary()
        while self.tok.is_punct("*", "/", "%"):
            op = self.advance().value
            left = A.BinOp(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Any:
        if self.accept_punct("-"):
            operand = self.parse_unary()
            if isinstance(operand, A.Literal) and isinstance(operand.value, (int, float)) \
                    and not isinstance(operand.value, bool):
                return A.Literal(-operand.value)
            return A.UnaryOp("-", operand)
        if self.accept_punct("+"):
            return self.parse_unary()
        return self.parse_postfix()

    def parse_postfix(self) -> Any:
        expr = self.parse_atom()
        while self.tok.is_punct("."):
            self.advance()
            expr = A.Prop(expr, self.expect_ident("property name", allow_keywords=True))
        return expr

    def parse_atom(self) -> Any:
        t = self.tok
        if t.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return A.Literal(t.value)
        if t.is_kw("TRUE", "FALSE"):
            self.advance()
            return A.Literal(t.value == "TRUE")
        if t.is_kw("NULL"):
            self.advance()
            return A.Literal(None)
        if t.kind == "PARAM":
            self.advance()
            return A.Param(t.value)
        if t.is_kw("ARRAY"):
            self.advance()
            if not self.tok.is_punct("["):
                raise self.error(["["])
            return self.parse_list(array=True)
        if t.is_punct("["):
            return self.parse_list()
        if t.is_punct("{"):
            return self.parse_map()
        if t.is_punct("("):
            self.advance()
            expr = self.parse_expr()
            self.expect_punct(")")
            return expr
        if t.kind == "IDENT":
            self.advance()
            if self.tok.is_punct("("):
                self.advance()
                if self.tok.is_punct("*"):
                    self.advance()
                    self.expect_punct(")")
                    return A.FuncCall(t.value.lower(), (), star=True)
                return A.FuncCall(t.value.lower(), self.parse_args(")"))
            return A.Var(t.value)
        raise self.error(["literal", "parameter", "identifier", "(", "[", "{"])

    def parse_args(self, close: str) -> tuple:
        args = []
        if self.accept_punct(close):
            return ()
        while True:
            args.append(self.parse_expr())
            if self.accept_punct(close):
                return tuple(args)
            if not self.accept_punct(","):
                raise self.error([",", close])

    def parse_list(self, array: bool = False) -> A.ListLit:
        self.expect_punct("[")
        return A.ListLit(self.parse_args("]"), array)

    def parse_map(self) -> A.MapLit:
        self.expect_punct("{")
        items = []
        if self.accept_punct("}"):
            return A.MapLit(())
        while True:
            key = self.expect_ident("key", allow_keywords=True) if self.tok.kind != "STRING" \
                else self.advance().value
            self.expect_punct(":")
            items.append((key, self.parse_expr()))
            if self.accept_punct("}"):
                return A.MapLit(tuple(items))
            if not self.accept_punct(","):
                raise self.error([",", "}"])

    # -- entry points ---------------------------------------------------------

    def finish(self) -> None:
        self.accept_punct(";")
        if self.tok.kind != "EOF":
            raise self.error(["end of input", ";"])


def parse(text: str) -> Any:
    """Parse exactly one statement (an optional trailing ``;`` is allowed)."""
    p = Parser(text)
    stmt = p.parse_statement()
    p.finish()
    return stmt


def parse_script(text: str) -> list[Any]:
    """Parse a ``;``-separated sequence of statements."""
    p = Parser(text)
    out = []
    while True:
        while p.accept_punct(";"):
            pass
        if p.tok.kind == "EOF":
            return out
        out.append(p.parse_statement())
        if p.tok.kind != "EOF" and not p.tok.is_punct(";"):
            raise p.error([";", "end of input"])

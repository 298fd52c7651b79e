"""
Surface grammars.

Combinator languages:

    expr  ::= expr || expr          parallel (xNCCL), also ∥
            | expr (+) expr         fair choice (xPTCL, xNCCL), also ⊕, binds tighter than ||
            | expr expr             application, left-associative, binds tightest
            | NAME [types] [( expr, ... )]
            | ( expr )
    types ::= [ ty, ... ]           explicit type subscripts (xTCL, xPTCL)
    ty    ::= unit | ty -> ty | ( ty )

Primes may be written ' or ′ (S'' or S″). A nullary name followed by `(`
starts a new argument: `I(I e)` is I applied to (I e).

Lambda calculus:

    expr ::= \\x y. expr | λx. expr | expr expr | x | ( expr )

Names are resolved to de Bruijn levels; the printer renames binders x0, x1, ...
"""

import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from core.kernel import Term, WorkbenchError


class ParseError(WorkbenchError):
    """Custom exception for surface syntax errors."""
    pass


@dataclass(frozen=True)
class RawTerm:
    """Parsed but not yet sorted syntax. Application is `app`; variables carry their level."""

    name: str
    args: Tuple["RawTerm", ...] = ()
    types: Optional[Tuple[Any, ...]] = None
    index: Optional[int] = None


@dataclass(frozen=True)
class RawType:
    """unit, or an arrow when both sides are present."""

    source: Optional["RawType"] = None
    target: Optional["RawType"] = None


_TOKEN = re.compile(
    r"\s*(\(\+\)|⊕|\|\||∥|->|→|λ|\\|[A-Za-z_][A-Za-z0-9_]*(?:'|′|″)*|[()\[\],.])"
)
_NORMALIZE = {"⊕": "(+)", "∥": "||", "→": "->", "λ": "\\"}


def tokenize(text: str) -> List[str]:
    tokens: List[str] = []
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match:
            raise ParseError(f"Unexpected input at column {position + 1}: {text[position:]!r}")
        token = match.group(1)
        token = _NORMALIZE.get(token, token).replace("″", "''").replace("′", "'")
        tokens.append(token)
        position = match.end()
    return tokens


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.position = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.position] if self.position < len(self.tokens) else None

    def take(self, expected: Optional[str] = None) -> str:
        token = self.peek()
        if token is None:
            raise ParseError(f"Unexpected end of input in {self.text!r}" + (f", expected {expected!r}" if expected else ""))
        if expected is not None and token != expected:
            raise ParseError(f"Expected {expected!r} but found {token!r} in {self.text!r}")
        self.position += 1
        return token

    def finish(self) -> None:
        if self.peek() is not None:
            raise ParseError(f"Unexpected {self.peek()!r} in {self.text!r}")


def _is_name(token: Optional[str]) -> bool:
    return token is not None and (token[0].isalpha() or token[0] == "_")


# --- Combinator languages ---

class CombinatorGrammar:
    """
    Args:
        arities: constants and their arities (everything except app, plus, par)
        infix: the infix operators the language has, among "plus" and "par"
        typed: whether `[ty, ...]` subscripts are accepted
    """

    def __init__(self, arities: Dict[str, int], infix: Sequence[str] = (), typed: bool = False):
        self.arities = dict(arities)
        self.infix = set(infix)
        self.typed = typed

    def parse(self, text: str) -> RawTerm:
        cursor = _Cursor(text)
        if cursor.peek() is None:
            raise ParseError("Empty term")
        term = self._par(cursor)
        cursor.finish()
        return term

    def _par(self, cursor: _Cursor) -> RawTerm:
        left = self._plus(cursor)
        while cursor.peek() == "||":
            if "par" not in self.infix:
                raise ParseError("This language has no parallel operator")
            cursor.take()
            left = RawTerm("par", (left, self._plus(cursor)))
        return left

    def _plus(self, cursor: _Cursor) -> RawTerm:
        left = self._app(cursor)
        while cursor.peek() == "(+)":
            if "plus" not in self.infix:
                raise ParseError("This language has no choice operator")
            cursor.take()
            left = RawTerm("plus", (left, self._app(cursor)))
        return left

    def _app(self, cursor: _Cursor) -> RawTerm:
        head = self._atom(cursor)
        while cursor.peek() == "(" or _is_name(cursor.peek()):
            head = RawTerm("app", (head, self._atom(cursor)))
        return head

    def _atom(self, cursor: _Cursor) -> RawTerm:
        token = cursor.take()
        if token == "(":
            inner = self._par(cursor)
            cursor.take(")")
            return inner
        if not _is_name(token):
            raise ParseError(f"Unexpected {token!r} in {cursor.text!r}")
        if token not in self.arities:
            raise ParseError(f"Unknown constant {token!r}")
        types = None
        if cursor.peek() == "[":
            if not self.typed:
                raise ParseError(f"Type subscripts are not allowed in this language ({token})")
            cursor.take("[")
            types = [parse_type_tokens(cursor)]
            while cursor.peek() == ",":
                cursor.take(",")
                types.append(parse_type_tokens(cursor))
            cursor.take("]")
            types = tuple(types)
        arity = self.arities[token]
        args: List[RawTerm] = []
        if arity > 0:
            cursor.take("(")
            args.append(self._par(cursor))
            while cursor.peek() == ",":
                cursor.take(",")
                args.append(self._par(cursor))
            cursor.take(")")
            if len(args) != arity:
                raise ParseError(f"{token} takes {arity} argument(s), got {len(args)}")
        return RawTerm(token, tuple(args), types)


def parse_type_tokens(cursor: _Cursor) -> RawType:
    token = cursor.take()
    if token == "(":
        source = parse_type_tokens(cursor)
        cursor.take(")")
    elif token == "unit":
        source = RawType()
    else:
        raise ParseError(f"Unknown type {token!r}")
    if cursor.peek() == "->":
        cursor.take("->")
        return RawType(source, parse_type_tokens(cursor))
    return source


def parse_type(text: str) -> RawType:
    cursor = _Cursor(text)
    result = parse_type_tokens(cursor)
    cursor.finish()
    return result


_PAR, _PLUS, _APP, _ATOM = 1, 2, 3, 4


def _precedence(t: Term) -> int:
    name = t.op.name
    if name == "app":
        return _APP
    if name == "plus":
        return _PLUS
    if name == "par":
        return _PAR
    return _ATOM


def show_combinator(t: Term, subscripts: Optional[Callable[[Term], Optional[str]]] = None) -> str:
    """
    Print a combinator term. `subscripts` may return the `[...]` text to
    attach to a constant, or None to omit it.
    """

    def show(node: Term) -> str:
        name = node.op.name
        if name == "app":
            fun, arg = node.children
            text = show(fun)
            if _precedence(fun) < _APP:
                text = f"({text})"
            if _precedence(arg) == _ATOM:
                return f"{text} {show(arg)}"
            if _precedence(fun) == _APP:
                text = f"({text})"
            return f"{text}({show(arg)})"
        if name in ("plus", "par"):
            level = _PLUS if name == "plus" else _PAR
            symbol = "(+)" if name == "plus" else "||"
            left, right = node.children
            left_text = show(left) if _precedence(left) >= level else f"({show(left)})"
            right_text = show(right) if _precedence(right) > level else f"({show(right)})"
            return f"{left_text} {symbol} {right_text}"
        head = name
        if subscripts is not None:
            extra = subscripts(node)
            if extra:
                head += extra
        if node.children:
            return head + "(" + ", ".join(show(c) for c in node.children) + ")"
        return head

    return show(t)


# --- Lambda calculus ---

class LambdaGrammar:
    def parse(self, text: str, free: Sequence[str] = ()) -> RawTerm:
        """Parse with `free` naming the open context's variables, level 0 first."""
        cursor = _Cursor(text)
        if cursor.peek() is None:
            raise ParseError("Empty term")
        term = self._expr(cursor, list(free))
        cursor.finish()
        return term

    def _expr(self, cursor: _Cursor, scope: List[str]) -> RawTerm:
        if cursor.peek() == "\\":
            cursor.take()
            names: List[str] = []
            while _is_name(cursor.peek()):
                names.append(cursor.take())
            if not names:
                raise ParseError("A binder needs at least one variable name")
            cursor.take(".")
            body = self._expr(cursor, scope + names)
            for _ in names:
                body = RawTerm("lam", (body,))
            return body
        head = self._atom(cursor, scope)
        while cursor.peek() in ("(", "\\") or _is_name(cursor.peek()):
            if cursor.peek() == "\\":
                head = RawTerm("app", (head, self._expr(cursor, scope)))
                break
            head = RawTerm("app", (head, self._atom(cursor, scope)))
        return head

    def _atom(self, cursor: _Cursor, scope: List[str]) -> RawTerm:
        token = cursor.take()
        if token == "(":
            inner = self._expr(cursor, scope)
            cursor.take(")")
            return inner
        if not _is_name(token):
            raise ParseError(f"Unexpected {token!r} in {cursor.text!r}")
        for level in range(len(scope) - 1, -1, -1):
            if scope[level] == token:
                return RawTerm("var", index=level)
        raise ParseError(f"Unbound variable {token!r}")


def show_lambda(t: Term) -> str:
    """Print a de Bruijn term with binders named after their levels."""

    def show(node: Term) -> str:
        name = node.op.name
        if name == "var":
            return f"x{node.op.params[0]}"
        if name == "lam":
            return f"λx{node.op.result_sort}. {show(node.children[0])}"
        fun, arg = node.children
        fun_text = show(fun)
        if fun.op.name == "lam":
            fun_text = f"({fun_text})"
        arg_text = show(arg)
        if arg.op.name != "var":
            arg_text = f"({arg_text})"
        return f"{fun_text} {arg_text}"

    return show(t)

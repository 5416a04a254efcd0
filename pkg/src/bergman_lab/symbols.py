"""Parser for the symbol expression grammar used on the command line.

    expr    := term (("+" | "-") term)*
    term    := factor ("*" factor)*
    factor  := "-" factor | atom ("^" INT)?
    atom    := NUMBER | VAR | "ces(" [vec] ")" | "pow(" vec ";" NUMBER ")" | "(" expr ")"
    VAR     := "z" | "z" INT            (z is z1; coordinates are 1-based)
    NUMBER  := real literal, with an optional "i" or "j" suffix for imaginary
    vec     := entry ("," entry)*       (one entry is repeated over all n coordinates)

``ces(b)`` is -log(1 - <z, b>) and ``ces()`` uses b = (1, ..., 1)/sqrt(n);
``pow(w; s)`` is (1 - <z, w>)^{-s}.  Vector entries may be complex,
written like ``0.5+0.5i``.
"""

import re

import numpy as np

from .holo import HoloFunction, LogKernel, Polynomial, PowerKernel, cesaro_symbol

TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[ij]?|[ij](?![a-z]))"
    r"|(?P<var>z\d*)|(?P<fn>ces|pow)\s*\(|(?P<op>[-+*^();,)]))"
)


class SymbolError(ValueError):
    pass


def _number(text):
    if text in ("i", "j"):
        return 1j
    if text[-1] in "ij":
        return complex(0, float(text[:-1]))
    return float(text)


def _tokenize(text):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SymbolError(f"unexpected input at {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def _vec_entries(raw):
    items = [s.strip() for s in raw.split(",")]
    if not items or any(not s for s in items):
        raise SymbolError(f"bad vector {raw!r}")
    try:
        return [complex(s.replace("i", "j")) for s in items]
    except ValueError as exc:
        raise SymbolError(f"bad vector entry in {raw!r}") from exc


def _fit(entries, n):
    if len(entries) == 1:
        return np.full(n, entries[0], dtype=complex)
    if len(entries) != n:
        raise SymbolError(f"vector of length {len(entries)} in C^{n}")
    return np.array(entries, dtype=complex)


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.toks = _tokenize(self._lift_calls(text))
        self.i = 0

    def _lift_calls(self, text):
        # vector arguments are parsed separately; replace them by placeholders
        self.args = []

        def repl(m):
            self.args.append(m.group(2))
            return f"{m.group(1)}(#{len(self.args) - 1})"

        lifted = re.sub(r"\b(ces|pow)\s*\(([^()]*)\)", repl, text)
        return lifted.replace("#", "")

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise SymbolError(f"expected {value or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        out = self.expr()
        if self.i != len(self.toks):
            raise SymbolError(f"trailing input in {self.text!r}: {self.toks[self.i][1]!r}")
        return out

    def expr(self):
        out = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            out = _add(out, rhs if op == "+" else _neg(rhs))
        return out

    def term(self):
        out = self.factor()
        while self.peek()[1] == "*":
            self.take()
            out = _mul(out, self.factor())
        return out

    def factor(self):
        if self.peek()[1] == "-":
            self.take()
            return _neg(self.factor())
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, val = self.take()
            if kind != "num" or not val.isdigit():
                raise SymbolError("exponents must be nonnegative integers")
            base = _power(base, int(val))
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return _number(val)
        if kind == "var":
            k = int(val[1:]) if len(val) > 1 else 1
            if not 1 <= k <= self.n:
                raise SymbolError(f"variable {val} outside C^{self.n}")
            return Polynomial.variable(self.n, k - 1)
        if kind == "fn":
            idx = int(self.take()[1])
            self.take(")")
            return self._call(val, self.args[idx])
        if val == "(":
            out = self.expr()
            self.take(")")
            return out
        raise SymbolError(f"unexpected {val!r} in {self.text!r}")

    def _call(self, name, raw):
        if name == "ces":
            if not raw.strip():
                return cesaro_symbol(self.n)
            return LogKernel(_fit(_vec_entries(raw), self.n))
        if ";" not in raw:
            raise SymbolError("pow needs 'pow(w; s)'")
        w_raw, s_raw = raw.split(";", 1)
        w = _fit(_vec_entries(w_raw), self.n)
        try:
            s = float(s_raw)
        except ValueError as exc:
            raise SymbolError(f"bad exponent in pow({raw})") from exc
        return PowerKernel(w, s)


def _lift(x, like):
    if isinstance(x, HoloFunction):
        return x
    return Polynomial.constant(like.n, x)


def _add(a, b):
    if not isinstance(a, HoloFunction) and not isinstance(b, HoloFunction):
        return a + b
    if not isinstance(a, HoloFunction):
        a = _lift(a, b)
    if not isinstance(b, HoloFunction):
        b = _lift(b, a)
    return a + b


def _neg(a):
    return -a


def _mul(a, b):
    if isinstance(a, HoloFunction) and isinstance(b, HoloFunction):
        return a * b
    if isinstance(a, HoloFunction):
        return a.scale(b)
    if isinstance(b, HoloFunction):
        return b.scale(a)
    return a * b


def _power(base, k):
    if not isinstance(base, HoloFunction):
        return base**k
    out = None
    for _ in range(k):
        out = base if out is None else out * base
    return out if out is not None else Polynomial.constant(base.n, 1.0)


def parse_symbol(text, n=1):
    """Parse ``text`` into a holomorphic function on B_n."""
    if not isinstance(text, str) or not text.strip():
        raise SymbolError("empty symbol")
    out = _Parser(text, n).parse()
    if not isinstance(out, HoloFunction):
        out = Polynomial.constant(n, out)
    return out

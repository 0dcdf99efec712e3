"""Exact multivariate polynomial arithmetic over the rationals.

Polynomials are immutable, stored sparsely as a map from dense exponent
tuples to ``Fraction`` coefficients.  The variable universe of each
polynomial is the tuple of variable names that actually occur in it, kept
in a fixed canonical order so that any two polynomials can be combined by
aligning universes.  The canonical order puts the spatial variable ``s``
first, then integration dummies ``theta_1, theta_2, ...``, then auxiliary
dummies ``eta_1, eta_2, ...``, then anything else alphabetically.

Monomials are totally ordered graded-lexicographically: higher total degree
first, ties broken by the exponent tuple in the canonical variable order.
Rendering and iteration both follow this order, so the text form of a
polynomial is canonical and serialization round-trips exactly.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

import numpy as np

__all__ = ["Poly", "VarId", "as_fraction", "canonical_vars"]

VarId = str

RationalLike = Union[int, Fraction, str, float]

_VAR_SUFFIX = re.compile(r"^([A-Za-z][A-Za-z0-9]*?)_?(\d+)$")


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce ``value`` to an exact ``Fraction``.

    Strings accept integer, ratio (``"3/4"``) and decimal (``"0.25"``)
    forms.  Floats are read through their shortest decimal representation,
    so ``as_fraction(0.1) == Fraction(1, 10)``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def _var_sort_key(name: VarId) -> tuple:
    if name == "s":
        return (0, 0, name)
    m = _VAR_SUFFIX.match(name)
    if m:
        stem, idx = m.group(1), int(m.group(2))
        if stem == "theta":
            return (1, idx, name)
        if stem == "eta":
            return (2, idx, name)
    return (3, 0, name)


def canonical_vars(names: Iterable[VarId]) -> tuple[VarId, ...]:
    """Sort variable names into the canonical universe order."""
    return tuple(sorted(set(names), key=_var_sort_key))


def _monomial_sort_key(exps: tuple[int, ...]) -> tuple:
    # graded lex, used descending for display
    return (sum(exps), exps)


class Poly:
    """Immutable exact polynomial in named variables.

    Construct through :meth:`const`, :meth:`var`, :meth:`from_terms` or
    :meth:`parse`; arithmetic operators accept mixed operands (``int``,
    ``Fraction``, ``Poly``).
    """

    __slots__ = ("vars", "terms", "_hash")

    vars: tuple[VarId, ...]
    terms: Mapping[tuple[int, ...], Fraction]

    def __init__(self, vars: tuple[VarId, ...], terms: dict[tuple[int, ...], Fraction]):
        # normalize: drop zero coefficients and unused variables
        terms = {e: c for e, c in terms.items() if c != 0}
        if vars and terms:
            used = [any(e[i] for e in terms) for i in range(len(vars))]
        else:
            used = [False] * len(vars)
        if not all(used):
            keep = [i for i, u in enumerate(used) if u]
            vars = tuple(vars[i] for i in keep)
            terms = {tuple(e[i] for i in keep): c for e, c in terms.items()}
        object.__setattr__(self, "vars", vars)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Poly is immutable")

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def const(cls, value: RationalLike) -> "Poly":
        c = as_fraction(value)
        return cls((), {(): c} if c else {})

    @classmethod
    def var(cls, name: VarId, power: int = 1) -> "Poly":
        if power < 0:
            raise ValueError("negative powers are not polynomials")
        if power == 0:
            return cls.const(1)
        return cls((name,), {(power,): Fraction(1)})

    @classmethod
    def from_terms(
        cls, vars: Iterable[VarId], terms: Mapping[tuple[int, ...], RationalLike]
    ) -> "Poly":
        """Build from an explicit exponent->coefficient map.

        ``vars`` may be in any order; exponents are permuted into the
        canonical order automatically.
        """
        vs = tuple(vars)
        canon = canonical_vars(vs)
        if len(canon) != len(vs):
            raise ValueError("duplicate variable names")
        perm = [vs.index(v) for v in canon]
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in terms.items():
            if len(e) != len(vs):
                raise ValueError("exponent tuple length mismatch")
            if any(x < 0 for x in e):
                raise ValueError("negative exponent")
            key = tuple(e[p] for p in perm)
            out[key] = out.get(key, Fraction(0)) + as_fraction(c)
        return cls(canon, out)

    @staticmethod
    def zero() -> "Poly":
        return Poly((), {})

    @staticmethod
    def one() -> "Poly":
        return Poly.const(1)

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.vars

    def constant_value(self) -> Fraction:
        """The value of a constant polynomial (error if non-constant)."""
        if self.vars:
            raise ValueError("polynomial is not constant")
        return self.terms.get((), Fraction(0))

    def total_degree(self) -> int:
        """Total degree (0 for the zero polynomial)."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def degree(self, var: VarId) -> int:
        if var not in self.vars:
            return 0
        i = self.vars.index(var)
        return max(e[i] for e in self.terms)

    def coefficient(self, exps_by_var: Mapping[VarId, int]) -> Fraction:
        """Coefficient of the monomial with the given exponents (others 0)."""
        key = tuple(exps_by_var.get(v, 0) for v in self.vars)
        for v in exps_by_var:
            if exps_by_var[v] and v not in self.vars:
                return Fraction(0)
        return self.terms.get(key, Fraction(0))

    def items_sorted(self) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        """Terms in descending graded-lex order."""
        for e in sorted(self.terms, key=_monomial_sort_key, reverse=True):
            yield e, self.terms[e]

    # ------------------------------------------------------------------
    # universe alignment
    # ------------------------------------------------------------------

    def _aligned(self, vars: tuple[VarId, ...]) -> dict[tuple[int, ...], Fraction]:
        """Exponent map re-expressed over the (super-)universe ``vars``."""
        if vars == self.vars:
            return dict(self.terms)
        pos = {v: i for i, v in enumerate(vars)}
        idx = [pos[v] for v in self.vars]
        n = len(vars)
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            full = [0] * n
            for i, x in zip(idx, e):
                full[i] = x
            out[tuple(full)] = c
        return out

    @staticmethod
    def _coerce(value) -> "Poly":
        if isinstance(value, Poly):
            return value
        return Poly.const(value)

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------

    def __add__(self, other) -> "Poly":
        try:
            other = Poly._coerce(other)
        except TypeError:
            return NotImplemented
        vars = canonical_vars(self.vars + other.vars)
        a = self._aligned(vars)
        for e, c in other._aligned(vars).items():
            a[e] = a.get(e, Fraction(0)) + c
        return Poly(vars, a)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        try:
            other = Poly._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return Poly._coerce(other) - self

    def __mul__(self, other) -> "Poly":
        try:
            other = Poly._coerce(other)
        except TypeError:
            return NotImplemented
        if other.is_constant():
            c0 = other.constant_value()
            if c0 == 0:
                return Poly.zero()
            return Poly(self.vars, {e: c * c0 for e, c in self.terms.items()})
        if self.is_constant():
            return other * self
        vars = canonical_vars(self.vars + other.vars)
        a = self._aligned(vars)
        b = other._aligned(vars)
        out: dict[tuple[int, ...], Fraction] = {}
        for ea, ca in a.items():
            for eb, cb in b.items():
                key = tuple(x + y for x, y in zip(ea, eb))
                out[key] = out.get(key, Fraction(0)) + ca * cb
        return Poly(vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Poly.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __truediv__(self, other) -> "Poly":
        c = as_fraction(other)
        if c == 0:
            raise ZeroDivisionError("division of Poly by zero")
        return self * (Fraction(1) / c)

    # ------------------------------------------------------------------
    # calculus
    # ------------------------------------------------------------------

    def diff(self, var: VarId) -> "Poly":
        """Partial derivative with respect to ``var``."""
        if var not in self.vars:
            return Poly.zero()
        i = self.vars.index(var)
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            key = e[:i] + (e[i] - 1,) + e[i + 1 :]
            out[key] = out.get(key, Fraction(0)) + c * e[i]
        return Poly(self.vars, out)

    def antiderivative(self, var: VarId) -> "Poly":
        """Indefinite integral in ``var`` with zero constant of integration."""
        if var not in self.vars:
            return self * Poly.var(var)
        i = self.vars.index(var)
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            key = e[:i] + (e[i] + 1,) + e[i + 1 :]
            out[key] = c / (e[i] + 1)
        return Poly(self.vars, out)

    def integrate(self, var: VarId, lower, upper) -> "Poly":
        """Definite integral in ``var`` from ``lower`` to ``upper``.

        Bounds may be rationals, variable names, or polynomials.
        """
        anti = self.antiderivative(var)
        lo = lower if isinstance(lower, Poly) else (
            Poly.var(lower) if isinstance(lower, str) and not _is_number_str(lower) else Poly.const(lower)
        )
        hi = upper if isinstance(upper, Poly) else (
            Poly.var(upper) if isinstance(upper, str) and not _is_number_str(upper) else Poly.const(upper)
        )
        return anti.substitute({var: hi}) - anti.substitute({var: lo})

    # ------------------------------------------------------------------
    # substitution / evaluation
    # ------------------------------------------------------------------

    def substitute(self, mapping: Mapping[VarId, Union["Poly", RationalLike]]) -> "Poly":
        """Simultaneously substitute polynomials (or constants) for variables."""
        if not mapping:
            return self
        repl = {v: Poly._coerce(p) for v, p in mapping.items()}
        if not any(v in self.vars for v in repl):
            return self
        # cache powers of each replacement
        powers: dict[VarId, list[Poly]] = {}
        result = Poly.zero()
        for e, c in self.terms.items():
            term = Poly.const(c)
            for v, x in zip(self.vars, e):
                if x == 0:
                    continue
                if v in repl:
                    cache = powers.setdefault(v, [Poly.one()])
                    while len(cache) <= x:
                        cache.append(cache[-1] * repl[v])
                    term = term * cache[x]
                else:
                    term = term * Poly((v,), {(x,): Fraction(1)})
            result = result + term
        return result

    def rename(self, mapping: Mapping[VarId, VarId]) -> "Poly":
        """Rename variables; several sources may merge onto one target."""
        new_names = [mapping.get(v, v) for v in self.vars]
        vars = canonical_vars(new_names)
        pos = {v: i for i, v in enumerate(vars)}
        idx = [pos[n] for n in new_names]
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            full = [0] * len(vars)
            for i, x in zip(idx, e):
                full[i] += x
            key = tuple(full)
            out[key] = out.get(key, Fraction(0)) + c
        return Poly(vars, out)

    def eval_exact(self, subs: Mapping[VarId, RationalLike]) -> Fraction:
        """Evaluate at an exact rational point (all variables required)."""
        missing = [v for v in self.vars if v not in subs]
        if missing:
            raise ValueError(f"missing values for {missing}")
        vals = [as_fraction(subs[v]) for v in self.vars]
        total = Fraction(0)
        for e, c in self.terms.items():
            t = c
            for v, x in zip(vals, e):
                if x:
                    t *= v**x
            total += t
        return total

    def eval_float(self, subs: Mapping[VarId, Union[float, np.ndarray]]):
        """Evaluate at float/array points with numpy broadcasting."""
        missing = [v for v in self.vars if v not in subs]
        if missing:
            raise ValueError(f"missing values for {missing}")
        if not self.terms:
            return 0.0
        vals = [np.asarray(subs[v], dtype=float) for v in self.vars]
        total = None
        for e, c in self.terms.items():
            t = float(c)
            for v, x in zip(vals, e):
                if x:
                    t = t * v**x
            total = t if total is None else total + t
        return total

    def coeff_arrays(self, var_order: tuple[VarId, ...]) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(exponents, coefficients)`` arrays over ``var_order``.

        Exponents come out as an ``(nterms, nvars)`` int array, coefficients
        as float64.  Variables outside ``var_order`` raise.
        """
        extra = [v for v in self.vars if v not in var_order]
        if extra:
            raise ValueError(f"variables {extra} not in requested order")
        idx = [var_order.index(v) for v in self.vars]
        n = len(var_order)
        exps = np.zeros((len(self.terms), n), dtype=np.int64)
        coeffs = np.zeros(len(self.terms), dtype=float)
        for k, (e, c) in enumerate(self.items_sorted()):
            for i, x in zip(idx, e):
                exps[k, i] = x
            coeffs[k] = float(c)
        return exps, coeffs

    # ------------------------------------------------------------------
    # comparison / hashing
    # ------------------------------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self) -> int:
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash((self.vars, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __bool__(self) -> bool:
        return bool(self.terms)

    # ------------------------------------------------------------------
    # text form
    # ------------------------------------------------------------------

    def render(self) -> str:
        """Canonical text form, e.g. ``'(3/4)*s^2*theta_1 - 2*s + 1'``.

        Terms appear in descending graded-lex order.  ``parse`` inverts
        this exactly.
        """
        if not self.terms:
            return "0"
        pieces: list[str] = []
        for e, c in self.items_sorted():
            factors: list[str] = []
            for v, x in zip(self.vars, e):
                if x == 1:
                    factors.append(v)
                elif x > 1:
                    factors.append(f"{v}^{x}")
            mag = abs(c)
            if not factors:
                coeff_txt = _frac_str(mag)
            elif mag == 1:
                coeff_txt = ""
            else:
                coeff_txt = _frac_str(mag)
            body = "*".join(([coeff_txt] if coeff_txt else []) + factors)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    __str__ = render

    def __repr__(self) -> str:
        return f"Poly({self.render()!r})"

    @classmethod
    def parse(cls, text: str) -> "Poly":
        """Parse the text form produced by :meth:`render`.

        Grammar: ``+ - * / ^`` with parentheses; numbers may be integers,
        decimals, or ratios; ``/`` requires a numeric divisor.
        """
        return _Parser(text).parse()


def _frac_str(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def _is_number_str(s: str) -> bool:
    try:
        Fraction(s)
        return True
    except (ValueError, ZeroDivisionError):
        return False


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\.\d+|\d+)|(?P<var>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    """Recursive-descent parser for the canonical polynomial text form."""

    def __init__(self, text: str):
        self.tokens: list[tuple[str, str]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise ValueError(f"bad character at {text[pos:]!r}")
                break
            pos = m.end()
            for kind in ("num", "var", "op"):
                tok = m.group(kind)
                if tok is not None:
                    self.tokens.append((kind, tok))
                    break
        self.i = 0

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of input")
        self.i += 1
        return tok

    def parse(self) -> Poly:
        if not self.tokens:
            raise ValueError("empty polynomial text")
        p = self.expr()
        if self.peek() is not None:
            raise ValueError(f"trailing tokens at {self.tokens[self.i:]}")
        return p

    def expr(self) -> Poly:
        kind, tok = self.peek() or ("", "")
        if kind == "op" and tok in "+-":
            self.next()
            p = -self.term() if tok == "-" else self.term()
        else:
            p = self.term()
        while True:
            nxt = self.peek()
            if nxt is None or nxt[0] != "op" or nxt[1] not in "+-":
                return p
            _, op = self.next()
            q = self.term()
            p = p + q if op == "+" else p - q

    def term(self) -> Poly:
        p = self.factor()
        while True:
            nxt = self.peek()
            if nxt is None or nxt[0] != "op" or nxt[1] not in "*/":
                return p
            _, op = self.next()
            q = self.factor()
            if op == "*":
                p = p * q
            else:
                if not q.is_constant():
                    raise ValueError("division by a non-constant polynomial")
                p = p / q.constant_value()

    def factor(self) -> Poly:
        kind, tok = self.next()
        if kind == "op" and tok == "-":
            return -self.factor()
        if kind == "op" and tok == "+":
            return self.factor()
        if kind == "op" and tok == "(":
            p = self.expr()
            k, t = self.next()
            if t != ")":
                raise ValueError("expected ')'")
        elif kind == "num":
            p = Poly.const(Fraction(tok) if "." not in tok else Fraction(tok))
        elif kind == "var":
            p = Poly.var(tok)
        else:
            raise ValueError(f"unexpected token {tok!r}")
        nxt = self.peek()
        if nxt is not None and nxt[0] == "op" and nxt[1] == "^":
            self.next()
            k, t = self.next()
            neg = False
            if k == "op" and t == "-":
                neg = True
                k, t = self.next()
            if k != "num" or "." in t:
                raise ValueError("exponent must be an integer")
            if neg:
                raise ValueError("negative powers are not polynomials")
            p = p ** int(t)
        return p

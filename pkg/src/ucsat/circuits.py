"""Fixed-point bit-vector arithmetic compiled to CNF.

A :class:`BitVec` stores its literals most significant first, matching the
positional reading ``value = sum(2**(n - i) * p_i for i in 1..n+m)``. Internally
the arithmetic walks bits least significant first.

Every gate folds constant inputs, so vectors built from constants or padded
with constant-false bits cost no variables. Each vector also carries ``ub``,
an upper bound on its raw integer value that holds in every assignment
satisfying the clauses that define it; adders use it to drop carries that can
never be set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .cnf import CnfBuilder, Literal

OPS = (">", ">=", "<", "<=")


class OverflowError_(ArithmeticError):
    pass


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointFormat:
    n: int
    m: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError(f"invalid fixed-point format n={self.n}, m={self.m}")

    @property
    def width(self) -> int:
        return self.n + self.m

    @property
    def step(self) -> Fraction:
        return Fraction(1, 2**self.m)

    @property
    def max_value(self) -> Fraction:
        return Fraction(2**self.width - 1, 2**self.m)

    @classmethod
    def for_value(cls, value, m: int = 0) -> "FixedPointFormat":
        """Smallest format with ``m`` fractional bits that holds ``value``."""
        raw = math.ceil(Fraction(value) * 2**m)
        return cls(max(1, raw.bit_length() - m), m)


@dataclass(frozen=True)
class BitVec:
    fmt: FixedPointFormat
    bits: tuple[Literal, ...]
    ub: int

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(self.bits))
        if len(self.bits) != self.fmt.width:
            raise ValueError(f"{len(self.bits)} bits do not match format width {self.fmt.width}")

    @property
    def lsb(self) -> list[Literal]:
        return list(reversed(self.bits))

    @property
    def max_value(self) -> Fraction:
        return Fraction(self.ub, 2**self.fmt.m)


# ---------------------------------------------------------------------------
# grid helpers


def round_to_grid(value, fmt_or_m, mode: str = "nearest") -> Fraction:
    """Snap ``value`` to a multiple of ``2**-m``.

    ``nearest`` rounds ties up; ``floor`` and ``ceil`` round in the stated
    direction. With a :class:`FixedPointFormat` the result is checked against
    its range.
    """
    value = Fraction(value)
    if value < 0:
        raise GridError(f"negative value {value}")
    fmt = fmt_or_m if isinstance(fmt_or_m, FixedPointFormat) else None
    m = fmt.m if fmt else int(fmt_or_m)
    scaled = value * 2**m
    if mode == "nearest":
        raw = math.floor(scaled + Fraction(1, 2))
    elif mode == "floor":
        raw = math.floor(scaled)
    elif mode == "ceil":
        raw = math.ceil(scaled)
    else:
        raise ValueError(f"unknown rounding mode {mode!r}")
    result = Fraction(raw, 2**m)
    if fmt is not None and result > fmt.max_value:
        raise OverflowError_(f"{value} does not fit {fmt}")
    return result


def to_raw(value, m: int) -> int:
    scaled = Fraction(value) * 2**m
    if scaled.denominator != 1:
        raise GridError(f"{value} is not a multiple of 2^-{m}")
    return scaled.numerator


def frac_bits_needed(value, limit: int = 32) -> int:
    """Fractional bits needed to represent ``value`` exactly; None if not dyadic within ``limit``."""
    value = Fraction(value)
    for m in range(limit + 1):
        if (value * 2**m).denominator == 1:
            return m
    return None


# ---------------------------------------------------------------------------
# construction and decoding


def const_bitvec(builder: CnfBuilder, value, fmt: FixedPointFormat | None = None, m: int = 0) -> BitVec:
    value = Fraction(value)
    if value < 0:
        raise GridError(f"negative constant {value}")
    if fmt is None:
        fmt = FixedPointFormat.for_value(value, m)
    if value > fmt.max_value:
        raise OverflowError_(f"{value} overflows {fmt}")
    raw = to_raw(value, fmt.m)
    bits = [builder.const(bool(raw >> k & 1)) for k in range(fmt.width)]
    return BitVec(fmt, reversed(bits), raw)


def fresh_bitvec(builder: CnfBuilder, fmt: FixedPointFormat) -> BitVec:
    return BitVec(fmt, builder.fresh_vars(fmt.width), 2**fmt.width - 1)


def bool_bitvec(lit: Literal) -> BitVec:
    """A single literal read as the number 0 or 1."""
    return BitVec(FixedPointFormat(1, 0), (lit,), 1)


def value_of(lit: Literal, assignment) -> bool:
    """Truth value of ``lit`` under a mapping var->bool or a pysat-style model list."""
    v = abs(lit)
    if isinstance(assignment, Mapping):
        b = assignment[v]
    else:
        b = assignment[v - 1] > 0
    return b if lit > 0 else not b


def decode_raw(bv: BitVec, assignment) -> int:
    raw = 0
    for lit in bv.bits:
        raw = raw << 1 | value_of(lit, assignment)
    return raw


def decode(bv: BitVec, assignment) -> Fraction:
    return Fraction(decode_raw(bv, assignment), 2**bv.fmt.m)


def pad(bv: BitVec, builder: CnfBuilder, fmt: FixedPointFormat) -> BitVec:
    """Widen with constant-false bits on both ends."""
    if fmt.n < bv.fmt.n or fmt.m < bv.fmt.m:
        raise ValueError(f"cannot narrow {bv.fmt} to {fmt}")
    if fmt == bv.fmt:
        return bv
    f = builder.false
    bits = (f,) * (fmt.n - bv.fmt.n) + bv.bits + (f,) * (fmt.m - bv.fmt.m)
    return BitVec(fmt, bits, bv.ub << (fmt.m - bv.fmt.m))


def align(builder: CnfBuilder, *vecs: BitVec) -> list[BitVec]:
    fmt = FixedPointFormat(max(v.fmt.n for v in vecs), max(v.fmt.m for v in vecs))
    return [pad(v, builder, fmt) for v in vecs]


# ---------------------------------------------------------------------------
# gates with constant folding


def _and(b: CnfBuilder, x: Literal, y: Literal) -> Literal:
    if b.is_false(x) or b.is_false(y) or x == -y:
        return b.false
    if b.is_true(x):
        return y
    if b.is_true(y) or x == y:
        return x
    g = b.fresh_var()
    b.add_clause((-g, x))
    b.add_clause((-g, y))
    b.add_clause((g, -x, -y))
    return g


def _or(b: CnfBuilder, x: Literal, y: Literal) -> Literal:
    return -_and(b, -x, -y)


def _xor(b: CnfBuilder, x: Literal, y: Literal) -> Literal:
    if b.is_const(x):
        return y if b.is_false(x) else -y
    if b.is_const(y):
        return x if b.is_false(y) else -x
    if x == y:
        return b.false
    if x == -y:
        return b.true
    g = b.fresh_var()
    b.add_clause((-g, x, y))
    b.add_clause((-g, -x, -y))
    b.add_clause((g, -x, y))
    b.add_clause((g, x, -y))
    return g


def _xor3(b: CnfBuilder, x: Literal, y: Literal, z: Literal) -> Literal:
    if any(b.is_const(l) for l in (x, y, z)) or len({abs(x), abs(y), abs(z)}) < 3:
        return _xor(b, _xor(b, x, y), z)
    g = b.fresh_var()
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                # forbid each assignment whose parity disagrees with g
                odd = (sx < 0) ^ (sy < 0) ^ (sz < 0)
                b.add_clause((sx * x, sy * y, sz * z, g if odd else -g))
    return g


def _maj(b: CnfBuilder, x: Literal, y: Literal, z: Literal) -> Literal:
    for p, q, r in ((x, y, z), (y, z, x), (z, x, y)):
        if b.is_false(p):
            return _and(b, q, r)
        if b.is_true(p):
            return _or(b, q, r)
    if x == y or x == z:
        return x
    if y == z:
        return y
    if x == -y:
        return z
    if x == -z:
        return y
    if y == -z:
        return x
    g = b.fresh_var()
    b.add_clause((-g, x, y))
    b.add_clause((-g, x, z))
    b.add_clause((-g, y, z))
    b.add_clause((g, -x, -y))
    b.add_clause((g, -x, -z))
    b.add_clause((g, -y, -z))
    return g


def full_adder(b: CnfBuilder, x: Literal, y: Literal, cin: Literal) -> tuple[Literal, Literal]:
    return _xor3(b, x, y, cin), _maj(b, x, y, cin)


# ---------------------------------------------------------------------------
# arithmetic


def encode_add(builder: CnfBuilder, a: BitVec, b: BitVec) -> BitVec:
    """Ripple-carry sum. Result format is ``(n + 1, m)`` after alignment."""
    a, b = align(builder, a, b)
    ub = a.ub + b.ub
    carry = builder.false
    out = []
    for x, y in zip(a.lsb, b.lsb):
        s, carry = full_adder(builder, x, y, carry)
        out.append(s)
    out.append(carry)
    # bits at or above the bound's length are zero in every model
    top = ub.bit_length()
    out = [lit if k < top else builder.false for k, lit in enumerate(out)]
    return BitVec(FixedPointFormat(a.fmt.n + 1, a.fmt.m), reversed(out), ub)


def encode_sum(builder: CnfBuilder, vecs: Sequence[BitVec]) -> BitVec:
    """Balanced adder tree; the empty sum is the constant 0."""
    vecs = list(vecs)
    if not vecs:
        return const_bitvec(builder, 0)
    while len(vecs) > 1:
        nxt = [encode_add(builder, vecs[k], vecs[k + 1]) for k in range(0, len(vecs) - 1, 2)]
        if len(vecs) % 2:
            nxt.append(vecs[-1])
        vecs = nxt
    return vecs[0]


def encode_sub(builder: CnfBuilder, a: BitVec, b: BitVec) -> BitVec:
    """``a - b`` with the borrow-out forced false, which also asserts ``a >= b``."""
    a, b = align(builder, a, b)
    borrow = builder.false
    out = []
    for x, y in zip(a.lsb, b.lsb):
        out.append(_xor3(builder, x, y, borrow))
        borrow = _maj(builder, -x, y, borrow)
    builder.add_folded((-borrow,))
    return BitVec(a.fmt, reversed(out), a.ub)


def _partial_sum(builder: CnfBuilder, rows: list[tuple[int, list[Literal]]], fmt: FixedPointFormat,
                 ub: int) -> BitVec:
    """Add shifted raw rows (shift, lsb-first bits) and express the result in ``fmt``."""
    vecs = []
    for shift, lsb in rows:
        bits = [builder.false] * shift + lsb
        w = len(bits)
        vecs.append(BitVec(FixedPointFormat(w, 0), reversed(bits), _row_ub(builder, bits)))
    total = encode_sum(builder, vecs) if vecs else const_bitvec(builder, 0)
    lsb = total.lsb[: fmt.width]
    for lit in total.lsb[fmt.width:]:
        if not builder.is_false(lit):
            raise AssertionError("product exceeded its exact width")
    lsb += [builder.false] * (fmt.width - len(lsb))
    return BitVec(fmt, reversed(lsb), ub)


def _row_ub(builder: CnfBuilder, lsb: list[Literal]) -> int:
    return sum(1 << k for k, lit in enumerate(lsb) if not builder.is_false(lit))


def encode_mul(builder: CnfBuilder, a: BitVec, b: BitVec) -> BitVec:
    """Shift-and-add product in format ``(n_a + n_b, m_a + m_b)``.

    Partial products for constant-false bits of either operand vanish, so a
    constant multiplier costs one shifted copy per set bit.
    """
    fmt = FixedPointFormat(a.fmt.n + b.fmt.n, a.fmt.m + b.fmt.m)
    # put the operand with fewer live bits in the multiplier role
    live = lambda v: sum(not builder.is_const(l) for l in v.bits)  # noqa: E731
    if live(b) > live(a):
        a, b = b, a
    rows = []
    for j, bj in enumerate(b.lsb):
        if builder.is_false(bj):
            continue
        rows.append((j, [_and(builder, ai, bj) for ai in a.lsb]))
    return _partial_sum(builder, rows, fmt, a.ub * b.ub)


def encode_square(builder: CnfBuilder, a: BitVec) -> BitVec:
    """``a * a`` using ``p_i * p_i = p_i`` and doubling symmetric cross terms."""
    fmt = FixedPointFormat(2 * a.fmt.n, 2 * a.fmt.m)
    lsb = a.lsb
    rows = []
    for i, ai in enumerate(lsb):
        if builder.is_false(ai):
            continue
        # p_i * p_j for j > i appears twice, i.e. once at weight 2**(i + j + 1)
        cross = [_and(builder, ai, lsb[j]) for j in range(i + 1, len(lsb))]
        # row layout relative to 2**(2i): bit 0 is p_i, bits (j - i + 1) hold cross terms
        bits = [ai, builder.false] + cross
        rows.append((2 * i, bits))
    return _partial_sum(builder, rows, fmt, a.ub * a.ub)


def encode_div(builder: CnfBuilder, a: BitVec, b: BitVec) -> BitVec:
    raise NotImplementedError("division circuits are not supported")


def mux_const(builder: CnfBuilder, value, lit: Literal, m: int = 0) -> BitVec:
    """``value * lit`` for a constant ``value`` and a Boolean literal."""
    c = const_bitvec(builder, value, m=m)
    bits = [_and(builder, x, lit) for x in c.bits]
    ub = c.ub if not builder.is_false(lit) else 0
    return BitVec(c.fmt, bits, ub)


def encode_eq(builder: CnfBuilder, a: BitVec, b: BitVec) -> None:
    a, b = align(builder, a, b)
    for x, y in zip(a.bits, b.bits):
        builder.add_folded((-x, y))
        builder.add_folded((x, -y))


# ---------------------------------------------------------------------------
# comparators


def _orient(op: str, x: BitVec, y: BitVec) -> tuple[BitVec, BitVec, bool]:
    """Rewrite ``op`` as ``lhs > rhs`` (strict) or ``lhs >= rhs``."""
    if op not in OPS:
        raise ValueError(f"unknown comparison {op!r}")
    if op in ("<", "<="):
        x, y = y, x
    return x, y, op.endswith("=")


def encode_cmp_binary(builder: CnfBuilder, x: BitVec, y: BitVec, op: str = ">") -> None:
    """Assert ``x op y`` with prefix-equality (E) and first-difference (T) auxiliaries.

    Once the first differing bit is known, ``not E`` propagates down the chain
    and clears every lower T and E, so no lower clause stays open.
    """
    x, y, nonstrict = _orient(op, x, y)
    x, y = align(builder, x, y)
    add = builder.add_folded
    xs, ys = x.bits, y.bits
    w = len(xs)
    T = builder.fresh_vars(w)
    E = builder.fresh_vars(w)
    x1, y1 = xs[0], ys[0]
    add((-x1, y1, T[0]))
    add((-x1, -y1, E[0]))
    add((x1, y1, E[0]))
    add((x1, -y1, -E[0]))
    add((x1, -y1, -T[0]))
    add((-T[0], -E[0]))
    for i in range(1, w):
        xi, yi, ep = xs[i], ys[i], E[i - 1]
        add((ep, -E[i]))
        add((ep, -T[i]))
        add((-ep, -xi, yi, T[i]))
        add((-ep, -xi, -yi, E[i]))
        add((-ep, xi, yi, E[i]))
        add((-ep, xi, -yi, -E[i]))
        add((-ep, xi, -yi, -T[i]))
        add((-ep, -T[i], -E[i]))
    add(tuple(T) + ((E[-1],) if nonstrict else ()))


def _tseitin_gt(builder: CnfBuilder, xs: Sequence[Literal], ys: Sequence[Literal]) -> Literal:
    """Tseitin-encode the first-difference formula for ``x > y``; return its top literal.

    Gates are two-input, allocated breadth first from the top, so for two bits
    the variables come out as u1 = u2 | u3, u2 = x1 & ~y1, u3 = u4 & u5,
    u4 = u6 | u7, u5 = x2 & ~y2, u6 = x1 & y1, u7 = ~x1 & ~y1.
    """
    w = len(xs)

    # formula tree nodes: ("or"|"and", left, right) or ("lit", literal)
    def eq(j):
        return ("or", ("and", ("lit", xs[j]), ("lit", ys[j])),
                ("and", ("lit", -xs[j]), ("lit", -ys[j])))

    def diff(i):
        return ("and", ("lit", xs[i]), ("lit", -ys[i]))

    def term(i):
        if i == 0:
            return diff(0)
        eqs = eq(0)
        for j in range(1, i):
            eqs = ("and", eqs, eq(j))
        return ("and", eqs, diff(i))

    tree = term(w - 1)
    for i in range(w - 2, -1, -1):
        tree = ("or", term(i), tree)

    if tree[0] == "lit":
        return tree[1]
    top = builder.fresh_var()
    queue = [(tree, top)]
    while queue:
        nxt = []
        for (kind, left, right), out in queue:
            ins = []
            for child in (left, right):
                if child[0] == "lit":
                    ins.append(child[1])
                else:
                    v = builder.fresh_var()
                    ins.append(v)
                    nxt.append((child, v))
            a, c = ins
            add = builder.add_folded
            if kind == "or":
                add((-out, a, c))
                add((-a, out))
                add((-c, out))
            else:
                add((-out, a))
                add((-out, c))
                add((out, -a, -c))
        queue = nxt
    return top


def encode_cmp_tseitin(builder: CnfBuilder, x: BitVec, y: BitVec, op: str = ">") -> None:
    """Assert ``x op y`` via plain Tseitin transformation of the comparison formula.

    Non-strict operators assert the negation of the reversed strict one.
    """
    x, y, nonstrict = _orient(op, x, y)
    x, y = align(builder, x, y)
    if nonstrict:
        builder.add_folded((-_tseitin_gt(builder, y.bits, x.bits),))
    else:
        builder.add_folded((_tseitin_gt(builder, x.bits, y.bits),))


def encode_cmp(builder: CnfBuilder, x: BitVec, y: BitVec, op: str, method: str = "binary") -> None:
    if method == "binary":
        encode_cmp_binary(builder, x, y, op)
    elif method == "tseitin":
        encode_cmp_tseitin(builder, x, y, op)
    else:
        raise ValueError(f"unknown comparator {method!r}")

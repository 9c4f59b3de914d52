"""Command-line front end and the polynomial text format.

The text format is the one of Giac scripts: ``+ - * ^``, integer literals
(``a/b`` for rational coefficients), declared variables and parentheses.
A system is a comma separated list, optionally wrapped as ``name := [...];``;
without commas every non-empty line is one generator.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from fractions import Fraction
from typing import Sequence

from .orchestrator import CheckpointError, SessionConfig, SessionError, parse_schedule, run_session
from .polyring import QQ, PolyRing, Polynomial, format_poly
from .reconstructor import ReinjectPolicy

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


class ParseError(ValueError):
    pass


def generate_cyclic(n: int, variables: Sequence[str] | None = None) -> list[Polynomial]:
    """The cyclic-n system: ``n-1`` cyclic sums of consecutive products, then ``x_0...x_{n-1} - 1``."""
    if n < 2:
        raise ValueError("cyclic-n needs n >= 2")
    variables = list(variables) if variables is not None else [f"x{i}" for i in range(n)]
    if len(variables) != n:
        raise ValueError(f"cyclic-{n} needs {n} variables")
    ring = PolyRing(variables, QQ)
    system = []
    for k in range(1, n):
        terms: dict = {}
        for i in range(n):
            exps = [0] * n
            for j in range(k):
                exps[(i + j) % n] += 1
            terms[tuple(exps)] = terms.get(tuple(exps), 0) + 1
        system.append(ring.from_dict(terms))
    system.append(ring.from_dict({(1,) * n: 1, (0,) * n: -1}))
    return system


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*^/()])|(\S))")


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, op, bad = m.groups()
        if bad is not None:
            if bad == "." or (bad == "e" and out and out[-1][0] == "num"):
                raise ParseError("non-integer coefficient")
            raise ParseError(f"unexpected character {bad!r}")
        if op == "**":
            raise ParseError("use '^' for powers ('**' is not accepted)")
        if num is not None:
            if m.end() < len(text) and text[m.end()] == ".":
                raise ParseError("non-integer coefficient")
            out.append(("num", int(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("op", op))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens, ring: PolyRing):
        self.toks = tokens
        self.pos = 0
        self.ring = ring
        self.index = {v: i for i, v in enumerate(ring.variables)}

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}")

    def expr(self) -> Polynomial:
        kind, val = self.peek()
        sign = 1
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        acc = self.term()
        if sign < 0:
            acc = -acc
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                acc = acc + t if val == "+" else acc - t
            else:
                return acc

    def term(self) -> Polynomial:
        acc = self.factor()
        while self.peek() == ("op", "*"):
            self.take()
            acc = acc * self.factor()
        return acc

    def factor(self) -> Polynomial:
        base = self.base()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer")
            base = base ** val
        return base

    def base(self) -> Polynomial:
        kind, val = self.take()
        if kind == "num":
            if self.peek() == ("op", "/"):
                self.take()
                k2, den = self.take()
                if k2 != "num" or den == 0:
                    raise ParseError("malformed rational coefficient")
                return self.ring.constant(Fraction(val, den))
            return self.ring.constant(val)
        if kind == "name":
            if val not in self.index:
                raise ParseError(f"unknown variable {val!r}")
            return self.ring.gen(self.index[val])
        if (kind, val) == ("op", "("):
            inner = self.expr()
            self.expect_op(")")
            return inner
        if kind is None:
            raise ParseError("unexpected end of expression")
        raise ParseError(f"unexpected token {val!r}")


def parse_polynomial(text: str, ring: PolyRing) -> Polynomial:
    p = _Parser(_tokenize(text), ring)
    f = p.expr()
    if p.pos != len(p.toks):
        raise ParseError(f"unexpected token {p.peek()[1]!r}")
    return f


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _strip_wrapper(text: str) -> str:
    text = re.sub(r"//[^\n]*", "", text).strip()
    text = re.sub(r"^[A-Za-z_][A-Za-z0-9_]*\s*:=\s*", "", text)
    text = re.sub(r"[:;\s]+$", "", text)
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    return text


def infer_variables(text: str) -> list[str]:
    """Identifiers in order of first appearance."""
    seen = []
    for name in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", _strip_wrapper(text)):
        if name not in seen:
            seen.append(name)
    return seen


def parse_system(text: str, variables: Sequence[str]) -> list[Polynomial]:
    ring = PolyRing(variables, QQ)
    body = _strip_wrapper(text)
    chunks = _split_top(body) if "," in body else body.splitlines()
    system = []
    for chunk in chunks:
        if not chunk.strip():
            if "," in body:
                raise ParseError("empty generator")
            continue
        system.append(parse_polynomial(chunk, ring))
    if not system:
        raise ParseError("no generators")
    return system


def format_system(basis: Sequence[Polynomial]) -> str:
    return "".join(format_poly(f) + "\n" for f in basis)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gbmodular",
        description="Groebner basis over Q by multi-modular F4 with learning and re-injection.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", choices=["cyclic"], help="built-in benchmark family")
    src.add_argument("--input", metavar="PATH", help="file with the generators ('-' for stdin)")
    ap.add_argument("--n", type=int, help="size for --family")
    ap.add_argument("--vars", help="comma separated variables, largest first")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--simult-primes", type=_floats, default=[1.0], metavar="N1[,P1,N2,P2,N3]")
    re_grp = ap.add_mutually_exclusive_group()
    re_grp.add_argument("--reinject", type=_floats, metavar="RATIO,SPEED_RATIO")
    re_grp.add_argument("--reinject-stop", type=int, metavar="N",
                        help="stop once N elements are reconstructed (partial output)")
    ap.add_argument("--max-pairs", type=int, default=0)
    ap.add_argument("--proba-epsilon", type=float, default=1e-7)
    ap.add_argument("--archive", metavar="PATH", help="write reconstructed generators here")
    ap.add_argument("--resume", metavar="PATH", help="re-inject generators from an archive")
    ap.add_argument("--output", metavar="PATH", help="basis output (default stdout)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def config_from_args(args, ap: argparse.ArgumentParser) -> SessionConfig:
    try:
        schedule = parse_schedule(*args.simult_primes)
        if args.reinject is not None:
            if len(args.reinject) != 2:
                ap.error("--reinject takes RATIO,SPEED_RATIO")
            policy = ReinjectPolicy.from_arg(*args.reinject)
        elif args.reinject_stop is not None:
            policy = ReinjectPolicy(early_stop=args.reinject_stop)
        else:
            policy = ReinjectPolicy()
        return SessionConfig(threads=args.threads, schedule=schedule, reinject=policy,
                             max_pairs=args.max_pairs, proba_epsilon=args.proba_epsilon,
                             archive=args.archive, resume=args.resume)
    except ValueError as exc:
        ap.error(str(exc))


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    config = config_from_args(args, ap)
    logging.basicConfig(stream=sys.stderr, format="%(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    variables = args.vars.split(",") if args.vars else None
    try:
        if args.family:
            if args.n is None:
                ap.error("--family needs --n")
            system = generate_cyclic(args.n, variables)
        else:
            text = sys.stdin.read() if args.input == "-" else open(args.input).read()
            system = parse_system(text, variables or infer_variables(text))
    except (OSError, ValueError) as exc:
        print(f"gbmodular: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_session(system, config)
    except (SessionError, CheckpointError, OSError) as exc:
        print(f"gbmodular: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = format_system(result.basis)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    print(f"{len(result.basis)} of {result.basis_size} elements, "
          f"{result.primes_merged} primes merged, {result.primes_consumed} drawn",
          file=sys.stderr)
    return EXIT_OK if result.complete else EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())

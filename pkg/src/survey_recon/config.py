"""Run configuration: a flat ``key = value`` grammar grouped in ``[blocks]``.

Values are Python-like literals evaluated by a restricted AST walker: ints,
exact decimals (``0.69`` becomes 69/100), ``num/den`` rationals, strings,
booleans, lists and tuples. Nothing is executed.
"""
from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import DegreeDistribution, as_rational, format_rational, potts_channel
from .skeleton import (
    Skeleton,
    load_skeleton,
    make_basis_skeleton,
    make_grid_skeleton,
    make_scaled_grid_skeleton,
    make_star_skeleton,
)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# -- literal evaluation -----------------------------------------------------------


def _eval(node: ast.AST, source: str):
    if isinstance(node, ast.Constant):
        v = node.value
        if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
            return v
        if isinstance(v, float):
            # re-read the literal text so no binary float ever appears
            return Fraction(ast.get_source_segment(source, node))
        raise ValueError(f"unsupported literal {v!r}")
    if isinstance(node, ast.Name) and node.id in ("true", "false", "True", "False"):
        return node.id in ("true", "True")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, source)
        if not isinstance(v, (int, Fraction)) or isinstance(v, bool):
            raise ValueError("sign applied to a non-number")
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        a, b = _eval(node.left, source), _eval(node.right, source)
        if not all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in (a, b)):
            raise ValueError("'/' needs numbers on both sides")
        if b == 0:
            raise ValueError("division by zero")
        return Fraction(a) / Fraction(b)
    if isinstance(node, (ast.List, ast.Tuple)):
        return tuple(_eval(e, source) for e in node.elts)
    raise ValueError(f"unsupported expression {ast.get_source_segment(source, node)!r}")


def parse_value(text: str):
    source = text.strip()
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse value {source!r}") from exc
    return _eval(tree.body, source)


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, tuple):
        return "[" + ", ".join(_render_item(v) for v in value) + "]"
    raise TypeError(f"cannot render {value!r}")


def _render_item(value) -> str:
    # inner tuples print as (a, b) so degree atoms read naturally
    if isinstance(value, tuple):
        return "(" + ", ".join(_render_item(v) for v in value) + ")"
    return _render(value)


# -- blocks -----------------------------------------------------------------------


def _rational(v, what: str) -> Fraction:
    try:
        return as_rational(v)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{what} must be a rational number") from exc


def _int(v, what: str, minimum: int | None = None) -> int:
    if isinstance(v, Fraction) and v.denominator == 1:
        v = int(v)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValueError(f"{what} must be an integer")
    if minimum is not None and v < minimum:
        raise ValueError(f"{what} must be >= {minimum}")
    return v


def _degree_atoms(v, what: str = "degree") -> tuple[tuple[int, Fraction], ...]:
    if isinstance(v, int) and not isinstance(v, bool):
        return ((v, Fraction(1)),)
    if not isinstance(v, tuple) or not v:
        raise ValueError(f"{what} must be an integer or a list of (degree, probability)")
    out = []
    for atom in v:
        if not isinstance(atom, tuple) or len(atom) != 2:
            raise ValueError(f"{what} atoms are (degree, probability) pairs")
        out.append((_int(atom[0], "degree", 1), _rational(atom[1], "degree probability")))
    return tuple(out)


@dataclass(frozen=True)
class ModelBlock:
    q: int = 3
    lam: Fraction = Fraction(0)
    degree: tuple[tuple[int, Fraction], ...] = ((2, Fraction(1)),)
    symmetric: bool = True
    degree_tail: bool = False

    KEYS = {"q": "q", "lambda": "lam", "degree": "degree", "symmetric": "symmetric", "degree_tail": "degree_tail"}

    def degree_distribution(self) -> DegreeDistribution:
        atoms = self.degree
        tail = 1 - sum(p for _, p in atoms) if self.degree_tail else Fraction(0)
        return DegreeDistribution(atoms, tail)


@dataclass(frozen=True)
class SkeletonEntry:
    start: int
    kind: str
    args: tuple = ()

    KINDS = {"grid": 1, "star": 1, "zoom": 2, "basis": 0, "file": 1, "union": 1}

    def build(self, q: int, symmetric: bool, base_dir: Path | None = None) -> Skeleton:
        skel = _build_part(self.kind, self.args, q, symmetric, base_dir)
        if skel.q != q:
            raise ValueError(f"skeleton {self.kind} has q={skel.q}, model has q={q}")
        if not skel.covers_simplex:
            raise ValueError(f"skeleton {skel.name} must contain every basis vector")
        if symmetric and not skel.symmetric:
            skel = Skeleton(skel.base_set, symmetric=True, name=skel.name)
        if not symmetric and skel.symmetric:
            skel = Skeleton(skel.base_set, symmetric=False, name=skel.name)
        return skel


def _build_part(kind: str, args: tuple, q: int, symmetric: bool, base_dir: Path | None) -> Skeleton:
    if kind == "grid":
        return make_grid_skeleton(q, args[0])
    if kind == "star":
        return make_star_skeleton(q, args[0])
    if kind == "zoom":
        return make_scaled_grid_skeleton(q, args[0], args[1])
    if kind == "basis":
        return make_basis_skeleton(q)
    if kind == "union":
        parts = [_build_part(p[0], p[1:], q, symmetric, base_dir) for p in args[0]]
        skel = parts[0]
        for other in parts[1:]:
            skel = skel.union(other)
        return skel
    path = Path(args[0])
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return load_skeleton(path, symmetric=symmetric)


def _skeleton_entries(v) -> tuple[SkeletonEntry, ...]:
    if not isinstance(v, tuple):
        raise ValueError("skeletons must be a list of (from_iteration, kind, ...) tuples")
    out = []
    for item in v:
        if not isinstance(item, tuple) or len(item) < 2 or not isinstance(item[1], str):
            raise ValueError("skeleton entry must look like (from_iteration, \"kind\", args...)")
        start = _int(item[0], "skeleton start iteration", 1)
        out.append(SkeletonEntry(start, item[1], _skeleton_args(item[1], item[2:])))
    return tuple(out)


def _skeleton_args(kind, args) -> tuple:
    if kind not in SkeletonEntry.KINDS:
        raise ValueError(f"unknown skeleton kind {kind!r}; use one of {sorted(SkeletonEntry.KINDS)}")
    if len(args) != SkeletonEntry.KINDS[kind]:
        raise ValueError(f"skeleton kind {kind!r} takes {SkeletonEntry.KINDS[kind]} argument(s)")
    if kind == "grid":
        return (_int(args[0], "grid resolution", 1),)
    if kind == "zoom":
        return (_int(args[0], "zoom resolution", 1), _rational(args[1], "zoom scale"))
    if kind == "star":
        radii = args[0] if isinstance(args[0], tuple) else (args[0],)
        return (tuple(_rational(r, "star radius") for r in radii),)
    if kind == "file" and not isinstance(args[0], str):
        raise ValueError("file skeleton needs a path string")
    if kind == "union":
        parts = args[0]
        if not isinstance(parts, tuple) or not parts or not all(isinstance(p, tuple) and p and isinstance(p[0], str) for p in parts):
            raise ValueError("union skeleton needs a list of (\"kind\", args...) parts")
        if any(p[0] == "union" for p in parts):
            raise ValueError("union parts cannot be unions")
        return (tuple((p[0], *_skeleton_args(p[0], p[1:])) for p in parts),)
    return tuple(args)


@dataclass(frozen=True)
class ScheduleBlock:
    iterations: int = 0
    skeletons: tuple[SkeletonEntry, ...] = ()
    rounding: int | None = None
    support_cap: int | None = None
    tuple_budget: int | None = None

    KEYS = {
        "iterations": "iterations",
        "skeletons": "skeletons",
        "rounding": "rounding",
        "support_cap": "support_cap",
        "tuple_budget": "tuple_budget",
    }


@dataclass(frozen=True)
class CertifyBlock:
    m: int = 16
    x_hat: Fraction | None = None
    stop_early: bool = True

    KEYS = {"m": "m", "x_hat": "x_hat", "stop_early": "stop_early"}


@dataclass(frozen=True)
class OracleBlock:
    depth: int = 3
    budget: int | None = None

    KEYS = {"depth": "depth", "budget": "budget"}


@dataclass(frozen=True)
class TableBlock:
    q: int = 3
    rows: tuple[tuple[tuple[int, Fraction], ...], ...] = ()
    certified: tuple[tuple[Fraction, Fraction], ...] = ()

    KEYS = {"q": "q", "rows": "rows", "certified": "certified"}


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"

    KEYS = {"dir": "dir"}


BLOCKS = {
    "model": ModelBlock,
    "schedule": ScheduleBlock,
    "certify": CertifyBlock,
    "oracle": OracleBlock,
    "table": TableBlock,
    "output": OutputBlock,
}


def _coerce(block: str, attr: str, value):
    if block == "model":
        if attr == "q":
            return _int(value, "q", 2)
        if attr == "lam":
            return _rational(value, "lambda")
        if attr == "degree":
            return _degree_atoms(value)
        if not isinstance(value, bool):
            raise ValueError(f"{attr} must be true or false")
        return value
    if block == "schedule":
        if attr == "skeletons":
            return _skeleton_entries(value)
        return _int(value, attr, 0 if attr == "iterations" else 1)
    if block == "certify":
        if attr == "m":
            return _int(value, "m", 1)
        if attr == "x_hat":
            return _rational(value, "x_hat")
        if not isinstance(value, bool):
            raise ValueError("stop_early must be true or false")
        return value
    if block == "oracle":
        return _int(value, attr, 1)
    if block == "table":
        if attr == "q":
            return _int(value, "q", 2)
        if not isinstance(value, tuple):
            raise ValueError(f"{attr} must be a list")
        if attr == "rows":
            return tuple(_degree_atoms(r, "table row") for r in value)
        out = []
        for pair in value:
            if not isinstance(pair, tuple) or len(pair) != 2:
                raise ValueError("certified entries are (lambda, x_hat) pairs")
            out.append((_rational(pair[0], "lambda"), _rational(pair[1], "x_hat")))
        return tuple(out)
    if not isinstance(value, str):
        raise ValueError("output dir must be a string")
    return value


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    schedule: ScheduleBlock = field(default_factory=ScheduleBlock)
    certify: CertifyBlock = field(default_factory=CertifyBlock)
    oracle: OracleBlock = field(default_factory=OracleBlock)
    table: TableBlock = field(default_factory=TableBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    present: frozenset = frozenset()  # blocks written in the source text

    def to_text(self) -> str:
        parts = []
        for name, cls in BLOCKS.items():
            if name not in self.present:
                continue
            block = getattr(self, name)
            lines = [f"[{name}]"]
            for key, attr in cls.KEYS.items():
                value = getattr(block, attr)
                if value is None or value == ():
                    continue
                if name == "schedule" and attr == "skeletons":
                    value = tuple((e.start, e.kind, *e.args) for e in value)
                lines.append(f"{key} = {_render(value)}")
            parts.append("\n".join(lines))
        return "\n\n".join(parts) + "\n"


def parse_config(text: str, *, validate: bool = True) -> RunConfig:
    values: dict[str, dict[str, object]] = {}
    lines_of: dict[tuple[str, str], int] = {}
    block = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed block header {line!r}", lineno)
            block = line[1:-1].strip()
            if block not in BLOCKS:
                raise ConfigError(f"unknown block [{block}]", lineno)
            if block in values:
                raise ConfigError(f"block [{block}] appears twice", lineno)
            values[block] = {}
            continue
        if block is None:
            raise ConfigError("key outside any [block]", lineno)
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", lineno)
        cls = BLOCKS[block]
        if key not in cls.KEYS:
            raise ConfigError(f"unknown key {key!r} in [{block}]", lineno)
        if key in values[block]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            value = _coerce(block, cls.KEYS[key], parse_value(rest))
        except ValueError as exc:
            raise ConfigError(str(exc), lineno) from exc
        values[block][cls.KEYS[key]] = value
        lines_of[(block, cls.KEYS[key])] = lineno
    built = {name: BLOCKS[name](**kw) for name, kw in values.items()}
    config = RunConfig(**built, present=frozenset(values))
    if validate:
        validate_config(config, lines_of)
    return config


def validate_config(config: RunConfig, lines_of: dict | None = None) -> None:
    """Check every module precondition up front; raises ConfigError naming the problem."""
    lines_of = lines_of or {}
    m = config.model

    def fail(block, attr, msg):
        raise ConfigError(msg, lines_of.get((block, attr)))

    try:
        m.degree_distribution()
    except ValueError as exc:
        fail("model", "degree", f"degree: {exc}")
    try:
        potts_channel(m.q, m.lam)
    except ValueError as exc:
        fail("model", "lam", str(exc))
    if m.degree_tail and not m.symmetric:
        fail("model", "degree_tail", "degree tail mass needs a symmetric model")
    s = config.schedule
    if s.rounding is not None and not m.symmetric:
        fail("schedule", "rounding", "rounding needs a symmetric model")
    if s.support_cap is not None:
        if not s.skeletons:
            fail("schedule", "support_cap", "support_cap needs a skeleton plan")
        if s.support_cap < m.q:
            fail("schedule", "support_cap", "support_cap must be at least q")
    if s.skeletons and min(e.start for e in s.skeletons) > 1:
        fail("schedule", "skeletons", "skeleton plan must cover iteration 1")
    for e in s.skeletons:
        if e.kind == "file":
            continue  # resolved relative to the config file at build time
        try:
            e.build(m.q, m.symmetric)
        except ValueError as exc:
            fail("schedule", "skeletons", f"skeleton {e.kind}: {exc}")
    c = config.certify
    if c.x_hat is not None and not 0 <= c.x_hat <= 1 - Fraction(1, m.q):
        fail("certify", "x_hat", "x_hat must lie in [0, 1 - 1/q]")
    t = config.table
    if t.certified and len(t.certified) != len(t.rows):
        fail("table", "certified", "need one (lambda, x_hat) pair per table row")
    for row in t.rows:
        try:
            DegreeDistribution(row)
        except ValueError as exc:
            fail("table", "rows", f"table row: {exc}")


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path) -> tuple[RunConfig, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text), text

"""Declarative experiment files.

Sectioned key-value text describing one emergence experiment: a grid, named
operators, named theories built over them, exactly one task, and run
parameters.  Parsing is strict — unknown sections or keys, duplicate
definitions, and dangling references all fail with located errors.

Schema sketch (see the README for the full key tables)::

    [grid]
    dim = 1
    sizes = 64
    spacing = 0.1

    [operator.A]
    kind = stencil
    terms = 1 @ 0; -1 @ 2

    [theory.target]
    kind = scaling
    psi0 = A

    [theory.ambient]
    kind = monomial
    coeff = 2*delta
    psi = A
    power = 1

    [emergence]
    target = target
    ambient = ambient
    strategy = combinator

    [run]
    samples = 100
    seed = 0
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass

from .background import Grid, make_grid
from .operators import (
    Operator,
    diff_operator,
    identity_operator,
    stencil,
    symbol_operator,
)
from .parameters import KINDS, NONZERO_COMPLEX, ParamSpace
from .theories import (
    CoeffFn,
    Poly,
    PolyTerm,
    Theory,
    compose_theories,
    monomial_theory,
    polynomial_theory,
    scale_theory,
    scaling_theory,
    sum_theories,
    with_homomorphy,
)

__all__ = [
    "ConfigError",
    "RunParams",
    "EmergenceTask",
    "ExperimentConfig",
    "parse_config",
    "load_config",
]

STRATEGIES = ("combinator", "oracle", "both")


class ConfigError(ValueError):
    """A malformed or inconsistent experiment file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RunParams:
    samples: int = 100
    seed: int = 0
    tol: float | None = None


@dataclass(frozen=True)
class EmergenceTask:
    target: str
    ambient: str
    strategy: str = "combinator"


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid
    operators: dict[str, Operator]
    theories: dict[str, Theory]
    task: EmergenceTask
    run: RunParams
    digest: str = ""


_SECTION_RE = re.compile(r"^\s*\[(?P<name>[^]]+)\]")


def _scan_duplicate_sections(text: str) -> None:
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if not m:
            continue
        name = m.group("name").strip()
        if name in seen:
            raise ConfigError(
                f"duplicate section [{name}] (first defined at line {seen[name]}, "
                f"defined again at line {lineno})",
                line=lineno,
            )
        seen[name] = lineno


def _parse_scalar(text: str, where: str) -> complex:
    try:
        return complex(text.strip().replace(" ", ""))
    except ValueError as e:
        raise ConfigError(f"{where}: cannot parse number {text.strip()!r}") from e


def _parse_multiindex(text: str, dim: int, where: str) -> tuple[int, ...]:
    inner = text.strip()
    if inner.startswith("(") and inner.endswith(")"):
        inner = inner[1:-1]
    parts = [p for p in (s.strip() for s in inner.split(",")) if p]
    try:
        alpha = tuple(int(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"{where}: bad multi-index {text.strip()!r}") from e
    if len(alpha) != dim:
        raise ConfigError(
            f"{where}: multi-index {text.strip()!r} has {len(alpha)} entries "
            f"for a {dim}-d grid"
        )
    if any(a < 0 for a in alpha):
        raise ConfigError(f"{where}: negative exponent in {text.strip()!r}")
    return alpha


def _parse_coeff(text: str, where: str) -> CoeffFn:
    """``delta`` or ``<number>*delta`` — linear coefficients only."""
    t = text.strip()
    if t == "delta":
        return CoeffFn.linear(1.0)
    if t.endswith("*delta"):
        c = _parse_scalar(t[: -len("*delta")], where)
        if c == 0:
            raise ConfigError(f"{where}: coefficient constant must be nonzero")
        return CoeffFn.linear(c)
    raise ConfigError(
        f"{where}: cannot parse coefficient {t!r} (expected 'delta' or 'c*delta')"
    )


def _split_terms(value: str) -> list[str]:
    return [t for t in (s.strip() for s in value.split(";")) if t]


class _Section:
    """One parsed section with strict key access."""

    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self.items = dict(items)
        self.read: set[str] = set()

    def get(self, key: str, default: str | None = None) -> str | None:
        self.read.add(key)
        return self.items.get(key, default)

    def require(self, key: str) -> str:
        self.read.add(key)
        if key not in self.items:
            raise ConfigError(f"section [{self.name}]: missing key {key!r}")
        return self.items[key]

    def finish(self) -> None:
        unknown = set(self.items) - self.read
        if unknown:
            raise ConfigError(
                f"section [{self.name}]: unknown keys {sorted(unknown)}"
            )


def _get_int(sec: _Section, key: str, default: int) -> int:
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"section [{sec.name}]: {key} = {raw!r} is not an integer") from e


def _get_float(sec: _Section, key: str, default: float | None) -> float | None:
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"section [{sec.name}]: {key} = {raw!r} is not a number") from e


def _build_grid(sec: _Section) -> Grid:
    dim = _get_int(sec, "dim", 1)
    sizes_raw = sec.require("sizes")
    try:
        sizes = tuple(int(s) for s in sizes_raw.split(","))
    except ValueError as e:
        raise ConfigError(f"section [grid]: bad sizes {sizes_raw!r}") from e
    spacing_raw = sec.get("spacing", "1.0")
    try:
        spacing = tuple(float(s) for s in spacing_raw.split(","))
    except ValueError as e:
        raise ConfigError(f"section [grid]: bad spacing {spacing_raw!r}") from e
    if len(spacing) == 1 and dim > 1:
        spacing = spacing * dim
    sec.finish()
    try:
        return make_grid(dim, sizes, spacing)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"section [grid]: {e}") from e


def _build_operator(sec: _Section, grid: Grid) -> Operator:
    kind = sec.require("kind")
    where = f"section [{sec.name}]"
    try:
        if kind == "identity":
            op = identity_operator(grid)
        elif kind == "symbol":
            raw = sec.require("symbol")
            values = [_parse_scalar(v, where) for v in raw.split(",")]
            op = symbol_operator(grid, values)
        elif kind == "stencil":
            raw = sec.require("terms")
            terms = []
            for item in _split_terms(raw):
                if "@" not in item:
                    raise ConfigError(
                        f"{where}: stencil term {item!r} is not 'coeff @ orders'"
                    )
                coeff_txt, _, alpha_txt = item.partition("@")
                coeff = _parse_scalar(coeff_txt, where)
                alpha = _parse_multiindex(alpha_txt, grid.dim, where)
                terms.append((alpha, coeff))
            scheme = sec.get("scheme", "central")
            op = diff_operator(grid, stencil(*terms), scheme)
        else:
            raise ConfigError(f"{where}: unknown operator kind {kind!r}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{where}: {e}") from e
    sec.finish()
    return op


def _param_kind(sec: _Section, key: str = "param-kind") -> str:
    raw = sec.get(key, NONZERO_COMPLEX)
    if raw not in KINDS:
        raise ConfigError(
            f"section [{sec.name}]: {key} = {raw!r} is not one of {KINDS}"
        )
    return raw


def _op_ref(sec: _Section, key: str, operators: dict[str, Operator]) -> Operator:
    name = sec.require(key)
    if name not in operators:
        raise ConfigError(
            f"section [{sec.name}]: undefined operator {name!r}"
        )
    return operators[name]


def _build_theory(
    name: str,
    sections: dict[str, _Section],
    operators: dict[str, Operator],
    grid: Grid,
    memo: dict[str, Theory],
    building: set[str],
) -> Theory:
    if name in memo:
        return memo[name]
    key = f"theory.{name}"
    if key not in sections:
        raise ConfigError(f"undefined theory {name!r}")
    if name in building:
        raise ConfigError(f"theory {name!r} is defined in terms of itself")
    building.add(name)
    sec = sections[key]
    kind = sec.require("kind")
    where = f"section [{sec.name}]"

    def subtheory(ref_key: str) -> Theory:
        ref = sec.require(ref_key)
        return _build_theory(ref, sections, operators, grid, memo, building)

    try:
        if kind == "scaling":
            psi0 = _op_ref(sec, "psi0", operators)
            space = ParamSpace(_param_kind(sec), 1)
            t = scaling_theory(space, psi0, name=name)
        elif kind == "monomial":
            coeff = _parse_coeff(sec.require("coeff"), where)
            psi = _op_ref(sec, "psi", operators)
            power = _get_int(sec, "power", 1)
            space = ParamSpace(_param_kind(sec), 1)
            t = monomial_theory(coeff, psi, power, space, name=name)
        elif kind == "polynomial":
            var_names = [v.strip() for v in sec.require("variables").split(",")]
            variables = []
            for v in var_names:
                if v not in operators:
                    raise ConfigError(f"{where}: undefined operator {v!r}")
                variables.append(operators[v])
            slot_kind = _param_kind(sec, "slot-kind")
            slot_degree = _get_int(sec, "slot-degree", 1)
            slot_space = ParamSpace(slot_kind, slot_degree)
            terms = []
            for i, item in enumerate(_split_terms(sec.require("terms"))):
                if "@" not in item:
                    raise ConfigError(
                        f"{where}: term {item!r} is not 'coeff @ exponents [-> slot]'"
                    )
                coeff_txt, _, rest = item.partition("@")
                slot = i
                if "->" in rest:
                    rest, _, slot_txt = rest.partition("->")
                    try:
                        slot = int(slot_txt)
                    except ValueError as e:
                        raise ConfigError(f"{where}: bad slot {slot_txt.strip()!r}") from e
                coeff = _parse_coeff(coeff_txt, where)
                alpha = _parse_multiindex(rest, len(variables), where)
                terms.append(PolyTerm(alpha, coeff, slot))
            poly = Poly(tuple(variables), tuple(terms), slot_space)
            t = polynomial_theory(poly, name=name)
        elif kind == "sum":
            t = sum_theories(subtheory("left"), subtheory("right"))
        elif kind == "compose":
            t = compose_theories(subtheory("left"), subtheory("right"))
        elif kind == "scaled":
            base = subtheory("base")
            factor = _parse_scalar(sec.require("factor"), where)
            t = scale_theory(base, factor, name=name)
        else:
            raise ConfigError(f"{where}: unknown theory kind {kind!r}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{where}: {e}") from e
    sec.finish()
    building.discard(name)
    if t.additive is None and t.multiplicative is None:
        t = with_homomorphy(t)
    memo[name] = t
    return t


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment file; all names are resolved eagerly."""
    _scan_duplicate_sections(text)
    cp = configparser.ConfigParser(
        strict=True,
        interpolation=None,
        delimiters=("=",),
        inline_comment_prefixes=(";", "#"),
    )
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key-value pair before any section header", line=e.lineno) from e
    except configparser.ParsingError as e:
        errs = getattr(e, "errors", None)
        line = errs[0][0] if errs else None
        raise ConfigError(f"parse error: {e}", line=line) from e
    except configparser.DuplicateOptionError as e:
        raise ConfigError(str(e), line=getattr(e, "lineno", None)) from e
    except configparser.Error as e:
        raise ConfigError(str(e)) from e

    sections = {
        name: _Section(name, dict(cp.items(name))) for name in cp.sections()
    }
    for name in sections:
        known = (
            name in ("grid", "emergence", "run")
            or name.startswith("operator.")
            or name.startswith("theory.")
        )
        if not known:
            raise ConfigError(f"unknown section [{name}]")

    if "grid" not in sections:
        raise ConfigError("missing required section [grid]")
    grid = _build_grid(sections["grid"])

    operators: dict[str, Operator] = {}
    for name, sec in sections.items():
        if name.startswith("operator."):
            op_name = name[len("operator.") :]
            if not op_name:
                raise ConfigError("empty operator name")
            operators[op_name] = _build_operator(sec, grid)

    if "emergence" not in sections:
        raise ConfigError("missing required section [emergence]")
    esec = sections["emergence"]
    target_name = esec.require("target")
    ambient_name = esec.require("ambient")
    strategy = esec.get("strategy", "combinator")
    if strategy not in STRATEGIES:
        raise ConfigError(
            f"section [emergence]: strategy {strategy!r} is not one of {STRATEGIES}"
        )
    esec.finish()

    memo: dict[str, Theory] = {}
    building: set[str] = set()
    for name in list(sections):
        if name.startswith("theory."):
            t_name = name[len("theory.") :]
            if not t_name:
                raise ConfigError("empty theory name")
            _build_theory(t_name, sections, operators, grid, memo, building)
    for ref, role in ((target_name, "target"), (ambient_name, "ambient")):
        if ref not in memo:
            raise ConfigError(
                f"section [emergence]: {role} references undefined theory {ref!r}"
            )

    if "run" in sections:
        rsec = sections["run"]
        run = RunParams(
            samples=_get_int(rsec, "samples", 100),
            seed=_get_int(rsec, "seed", 0),
            tol=_get_float(rsec, "tol", None),
        )
        if run.samples < 1:
            raise ConfigError("section [run]: samples must be >= 1")
        rsec.finish()
    else:
        run = RunParams()

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ExperimentConfig(
        grid=grid,
        operators=operators,
        theories=memo,
        task=EmergenceTask(target_name, ambient_name, strategy),
        run=run,
        digest=digest,
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())

"""Case files: one system per INI file, every value an expression string.

Sections and keys are checked against a fixed schema and every expression is
parsed before anything is computed, so a typo fails at load time.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .diffop import DiffOp, Generator
from .expr import Domain, Expr, ExprSyntaxError, evaluate, parse
from .vectorfield import Ode2, VectorField

IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
LABELLED = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_]+)$")

# operator slots by short name
SLOTS = {"dt": (1, 0), "dxx": (0, 2), "dx": (0, 1), "mult": (0, 0)}

_SECTIONS = {
    "case": {"name", "summary"},
    "params": None,
    "variables": {"t", "x", "p", "wave"},
    "domain": None,
    "phase_domain": None,
    "canonical_domain": None,
    "ode": {"rhs"},
    "generators": ("xi", "eta"),
    "noether": {"lagrangian", "expected"},
    "mechanics": {
        "hamiltonian", "momentum", "gauge", "multiplier_f", "multiplier_g", "contact",
        "generating_function", "new_hamiltonian", "linear_q", "linear_s",
        "swap_x", "swap_p", "swapped_hamiltonian",
    },
    "transforms": {"free_t", "free_x", "abelian_pair"},
    "numerics": {"solution", "amplitudes", "phase", "step", "periods", "conserved"},
    "quantum": {"map", "map_time", "inverse_map", "potential", "spectrum"},
    "symmetries": ("T", "xi", "f"),
    "ordering": {"alpha", "beta", "gamma", "d", "generic", "target_dxx", "target_mult", "gauge_factor"},
    "printed": "any",
}

# keys whose values are not expressions
_PLAIN = {("case", "name"), ("case", "summary"), ("noether", "expected"), ("quantum", "spectrum"),
          ("transforms", "abelian_pair"), ("numerics", "amplitudes"), ("numerics", "conserved"),
          ("ordering", "generic")} | {("variables", k) for k in ("t", "x", "p", "wave")}


class CaseError(ValueError):
    """Malformed case file; the message names the section and key."""


@dataclass
class CaseConfig:
    name: str
    path: str
    summary: str = ""
    params: dict = field(default_factory=dict)
    t: str = "t"
    x: str = "x"
    p: str = "p"
    wave: str = "eta"
    domains: dict = field(default_factory=dict)
    exprs: dict = field(default_factory=dict)  # (section, key) -> Expr
    raw: dict = field(default_factory=dict)  # (section, key) -> str
    generators: dict = field(default_factory=dict)  # label -> VectorField
    symmetries: dict = field(default_factory=dict)  # label -> Generator
    printed: dict = field(default_factory=dict)  # label -> Expr

    def has(self, section: str, key: str) -> bool:
        return (section, key) in self.exprs or (section, key) in self.raw

    def expr(self, section: str, key: str) -> Expr:
        try:
            return self.exprs[(section, key)]
        except KeyError:
            raise CaseError(f"case {self.name!r} lacks [{section}] {key}") from None

    def text(self, section: str, key: str, default: str | None = None) -> str:
        if (section, key) in self.raw:
            return self.raw[(section, key)]
        if default is not None:
            return default
        raise CaseError(f"case {self.name!r} lacks [{section}] {key}")

    def number(self, section: str, key: str, default: float | None = None) -> float:
        if not self.has(section, key):
            if default is None:
                raise CaseError(f"case {self.name!r} lacks [{section}] {key}")
            return default
        e = self.expr(section, key)
        return complex(evaluate(e, {n: complex(self.params[n]) for n in e.free_symbols})).real

    def domain(self, which: str = "domain") -> Domain:
        try:
            return self.domains[which]
        except KeyError:
            raise CaseError(f"case {self.name!r} has no [{which}] section") from None

    @property
    def ode(self) -> Ode2:
        return Ode2(self.expr("ode", "rhs"), self.t, self.x)

    def labels(self, section: str, key: str) -> list:
        return [s.strip() for s in self.text(section, key, "").split(",") if s.strip()]

    def printed_generator(self, label: str, parts=("xi", "eta")):
        """Printed variant of a generator; parts absent from [printed] fall back to the main form."""
        keys = [f"{label}.{p}" for p in parts]
        if not any(k in self.printed for k in keys):
            return None
        if parts == ("xi", "eta"):
            base = self.generators[label]
            return VectorField(self.printed.get(keys[0], base.xi), self.printed.get(keys[1], base.eta),
                               self.t, self.x)
        base = self.symmetries.get(label)
        vals = [self.printed.get(k, getattr(base, p) if base is not None else None) for k, p in zip(keys, parts)]
        if any(v is None for v in vals):
            raise CaseError(f"printed form of {label!r} is incomplete")
        return Generator(*vals, self.t, self.x)

    def printed_operator(self, label: str) -> DiffOp | None:
        table = {slot: self.printed[f"{label}.{name}"] for name, slot in SLOTS.items()
                 if f"{label}.{name}" in self.printed}
        return DiffOp.of(table, self.t, self.x) if table else None


def _number(text: str, where: str):
    try:
        return Fraction(text.strip())
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise CaseError(f"{where}: expected a number, got {text!r}") from None


def _parse(text: str, where: str) -> Expr:
    try:
        return parse(text)
    except (ExprSyntaxError, ValueError) as exc:
        raise CaseError(f"{where}: {exc}") from None


def _domain(section: dict, where: str) -> Domain:
    intervals, constraints = {}, []
    for key, val in section.items():
        if key == "constraints":
            constraints = [_parse(c, f"{where} constraints") for c in val.split(";") if c.strip()]
            continue
        if not IDENT.match(key):
            raise CaseError(f"{where}: bad variable name {key!r}")
        parts = val.split(",")
        if len(parts) != 2:
            raise CaseError(f"{where} {key}: expected 'low, high'")
        lo, hi = (float(_number(p, f"{where} {key}")) for p in parts)
        if not lo < hi:
            raise CaseError(f"{where} {key}: empty interval")
        intervals[key] = (lo, hi)
    return Domain(intervals, constraints)


def _check_keys(name: str, items: dict, where: str):
    allowed = _SECTIONS[name]
    for key in items:
        if allowed is None:
            ok = IDENT.match(key) or (name.endswith("domain") and key == "constraints")
        elif allowed == "any":
            ok = IDENT.match(key) or LABELLED.match(key)
        elif isinstance(allowed, tuple):
            m = LABELLED.match(key)
            ok = m is not None and m.group(2) in allowed
        else:
            ok = key in allowed
        if not ok:
            raise CaseError(f"{where}: unknown key {key!r}")


def parse_case(text: str, path: str = "<string>") -> CaseConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise CaseError(f"{path}: {exc}") from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise CaseError(f"{path}: unknown section [{sec}]")
        _check_keys(sec, dict(cp[sec]), f"{path} [{sec}]")
    if not cp.has_option("case", "name"):
        raise CaseError(f"{path}: [case] name is required")

    cfg = CaseConfig(cp["case"]["name"], path, cp["case"].get("summary", ""))
    if cp.has_section("variables"):
        v = cp["variables"]
        cfg.t, cfg.x, cfg.p, cfg.wave = v.get("t", "t"), v.get("x", "x"), v.get("p", "p"), v.get("wave", "eta")
    if cp.has_section("params"):
        cfg.params = {k: _number(v, f"{path} [params] {k}") for k, v in cp["params"].items()}
    for sec in ("domain", "phase_domain", "canonical_domain"):
        if cp.has_section(sec):
            cfg.domains[sec] = _domain(dict(cp[sec]), f"{path} [{sec}]")

    for sec in cp.sections():
        if sec in ("params", "variables", "domain", "phase_domain", "canonical_domain"):
            continue
        for key, val in cp[sec].items():
            where = f"{path} [{sec}] {key}"
            if (sec, key) in _PLAIN:
                cfg.raw[(sec, key)] = val.strip()
            elif sec == "printed":
                cfg.printed[key] = _parse(val, where)
            else:
                cfg.exprs[(sec, key)] = _parse(val, where)

    if cp.has_section("generators"):
        for label in _labels(cp["generators"]):
            xi, eta = (cfg.exprs.get(("generators", f"{label}.{p}")) for p in ("xi", "eta"))
            if xi is None or eta is None:
                raise CaseError(f"{path} [generators] {label} needs both xi and eta")
            cfg.generators[label] = VectorField(xi, eta, cfg.t, cfg.x)
    if cp.has_section("symmetries"):
        for label in _labels(cp["symmetries"]):
            parts = [cfg.exprs.get(("symmetries", f"{label}.{p}")) for p in ("T", "xi", "f")]
            if any(p is None for p in parts):
                raise CaseError(f"{path} [symmetries] {label} needs T, xi and f")
            cfg.symmetries[label] = Generator(*parts, cfg.t, cfg.x)
    for label in cfg.labels("noether", "expected"):
        if label not in cfg.generators:
            raise CaseError(f"{path} [noether] expected names unknown generator {label!r}")
    return cfg


def _labels(section) -> list:
    seen = []
    for key in section:
        label = key.split(".")[0]
        if label not in seen:
            seen.append(label)
    return seen


def builtin_cases() -> list:
    return sorted(p.stem for p in resources.files(__package__).joinpath("cases").iterdir()
                  if p.name.endswith(".ini"))


def load_case(ref: str) -> CaseConfig:
    """Load a case by file path or by built-in name (``lienard``, ``inverted``, ...)."""
    path = Path(ref)
    if path.is_file():
        return parse_case(path.read_text(), str(path))
    res = resources.files(__package__).joinpath("cases").joinpath(f"{ref}.ini")
    if res.is_file():
        return parse_case(res.read_text(), ref)
    raise CaseError(f"no case file {ref!r}; built-in cases: {', '.join(builtin_cases())}")

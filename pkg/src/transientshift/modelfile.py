"""Plain-text model files: an INI document naming a builder, its parameters, measures and orbits.

Example::

    [graph]
    builder = example1
    alpha = -1

    [origin]
    state = 0

    [measure delta]
    rule = delta
    point = ray

    [orbits plus]
    source = plus
    n = 5..20
"""

from __future__ import annotations

import configparser
import inspect
import re
from dataclasses import dataclass, field

from .errors import ModelFileError, ShiftError
from .measures_dlr import delta_measure, green_measure
from .model import Model
from .models import BUILDERS, measure_from_harmonic
from .potentials import constant_potential
from .shift_core import StateGraph, TailPoint, point_admissible, point_in

_POINT = re.compile(r"^\s*([^()]*?)\s*\(([^()]*)\)\s*$")


@dataclass
class ModelFile:
    model: Model
    measures: dict = field(default_factory=dict)
    orbit_specs: dict = field(default_factory=dict)
    source: str = ""

    def orbits(self) -> dict:
        """Tag -> list of points for every [orbits] section (all model orbits when none are given)."""
        specs = self.orbit_specs or {tag: (tag, list(range(8, 15))) for tag in self.model.orbits}
        return {tag: self.model.orbit(src, ns) for tag, (src, ns) in specs.items()}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, from the raw text."""
    where: dict = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where[(section, None)] = i
        elif section is not None and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, 1)[0].strip().lower()
            where[(section, key)] = i
    return where


def parse_word(text: str, g: StateGraph) -> tuple:
    return tuple(g.parse_state(t) for t in text.split(",") if t.strip())


def parse_point(text: str, g: StateGraph) -> TailPoint:
    """Parse ``a,b(c,d)`` (prefix then repeating cycle), or a bare word completed by its anchor."""
    m = _POINT.match(text)
    if m:
        pt = TailPoint(parse_word(m.group(1), g), parse_word(m.group(2), g))
        if not point_admissible(pt, g):
            raise ValueError(f"point {text!r} is not admissible")
        return pt
    return point_in(parse_word(text, g), g)


def parse_range(text: str) -> list:
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _number(value: str, line, key):
    try:
        return float(value)
    except ValueError:
        raise ModelFileError(f"expected a number, got {value!r}", line, key) from None


def loads(text: str) -> ModelFile:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ModelFileError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    where = _line_index(text)

    if not cp.has_section("graph"):
        raise ModelFileError("missing [graph] section", None, "graph")
    sec = cp["graph"]
    name = sec.get("builder")
    if name is None:
        raise ModelFileError("missing builder", where.get(("graph", None)), "builder")
    if name not in BUILDERS:
        raise ModelFileError(f"unknown builder {name!r}; choose from {sorted(BUILDERS)}",
                             where.get(("graph", "builder")), "builder")
    builder = BUILDERS[name]
    accepted = inspect.signature(builder).parameters
    kwargs = {}
    for key, value in sec.items():
        if key == "builder":
            continue
        line = where.get(("graph", key))
        if key not in accepted:
            raise ModelFileError(f"{name} takes no parameter {key!r}", line, key)
        if key == "weights":
            kwargs[key] = [_number(v, line, key) for v in value.split(",")]
        elif key == "degree":
            kwargs[key] = int(_number(value, line, key))
        elif key == "potential":
            kwargs[key] = value.strip()
        else:
            kwargs[key] = _number(value, line, key)
    try:
        model = builder(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ModelFileError(str(exc), where.get(("graph", None)), "graph") from None
    g = model.graph

    if cp.has_section("potential"):
        psec = cp["potential"]
        kind = psec.get("kind", "builder").strip()
        if kind == "constant":
            line = where.get(("potential", "value"))
            if "value" not in psec:
                raise ModelFileError("constant potential needs a value", where.get(("potential", None)), "value")
            model.potential = constant_potential(g, _number(psec["value"], line, "value"))
        elif kind != "builder":
            raise ModelFileError(f"unknown potential kind {kind!r}", where.get(("potential", "kind")), "kind")

    if cp.has_section("origin"):
        line = where.get(("origin", "state"))
        raw = cp["origin"].get("state")
        if raw is None:
            raise ModelFileError("missing origin state", where.get(("origin", None)), "state")
        state = g.parse_state(raw)
        try:
            g.check(state)
        except ShiftError as exc:
            raise ModelFileError(str(exc), line, "state") from None
        model.origin = state

    measures = {}
    orbit_specs = {}
    for section in cp.sections():
        if section.startswith("measure"):
            label = section[len("measure"):].strip() or "measure"
            measures[label] = _measure(cp[section], section, model, where)
        elif section.startswith("orbits"):
            label = section[len("orbits"):].strip() or "orbit"
            osec = cp[section]
            src = osec.get("source", label).strip()
            if src not in model.orbits:
                raise ModelFileError(f"model has no orbit {src!r}; available {sorted(model.orbits)}",
                                     where.get((section, "source")), "source")
            try:
                ns = parse_range(osec.get("n", "8..14"))
            except ValueError:
                raise ModelFileError("n must be a range a..b or a list", where.get((section, "n")), "n") from None
            orbit_specs[label] = (src, ns)
        elif section not in ("graph", "potential", "origin"):
            raise ModelFileError(f"unknown section [{section}]", where.get((section, None)), section)
    return ModelFile(model, measures, orbit_specs, text)


def _measure(sec, section: str, model: Model, where: dict):
    rule = sec.get("rule", "").strip()
    g = model.graph
    line = where.get((section, "point"))
    if rule == "delta":
        ptxt = sec.get("point", "").strip()
        if ptxt == "ray" and "ray_point" in model.params:
            return delta_measure(model.params["ray_point"])
        try:
            return delta_measure(parse_point(ptxt, g))
        except (ValueError, ShiftError) as exc:
            raise ModelFileError(str(exc), line, "point") from None
    if rule == "green":
        try:
            x = parse_point(sec.get("point", str(model.origin)), g)
        except (ValueError, ShiftError) as exc:
            raise ModelFileError(str(exc), line, "point") from None
        lam = _number(sec.get("lambda", "1"), where.get((section, "lambda")), "lambda")
        return green_measure(model, x, lam)
    if rule == "harmonic":
        if model.walk is None:
            raise ModelFileError("harmonic measures need a walk model", where.get((section, "rule")), "rule")
        base = _number(sec.get("base", "1"), where.get((section, "base")), "base")
        h = (lambda a: 1.0) if base == 1.0 else (lambda a: base ** a)
        states = g.ball(model.origin, 6)
        try:
            return measure_from_harmonic(model.walk, h, states)
        except ShiftError as exc:
            raise ModelFileError(str(exc), where.get((section, "base")), "base") from None
    raise ModelFileError(f"unknown measure rule {rule!r} (delta, green, harmonic)",
                         where.get((section, "rule")) or where.get((section, None)), "rule")


def load(path: str) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())

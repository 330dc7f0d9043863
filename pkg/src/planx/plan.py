"""Plan DSL: entity descriptions (designators), plan definitions and the
built-in action library.

Plans are written as s-expressions::

    (def-plan transport-objects ()
      (dolist (?type '(milk cup))
        (perform (an action (type transporting)
                            (object (an object (type ?type)))
                            (location (a location (on (an object (name sink_area)))))
                            (target (a location (on (an object (name island_area)))))))))

Symbols are case-insensitive and lowercased on read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

from planx.errors import KeyNotFound, ParseError
from planx.sexpr import LIST, NUMBER, STRING, SYMBOL, Form, read_all

ARTICLES = ("a", "an")
KINDS = ("action", "object", "location")
RELATIONS = ("on", "in")


@dataclass(frozen=True)
class Var:
    """A plan variable such as ``?type``. The name keeps its ``?``."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Text:
    """A double-quoted string literal (symbols are plain ``str``)."""

    value: str

    def __str__(self):
        return '"' + self.value.replace("\\", "\\\\").replace('"', '\\"') + '"'


Value = Union[str, int, float, Var, Text, "Designator"]


@dataclass(frozen=True)
class Designator:
    """A symbolic entity description: ``(an object (type milk))``."""

    article: str
    kind: str
    props: tuple[tuple[str, Value], ...] = ()

    def __post_init__(self):
        if self.article not in ARTICLES:
            raise ValueError(f"bad article {self.article!r}")
        if self.kind not in KINDS:
            raise ValueError(f"bad designator kind {self.kind!r}")
        keys = [k for k, _ in self.props]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate keys in designator: {keys}")
        if self.kind == "location" and "on" in keys and "in" in keys:
            raise ValueError("a location uses either 'on' or 'in', not both")

    @classmethod
    def make(cls, kind: str, *props: tuple[str, Value], article: str | None = None) -> "Designator":
        if article is None:
            article = "an" if kind[0] in "aeiou" else "a"
        return cls(article, kind, tuple(props))

    def keys(self) -> list[str]:
        return [k for k, _ in self.props]

    def __contains__(self, key):
        return any(k == key for k, _ in self.props)

    def get(self, key: str, default=None):
        for k, v in self.props:
            if k == key:
                return v
        return default

    def __getitem__(self, key: str):
        for k, v in self.props:
            if k == key:
                return v
        raise KeyNotFound([key])

    def with_prop(self, key: str, value: Value) -> "Designator":
        """Return a copy with ``key`` replaced in place, or appended if absent."""
        if key in self:
            props = tuple((k, value if k == key else v) for k, v in self.props)
        else:
            props = self.props + ((key, value),)
        return Designator(self.article, self.kind, props)

    def without(self, key: str) -> "Designator":
        return Designator(self.article, self.kind, tuple(p for p in self.props if p[0] != key))

    def substitute(self, env: Mapping[str, Value]) -> "Designator":
        return Designator(self.article, self.kind, tuple((k, _subst(v, env)) for k, v in self.props))

    def variables(self) -> set[str]:
        out = set()
        for _, v in self.props:
            if isinstance(v, Var):
                out.add(v.name)
            elif isinstance(v, Designator):
                out |= v.variables()
        return out

    def __str__(self):
        return format_value(self)


def _subst(value, env):
    if isinstance(value, Var):
        return env.get(value.name, value)
    if isinstance(value, Designator):
        return value.substitute(env)
    return value


def format_value(value: Value) -> str:
    if isinstance(value, Designator):
        parts = [value.article, value.kind]
        parts += [f"({k} {format_value(v)})" for k, v in value.props]
        return "(" + " ".join(parts) + ")"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def designator_get(d: Designator, keypath: Iterable[str]) -> Value:
    """Descend nested designators along ``keypath``.

    >>> designator_get(parse_designator("(an object (type milk))"), ["type"])
    'milk'
    """
    keypath = list(keypath)
    if not keypath:
        raise ValueError("key path must not be empty")
    current: Value = d
    for i, key in enumerate(keypath):
        if not isinstance(current, Designator) or key not in current:
            raise KeyNotFound(keypath[: i + 1])
        current = current.get(key)
    return current


# -- locations -------------------------------------------------------------

def location_reference(loc) -> Optional[tuple[str, Designator]]:
    """Return ``(relation, referenced object)`` for an ``on``/``in`` location."""
    if not isinstance(loc, Designator) or loc.kind != "location":
        return None
    for rel in RELATIONS:
        ref = loc.get(rel)
        if isinstance(ref, Designator):
            return rel, ref
    return None


def reference_identity(ref: Designator) -> Optional[tuple[str, Value]]:
    if "name" in ref:
        return "name", ref.get("name")
    if "type" in ref:
        return "type", ref.get("type")
    return None


def same_area(a, b) -> bool:
    """True iff both locations use the same relation and reference the same
    environment object (by ``name``, or by ``type`` when neither has a name)."""
    ra, rb = location_reference(a), location_reference(b)
    if ra is None or rb is None or ra[0] != rb[0]:
        return False
    ia, ib = reference_identity(ra[1]), reference_identity(rb[1])
    return ia is not None and ia == ib


def is_container_location(loc) -> bool:
    return isinstance(loc, Designator) and loc.kind == "location" and "in" in loc


def container_of(loc) -> Optional[Designator]:
    if is_container_location(loc):
        ref = loc.get("in")
        if isinstance(ref, Designator):
            return ref
    return None


# -- plan structure --------------------------------------------------------

@dataclass(frozen=True)
class Perform:
    designator: Designator


@dataclass(frozen=True)
class Loop:
    var: Var
    items: tuple[str, ...]
    body: tuple["PlanExpr", ...]


@dataclass(frozen=True)
class Seq:
    body: tuple["PlanExpr", ...]


PlanExpr = Union[Perform, Loop, Seq]


@dataclass(frozen=True)
class PlanDef:
    name: str
    params: tuple[Var, ...] = ()
    body: tuple[PlanExpr, ...] = ()


# -- parsing ---------------------------------------------------------------

def _err(form: Form, reason: str):
    raise ParseError(reason, form.line, form.column)


def _parse_value(form: Form) -> Value:
    if form.kind == SYMBOL:
        return Var(form.value) if form.value.startswith("?") else form.value
    if form.kind == NUMBER:
        return form.value
    if form.kind == STRING:
        return Text(form.value)
    return _parse_designator_form(form)


def _parse_designator_form(form: Form) -> Designator:
    items = form.value if form.kind == LIST else None
    if not items or len(items) < 2 or not items[0].is_symbol() or not items[1].is_symbol():
        _err(form, "expected a designator like (an object ...)")
    if items[0].value not in ARTICLES:
        _err(items[0], f"unknown head symbol {items[0].value!r}")
    if items[1].value not in KINDS:
        _err(items[1], f"unknown designator kind {items[1].value!r}")
    props = []
    seen = set()
    for p in items[2:]:
        if not p.is_list or len(p.value) != 2 or not p.value[0].is_symbol():
            _err(p, "designator property must be (key value)")
        key = p.value[0].value
        if key in seen:
            _err(p, f"duplicate key {key!r}")
        seen.add(key)
        props.append((key, _parse_value(p.value[1])))
    try:
        return Designator(items[0].value, items[1].value, tuple(props))
    except ValueError as e:
        _err(form, str(e))


def _parse_expr(form: Form, bound: set[str]) -> PlanExpr:
    if not form.is_list or not form.value or not form.value[0].is_symbol():
        _err(form, "expected a plan expression")
    head, *args = form.value
    if head.value == "perform":
        if len(args) != 1:
            _err(form, "perform takes exactly one action designator")
        d = _parse_designator_form(args[0])
        if d.kind != "action":
            _err(args[0], "perform expects an action designator")
        unbound = d.variables() - bound
        if unbound:
            _err(args[0], f"unbound variable {sorted(unbound)[0]}")
        return Perform(d)
    if head.value == "dolist":
        if not args or not args[0].is_list or len(args[0].value) != 2:
            _err(form, "dolist expects (?var '(items ...))")
        var_form, items_form = args[0].value
        if not var_form.is_symbol() or not var_form.value.startswith("?"):
            _err(var_form, "loop variable must start with '?'")
        if not (items_form.is_list and len(items_form.value) == 2 and items_form.value[0].is_symbol("quote")
                and items_form.value[1].is_list):
            _err(items_form, "loop items must be a quoted list")
        items = items_form.value[1].value
        if not items:
            _err(items_form, "loop item list is empty")
        for it in items:
            if not it.is_symbol():
                _err(it, "loop items must be symbols")
        inner = bound | {var_form.value}
        body = tuple(_parse_expr(f, inner) for f in args[1:])
        return Loop(Var(var_form.value), tuple(it.value for it in items), body)
    if head.value == "seq":
        return Seq(tuple(_parse_expr(f, bound) for f in args))
    _err(head, f"unknown head symbol {head.value!r}")


def _parse_plan_form(form: Form) -> PlanDef:
    if not form.is_list or not form.value or not form.value[0].is_symbol():
        _err(form, "expected (def-plan name (params) body...)")
    head = form.value[0]
    if head.value != "def-plan":
        _err(head, f"unknown head symbol {head.value!r}")
    if len(form.value) < 3:
        _err(form, "def-plan needs a name and a parameter list")
    name_form, params_form, *body_forms = form.value[1:]
    if not name_form.is_symbol():
        _err(name_form, "plan name must be a symbol")
    if not params_form.is_list:
        _err(params_form, "plan parameters must be a list")
    params = []
    for p in params_form.value:
        if not p.is_symbol() or not p.value.startswith("?"):
            _err(p, "plan parameters must be ?variables")
        params.append(Var(p.value))
    bound = {p.name for p in params}
    body = tuple(_parse_expr(f, bound) for f in body_forms)
    return PlanDef(name_form.value, tuple(params), body)


def parse_plans(text: str) -> list[PlanDef]:
    """Parse every ``def-plan`` form in ``text``."""
    plans = []
    names = set()
    for form in read_all(text):
        plan = _parse_plan_form(form)
        if plan.name in names:
            _err(form, f"duplicate plan name {plan.name!r}")
        names.add(plan.name)
        plans.append(plan)
    return plans


def parse_plan(text: str, name: str | None = None) -> PlanDef:
    """Parse plan text and return the named plan, or the last one."""
    plans = parse_plans(text)
    if not plans:
        raise ParseError("no def-plan form found", 1, 1)
    if name is None:
        return plans[-1]
    for p in plans:
        if p.name == name.lower():
            return p
    raise ParseError(f"no plan named {name!r}", 1, 1)


def parse_designator(text: str) -> Designator:
    forms = read_all(text)
    if len(forms) != 1:
        raise ParseError("expected a single designator", 1, 1)
    return _parse_designator_form(forms[0])


# -- serialization ---------------------------------------------------------

def _format_expr(expr: PlanExpr, indent: int) -> str:
    pad = " " * indent
    if isinstance(expr, Perform):
        return f"{pad}(perform {format_value(expr.designator)})"
    if isinstance(expr, Loop):
        head = f"{pad}(dolist ({expr.var} '({' '.join(expr.items)}))"
    else:
        head = f"{pad}(seq"
    if not expr.body:
        return head + ")"
    return head + "\n" + "\n".join(_format_expr(e, indent + 2) for e in expr.body) + ")"


def format_plan(plan: PlanDef) -> str:
    head = f"(def-plan {plan.name} ({' '.join(p.name for p in plan.params)})"
    if not plan.body:
        return head + ")"
    return head + "\n" + "\n".join(_format_expr(e, 2) for e in plan.body) + ")"


def format_body(body: Iterable[PlanExpr]) -> str:
    return "\n".join(_format_expr(e, 0) for e in body)


# -- built-in action library -----------------------------------------------

@dataclass(frozen=True)
class ChildSpec:
    action_type: str
    # derive(parent action) -> child designator, or None to omit the child;
    # None as the function itself means the executor builds it at run time
    derive: Optional[Callable[[Designator], Optional[Designator]]] = field(default=None, compare=False)


@dataclass(frozen=True)
class ActionSchema:
    action_type: str
    children: tuple[ChildSpec, ...] = ()
    retries: int = 0
    recovery: str = "none"


def _action(kind: str, *props) -> Designator:
    return Designator("an", "action", (("type", kind),) + tuple(p for p in props if p[1] is not None))


def _derive_searching(t: Designator):
    return _action("searching", ("object", t.get("object")), ("location", t.get("location")))


def _derive_opening(t: Designator):
    c = container_of(t.get("location"))
    return None if c is None else _action("opening", ("object", c))


def _derive_fetching(t: Designator):
    return _action("fetching", ("object", t.get("object")), ("location", t.get("location")),
                   ("arms", t.get("arms")))


def _derive_closing(t: Designator):
    c = container_of(t.get("location"))
    return None if c is None else _action("closing", ("object", c))


def _derive_delivering(t: Designator):
    return _action("delivering", ("object", t.get("object")), ("target", t.get("target")))


ACTION_LIBRARY: dict[str, ActionSchema] = {
    s.action_type: s
    for s in (
        ActionSchema("transporting", (
            ChildSpec("searching", _derive_searching),
            ChildSpec("opening", _derive_opening),
            ChildSpec("fetching", _derive_fetching),
            ChildSpec("closing", _derive_closing),
            ChildSpec("delivering", _derive_delivering),
        )),
        ActionSchema("searching", (ChildSpec("navigating"), ChildSpec("detecting")), 3, "reposition"),
        ActionSchema("fetching", (ChildSpec("navigating"), ChildSpec("picking-up")), 2, "switch-arm-then-reposition"),
        ActionSchema("delivering", (ChildSpec("navigating"), ChildSpec("placing")), 3, "resample-target"),
        ActionSchema("opening", (ChildSpec("navigating"), ChildSpec("pulling"))),
        ActionSchema("closing", (ChildSpec("navigating"), ChildSpec("pushing"))),
        ActionSchema("navigating"),
        ActionSchema("detecting"),
        ActionSchema("picking-up"),
        ActionSchema("placing"),
        ActionSchema("pulling"),
        ActionSchema("pushing"),
    )
}


def expand_children(action: Designator) -> list[Designator]:
    """Child action designators of a composite action whose children are
    fully determined by its parameters (currently ``transporting``)."""
    schema = ACTION_LIBRARY[action.get("type")]
    out = []
    for spec in schema.children:
        if spec.derive is None:
            raise ValueError(f"children of {schema.action_type} are chosen at run time")
        child = spec.derive(action)
        if child is not None:
            out.append(child)
    return out

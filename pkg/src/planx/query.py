"""Unification-based query engine over task trees.

Applicability rules are Horn clauses evaluated depth-first, left to right.
Built-in predicates bind against tree nodes in pre-order, so the solution
order for a fixed tree is deterministic.

Rule files use one parenthesized clause per rule::

    (rule (both_hands_rule Deliver_action Deliver_path Second_deliver_path)
      (transport_task "top-level" First_task)
      (not (== First_task Second_task))
      ...)

Symbols starting with an uppercase letter, ``?`` or ``_`` are variables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Iterator, Optional, Union

from planx.errors import NameCollision, ParseError, UnknownPredicate
from planx.plan import Designator, is_container_location, same_area
from planx.sexpr import LIST, NUMBER, STRING, SYMBOL, Form, read_all
from planx.tasktree import SUCCEEDED, TaskTree, TaskTreeNode, not_transformed


# -- terms -----------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Num:
    value: Union[int, float]

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Str:
    value: str

    def __str__(self):
        return f'"{self.value}"'


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Compound:
    head: str
    args: tuple["Term", ...] = ()

    def __str__(self):
        return f"{self.head}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Ref:
    """Opaque host value (task node, designator, node path) inside a term.

    Equality is by ``key``: nodes compare by their path.
    """

    key: Any
    value: Any = field(default=None, compare=False, hash=False)

    def __str__(self):
        return str(self.key)


Term = Union[Atom, Num, Str, Var, Compound, Ref]


@dataclass(frozen=True)
class Not:
    goal: "Goal"


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term


Goal = Union[Compound, Not, Neq]


@dataclass(frozen=True)
class Rule:
    head: Compound
    body: tuple[Goal, ...] = ()

    def __post_init__(self):
        missing = term_vars(self.head) - set().union(*(goal_vars(g) for g in self.body))
        if self.body and missing:
            raise ValueError(f"head variables not used in body: {sorted(v.name for v in missing)}")


def node_term(node: TaskTreeNode) -> Ref:
    return Ref(node.path, node)


def value_term(value) -> Ref:
    return Ref(value, value)


def term_vars(t) -> set[Var]:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, Compound):
        return set().union(*(term_vars(a) for a in t.args))
    return set()


def goal_vars(g: Goal) -> set[Var]:
    if isinstance(g, Not):
        return goal_vars(g.goal)
    if isinstance(g, Neq):
        return term_vars(g.left) | term_vars(g.right)
    return term_vars(g)


# -- unification -----------------------------------------------------------

Bindings = dict  # Var -> Term


def walk(t: Term, env: Bindings) -> Term:
    while isinstance(t, Var) and t in env:
        t = env[t]
    return t


def resolve(t: Term, env: Bindings) -> Term:
    t = walk(t, env)
    if isinstance(t, Compound):
        return Compound(t.head, tuple(resolve(a, env) for a in t.args))
    return t


def unify(a: Term, b: Term, env: Optional[Bindings] = None) -> Optional[Bindings]:
    """Most general unifier extending ``env``, or None. No occurs check."""
    env = {} if env is None else env
    a, b = walk(a, env), walk(b, env)
    if a == b:
        return env
    if isinstance(a, Var):
        return {**env, a: b}
    if isinstance(b, Var):
        return {**env, b: a}
    if isinstance(a, Compound) and isinstance(b, Compound):
        if a.head != b.head or len(a.args) != len(b.args):
            return None
        for x, y in zip(a.args, b.args):
            env = unify(x, y, env)
            if env is None:
                return None
        return env
    return None


# -- built-in predicates ---------------------------------------------------

def _node(t: Term, env) -> Optional[TaskTreeNode]:
    t = walk(t, env)
    if isinstance(t, Ref) and isinstance(t.value, TaskTreeNode):
        return t.value
    return None


def _designator(t: Term, env) -> Optional[Designator]:
    t = walk(t, env)
    if isinstance(t, Ref) and isinstance(t.value, Designator):
        return t.value
    return None


def _bi_transport_task(tree: TaskTree, env, root, task):
    root = walk(root, env)
    if not isinstance(root, (Str, Atom)):
        return
    name = root.value if isinstance(root, Str) else root.name
    for top in tree:
        if top.name != name:
            continue
        for node in top.walk():
            if node is not top and node.name == "transporting" and node.status == SUCCEEDED:
                e = unify(task, node_term(node), env)
                if e is not None:
                    yield e


def _bi_task_action_param(tree, env, task, action):
    node = _node(task, env)
    if node is not None and node.action is not None:
        e = unify(action, value_term(node.action), env)
        if e is not None:
            yield e


def _bi_task_path(tree, env, task, path):
    node = _node(task, env)
    if node is not None:
        e = unify(path, value_term(node.path), env)
        if e is not None:
            yield e


def is_one_arm(action: Designator) -> bool:
    arms = action.get("arms")
    return arms is None or arms in (1, "1", "one", "single", "left", "right")


def _bi_one_arm_action(tree, env, action):
    d = _designator(action, env)
    if d is not None and is_one_arm(d):
        yield env


def _same_prop(key: str, containers_only: bool = False):
    def pred(tree, env, a, b):
        da, db = _designator(a, env), _designator(b, env)
        if da is None or db is None:
            return
        la, lb = da.get(key), db.get(key)
        if containers_only and not (is_container_location(la) and is_container_location(lb)):
            return
        if same_area(la, lb):
            yield env
    return pred


def _child_task(child_name: str):
    def pred(tree, env, task, child):
        node = _node(task, env)
        if node is None:
            return
        for c in node.children_named(child_name):
            e = unify(child, node_term(c), env)
            if e is not None:
                yield e
    return pred


def _bi_not_transformed(tree, env, task):
    node = _node(task, env)
    if node is not None and not_transformed(node):
        yield env


def _bi_identical(tree, env, a, b):
    if resolve(a, env) == resolve(b, env):
        yield env


BUILTINS: dict[str, Callable[..., Iterator[Bindings]]] = {
    "transport_task": _bi_transport_task,
    "task_action_param": _bi_task_action_param,
    "task_path": _bi_task_path,
    "one_arm_action": _bi_one_arm_action,
    "fetch_from_same_loc": _same_prop("location"),
    "deliver_to_same_loc": _same_prop("target"),
    "fetch_from_same_container": _same_prop("location", containers_only=True),
    "deliver_task": _child_task("delivering"),
    "open_task": _child_task("opening"),
    "close_task": _child_task("closing"),
    "not_transformed": _bi_not_transformed,
    "==": _bi_identical,
}


# -- engine ----------------------------------------------------------------

class QueryEngine:
    def __init__(self, rules=()):
        self.rules: dict[str, list[Rule]] = {}
        self._fresh = itertools.count(1)
        for r in rules:
            self.register_rule(r)

    def register_rule(self, rule: Rule) -> None:
        if rule.head.head in BUILTINS:
            raise NameCollision(f"{rule.head.head} is a built-in predicate")
        self.rules.setdefault(rule.head.head, []).append(rule)

    def load_rules(self, text: str) -> None:
        for r in parse_rules(text):
            self.register_rule(r)

    def solve(self, goal: Union[Goal, str], tree: TaskTree) -> Iterator[dict[Var, Term]]:
        """Lazily enumerate solutions, each restricted to the goal's variables."""
        if isinstance(goal, str):
            goal = parse_goal(goal)
        qvars = sorted(goal_vars(goal), key=lambda v: v.name)
        for env in self._solve((goal,), {}, tree):
            yield {v: resolve(v, env) for v in qvars}

    def _solve(self, goals: tuple, env: Bindings, tree: TaskTree) -> Iterator[Bindings]:
        if not goals:
            yield env
            return
        first, rest = goals[0], goals[1:]
        for e in self._solve_one(first, env, tree):
            yield from self._solve(rest, e, tree)

    def _solve_one(self, goal: Goal, env: Bindings, tree: TaskTree) -> Iterator[Bindings]:
        if isinstance(goal, Not):
            for _ in self._solve((goal.goal,), env, tree):
                return
            yield env
            return
        if isinstance(goal, Neq):
            if resolve(goal.left, env) != resolve(goal.right, env):
                yield env
            return
        builtin = BUILTINS.get(goal.head)
        if builtin is not None:
            yield from builtin(tree, env, *goal.args)
            return
        clauses = self.rules.get(goal.head)
        if clauses is None:
            raise UnknownPredicate(goal.head)
        for clause in clauses:
            head, body = self._rename(clause)
            e = unify(head, goal, env)
            if e is not None:
                yield from self._solve(body, e, tree)

    def _rename(self, rule: Rule):
        n = next(self._fresh)
        mapping = {v: Var(f"{v.name}#{n}") for v in set().union(term_vars(rule.head), *map(goal_vars, rule.body))}

        def sub(t):
            if isinstance(t, Var):
                return mapping.get(t, t)
            if isinstance(t, Compound):
                return Compound(t.head, tuple(sub(a) for a in t.args))
            return t

        def sub_goal(g):
            if isinstance(g, Not):
                return Not(sub_goal(g.goal))
            if isinstance(g, Neq):
                return Neq(sub(g.left), sub(g.right))
            return sub(g)

        return sub(rule.head), tuple(sub_goal(g) for g in rule.body)


# -- rule text -------------------------------------------------------------

_anon = itertools.count()


def _is_var_name(name: str) -> bool:
    return name[:1].isupper() or name[:1] in "?_"


def _to_term(form: Form) -> Term:
    if form.kind == SYMBOL:
        if form.value == "_":
            return Var(f"_#{next(_anon)}")
        return Var(form.value) if _is_var_name(form.value) else Atom(form.value)
    if form.kind == NUMBER:
        return Num(form.value)
    if form.kind == STRING:
        return Str(form.value)
    items = form.value
    if not items or items[0].kind != SYMBOL:
        raise ParseError("compound term needs a symbol head", form.line, form.column)
    return Compound(items[0].value, tuple(_to_term(f) for f in items[1:]))


def _to_goal(form: Form) -> Goal:
    if form.kind != LIST or not form.value or form.value[0].kind != SYMBOL:
        raise ParseError("goal must be a parenthesized predicate call", form.line, form.column)
    head, *args = form.value
    if head.value == "not":
        if len(args) != 1:
            raise ParseError("not takes one goal", form.line, form.column)
        inner = args[0]
        if inner.kind == LIST and inner.value and inner.value[0].is_symbol("==") and len(inner.value) == 3:
            return Neq(_to_term(inner.value[1]), _to_term(inner.value[2]))
        return Not(_to_goal(inner))
    if head.value == "\\=":
        if len(args) != 2:
            raise ParseError("\\= takes two terms", form.line, form.column)
        return Neq(_to_term(args[0]), _to_term(args[1]))
    term = _to_term(form)
    return term


def parse_goal(text: str) -> Goal:
    forms = read_all(text, fold_case=False)
    if len(forms) != 1:
        raise ParseError("expected a single goal", 1, 1)
    return _to_goal(forms[0])


def parse_rules(text: str) -> list[Rule]:
    rules = []
    for form in read_all(text, fold_case=False):
        if not (form.kind == LIST and len(form.value) >= 2 and form.value[0].kind == SYMBOL
                and form.value[0].value in ("rule", "<-")):
            raise ParseError("expected (rule (head ...) goal ...)", form.line, form.column)
        head = _to_term(form.value[1])
        if not isinstance(head, Compound):
            raise ParseError("rule head must be a compound term", form.value[1].line, form.value[1].column)
        try:
            rules.append(Rule(head, tuple(_to_goal(f) for f in form.value[2:])))
        except ValueError as e:
            raise ParseError(str(e), form.line, form.column) from None
    return rules


def default_rules_text() -> str:
    return resources.files("planx").joinpath("data/default.rules").read_text()


def default_engine(extra_rules: str | None = None) -> QueryEngine:
    """Engine loaded with the packaged applicability rules.

    Rules in ``extra_rules`` replace packaged rules of the same name.
    """
    engine = QueryEngine()
    packaged = parse_rules(default_rules_text())
    extra = parse_rules(extra_rules) if extra_rules else []
    overridden = {r.head.head for r in extra}
    for r in packaged:
        if r.head.head not in overridden:
            engine.register_rule(r)
    for r in extra:
        engine.register_rule(r)
    return engine

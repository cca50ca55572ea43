"""Scenario execution, assertion evaluation and impact reporting."""
import ast
import json
import math
import operator
from types import SimpleNamespace

from .attacks import Attacker
from .bus import EventKind
from .errors import PrintCanError, UnknownId
from .plant import CATEGORIES, CATEGORY_TABLE
from .sim import Simulation
from .trace import TraceRecord

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Mod: operator.mod,
}
_CMPOPS = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}


class ExpressionError(PrintCanError):
    """An assertion expression uses a construct outside the allowed subset."""


def evaluate(expr, names):
    """Evaluate ``expr`` over ``names`` with a small, side-effect-free subset
    of Python expression syntax (no subscripts, lambdas or comprehensions)."""
    return _eval(ast.parse(expr, mode="eval").body, names)


def _eval(node, names):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown name {node.id!r}")
        return names[node.id]
    if isinstance(node, ast.Attribute):
        base = _eval(node.value, names)
        if not isinstance(base, SimpleNamespace) or not hasattr(base, node.attr):
            raise ExpressionError(f"no attribute {node.attr!r}")
        return getattr(base, node.attr)
    if isinstance(node, ast.BoolOp):
        if isinstance(node.op, ast.And):
            result = True
            for value in node.values:
                result = _eval(value, names)
                if not result:
                    return result
            return result
        result = False
        for value in node.values:
            result = _eval(value, names)
            if result:
                return result
        return result
    if isinstance(node, ast.UnaryOp):
        value = _eval(node.operand, names)
        if isinstance(node.op, ast.Not):
            return not value
        if isinstance(node.op, ast.USub):
            return -value
        if isinstance(node.op, ast.UAdd):
            return value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, names), _eval(node.right, names))
    if isinstance(node, ast.Compare):
        left = _eval(node.left, names)
        for op, comparator in zip(node.ops, node.comparators):
            if type(op) not in _CMPOPS:
                raise ExpressionError(f"unsupported comparison {type(op).__name__}")
            right = _eval(comparator, names)
            if left is None or right is None:
                if not isinstance(op, (ast.Eq, ast.NotEq)):
                    return False
            if not _CMPOPS[type(op)](left, right):
                return False
            left = right
        return True
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = names.get(node.func.id)
        if not callable(fn):
            raise ExpressionError(f"{node.func.id!r} is not a function")
        args = [_eval(a, names) for a in node.args]
        kwargs = {k.arg: _eval(k.value, names) for k in node.keywords}
        return fn(*args, **kwargs)
    raise ExpressionError(f"unsupported syntax {type(node).__name__}")


def _seconds_to_us(seconds):
    return round(seconds * 1_000_000)


class TraceCounter:
    """``count(id, t1, t2)`` over trace records, capped at an evaluation time.

    The same object backs online and offline evaluation so both agree on a
    given trace.
    """

    def __init__(self, records=()):
        self.records = list(records)

    def count(self, now_us, id=None, t1=None, t2=None):
        lo = 0 if t1 is None else _seconds_to_us(t1)
        hi = now_us if t2 is None else min(now_us, _seconds_to_us(t2))
        return sum(
            1 for r in self.records
            if lo <= r.timestamp_us <= hi and (id is None or r.id == id)
        )


def _math_names():
    return {"abs": abs, "min": min, "max": max, "round": round}


def classify_frame(ident, topology):
    """Asset category of ``ident`` from the topology's role table."""
    role = topology.roles().get(ident)
    if role is None:
        raise UnknownId(f"0x{ident:03X} is not in the topology")
    return CATEGORY_TABLE[(role.kind, role.direction)]


def _hex(ident):
    return f"0x{ident:03X}"


class ScenarioRun:
    """One simulation built from a :class:`~printcan.scenario.ScenarioSpec`."""

    def __init__(self, spec, seed=None):
        self.spec = spec
        self.seed = spec.seed if seed is None else seed
        self.sim = Simulation(spec.topology, spec.bitrate, spec.config, self.seed)
        self.attacker = Attacker(self.sim) if spec.attack.steps else None
        self.records = []
        self.counter = TraceCounter()
        self.verdicts = {}
        self.faults = []
        self._windows = []
        self.sim.observers.append(self._observe)

    # -- wiring -----------------------------------------------------------
    def _observe(self, events):
        bitrate = self.sim.bitrate
        for ev in events:
            if ev.kind is EventKind.FRAME_DELIVERED:
                rec = TraceRecord.from_frame(ev.time, ev.frame, bitrate)
                self.records.append(rec)
                self.counter.records.append(rec)
        for a in self._windows:
            if self.sim.bus.time <= self.sim.ticks(a.t2):
                self._check(a, self._now_us())

    def _now_us(self):
        return self.sim.bus.time * 1_000_000 // self.sim.bitrate

    def _schedule(self):
        sim = self.sim
        for t, command in self.spec.board_script:
            sim.at(sim.ticks(t), lambda c=command: sim.board.command(c))
        for step in self.spec.attack.steps:
            self._launch(step)
        for a in self.spec.assertions:
            self.verdicts[a] = None
            if a.kind == "at":
                sim.at(sim.ticks(a.t1), lambda a=a: self._check(a, _seconds_to_us(a.t1)))
            elif a.kind == "during":
                sim.at(sim.ticks(a.t1), lambda a=a: self._open(a))
                sim.at(sim.ticks(a.t2), lambda a=a: self._close(a))

    def _open(self, a):
        self._check(a, self._now_us())
        self._windows.append(a)

    def _close(self, a):
        if a in self._windows:
            self._windows.remove(a)
        self._check(a, min(self._now_us(), _seconds_to_us(a.t2)))

    def _launch(self, step):
        atk, p, t = self.attacker, step.params, step.start
        name = step.primitive
        if name == "eavesdrop":
            atk.eavesdrop(t, p.get("until"))
        elif name == "spoof":
            atk.spoof(p["id"], p["payload"], t, p.get("until"), p.get("rate"))
        elif name == "flood":
            atk.flood_dos(t, p["until"], p.get("id", 0x000), p.get("payload", bytes(8)))
        elif name == "block":
            atk.targeted_block(p["ids"], t, p["until"])
        elif name == "replay":
            atk.replay(p["ids"], t, p.get("until"), p.get("from", 0.0), p.get("to", t))
        elif name == "fuzz":
            atk.fuzz(p["id"], t, p["until"], p["rate"])
        elif name == "inject":
            atk.inject(p["command"], t)
        elif name == "block_and_spoof":
            atk.scenario1_block_and_spoof(p["commands"], t, p["until"])
        elif name == "sensor_spoof":
            atk.scenario2_sensor_spoof(
                p["fake_temp"], t, p["until"],
                rate_multiplier=p.get("rate_multiplier", 5), hide=p.get("hide", False),
            )
        else:
            raise ValueError(f"unknown primitive {name!r}")

    # -- assertions -------------------------------------------------------
    def names(self, now_us, wanted):
        sim = self.sim
        names = _math_names()
        names["count"] = lambda id=None, t1=None, t2=None: self.counter.count(now_us, id, t1, t2)
        names["destroyed"] = lambda id=None: sum(
            1 for ev in sim.bus.history
            if ev.kind is EventKind.FRAME_DESTROYED and (id is None or ev.frame.id == id)
        )
        if self.attacker is not None:
            names["captured"] = lambda id=None: sum(
                1 for _, f in self.attacker.log if id is None or f.id == id
            )
            names["attacker"] = SimpleNamespace(
                transmitted=self.attacker.transmitted,
                bus_off=self.attacker.node.bus_off,
                captured=len(self.attacker.log),
                faults=len(self.attacker.faults),
            )
        for name in wanted:
            module = sim.modules.get(name)
            if module is not None:
                names[name] = SimpleNamespace(**module.snapshot())
        return names

    def _check(self, a, now_us):
        if self.verdicts.get(a) is False:
            return
        try:
            ok = bool(evaluate(a.expr, self.names(now_us, a.names())))
        except (PrintCanError, TypeError, ZeroDivisionError) as exc:
            self.faults.append(f"assertion {a.text!r}: {exc}")
            ok = False
        self.verdicts[a] = ok

    # -- run --------------------------------------------------------------
    def run(self):
        sim = self.sim
        self._schedule()
        try:
            sim.run_until(sim.ticks(self.spec.duration))
        except PrintCanError as exc:
            self.faults.append(f"simulation stopped: {exc}")
        if sim.registration_error is not None:
            self.faults.append(str(sim.registration_error))
        for a in self.spec.assertions:
            if a.kind == "final":
                self._check(a, self._now_us())
            elif self.verdicts.get(a) is None:
                self.faults.append(f"assertion {a.text!r} was never evaluated")
                self.verdicts[a] = False
        return self.records, self.report()

    def report(self):
        spec, sim = self.spec, self.sim
        categories = {c: [] for c in CATEGORIES}
        uncategorized = []
        if self.attacker is not None:
            self.faults.extend(self.attacker.faults)
            for rec in self.attacker.records:
                evidence = self.attacker.evidence(rec)
                affected = sorted(set(rec.ids) | set(evidence))
                buckets = {}
                for ident in affected:
                    try:
                        cat = classify_frame(ident, spec.topology)
                    except UnknownId:
                        cat = None
                    buckets.setdefault(cat, []).append(ident)
                if not affected:
                    buckets[None] = []
                for cat, ids in buckets.items():
                    entry = {
                        "primitive": rec.name,
                        "start": round(sim.seconds(rec.start), 6),
                        "end": None if rec.end is None else round(sim.seconds(rec.end), 6),
                        "ids": [_hex(i) for i in ids],
                        "evidence": {_hex(i): evidence.get(i, 0) for i in ids},
                    }
                    (categories[cat] if cat else uncategorized).append(entry)

        delivered, destroyed, by_id = 0, 0, {}
        for ev in sim.bus.history:
            if ev.kind is EventKind.FRAME_DELIVERED:
                delivered += 1
                by_id[_hex(ev.frame.id)] = by_id.get(_hex(ev.frame.id), 0) + 1
            elif ev.kind is EventKind.FRAME_DESTROYED:
                destroyed += 1
        verdicts = [{"assertion": a.text, "passed": bool(self.verdicts.get(a))} for a in spec.assertions]
        return {
            "scenario": spec.name,
            "seed": self.seed,
            "bitrate": spec.bitrate,
            "duration": spec.duration,
            "categories": categories,
            "compromised": {c: bool(categories[c]) for c in CATEGORIES},
            "uncategorized": uncategorized,
            "verdicts": verdicts,
            "faults": self.faults,
            "frames": {"delivered": delivered, "destroyed": destroyed, "by_id": dict(sorted(by_id.items()))},
            "final_state": {name: _clean(m.snapshot()) for name, m in sim.modules.items()},
            "passed": all(v["passed"] for v in verdicts),
        }


def _clean(snapshot):
    out = {}
    for key, value in snapshot.items():
        if isinstance(value, float) and not math.isfinite(value):
            value = None
        out[key] = value
    return out


def execute(spec, seed=None):
    """Run ``spec``; returns the :class:`ScenarioRun` for inspection."""
    run = ScenarioRun(spec, seed)
    run.trace, run.impact = run.run()
    return run


def run_scenario(spec, seed=None):
    """Run ``spec`` and return ``(trace records, impact report)``."""
    run = execute(spec, seed)
    return run.trace, run.impact


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def verify(trace, assertions):
    """Re-check trace-count assertions against stored records.

    Returns ``[(assertion, verdict)]`` where verdict is True, False, or
    None for assertions that need live module state.
    """
    counter = TraceCounter(trace)
    times = sorted({r.timestamp_us for r in counter.records})
    results = []
    for a in assertions:
        if not a.offline():
            results.append((a, None))
            continue

        def check(now_us):
            names = _math_names()
            names["count"] = lambda id=None, t1=None, t2=None: counter.count(now_us, id, t1, t2)
            return bool(evaluate(a.expr, names))

        if a.kind == "at":
            ok = check(_seconds_to_us(a.t1))
        elif a.kind == "final":
            ok = check(times[-1] if times else 0)
        else:
            lo, hi = _seconds_to_us(a.t1), _seconds_to_us(a.t2)
            ok = all(check(t) for t in [lo] + [t for t in times if lo < t < hi] + [hi])
        results.append((a, ok))
    return results

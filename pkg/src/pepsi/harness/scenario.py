"""Scenario files and the deterministic multi-party runner.

A scenario is plain text, one event per line, ``#`` starts a comment and
tokens are split shell-style (quote identifiers that contain spaces)::

    instantiation ibe
    seed 7
    node n1 "temperature|san francisco"
    querier alice
    register n1
    authorize alice "temperature|san francisco"
    subscribe alice "temperature|san francisco"
    report n1 21.5C
    expect alice 21.5C

Header directives: ``instantiation {ibe|oprf}``, ``seed N``,
``modulus BITS`` (OPRF only, default 2048), ``node NAME ID`` and
``querier NAME``.  Events: ``register NODE``, ``authorize QUERIER ID``,
``subscribe QUERIER ID``, ``report NODE PAYLOAD``, ``drain QUERIER``,
``expect QUERIER [PAYLOAD ...]`` and ``renew [evict NODE ...]`` (IBE only).

``expect`` drains the querier first and compares the multiset of payloads
it decrypted since its previous ``expect``.

The runner keeps the cleartext ground truth (who reported what under
which identifier) on its own side.  The :class:`~pepsi.broker.Broker` it
drives only ever receives stripped envelopes and subscription uploads.
"""

from __future__ import annotations

import json
import random
import shlex
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

from pepsi import oprf, protocol
from pepsi.broker import Broker, StaleEpochError, relay_strip
from pepsi.identifiers import canonical_id
from pepsi.symmetric import DecryptionError
from pepsi.wire import TransportFrame

INSTANTIATIONS = ("ibe", "oprf")
EVENTS = ("register", "authorize", "subscribe", "report", "drain", "expect", "renew")
HANDLE_BYTES = 16


class ScenarioError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Event:
    line: int
    kind: str
    args: tuple


@dataclass
class Scenario:
    instantiation: str = "ibe"
    seed: int = 0
    modulus_bits: int = oprf.DEFAULT_MODULUS_BITS
    nodes: dict = field(default_factory=dict)  # name -> canonical id
    queriers: list = field(default_factory=list)
    events: list = field(default_factory=list)


def parse_scenario(text: str) -> Scenario:
    sc = Scenario()
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioError(lineno, str(exc)) from None
        if not tokens:
            continue
        head, args = tokens[0], tokens[1:]

        def need(n: int, usage: str) -> None:
            if len(args) != n:
                raise ScenarioError(lineno, f"usage: {usage}")

        if head == "instantiation":
            need(1, "instantiation {ibe|oprf}")
            if args[0] not in INSTANTIATIONS:
                raise ScenarioError(lineno, f"unknown instantiation {args[0]!r}")
            if sc.events:
                raise ScenarioError(lineno, "instantiation must precede all events")
            sc.instantiation = args[0]
        elif head == "seed":
            need(1, "seed N")
            try:
                sc.seed = int(args[0])
            except ValueError:
                raise ScenarioError(lineno, f"seed must be an integer, got {args[0]!r}") from None
        elif head == "modulus":
            need(1, "modulus BITS")
            if not args[0].isdigit() or int(args[0]) < oprf.MIN_MODULUS_BITS:
                raise ScenarioError(lineno, f"modulus must be an integer >= {oprf.MIN_MODULUS_BITS}")
            sc.modulus_bits = int(args[0])
        elif head == "node":
            need(2, "node NAME ID")
            if args[0] in sc.nodes or args[0] in sc.queriers:
                raise ScenarioError(lineno, f"party {args[0]!r} declared twice")
            try:
                sc.nodes[args[0]] = canonical_id(args[1])
            except ValueError as exc:
                raise ScenarioError(lineno, str(exc)) from None
        elif head == "querier":
            need(1, "querier NAME")
            if args[0] in sc.nodes or args[0] in sc.queriers:
                raise ScenarioError(lineno, f"party {args[0]!r} declared twice")
            sc.queriers.append(args[0])
        elif head in EVENTS:
            sc.events.append(Event(lineno, head, tuple(_check_event(sc, lineno, head, args))))
        else:
            raise ScenarioError(lineno, f"unknown directive {head!r}")
    if sc.instantiation == "oprf" and any(e.kind == "renew" for e in sc.events):
        line = next(e.line for e in sc.events if e.kind == "renew")
        raise ScenarioError(line, "renew is only defined for the ibe instantiation")
    return sc


def _check_event(sc: Scenario, lineno: int, kind: str, args: list) -> list:
    def node(name):
        if name not in sc.nodes:
            raise ScenarioError(lineno, f"undeclared node {name!r}")
        return name

    def querier(name):
        if name not in sc.queriers:
            raise ScenarioError(lineno, f"undeclared querier {name!r}")
        return name

    def ident(text):
        try:
            return canonical_id(text)
        except ValueError as exc:
            raise ScenarioError(lineno, str(exc)) from None

    if kind == "register":
        if len(args) != 1:
            raise ScenarioError(lineno, "usage: register NODE")
        return [node(args[0])]
    if kind in ("authorize", "subscribe"):
        if len(args) != 2:
            raise ScenarioError(lineno, f"usage: {kind} QUERIER ID")
        return [querier(args[0]), ident(args[1])]
    if kind == "report":
        if len(args) != 2:
            raise ScenarioError(lineno, "usage: report NODE PAYLOAD")
        return [node(args[0]), args[1]]
    if kind == "drain":
        if len(args) != 1:
            raise ScenarioError(lineno, "usage: drain QUERIER")
        return [querier(args[0])]
    if kind == "expect":
        if not args:
            raise ScenarioError(lineno, "usage: expect QUERIER [PAYLOAD ...]")
        return [querier(args[0]), *args[1:]]
    # renew [evict NODE ...]
    if args and args[0] != "evict":
        raise ScenarioError(lineno, "usage: renew [evict NODE ...]")
    return [node(n) for n in args[1:]]


@lru_cache(maxsize=8)
def _rsa_keys(bits: int, seed: int):
    # Safe-prime search dominates OPRF scenario cost; cache by (bits, seed).
    return oprf.oprf_setup(bits, random.Random(f"rsa-{bits}-{seed}"))


@dataclass
class ScenarioResult:
    verdict: str
    transcript: list
    failures: list
    delivered: dict  # querier -> Counter of payloads
    oracle: dict  # querier -> Counter of payloads
    oracle_consistent: bool
    cross_epoch: int = 0  # deliveries whose report epoch differs from the subscription's

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def transcript_bytes(self) -> bytes:
        return "\n".join(json.dumps(rec, sort_keys=True, separators=(",", ":")) for rec in self.transcript).encode() + b"\n"


class _Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.rng = random.Random(sc.seed)
        self.broker = Broker()
        self.transcript: list = []
        self.failures: list = []
        self.clock = 0
        if sc.instantiation == "ibe":
            self.ra = protocol.RegistrationAuthority.setup(self.rng)
        else:
            self.rsa_params, self.rsa_secret = _rsa_keys(sc.modulus_bits, sc.seed)
        # node name -> (params, credential) as last handed to it
        self.node_keys: dict = {}
        # querier -> id -> authorization
        self.auths: dict = {q: {} for q in sc.queriers}
        # querier -> handle -> subscription secret
        self.subs: dict = {q: {} for q in sc.queriers}
        self.handles: dict = {}  # (querier, id, epoch) -> handle
        self.received: dict = {q: [] for q in sc.queriers}
        self.since_expect: dict = {q: Counter() for q in sc.queriers}
        # cleartext ground truth, never shown to the broker
        self.truth_reports: list = []  # (id, epoch, payload, report_id)
        self.truth_subs: set = set()  # (querier, id, epoch)
        self.cross_epoch = 0

    # -- helpers -------------------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.ra.params.epoch if self.sc.instantiation == "ibe" else 0

    def log(self, ev: Event, **rec) -> None:
        rec = {"seq": len(self.transcript), "line": ev.line, "event": ev.kind, **rec}
        self.transcript.append(rec)

    def handle_for(self, q: str, ident: bytes) -> bytes:
        key = (q, ident, self.epoch)
        if key not in self.handles:
            # drawn from the run's rng, so unrelated to the identifier
            self.handles[key] = self.rng.randbytes(HANDLE_BYTES)
        return self.handles[key]

    # -- events --------------------------------------------------------------

    def register(self, ev: Event, name: str) -> None:
        ident = self.sc.nodes[name]
        if self.sc.instantiation == "ibe":
            self.node_keys[name] = (self.ra.params, self.ra.register_node(name, ident))
        else:
            sig = oprf.obtain_signature(self.rsa_params, self.rsa_secret, ident, rng=self.rng)
            self.node_keys[name] = (self.rsa_params, sig)
        self.log(ev, node=name, epoch=self.epoch)

    def authorize(self, ev: Event, q: str, ident: bytes) -> None:
        if self.sc.instantiation == "ibe":
            state, mu = protocol.request_authorization(self.ra.params, ident, self.rng)
            auth = protocol.complete_authorization(self.ra.params, state, *self.ra.grant_authorization(mu))
            seen = mu.to_bytes().hex()
        else:
            state, mu = oprf.blind(self.rsa_params, ident, self.rng)
            auth = oprf.unblind(self.rsa_params, state, oprf.sign_blinded(self.rsa_secret, mu))
            seen = format(mu, "x")
        self.auths[q][ident] = auth
        self.log(ev, querier=q, authority_view=seen)

    def subscribe(self, ev: Event, q: str, ident: bytes) -> None:
        auth = self.auths[q].get(ident)
        if auth is None:
            raise ScenarioError(ev.line, f"querier {q!r} is not authorized for {ident.decode()!r}")
        handle = self.handle_for(q, ident)
        if self.sc.instantiation == "ibe":
            sub, upload = protocol.subscribe(self.ra.params, auth, handle)
        else:
            sub, upload = oprf.oprf_subscribe(auth, handle)
        self.subs[q][handle] = sub
        self.truth_subs.add((q, ident, self.epoch))
        new = self.broker.accept_subscription(upload.to_bytes())
        self.log(ev, querier=q, upload=upload.to_bytes().hex(), new=new)

    def report(self, ev: Event, name: str, payload: str) -> None:
        if name not in self.node_keys:
            raise ScenarioError(ev.line, f"node {name!r} is not registered")
        params, cred = self.node_keys[name]
        data = payload.encode()
        if self.sc.instantiation == "ibe":
            env = protocol.produce_report(params, cred, data, self.rng)
        else:
            env = oprf.oprf_produce_report(cred, data, self.rng)
        self.clock += 1
        frame = TransportFrame(env, sender=name.encode(), cell=b"cell-%d" % (self.clock % 7), timestamp=self.clock)
        stripped = relay_strip(frame)
        unstripped = {
            "sender": name,
            "cell": frame.cell.decode(),
            "timestamp": frame.timestamp,
            "envelope": env.to_bytes().hex(),
        }
        try:
            rid = self.broker.accept_report(stripped.to_bytes())
        except StaleEpochError as exc:
            self.log(ev, node=name, unstripped=unstripped, stripped=stripped.to_bytes().hex(), rejected=str(exc))
            return
        self.truth_reports.append((cred.id, env.epoch if env.epoch is not None else 0, data, rid))
        self.log(ev, node=name, unstripped=unstripped, stripped=stripped.to_bytes().hex(), report_id=rid)

    def drain(self, ev: Event, q: str) -> list:
        got = []
        for handle in sorted(self.subs[q]):
            sub = self.subs[q][handle]
            for env in self.broker.drain_deliveries(handle):
                if self.sc.instantiation == "ibe" and env.epoch != sub.epoch:
                    self.cross_epoch += 1
                    self.failures.append(f"line {ev.line}: {q} received a report from epoch {env.epoch} on an epoch {sub.epoch} subscription")
                try:
                    if self.sc.instantiation == "ibe":
                        m = protocol.open_notification(sub, env)
                    else:
                        m = oprf.oprf_open_notification(sub, env)
                except DecryptionError:
                    self.failures.append(f"line {ev.line}: {q} received an undecryptable report")
                    continue
                got.append(m.payload)
        self.received[q] += got
        self.since_expect[q].update(got)
        self.log(ev, querier=q, payloads=[p.decode(errors="replace") for p in got])
        return got

    def expect(self, ev: Event, q: str, *payloads: str) -> None:
        self.drain(Event(ev.line, "drain", (q,)), q)
        want = Counter(p.encode() for p in payloads)
        have, self.since_expect[q] = self.since_expect[q], Counter()
        ok = have == want
        if not ok:
            self.failures.append(
                f"line {ev.line}: {q} expected {sorted(want.elements())} got {sorted(have.elements())}"
            )
        self.log(ev, querier=q, ok=ok)

    def renew(self, ev: Event, *evict: str) -> None:
        for name in evict:
            self.ra.evict(name)
        out = self.ra.renew(self.rng)
        purge = self.broker.epoch_advance(self.ra.params.epoch)
        for name, cred in out:
            if name in self.node_keys:
                self.node_keys[name] = (self.ra.params, cred)
        self.log(
            ev,
            epoch=self.ra.params.epoch,
            evicted=sorted(evict),
            redistributed=[n for n, _ in out if n in self.node_keys],
            purged=[purge.subscriptions, purge.reports],
        )

    # -- driver --------------------------------------------------------------

    def run(self) -> ScenarioResult:
        for ev in self.sc.events:
            getattr(self, ev.kind)(ev, *ev.args)
        for q in self.sc.queriers:  # quiescence
            self.drain(Event(0, "drain", (q,)), q)
        oracle = self.oracle()
        delivered = {q: Counter(self.received[q]) for q in self.sc.queriers}
        consistent = delivered == oracle
        if not consistent:
            for q in self.sc.queriers:
                if delivered[q] != oracle[q]:
                    self.failures.append(f"{q}: delivered payloads differ from the cleartext oracle")
        verdict = "PASS" if not self.failures else "FAIL"
        self.transcript.append({"seq": len(self.transcript), "event": "verdict", "verdict": verdict, "failures": self.failures})
        return ScenarioResult(verdict, self.transcript, self.failures, delivered, oracle, consistent, self.cross_epoch)

    def oracle(self) -> dict:
        """Every report whose identifier and epoch equal a subscription's, once
        per distinct (querier, identifier, epoch)."""
        out = {q: Counter() for q in self.sc.queriers}
        for q, ident, epoch in self.truth_subs:
            for rid_ident, r_epoch, payload, _ in self.truth_reports:
                if rid_ident == ident and r_epoch == epoch:
                    out[q][payload] += 1
        return out


def run_scenario(scenario: Scenario | str) -> ScenarioResult:
    if isinstance(scenario, str):
        scenario = parse_scenario(scenario)
    return _Runner(scenario).run()


def random_scenario(
    rng: random.Random,
    instantiation: str = "ibe",
    nodes: int = 5,
    ids: int = 3,
    queriers: int = 4,
    events: int = 40,
    seed: int | None = None,
    modulus_bits: int | None = None,
) -> str:
    """A random well-formed scenario with no ``expect`` lines; its outcome is
    judged by the cleartext oracle alone."""
    idents = [f"kw{rng.randrange(10**6)}|city{i}" for i in range(ids)]
    lines = [f"instantiation {instantiation}", f"seed {rng.randrange(2**32) if seed is None else seed}"]
    if modulus_bits:
        lines.append(f"modulus {modulus_bits}")
    node_ids = {f"n{i}": rng.choice(idents) for i in range(nodes)}
    lines += [f'node {n} "{i}"' for n, i in node_ids.items()]
    lines += [f"querier q{i}" for i in range(queriers)]
    lines += [f"register {n}" for n in node_ids]
    for q in range(queriers):
        for ident in rng.sample(idents, rng.randint(1, ids)):
            lines.append(f'authorize q{q} "{ident}"')
    authorized = [l.split(None, 2)[1:] for l in lines if l.startswith("authorize")]
    for k in range(events):
        roll = rng.random()
        if roll < 0.5:
            lines.append(f"report n{rng.randrange(nodes)} p{k}")
        elif roll < 0.85:
            q, ident = rng.choice(authorized)
            lines.append(f"subscribe {q} {ident}")
        else:
            lines.append(f"drain q{rng.randrange(queriers)}")
    return "\n".join(lines) + "\n"

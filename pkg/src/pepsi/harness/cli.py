"""Command-line front end: ``pepsi [--instantiation ibe|oprf] [--home DIR]
[--state FILE] <command> ...``.

Keys live as JSON under ``--home``; broker state is a snapshot file given
by ``--state``.  Each command loads what it needs, acts, and writes back.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from pepsi import oprf, protocol
from pepsi.broker import Broker, BrokerError, relay_strip
from pepsi.harness.bench import PRESETS, bench
from pepsi.harness.counting import STEPS, compare_table2, count_ops
from pepsi.harness.scenario import ScenarioError, parse_scenario, run_scenario
from pepsi.harness.store import (
    Home,
    dump_authorization,
    dump_credential,
    dump_pepsi,
    dump_rsa,
    dump_subscription,
    load_authorization,
    load_credential,
    load_pepsi,
    load_rsa,
    load_subscription,
)
from pepsi.identifiers import canonical_id
from pepsi.symmetric import DecryptionError
from pepsi.wire import TransportFrame


def _broker(args) -> Broker:
    if args.state and Path(args.state).exists():
        return Broker.restore(Path(args.state).read_bytes())
    return Broker()


def _save_broker(args, b: Broker) -> None:
    if args.state:
        Path(args.state).write_bytes(b.snapshot())


def _authority(args):
    d = args.home_.read("authority.json")
    if d["instantiation"] != args.instantiation:
        raise SystemExit(f"home was set up for {d['instantiation']}, not {args.instantiation}")
    if args.instantiation == "ibe":
        return load_pepsi(d["keys"])
    return load_rsa(d["keys"])


def _public_params(args):
    d = args.home_.read("public.json")
    return load_pepsi(d["keys"])[0] if args.instantiation == "ibe" else load_rsa(d["keys"])[0]


def cmd_setup(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else None
    if args.instantiation == "ibe":
        params, secret = protocol.pepsi_setup(rng=rng)
        keys, public = dump_pepsi(params, secret), dump_pepsi(params)
    else:
        params, secret = oprf.oprf_setup(args.modulus, rng)
        keys, public = dump_rsa(params, secret), dump_rsa(params)
    args.home_.write({"instantiation": args.instantiation, "keys": keys, "registry": {}, "evicted": []}, "authority.json")
    args.home_.write({"instantiation": args.instantiation, "keys": public}, "public.json")
    _save_broker(args, Broker())
    print(f"{args.instantiation} setup written to {args.home_.root}")
    return 0


def cmd_register_node(args) -> int:
    ident = canonical_id(args.id)
    params, secret = _authority(args)
    if args.instantiation == "ibe":
        cred = protocol.register_node(secret, params, ident)
    else:
        cred = oprf.obtain_signature(params, secret, ident, mode=args.mode)
    auth = args.home_.read("authority.json")
    auth["registry"][args.name] = ident.hex()
    auth["evicted"] = [n for n in auth["evicted"] if n != args.name]
    args.home_.write(auth, "authority.json")
    args.home_.write({"name": args.name, "credential": dump_credential(cred)}, "nodes", f"{args.name}.json")
    print(f"registered {args.name}")
    return 0


def _querier(args) -> dict:
    if args.home_.exists("queriers", f"{args.querier}.json"):
        return args.home_.read("queriers", f"{args.querier}.json")
    return {"name": args.querier, "authorizations": {}, "subscriptions": {}}


def cmd_authorize(args) -> int:
    ident = canonical_id(args.id)
    params, secret = _authority(args)
    if args.instantiation == "ibe":
        auth = protocol.authorize_query(params, secret, ident)
    else:
        auth = oprf.obtain_signature(params, secret, ident)
    q = _querier(args)
    q["authorizations"][ident.hex()] = dump_authorization(auth)
    args.home_.write(q, "queriers", f"{args.querier}.json")
    print(f"authorized {args.querier} for {ident.decode()}")
    return 0


def cmd_subscribe(args) -> int:
    ident = canonical_id(args.id)
    q = _querier(args)
    if ident.hex() not in q["authorizations"]:
        print(f"error: {args.querier} is not authorized for {ident.decode()}", file=sys.stderr)
        return 2
    auth = load_authorization(q["authorizations"][ident.hex()])
    handle = random.SystemRandom().randbytes(16)
    if args.instantiation == "ibe":
        sub, upload = protocol.subscribe(_public_params(args), auth, handle)
    else:
        sub, upload = oprf.oprf_subscribe(auth, handle)
    b = _broker(args)
    b.accept_subscription(upload.to_bytes())
    _save_broker(args, b)
    q["subscriptions"][handle.hex()] = dump_subscription(sub)
    args.home_.write(q, "queriers", f"{args.querier}.json")
    print(handle.hex())
    return 0


def cmd_report(args) -> int:
    cred = load_credential(args.home_.read("nodes", f"{args.node}.json")["credential"])
    if args.instantiation == "ibe":
        try:
            env = protocol.produce_report(_public_params(args), cred, args.payload.encode())
        except protocol.StaleCredentialError as exc:
            print(f"rejected: {exc}", file=sys.stderr)
            return 1
    else:
        env = oprf.oprf_produce_report(cred, args.payload.encode())
    b = _broker(args)
    try:
        rid = b.accept_report(relay_strip(TransportFrame(env, sender=args.node.encode())).to_bytes())
    except BrokerError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 1
    _save_broker(args, b)
    print(rid)
    return 0


def cmd_match(args) -> int:
    b = _broker(args)
    new = b.match_all()
    _save_broker(args, b)
    print(f"{len(new)} new deliveries, {b.pending_count()} pending")
    return 0


def cmd_drain(args) -> int:
    q = _querier(args)
    b = _broker(args)
    status = 0
    for handle_hex, d in sorted(q["subscriptions"].items()):
        sub = load_subscription(d)
        for env in b.drain_deliveries(bytes.fromhex(handle_hex)):
            try:
                m = protocol.open_notification(sub, env) if args.instantiation == "ibe" else oprf.oprf_open_notification(sub, env)
            except DecryptionError as exc:
                print(f"error: {exc}", file=sys.stderr)
                status = 1
                continue
            print(m.payload.decode(errors="replace"))
    _save_broker(args, b)
    return status


def cmd_renew(args) -> int:
    if args.instantiation != "ibe":
        print("error: renew is only defined for the ibe instantiation", file=sys.stderr)
        return 2
    auth = args.home_.read("authority.json")
    params, secret = load_pepsi(auth["keys"])
    evicted = set(auth["evicted"]) | set(args.evict or ())
    registry = {n: bytes.fromhex(i) for n, i in auth["registry"].items()}
    secret, params, out = protocol.renew_nonce(secret, params, registry, evicted)
    auth["keys"], auth["evicted"] = dump_pepsi(params, secret), sorted(evicted)
    args.home_.write(auth, "authority.json")
    args.home_.write({"instantiation": "ibe", "keys": dump_pepsi(params)}, "public.json")
    for name, cred in out:
        args.home_.write({"name": name, "credential": dump_credential(cred)}, "nodes", f"{name}.json")
    b = _broker(args)
    purge = b.epoch_advance(params.epoch)
    _save_broker(args, b)
    print(f"epoch {params.epoch}: {len(out)} nodes renewed, purged {purge.subscriptions} subscriptions and {purge.reports} reports")
    return 0


def cmd_run(args) -> int:
    text = Path(args.scenario).read_text()
    try:
        sc = parse_scenario(text)
    except ScenarioError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        sc.seed = args.seed
    result = run_scenario(sc)
    if args.transcript:
        Path(args.transcript).write_bytes(result.transcript_bytes())
    for f in result.failures:
        print(f, file=sys.stderr)
    print(result.verdict)
    return 0 if result.passed else 1


def cmd_bench(args) -> int:
    rep = bench(args.instantiation, args.preset, args.iterations)
    print(rep.to_json())
    return 0


def cmd_count_ops(args) -> int:
    c = count_ops(args.instantiation, args.step)
    print(json.dumps({"counters": c.as_dict(), "table2": compare_table2(args.instantiation, args.step, c)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pepsi", description="Privacy-enhanced participatory sensing toolkit")
    p.add_argument("--instantiation", choices=("ibe", "oprf"), default="ibe")
    p.add_argument("--home", default=".pepsi", help="directory holding key files (default: .pepsi)")
    p.add_argument("--state", help="broker snapshot file")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", help="generate authority keys")
    s.add_argument("--seed", type=int)
    s.add_argument("--modulus", type=int, default=oprf.DEFAULT_MODULUS_BITS)
    s.set_defaults(fn=cmd_setup)

    s = sub.add_parser("register-node", help="issue a node credential")
    s.add_argument("name")
    s.add_argument("id")
    s.add_argument("--mode", choices=("blind", "plain"), default="blind")
    s.set_defaults(fn=cmd_register_node)

    s = sub.add_parser("authorize", help="blindly authorize a querier for an identifier")
    s.add_argument("querier")
    s.add_argument("id")
    s.set_defaults(fn=cmd_authorize)

    s = sub.add_parser("subscribe", help="upload a subscription tag to the broker")
    s.add_argument("querier")
    s.add_argument("id")
    s.set_defaults(fn=cmd_subscribe)

    s = sub.add_parser("report", help="send an encrypted report through the relay")
    s.add_argument("node")
    s.add_argument("payload")
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("match", help="run blind matching over stored reports")
    s.set_defaults(fn=cmd_match)

    s = sub.add_parser("drain", help="fetch and decrypt a querier's deliveries")
    s.add_argument("querier")
    s.set_defaults(fn=cmd_drain)

    s = sub.add_parser("renew", help="rotate the nonce and advance the epoch")
    s.add_argument("--evict", nargs="*", metavar="NODE")
    s.set_defaults(fn=cmd_renew)

    s = sub.add_parser("run", help="execute a scenario file")
    s.add_argument("scenario")
    s.add_argument("--seed", type=int)
    s.add_argument("--transcript", help="write the transcript here")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("bench", help="time protocol steps")
    s.add_argument("--preset", choices=sorted(PRESETS), default="ibe-default")
    s.add_argument("--iterations", type=int, default=100)
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("count-ops", help="count group operations for one step")
    s.add_argument("--step", choices=STEPS, required=True)
    s.set_defaults(fn=cmd_count_ops)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.home_ = Home(args.home)
    try:
        return args.fn(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

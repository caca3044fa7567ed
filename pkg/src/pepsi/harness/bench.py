"""Wall-clock micro-benchmarks of the per-party protocol steps.

No thresholds live here: absolute timings depend on the machine.  The
only claim checked elsewhere is an ordering (an OPRF report is cheaper
than an IBE report on the same host).

Record format (one JSON object)::

    {"format": "pepsi-bench/1", "instantiation": ..., "preset": ...,
     "iterations": N, "hardware": {...},
     "ops": {"<step>": {"mean_ms": .., "p50_ms": .., "p95_ms": .., "n": N}}}
"""

from __future__ import annotations

import json
import os
import platform
import random
import time
from dataclasses import dataclass, field

import numpy as np

from pepsi import oprf, protocol

FORMAT = "pepsi-bench/1"
MIN_ITERATIONS = 100
PRESETS = {
    "paper-1024-rsa": {"rsa_bits": 1024},
    "modern-2048-rsa": {"rsa_bits": 2048},
    "ibe-default": {"rsa_bits": 2048},
}
ID = b"pollution|manhattan"


@dataclass
class BenchReport:
    instantiation: str
    preset: str
    iterations: int
    ops: dict = field(default_factory=dict)
    hardware: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": FORMAT,
                "instantiation": self.instantiation,
                "preset": self.preset,
                "iterations": self.iterations,
                "hardware": self.hardware,
                "ops": self.ops,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        d = json.loads(text)
        if d.get("format") != FORMAT:
            raise ValueError("not a bench record")
        for name, s in d["ops"].items():
            if set(s) != {"mean_ms", "p50_ms", "p95_ms", "n"}:
                raise ValueError(f"bad statistics for {name!r}")
        return cls(d["instantiation"], d["preset"], d["iterations"], d["ops"], d["hardware"])


def hardware_note() -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "cpus": os.cpu_count(),
        "python": platform.python_version(),
        "system": platform.system(),
        "note": "timings are host-specific; compare orderings, not absolute values",
    }


def _stats(samples_ns: list) -> dict:
    ms = np.asarray(samples_ns, dtype=float) / 1e6
    return {
        "mean_ms": float(ms.mean()),
        "p50_ms": float(np.percentile(ms, 50)),
        "p95_ms": float(np.percentile(ms, 95)),
        "n": int(ms.size),
    }


def _time(fn, iterations: int) -> dict:
    fn()  # warm-up
    samples = []
    for _ in range(iterations):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return _stats(samples)


def bench(instantiation: str, preset: str = "ibe-default", iterations: int = MIN_ITERATIONS, rng=None) -> BenchReport:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"at least {MIN_ITERATIONS} iterations are required")
    rng = rng or random.Random(7)
    ops = {}
    if instantiation == "ibe":
        params, secret = protocol.pepsi_setup(rng=rng)
        cred = protocol.register_node(secret, params, ID)
        auth = protocol.authorize_query(params, secret, ID, rng)
        sub, _ = protocol.subscribe(params, auth)
        env = protocol.produce_report(params, cred, b"42", rng)
        ops["data_report"] = _time(lambda: protocol.produce_report(params, cred, b"42", rng), iterations)
        ops["query_authorization"] = _time(lambda: protocol.authorize_query(params, secret, ID, rng), iterations)
        ops["query_subscription"] = _time(lambda: protocol.subscribe(params, auth), iterations)
        ops["notification"] = _time(lambda: protocol.open_notification(sub, env), iterations)
    elif instantiation == "oprf":
        params, secret = oprf.oprf_setup(PRESETS[preset]["rsa_bits"], rng)
        sig = oprf.obtain_signature(params, secret, ID, rng=rng)
        sub, _ = oprf.oprf_subscribe(sig)
        env = oprf.oprf_produce_report(sig, b"42", rng)
        ops["data_report"] = _time(lambda: oprf.oprf_produce_report(sig, b"42", rng), iterations)
        ops["node_registration"] = _time(lambda: oprf.obtain_signature(params, secret, ID, rng=rng), iterations)
        ops["query_subscription"] = _time(lambda: oprf.oprf_subscribe(sig), iterations)
        ops["notification"] = _time(lambda: oprf.oprf_open_notification(sub, env), iterations)
    else:
        raise ValueError(f"unknown instantiation {instantiation!r}")
    return BenchReport(instantiation, preset, iterations, ops, hardware_note())

"""Command-line front end: single runs, figure-style sweeps, verification.

Exit codes: 0 completed, 1 usage error (machine-readable error JSON on
stdout), 2 protocol failure (report still emitted).  Every flag has a
config-file equivalent (flat key=value, flag name with underscores);
explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import oracle
from .errors import SecAggError
from .field import FieldPrime, encode_vec
from .masking import DH_GROUP_2048, DH_GROUP_TEST, LweParams
from .protocol.rounds import LWE, NV, PW, STAGES, RoundConfig
from .shamir import Share, reconstruct_vector, share_vector
from .simnet import (
    SimConfig,
    meter_expectations,
    metrics_match_expectations,
    run_simulation,
)

PROTOCOLS = (NV, LWE, PW)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we want JSON + 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="secaggsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one simulated aggregation")
    run.add_argument("--protocol", choices=PROTOCOLS)
    run.add_argument("--clients", type=int)
    run.add_argument("--model-size", type=int)
    run.add_argument("--dropout-rate", type=float)
    run.add_argument("--dropout-stage",
                     help="stage label or 'uniform' (default)")
    run.add_argument("--threshold", type=int,
                     help="Shamir threshold t; defaults to floor(n/2)+1")
    run.add_argument("--seed", type=int)
    run.add_argument("--config", help="key=value file; flags override it")
    run.add_argument("--pack-width", type=int,
                     help="secrets per share polynomial; default auto")
    run.add_argument("--sigma", type=float, help="LWE noise parameter")
    run.add_argument("--rounds", type=int)
    run.add_argument("--dh-profile", choices=("2048", "test"))
    run.add_argument("--personal-mask", choices=("on", "off"))

    sweep = sub.add_parser("sweep", help="grid of runs, CSV out")
    sweep.add_argument("--protocols")
    sweep.add_argument("--clients")
    sweep.add_argument("--model-sizes")
    sweep.add_argument("--dropout-rates")
    sweep.add_argument("--repetitions", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--dh-profile", choices=("2048", "test"))
    sweep.add_argument("--config", help="key=value file; flags override it")
    sweep.add_argument("--out", help="CSV path; stdout when omitted")

    verify = sub.add_parser("verify", help="oracle property suite")
    verify.add_argument("--quick", action="store_true")
    verify.add_argument("--fault-inject", action="store_true",
                        help="negative control: corrupt one share payload")
    return p


# --- run ------------------------------------------------------------------------

_RUN_DEFAULTS = {
    "protocol": NV, "clients": 5, "model_size": 4, "dropout_rate": 0.0,
    "dropout_stage": "uniform", "threshold": None, "seed": 0,
    "pack_width": None, "sigma": 3.0, "rounds": 1, "dh_profile": "2048",
    "personal_mask": "on",
}

_CASTS = {
    "clients": int, "model_size": int, "dropout_rate": float,
    "threshold": int, "seed": int, "pack_width": int, "sigma": float,
    "rounds": int,
}


def _load_config_file(path: str, schema: dict = None,
                      casts: dict = None) -> dict:
    schema = _RUN_DEFAULTS if schema is None else schema
    casts = _CASTS if casts is None else casts
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip().replace("-", "_")
            raw = raw.strip()
            if key not in schema:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = casts.get(key, str)(raw) if raw != "" else None
    return values


def _resolve_run_settings(args) -> dict:
    settings = dict(_RUN_DEFAULTS)
    if args.config:
        settings.update(_load_config_file(args.config))
    for key in _RUN_DEFAULTS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            settings[key] = flag_val
    return settings


def _round_config(settings: dict) -> RoundConfig:
    n = settings["clients"]
    rate = settings["dropout_rate"]
    dh = DH_GROUP_2048 if settings["dh_profile"] == "2048" else DH_GROUP_TEST
    return RoundConfig(
        protocol=settings["protocol"],
        n=n,
        m=settings["model_size"],
        t=settings["threshold"],
        k=settings["pack_width"],
        lwe=LweParams(sigma=settings["sigma"]) if settings["protocol"] == LWE else None,
        dh=dh if settings["protocol"] == PW else None,
        personal_mask=settings["personal_mask"] == "on",
        planned_dropouts=int(rate * n),
    )


def cmd_run(args) -> int:
    settings = _resolve_run_settings(args)
    try:
        rc = _round_config(settings)
        sim = SimConfig(
            round_cfg=rc,
            master_seed=settings["seed"],
            dropout_rate=settings["dropout_rate"],
            dropout_stage_policy=settings["dropout_stage"],
            rounds=settings["rounds"],
        )
    except (SecAggError, ValueError) as exc:
        raise UsageError(str(exc))
    report = run_simulation(sim)
    print(report.to_json(indent=2))
    return 0 if report.failure is None else 2


# --- sweep ----------------------------------------------------------------------

SWEEP_COLUMNS = ("protocol", "n", "m", "rate", "stage", "wall_time_s",
                 "total_bytes", "bytes_per_client", "total_messages",
                 "field_ops", "outcome")


def _combo_seed(master: int, proto: str, n: int, m: int, rate: float,
                rep: int) -> int:
    h = hashlib.sha256(
        f"{master}|{proto}|{n}|{m}|{rate}|{rep}".encode()).digest()
    return int.from_bytes(h[:8], "big")


def _sweep_row(proto, n, m, rate, stage_policy, seed, dh):
    rc = RoundConfig(protocol=proto, n=n, m=m,
                     dh=dh if proto == PW else None,
                     planned_dropouts=int(rate * n))
    sim = SimConfig(round_cfg=rc, master_seed=seed, dropout_rate=rate,
                    dropout_stage_policy=stage_policy)
    report = run_simulation(sim)
    metr = report.metrics
    client_bytes = sum(v["bytes_sent"] for v in metr.per_client.values())
    return {
        "protocol": proto, "n": n, "m": m, "rate": rate,
        "stage": stage_policy if rate > 0 else "none",
        "wall_time_s": f"{report.wall_time:.6f}",
        "total_bytes": metr.total_bytes,
        "bytes_per_client": f"{client_bytes / n:.2f}",
        "total_messages": metr.total_messages,
        "field_ops": metr.total_field_ops,
        "outcome": "ok" if report.failure is None else report.failure.split(":")[0],
    }


_SWEEP_DEFAULTS = {
    "protocols": "nv,lwe,pw", "clients": "10,50", "model_sizes": "10,100",
    "dropout_rates": "0,0.1,0.2,0.3", "repetitions": 1, "seed": 0,
    "dh_profile": "test", "out": None,
}

_SWEEP_CASTS = {"repetitions": int, "seed": int}


def _resolve_sweep_settings(args) -> dict:
    settings = dict(_SWEEP_DEFAULTS)
    if args.config:
        settings.update(_load_config_file(args.config, _SWEEP_DEFAULTS,
                                          _SWEEP_CASTS))
    for key in _SWEEP_DEFAULTS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            settings[key] = flag_val
    return settings


def cmd_sweep(args) -> int:
    settings = _resolve_sweep_settings(args)
    protocols = [p.strip() for p in settings["protocols"].split(",")
                 if p.strip()]
    for p in protocols:
        if p not in PROTOCOLS:
            raise UsageError(f"unknown protocol {p!r}")
    clients = [int(v) for v in str(settings["clients"]).split(",")]
    sizes = [int(v) for v in str(settings["model_sizes"]).split(",")]
    rates = [float(v) for v in str(settings["dropout_rates"]).split(",")]
    repetitions = settings["repetitions"]
    master_seed = settings["seed"]
    out_path = settings["out"]
    dh = DH_GROUP_2048 if settings["dh_profile"] == "2048" else DH_GROUP_TEST
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS)
    writer.writeheader()
    for proto in protocols:
        for n in clients:
            for m in sizes:
                for rate in rates:
                    for rep in range(repetitions):
                        seed = _combo_seed(master_seed, proto, n, m, rate, rep)
                        try:
                            if rate <= 0:
                                writer.writerow(_sweep_row(
                                    proto, n, m, rate, "uniform", seed, dh))
                                continue
                            # run every stage placement; report the worst
                            # case by metered bytes (deterministic, unlike
                            # wall time)
                            rows = [_sweep_row(proto, n, m, rate, st, seed, dh)
                                    for st in STAGES[proto]]
                            worst = max(rows, key=lambda r: r["total_bytes"])
                            writer.writerow(worst)
                        except (SecAggError, ValueError) as exc:
                            writer.writerow({
                                "protocol": proto, "n": n, "m": m,
                                "rate": rate, "stage": "n/a",
                                "wall_time_s": "0", "total_bytes": 0,
                                "bytes_per_client": "0", "total_messages": 0,
                                "field_ops": 0,
                                "outcome": f"skipped:{type(exc).__name__}",
                            })
    text = buf.getvalue()
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# --- verify ---------------------------------------------------------------------


def _prop_share_consistency() -> bool:
    from itertools import combinations
    fld = FieldPrime(17)
    rng = np.random.Generator(np.random.PCG64(7))
    from .shamir import sss_share
    shares = sss_share(5, 3, 5, rng, fld).shares
    for pair in combinations(shares, 2):
        hist = oracle.brute_force_share_consistency(list(pair), 3, fld)
        if set(hist.values()) != {1}:
            return False
    hist = oracle.brute_force_share_consistency([], 3, fld)
    if set(hist.values()) != {17 ** 2}:
        return False
    fld7 = FieldPrime(7)
    hist = oracle.brute_force_share_consistency([Share(1, 3)], 2, fld7)
    return set(hist.values()) == {1}


def _prop_share_roundtrip(fault_inject: bool) -> bool:
    fld = FieldPrime()
    rng = np.random.Generator(np.random.PCG64(11))
    vec = [fld.rand(rng) for _ in range(50)]
    svs = share_vector(vec, t=3, n=7, k=4, rng=rng, field=fld)
    if fault_inject:
        svs[2].values[0] = (svs[2].values[0] + 1) % fld.q
    return reconstruct_vector(svs) == vec


def _prop_protocol_equivalence() -> bool:
    for proto, rate in ((NV, 0.0), (NV, 0.2), (PW, 0.0), (PW, 0.25),
                        (LWE, 0.0)):
        n = 8
        lwe = LweParams(n_lwe=32, sigma=1e-6) if proto == LWE else None
        rc = RoundConfig(protocol=proto, n=n, m=6, lwe=lwe,
                         dh=DH_GROUP_TEST if proto == PW else None,
                         planned_dropouts=int(rate * n))
        sim = SimConfig(round_cfg=rc, master_seed=3, dropout_rate=rate)
        report = run_simulation(sim, keep_transcript=True)
        if report.failure is not None:
            return False
        expect = oracle.plaintext_aggregate(report.inputs,
                                            report.result.contributors)
        if np.max(np.abs(report.result.average - expect)) > 2 ** -15 + 1e-5:
            return False
        if proto != LWE:
            enc = [encode_vec(report.inputs[i]) for i in
                   report.result.contributors]
            total = np.zeros(rc.m, dtype=np.uint64)
            q = np.uint64(rc.field.q)
            for e in enc:
                total = (total + e) % q
            if not np.array_equal(total, report.result.field_sum):
                return False
    return True


def _prop_trajectory_parity() -> bool:
    cfg = oracle.TrajectoryConfig(n=6, rounds=3, d=8, eta=0.2, seed=5)
    base = oracle.mini_training_trajectory(cfg, "plaintext")
    nv = oracle.mini_training_trajectory(cfg, "nv")
    gap = max(np.max(np.abs(a - b)) for a, b in zip(base, nv))
    return gap <= 3 * 2 ** -15


def _prop_metering(full: bool) -> bool:
    sizes = [(3, 10), (5, 40)] + ([(50, 10), (1000, 10)] if full else [])
    for n, m in sizes:
        rc = RoundConfig(protocol=NV, n=n, m=m)
        sim = SimConfig(round_cfg=rc, master_seed=1)
        report = run_simulation(sim)
        if report.failure is not None:
            return False
        if not metrics_match_expectations(report.metrics,
                                          meter_expectations(rc)):
            return False
    return True


def cmd_verify(args) -> int:
    checks = [
        ("share_consistency_histograms", lambda: _prop_share_consistency()),
        ("share_vector_roundtrip", lambda: _prop_share_roundtrip(args.fault_inject)),
        ("protocol_vs_plaintext", lambda: _prop_protocol_equivalence()),
        ("trajectory_parity", lambda: _prop_trajectory_parity()),
        ("metering_identity", lambda: _prop_metering(not args.quick)),
    ]
    failures = 0
    for name, fn in checks:
        try:
            ok = fn()
        except Exception as exc:  # a property crashing is a failure
            ok = False
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")
            failures += 1
            continue
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(args)
    except UsageError as exc:
        print(json.dumps({"error": str(exc)}, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""File formats: run-config loading, CSV emitters, and the run manifest.

Everything written here is deterministic for a given (config, seed): keys are
sorted, floats use repr round-tripping, and no timestamps enter the data
files (the manifest's wall-clock field is metadata, excluded from the
byte-identity contract). Every CSV this package emits can be read back by
the matching reader below.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, is_dataclass

import numpy as np

from .engine import CreditPolicy, SimulationConfig
from .kernels import ExchangeKernel
from .ledger import ConfigError, Ensemble
from .measures import DistributionEstimate

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def config_to_dict(config: SimulationConfig) -> dict:
    d = {
        "schema_version": SCHEMA_VERSION,
        "n": config.n,
        "per_capita": config.per_capita,
        "kernel": config.kernel.to_config(),
        "steps": config.steps,
        "seed": config.seed,
        "measure_every": config.measure_every,
        "m_min": config.m_min,
        "m_max": config.m_max,
        "replicas": config.replicas,
    }
    if config.credit is not None:
        d["credit"] = {
            "debt_limit": config.credit.debt_limit,
            "interest_rate": str(config.credit.interest_rate),
            "accrue_sweeps": config.credit.accrue_sweeps,
        }
    return d


def config_from_dict(d: dict) -> SimulationConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    required = ["n", "per_capita", "kernel", "steps", "seed", "measure_every"]
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"config missing fields: {missing}")
    credit = None
    if d.get("credit") is not None:
        c = d["credit"]
        credit = CreditPolicy(debt_limit=c.get("debt_limit"),
                              interest_rate=c.get("interest_rate", 0),
                              accrue_sweeps=c.get("accrue_sweeps", 1))
    try:
        return SimulationConfig(
            n=int(d["n"]), per_capita=int(d["per_capita"]),
            kernel=ExchangeKernel.from_config(d["kernel"]),
            steps=int(d["steps"]), seed=int(d["seed"]),
            measure_every=int(d["measure_every"]),
            m_min=d.get("m_min", 0), m_max=d.get("m_max"),
            credit=credit, replicas=int(d.get("replicas", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def load_config(path) -> tuple[SimulationConfig, dict]:
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} "
                          f"column {exc.colno}: {exc.msg}") from exc
    known = {"schema_version", "n", "per_capita", "kernel", "steps", "seed",
             "measure_every", "m_min", "m_max", "replicas", "credit",
             "debug_inject_fault"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{path}: unknown config fields {sorted(extra)}")
    return config_from_dict(raw), raw


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(raw_config: dict) -> str:
    return hashlib.sha256(canonical_json(raw_config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV emitters and readers
# ---------------------------------------------------------------------------

def write_trajectory_csv(path, ticks, entropy, temp, gini, ks_exp,
                         acceptance) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "entropy", "temperature", "gini", "ks_exp",
                    "acceptance_rate"])
        for row in zip(ticks, entropy, temp, gini, ks_exp, acceptance):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols: dict[str, list] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for k, v in row.items():
                cols[k].append(float(v))
    return {k: np.asarray(v) for k, v in cols.items()}


def write_histogram_csv(path, estimate: DistributionEstimate) -> None:
    """Rows of bin_lo,bin_hi,count; out-of-range mass uses +-inf edges."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        if estimate.underflow:
            w.writerow(["-inf", estimate.lo, estimate.underflow])
        edges = estimate.edges
        for k, c in enumerate(estimate.counts.tolist()):
            w.writerow([edges[k], edges[k + 1], c])
        if estimate.overflow:
            w.writerow([edges[-1], "inf", estimate.overflow])


def read_histogram_csv(path) -> DistributionEstimate:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((float(row["bin_lo"]), float(row["bin_hi"]),
                         int(row["count"])))
    if not rows:
        raise ConfigError(f"{path}: empty histogram")
    under = over = 0
    if math.isinf(rows[0][0]):
        under = rows[0][2]
        rows = rows[1:]
    if rows and math.isinf(rows[-1][1]):
        over = rows[-1][2]
        rows = rows[:-1]
    lo = int(rows[0][0])
    width = int(rows[0][1] - rows[0][0])
    counts = np.array([r[2] for r in rows], dtype=np.int64)
    support = "signed" if lo < 0 else "nonnegative"
    return DistributionEstimate(lo, width, counts, under, over, support)


def write_snapshot_csv(path, ensemble: Ensemble, debt_net=None) -> None:
    """Per-agent state CSV plus a JSON sidecar with totals and the flux log."""
    d = np.zeros(ensemble.n, dtype=np.int64) if debt_net is None else debt_net
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "money", "debt_net"])
        for a in range(ensemble.n):
            w.writerow([a, int(ensemble.money[a]), int(d[a])])
    sidecar = {
        "total_money": ensemble.total_money,
        "population": ensemble.n,
        "flux_log": [{"tick": e.tick, "agent": e.agent, "amount": e.amount,
                      "tag": e.tag} for e in ensemble.flux_log],
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_snapshot_csv(path) -> tuple[np.ndarray, np.ndarray, dict]:
    money, debt = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            money.append(int(row["money"]))
            debt.append(int(row["debt_net"]))
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    return np.array(money, np.int64), np.array(debt, np.int64), sidecar


def write_debt_csv(path, ious) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lender", "borrower", "principal", "accrued", "status"])
        for iou in ious:
            w.writerow([iou.lender, iou.borrower, iou.principal, iou.accrued,
                        iou.status])


def read_debt_csv(path) -> list:
    from .credit import Iou

    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Iou(int(row["lender"]), int(row["borrower"]),
                           int(row["principal"]), int(row["accrued"]),
                           status=row["status"]))
    return out


def write_bank_json(path, bank) -> None:
    with open(path, "w") as fh:
        json.dump({
            "R": str(bank.reserve_ratio),
            "deposits": {str(k): v for k, v in sorted(bank.deposits.items())},
            "reserves": bank.reserves,
            "loans": bank.outstanding_loans,
        }, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_bank_json(path):
    from .credit import BankState

    with open(path) as fh:
        doc = json.load(fh)
    bank = BankState(doc["R"])
    bank.deposits = {int(k): int(v) for k, v in doc["deposits"].items()}
    bank.reserves = int(doc["reserves"])
    bank.outstanding_loans = int(doc["loans"])
    return bank


def write_fp_profile_csv(path, centers, profile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "P"])
        for m, p in zip(centers, profile):
            w.writerow([repr(float(m)), repr(float(p))])


def read_fp_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    m, p = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            m.append(float(row["m"]))
            p.append(float(row["P"]))
    return np.asarray(m), np.asarray(p)


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_fit_json(path, fit) -> None:
    out = {
        "T": fit.temperature,
        "alpha": fit.alpha,
        "r_star": fit.crossover,
        "f": fit.f,
        "G_pred": fit.gini_predicted,
        "G_empirical": fit.gini_empirical,
        "mean_income": fit.mean_income,
        "diagnostics": fit.diagnostics,
    }
    with open(path, "w") as fh:
        json.dump(_jsonable(out), fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

def write_manifest(path, raw_config: dict, seed: int, outputs: list[str],
                   wall_clock_s: float, checks: dict[str, bool]) -> None:
    """Atomic manifest write: build the full document, then rename."""
    from . import __version__

    doc = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash(raw_config),
        "seed": seed,
        "version": __version__,
        "outputs": sorted(outputs),
        "wall_clock_s": wall_clock_s,
        "invariant_checks": checks,
        "passed": all(checks.values()),
    }
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)

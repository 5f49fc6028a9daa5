"""Sweep plans: check ids x parameter grids x function catalog, run in plan order."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from gausslm.errors import GaussLMError
from gausslm.estimate import Budget, worker_count
from gausslm.functions import function_from_spec, random_gauss_exp
from gausslm.verify import (
    InequalityVerdict,
    Relation,
    Status,
    check_average_identity,
    check_block_holder,
    check_chain,
    check_entropy_laplacian,
    check_entropy_stein,
    check_integration_by_parts,
    check_log_sobolev_sandwich,
    check_sqrt_moment,
    errored,
)


def _run_sqrt(fn, p, backend, budget, concavity):
    return [check_sqrt_moment(fn, p["s"], concavity, backend, budget)]


def _run_chain(fn, p, backend, budget, concavity):
    return list(check_chain(fn, p["n"], p["t"], p.get("k"), backend, budget))


def _run_holder(fn, p, backend, budget, concavity):
    return list(check_block_holder(fn, p["n"], p["t"], p.get("k"), backend, budget))


def _run_average(fn, p, backend, budget, concavity):
    return [check_average_identity(fn, p["n"], p["t"], p.get("k"), backend, budget)]


def _run_stein(fn, p, backend, budget, concavity):
    return [check_entropy_stein(fn, concavity, backend, budget)]


def _run_laplacian(fn, p, backend, budget, concavity):
    return [check_entropy_laplacian(fn, concavity, backend, budget)]


def _run_ibp(fn, p, backend, budget, concavity):
    return [check_integration_by_parts(fn, None, backend, budget, form=p.get("form", "lemma"))]


def _run_log_sobolev(fn, p, backend, budget, concavity):
    return list(check_log_sobolev_sandwich(fn, backend, budget))


# check id -> (runner, grid axes it consumes, relations it emits)
CHECKS: dict[str, tuple[Callable, tuple[str, ...], tuple[str, ...]]] = {
    "sqrt-moment": (_run_sqrt, ("s",), ("sqrt-moment",)),
    "chain": (_run_chain, ("n", "t"), ("chain.left", "chain.right")),
    "block-holder": (_run_holder, ("n", "t"), ("block-holder.lower", "block-holder.upper")),
    "average-identity": (_run_average, ("n", "t"), ("average-identity",)),
    "entropy-stein": (_run_stein, (), ("entropy-stein",)),
    "entropy-laplacian": (_run_laplacian, (), ("entropy-laplacian",)),
    "ibp": (_run_ibp, ("form",), ("ibp",)),
    "log-sobolev": (_run_log_sobolev, (), ("log-sobolev.lower", "log-sobolev.upper")),
}


@dataclass
class SweepPlan:
    """A sweep description, usually loaded from JSON.

    ``catalog`` entries are function documents (see
    ``functions.function_from_spec``) or ``{"kind": "gauss_exp_random",
    "count", "seed", "log_class", "k"}`` which expands to ``count`` random
    oracle-family members. Any entry may carry ``"concavity"`` to override
    the class the checks assume.
    """

    checks: list[str] = field(default_factory=list)
    grids: dict[str, list] = field(default_factory=dict)
    catalog: list[dict] = field(default_factory=list)
    budgets: dict = field(default_factory=dict)
    seed: int = 0
    backend: str | None = None
    output: str | None = None
    name: str = "plan"

    @classmethod
    def from_dict(cls, doc: dict, name: str = "plan") -> "SweepPlan":
        if "seed" not in doc and doc.get("checks"):
            raise ValueError("plan needs a seed")
        unknown = set(doc.get("checks", [])) - set(CHECKS)
        if unknown:
            raise ValueError(f"unknown check ids {sorted(unknown)}; choose from {sorted(CHECKS)}")
        return cls(
            checks=list(doc.get("checks", [])),
            grids={k: list(v) for k, v in doc.get("grids", {}).items()},
            catalog=list(doc.get("catalog", [])),
            budgets=dict(doc.get("budgets", {})),
            seed=int(doc.get("seed", 0)),
            backend=doc.get("backend"),
            output=doc.get("output"),
            name=doc.get("name", name),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SweepPlan":
        path = Path(path)
        text = path.read_text(encoding="utf-8").strip()
        doc = json.loads(text) if text else {}
        return cls.from_dict(doc, name=path.stem)

    def budget(self, stream: int) -> Budget:
        return Budget(
            nodes=int(self.budgets.get("nodes", Budget.nodes)),
            samples=int(self.budgets.get("samples", Budget.samples)),
            batches=int(self.budgets.get("batches", Budget.batches)),
            seed=self.seed,
            stream=stream,
        )


def expand_catalog(entries: list[dict]) -> list[tuple[object, str | None]]:
    """Materialize catalog entries as (function, concavity override) pairs."""
    out = []
    for entry in entries:
        concavity = entry.get("concavity")
        if entry.get("kind") == "gauss_exp_random":
            rng = np.random.default_rng(int(entry.get("seed", 0)))
            ks = entry.get("k", 1)
            ks = ks if isinstance(ks, list) else [ks]
            prefix = entry.get("id", f"rand_{entry['log_class'].lower()}")
            for i in range(int(entry["count"])):
                fn = random_gauss_exp(rng, int(ks[i % len(ks)]), entry["log_class"], name=f"{prefix}_{i:03d}")
                out.append((fn, concavity))
        else:
            out.append((function_from_spec(entry), concavity))
    return out


@dataclass(frozen=True)
class _Task:
    check: str
    fn: object
    concavity: str | None
    params: dict


def plan_tasks(plan: SweepPlan) -> list[_Task]:
    catalog = expand_catalog(plan.catalog)
    tasks = []
    for check in plan.checks:
        _, axes, _ = CHECKS[check]
        used = [a for a in axes if a in plan.grids]
        for fn, concavity in catalog:
            for values in itertools.product(*(plan.grids[a] for a in used)):
                tasks.append(_Task(check, fn, concavity, dict(zip(used, values))))
    return tasks


def _run_task(task: _Task, index: int, plan: SweepPlan) -> list[InequalityVerdict]:
    runner, _, names = CHECKS[task.check]
    params = {**task.params, "fn": getattr(task.fn, "name", "fn")}
    try:
        return runner(task.fn, task.params, plan.backend, plan.budget(index), task.concavity)
    except (GaussLMError, ValueError, ArithmeticError, KeyError) as exc:
        return [errored(name, Relation.LEQ, params, f"{type(exc).__name__}: {exc}") for name in names]


def run_sweep(plan: SweepPlan, threads: int | None = None) -> list[InequalityVerdict]:
    """Execute every task; the result order is the plan order.

    Task ``i`` draws its Monte Carlo streams from ``(plan.seed, i)``, so the
    output does not depend on the thread count.
    """
    tasks = plan_tasks(plan)
    threads = worker_count() if threads is None else max(1, int(threads))
    if threads == 1 or len(tasks) < 2:
        chunks = [_run_task(t, i, plan) for i, t in enumerate(tasks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda it: _run_task(it[1], it[0], plan), enumerate(tasks)))
    return [v for chunk in chunks for v in chunk]


def status_counts(verdicts) -> dict[str, int]:
    counts = {s.value: 0 for s in Status}
    for v in verdicts:
        counts[v.status.value] += 1
    return counts


def _clean(obj):
    # JSON has no NaN/inf; report them as null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def verdict_line(v: InequalityVerdict) -> str:
    return json.dumps(_clean(v.to_dict()), sort_keys=True)


def report_lines(verdicts, plan_name: str = "plan", timestamp: str | None = None) -> list[str]:
    """Header line (the only nondeterministic content) then one line per verdict."""
    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    header = json.dumps({"timestamp": stamp, "plan": plan_name, "count": len(verdicts)}, sort_keys=True)
    return [header] + [verdict_line(v) for v in verdicts]


def write_report(verdicts, path: str | Path, plan_name: str = "plan") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in report_lines(verdicts, plan_name):
            fh.write(line + "\n")


def csv_digest(verdicts) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["check", "params", "slack", "status"])
    for v in verdicts:
        writer.writerow([v.check, json.dumps(_clean(v.params), sort_keys=True), repr(v.slack), v.status.value])
    return buf.getvalue()


def write_digest(verdicts, path: str | Path) -> None:
    Path(path).write_text(csv_digest(verdicts), encoding="utf-8")


def bundled_plan(name: str) -> Path:
    """Path of a plan shipped with the package, e.g. ``theorem1_grid.json``."""
    from importlib.resources import files

    return Path(str(files("gausslm") / "plans" / name))

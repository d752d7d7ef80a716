"""Active-learning loop: train surrogate -> solve QUBO -> simulate -> append.

FOM is maximized by minimizing -FOM throughout: dataset targets, surrogate
and QUBO all live on the negated scale; the sign flips back only in records.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import fm, qaoa, qubo, tmm
from .errors import CapacityError, ConfigError, ExhaustedError, MetaloopError, SchemaError
from .materials import AIR, BinaryEncoding, IncidenceCondition, Material, SpectralGrid, builtin_material, decode, load_dispersion

log = logging.getLogger(__name__)

SOLVERS = ("exhaustive", "annealing", "qaoa")
_SOLVER_KEYS = {
    "exhaustive": {"kind"},
    "annealing": {"kind", "sweeps", "restarts", "t_hot", "t_cold"},
    "qaoa": {"kind", "p", "shots", "restarts", "outer_budget"},
}
_TOP_KEYS = {
    "encoding", "fom", "grid", "conditions", "solver", "fm",
    "initial_points", "max_iterations", "stop_patience", "workers", "seed",
}


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def parse_material(spec, base_dir=".") -> Material:
    if isinstance(spec, str):
        return builtin_material(spec)
    _check_keys(spec, {"name", "csv", "n", "k"}, "material")
    if "csv" in spec:
        return load_dispersion(os.path.join(base_dir, spec["csv"]), spec.get("name"))
    if "n" in spec:
        return Material.constant_index(spec.get("name", f"n={spec['n']}"), spec["n"], spec.get("k", 0.0))
    raise SchemaError("material needs a built-in name, a csv path or a constant n")


def parse_grid(spec) -> SpectralGrid:
    if spec in (None, "trc"):
        return tmm.default_trc_grid()
    if isinstance(spec, list):
        return SpectralGrid(spec)
    _check_keys(spec, {"start", "stop", "num", "wavelengths"}, "grid")
    if "wavelengths" in spec:
        return SpectralGrid(spec["wavelengths"])
    return SpectralGrid.linspace(spec["start"], spec["stop"], spec["num"])


def parse_fom(spec) -> tmm.FomSpec:
    if spec in (None, "trc"):
        return tmm.default_trc_fom()
    _check_keys(spec, {"bands"}, "fom")
    bands = []
    for b in spec["bands"]:
        if isinstance(b, dict):
            _check_keys(b, {"lo", "hi", "quantity", "weight"}, "fom band")
            bands.append(tmm.Band(b["lo"], b["hi"], b["quantity"], b.get("weight", 1.0)))
        else:
            bands.append(tmm.Band(*b))
    return tmm.FomSpec(tuple(bands))


def parse_conditions(spec):
    if spec is None:
        return (IncidenceCondition(0.0, "unpolarized"),)
    out = []
    for c in spec:
        _check_keys(c, {"angle", "polarization"}, "condition")
        out.append(IncidenceCondition(float(c.get("angle", 0.0)), c.get("polarization", "unpolarized")))
    return tuple(out)


def parse_encoding(spec, base_dir=".") -> BinaryEncoding:
    _check_keys(spec, {"bits_per_layer", "layer_count", "palette", "thickness_nm", "ambient", "substrate"}, "encoding")
    thickness = spec.get("thickness_nm", 100.0)
    return BinaryEncoding(
        int(spec.get("bits_per_layer", 1)),
        int(spec["layer_count"]),
        tuple(parse_material(m, base_dir) for m in spec["palette"]),
        thickness if isinstance(thickness, (int, float)) else tuple(thickness),
        parse_material(spec.get("ambient", "air"), base_dir),
        parse_material(spec["substrate"], base_dir) if spec.get("substrate") is not None else None,
    )


@dataclass(frozen=True)
class RunConfig:
    encoding: BinaryEncoding
    fom: tmm.FomSpec = field(default_factory=tmm.default_trc_fom)
    grid: SpectralGrid = field(default_factory=tmm.default_trc_grid)
    conditions: tuple = (IncidenceCondition(0.0, "unpolarized"),)
    solver: dict = field(default_factory=lambda: {"kind": "annealing"})
    fm: fm.TrainConfig = field(default_factory=fm.TrainConfig)
    initial_points: int = 20
    max_iterations: int = 50
    stop_patience: int | None = None
    workers: int = 1
    seed: int = 0
    document: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.encoding.n_bits
        if self.initial_points < 2:
            raise ConfigError("initial_points must be >= 2")
        if self.initial_points > 2**n:
            raise ConfigError(f"initial_points exceeds the 2^{n} search space")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.stop_patience is not None and self.stop_patience < 1:
            raise ConfigError("stop_patience must be >= 1 when given")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        kind = self.solver.get("kind")
        if kind not in SOLVERS:
            raise ConfigError(f"solver kind must be one of {SOLVERS}, got {kind!r}")
        unknown = set(self.solver) - _SOLVER_KEYS[kind]
        if unknown:
            raise SchemaError(f"solver: unknown keys {sorted(unknown)} for {kind}")
        if kind == "qaoa" and n > qaoa.STATEVECTOR_MAX_N:
            raise CapacityError(f"qaoa solver needs n <= {qaoa.STATEVECTOR_MAX_N}, encoding has n = {n}")
        if kind == "exhaustive" and n > qubo.BRUTE_FORCE_MAX_N:
            raise CapacityError(f"exhaustive solver needs n <= {qubo.BRUTE_FORCE_MAX_N}, encoding has n = {n}")

    @property
    def n(self):
        return self.encoding.n_bits

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "RunConfig":
        _check_keys(doc, _TOP_KEYS, "run config")
        if "encoding" not in doc:
            raise SchemaError("run config needs an encoding")
        fm_doc = dict(doc.get("fm", {}))
        _check_keys(fm_doc, set(fm.TrainConfig.__dataclass_fields__), "fm")
        seed = int(doc.get("seed", 0))
        fm_doc.setdefault("seed", seed)
        solver = dict(doc.get("solver", {"kind": "annealing"}))
        return cls(
            encoding=parse_encoding(doc["encoding"], base_dir),
            fom=parse_fom(doc.get("fom")),
            grid=parse_grid(doc.get("grid")),
            conditions=parse_conditions(doc.get("conditions")),
            solver=solver,
            fm=fm.TrainConfig(**fm_doc),
            initial_points=int(doc.get("initial_points", 20)),
            max_iterations=int(doc.get("max_iterations", 50)),
            stop_patience=doc.get("stop_patience"),
            workers=int(doc.get("workers", 1)),
            seed=seed,
            document=doc,
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: {exc}") from None
        return cls.from_dict(doc, os.path.dirname(os.path.abspath(path)))


def evaluate_bits(bits, config: RunConfig) -> float:
    stack = decode(bits, config.encoding)
    result = tmm.sweep(stack, config.grid, config.conditions, workers=config.workers)
    return tmm.evaluate_fom(result, config.fom)


def _random_novel(rng, n, dataset, tries=10_000):
    for _ in range(tries):
        x = rng.integers(0, 2, n).astype(np.uint8)
        if x not in dataset:
            return x
    if n <= 20:
        # dense space: pick uniformly among the unseen vectors
        seen = {int("".join(map(str, row)), 2) for row in dataset.X.tolist()} if len(dataset) else set()
        unseen = [i for i in range(2**n) if i not in seen]
        if unseen:
            i = unseen[int(rng.integers(len(unseen)))]
            return np.array([(i >> (n - 1 - b)) & 1 for b in range(n)], dtype=np.uint8)
    raise ExhaustedError(f"no unseen bit vector found in the 2^{n} space")


def seed_dataset(config: RunConfig, rng=None) -> fm.Dataset:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    ds = fm.Dataset(config.n)
    while len(ds) < config.initial_points:
        x = _random_novel(rng, config.n, ds)
        try:
            value = evaluate_bits(x, config)
        except MetaloopError as exc:
            exc.args = (f"seeding point {qubo.bits_to_str(x)}: {exc}",)
            raise
        ds.append(x, -value, "seed")
    return ds


def solve(q: qubo.QuboMatrix, solver: dict, seed) -> tuple[np.ndarray, dict]:
    kind = solver.get("kind", "annealing")
    if kind == "exhaustive":
        sol = qubo.brute_force(q)
        return sol.bits, sol.to_dict()
    if kind == "annealing":
        sol = qubo.simulated_annealing(
            q,
            sweeps=solver.get("sweeps", 200),
            t_hot=solver.get("t_hot"),
            t_cold=solver.get("t_cold"),
            seed=seed,
            restarts=solver.get("restarts", 10),
        )
        return sol.bits, sol.to_dict()
    if kind == "qaoa":
        res = qaoa.run_qaoa(
            q,
            p=solver.get("p", 1),
            shots=solver.get("shots", 1024),
            outer_budget=solver.get("outer_budget"),
            restarts=solver.get("restarts", 5),
            seed=seed,
        )
        report = res.to_dict()
        report.pop("expectation_trace")
        report.pop("shots_histogram")
        return res.best_bits, report
    raise ConfigError(f"unknown solver {kind!r}")


@dataclass
class IterationRecord:
    iteration: int
    bits: str
    source: str
    fom: float
    fm_loss: float
    solver_report: dict
    timings: dict

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "bits": self.bits,
            "source": self.source,
            "fom": self.fom,
            "fm_loss": self.fm_loss,
            "solver_report": self.solver_report,
            "timings": self.timings,
        }


def iterate(dataset: fm.Dataset, config: RunConfig, rng, iteration: int = 1) -> IterationRecord:
    """One train -> solve -> simulate -> append round; grows ``dataset`` by one row."""
    try:
        t0 = time.perf_counter()
        train_cfg = fm.TrainConfig(**{**config.fm.__dict__, "seed": int(rng.integers(2**31))})
        model = fm.train(dataset, train_cfg)
        fm_loss = fm.loss(model, dataset)
        t1 = time.perf_counter()
        q = qubo.from_fm(model)
        proposal, report = solve(q, config.solver, int(rng.integers(2**31)))
        proposal = np.asarray(proposal, dtype=np.uint8)
        source = "solver"
        if proposal in dataset:
            source = "perturbation"
            report["duplicate_of"] = qubo.bits_to_str(proposal)
            candidate = None
            for i in rng.permutation(config.n):
                flipped = proposal.copy()
                flipped[i] ^= 1
                if flipped not in dataset:
                    candidate = flipped
                    report["perturbation"] = "flip"
                    break
            if candidate is None:
                candidate = _random_novel(rng, config.n, dataset)
                report["perturbation"] = "random"
            proposal = candidate
        t2 = time.perf_counter()
        value = evaluate_bits(proposal, config)
        t3 = time.perf_counter()
    except MetaloopError as exc:
        exc.iteration = iteration
        exc.args = (f"iteration {iteration}: {exc}",)
        raise
    dataset.append(proposal, -value, source)
    return IterationRecord(
        iteration,
        qubo.bits_to_str(proposal),
        source,
        value,
        fm_loss,
        report,
        {"ml_s": t1 - t0, "solve_s": t2 - t1, "simulate_s": t3 - t2},
    )


@dataclass
class RunLog:
    config: dict
    records: list = field(default_factory=list)
    best_trace: list = field(default_factory=list)
    best_bits: str | None = None
    best_fom: float = -np.inf
    seed_best_fom: float = -np.inf
    dataset: Any = None

    def add(self, record: IterationRecord):
        self.records.append(record)
        if record.fom > self.best_fom:
            self.best_fom, self.best_bits = record.fom, record.bits
        self.best_trace.append(self.best_fom)


class _JsonlWriter:
    """Append-only JSON-lines file, flushed and fsynced after every line."""

    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8")

    def write(self, doc):
        self.fh.write(json.dumps(doc) + "\n")
        self.fh.flush()
        os.fsync(self.fh.fileno())

    def close(self):
        self.fh.close()


def run(config: RunConfig, log_path=None, dataset: fm.Dataset | None = None, on_record=None) -> RunLog:
    """Seed, then iterate until ``max_iterations`` or until ``stop_patience``
    consecutive iterations after the first fail to improve the best FOM."""
    rng = np.random.default_rng(config.seed)
    writer = _JsonlWriter(log_path) if log_path else None
    runlog = RunLog(config.document)
    try:
        if writer:
            writer.write({"config": config.document})
        if dataset is None:
            dataset = seed_dataset(config, rng)
        seed_best = int(np.argmax(-dataset.y))
        runlog.seed_best_fom = float(-dataset.y[seed_best])
        runlog.best_fom = runlog.seed_best_fom
        runlog.best_bits = qubo.bits_to_str(dataset.X[seed_best])
        stale = 0
        for it in range(1, config.max_iterations + 1):
            before = runlog.best_fom
            record = iterate(dataset, config, rng, it)
            runlog.add(record)
            if writer:
                writer.write(record.to_dict())
            if on_record:
                on_record(record)
            log.info("iteration %d fom=%.6f best=%.6f source=%s", it, record.fom, runlog.best_fom, record.source)
            if it > 1:
                stale = 0 if runlog.best_fom > before else stale + 1
            if config.stop_patience is not None and stale >= config.stop_patience:
                break
    finally:
        if writer:
            writer.close()
    runlog.dataset = dataset
    return runlog


def load_runlog(path):
    """(config document, list of record dicts) from a JSON-lines run log."""
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or "config" not in lines[0]:
        raise SchemaError(f"{path}: first line must echo the run config")
    return lines[0]["config"], lines[1:]


def random_search(config: RunConfig, budget: int, seed=None) -> tuple[str, float]:
    """Best of ``budget`` distinct uniformly random designs."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    ds = fm.Dataset(config.n)
    best = (None, -np.inf)
    for _ in range(budget):
        x = _random_novel(rng, config.n, ds)
        value = evaluate_bits(x, config)
        ds.append(x, -value, "random")
        if value > best[1]:
            best = (qubo.bits_to_str(x), value)
    return best

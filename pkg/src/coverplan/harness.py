"""Experiment orchestration: configs, planner runs, plan records, comparisons.

Every planner run writes into one output directory:

* ``plans/*.json``: one plan record per produced plan;
* ``log.csv``: per-evaluation log (evolutionary planners) or per-plan summary;
* ``run_meta.json``: provenance and wall-clock timings.

Plan records and logs contain no wall-clock data, so repeating a run with the
same config and seed reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from coverplan import __version__
from coverplan.discretize import DEFAULT_BUFFER, DEFAULT_PAD, DEFAULT_VOLUME_SCALING, WaypointGrid, generate_candidate_waypoints
from coverplan.energy import EnergyParams
from coverplan.errors import CoverPlanError, InvalidInputError, SchemaVersionError
from coverplan.evaluation import PlanEvaluator, evaluate_path
from coverplan.geometry import TriangleMesh, generate_occluded_target, generate_sphere, load_mesh, write_mesh
from coverplan.metrics import archive_hypervolumes, attainment_surfaces, choose_reference_point, hypervolume_2d, pareto_filter
from coverplan.moea import EAConfig, MOEADConfig, evolve_moead, evolve_nsga2
from coverplan.planners.circling import plan_circling
from coverplan.planners.sampling import SamplingParams, f_values, plan_sampling, sample_start
from coverplan.sensing import CameraModel, default_cameras, make_edge_pose, snapshot_spacing

SCHEMA_VERSION = 1
PLANNERS = ("circling", "sampling", "nsga2", "moead")
OUTPUT_DIR_ENV = "COVERPLAN_OUTPUT_DIR"
COVERED_RGB = (230, 25, 25)
UNCOVERED_RGB = (25, 230, 230)


# -- small IO helpers --------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _take(block: dict | None, cls, what: str, **overrides):
    """Build dataclass ``cls`` from a config block, rejecting unknown keys."""
    block = dict(block or {})
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(block) - names)
    if unknown:
        raise InvalidInputError(f"unknown {what} option(s): {', '.join(unknown)}")
    block.update(overrides)
    try:
        return cls(**block)
    except TypeError as exc:
        raise InvalidInputError(f"bad {what} options: {exc}") from None


# -- configuration -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    ``target`` is either ``{"path": ..., "format": ...}`` or a generator spec:
    ``{"generator": "sphere", "radius": 10, "triangles": 960}`` or
    ``{"generator": "occluded", "style": "nested-box"}``.
    """

    target: dict
    planner: str
    repetitions: int = 1
    rng_seed: int = 0
    output_dir: str = "coverplan-out"
    discretization: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    cameras: list | None = None
    sampling: dict = field(default_factory=dict)
    ea: dict = field(default_factory=dict)
    moead: dict = field(default_factory=dict)
    seeds: str | None = None  # "circling", a seed-pool file, or None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidInputError("config must be a JSON object")
        cfg = _take(data, cls, "config")
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise InvalidInputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        """Check every parameter block before anything runs."""
        if self.planner not in PLANNERS:
            raise InvalidInputError(f"planner must be one of {PLANNERS}, got {self.planner!r}")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise InvalidInputError("repetitions must be a positive integer")
        if not isinstance(self.target, dict) or not ("path" in self.target or "generator" in self.target):
            raise InvalidInputError("target needs a 'path' or a 'generator'")
        self.discretization_params()
        self.energy_params()
        self.camera_models()
        self.sampling_options()
        self.ea_config(0)
        self.moead_config()

    def discretization_params(self) -> dict:
        params = {"pad": DEFAULT_PAD, "buffer": DEFAULT_BUFFER, "volume_scaling": DEFAULT_VOLUME_SCALING}
        unknown = sorted(set(self.discretization) - set(params))
        if unknown:
            raise InvalidInputError(f"unknown discretization option(s): {', '.join(unknown)}")
        params.update({k: float(v) for k, v in self.discretization.items()})
        if not params["pad"] >= params["buffer"] >= 0 or params["volume_scaling"] <= 0:
            raise InvalidInputError("need pad >= buffer >= 0 and volume_scaling > 0")
        return params

    def energy_params(self) -> EnergyParams:
        return _take(self.energy, EnergyParams, "energy")

    def camera_models(self) -> tuple[CameraModel, ...]:
        if self.cameras is None:
            return default_cameras()
        return tuple(_take(c, CameraModel, "camera") for c in self.cameras)

    def sampling_options(self) -> dict:
        opts = dict(self.sampling)
        sweep = {k: opts.pop(k) for k in ("f_min", "f_max", "steps") if k in opts}
        sweep.setdefault("f_min", 0.1)
        sweep.setdefault("f_max", 1.0)
        sweep.setdefault("steps", 11)
        for banned in ("f", "q0", "rng_seed", "pad", "buffer", "volume_scaling"):
            if banned in opts:
                raise InvalidInputError(f"sampling option {banned!r} is set by the harness")
        base = _take(opts, SamplingParams, "sampling", **self.discretization_params())
        f_values(sweep["f_min"], sweep["f_max"], int(sweep["steps"]))
        return {"base": base, **sweep}

    def ea_config(self, repetition: int) -> EAConfig:
        return _take(self.ea, EAConfig, "ea", rng_seed=self.rng_seed + repetition)

    def moead_config(self) -> MOEADConfig:
        return _take(self.moead, MOEADConfig, "moead")

    def canonical(self) -> dict:
        """Config content that determines results (the output directory does not)."""
        data = asdict(self)
        data.pop("output_dir")
        return data

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()[:16]


def build_target(spec: dict) -> tuple[TriangleMesh, dict]:
    """Mesh for a target spec plus a description (with hidden fraction for occluded targets)."""
    spec = dict(spec)
    if "path" in spec:
        path = Path(spec["path"])
        if not path.is_file():
            raise InvalidInputError(f"mesh file not found: {path}")
        mesh = load_mesh(path, spec.get("format"))
        return mesh, {"source": "file", "path": str(path)}
    gen = spec.get("generator")
    if gen == "sphere":
        radius = float(spec.get("radius", 10.0))
        triangles = int(spec.get("triangles", 960))
        return generate_sphere(radius, triangles), {"source": "sphere", "radius": radius, "triangles": triangles}
    if gen == "occluded":
        style = spec.get("style", "nested-box")
        target = generate_occluded_target(style)
        info = {"source": "occluded", "style": style, "hidden_area_fraction": target.hidden_area_fraction}
        return target.mesh, info
    raise InvalidInputError(f"unknown target generator {gen!r}")


# -- plan records ------------------------------------------------------------


def _evaluation_block(cameras, params: EnergyParams, spacing: float) -> dict:
    return {
        "cameras": [asdict(c) for c in cameras],
        "energy": asdict(params),
        "snapshot_spacing": spacing,
    }


def plan_record(
    mesh: TriangleMesh,
    planner: str,
    positions,
    evaluation,
    metadata: dict,
    waypoint_ids=None,
) -> dict:
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    center = mesh.center
    headings = [make_edge_pose(a, b, center).heading.tolist() for a, b in zip(pts[:-1], pts[1:])]
    return {
        "schema_version": SCHEMA_VERSION,
        "planner": planner,
        "plan": {
            "waypoint_ids": None if waypoint_ids is None else [int(i) for i in waypoint_ids],
            "positions": pts.tolist(),
            "headings": headings,
        },
        "fitness": {
            "coverage_score": evaluation.fitness.coverage_score,
            "energy": evaluation.fitness.energy,
        },
        "covered_ids": sorted(int(i) for i in evaluation.coverage.covered_ids),
        "colliding_edges": list(evaluation.energy.colliding_edges),
        "metadata": metadata,
    }


def read_plan_record(path) -> dict:
    try:
        record = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"plan file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"plan file {path} is not valid JSON: {exc}") from None
    version = record.get("schema_version") if isinstance(record, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"plan file {path} has schema_version {version!r}; expected {SCHEMA_VERSION}")
    return record


def reevaluate_record(record: dict, mesh: TriangleMesh):
    """Recompute fitness of a stored plan with its stored evaluation settings."""
    meta = record["metadata"]
    if meta.get("mesh_fingerprint") != mesh.fingerprint():
        raise InvalidInputError("plan was produced for a different mesh")
    ev = meta["evaluation"]
    cameras = tuple(CameraModel(**c) for c in ev["cameras"])
    params = EnergyParams(**ev["energy"])
    return evaluate_path(mesh, record["plan"]["positions"], cameras, params, spacing=ev["snapshot_spacing"])


def export_coverage_mesh(path, mesh: TriangleMesh, covered_ids) -> None:
    colors = np.tile(np.array(UNCOVERED_RGB, dtype=np.uint8), (mesh.n_triangles, 1))
    ids = np.asarray(sorted(covered_ids), dtype=np.int64)
    colors[ids] = COVERED_RGB
    write_mesh(path, mesh, "ply", face_colors=colors)


# -- running planners --------------------------------------------------------


@dataclass
class RunOutput:
    records: list[dict]
    log_header: list[str]
    log_rows: list[list]
    timings: dict
    diagnostics: list[str] = field(default_factory=list)
    failures: int = 0


def _seed_pool(cfg: ExperimentConfig, mesh: TriangleMesh, grid: WaypointGrid) -> list[tuple]:
    source = cfg.seeds
    if source is None:
        if cfg.ea_config(0).p_seeded > 0:
            source = "circling"
        else:
            return []
    if source == "circling":
        return [p.waypoint_ids for p in plan_circling(mesh, grid, cfg.energy_params().safety_buffer).plans]
    pool = json.loads(Path(source).read_text())
    if pool.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionError(f"seed pool {source} has unsupported schema_version")
    if pool.get("mesh_fingerprint") != mesh.fingerprint():
        raise InvalidInputError("seed pool was built for a different mesh")
    genomes = [tuple(int(x) for x in g) for g in pool["genomes"]]
    if any(not grid.contains(g) for g in genomes):
        raise InvalidInputError("seed pool references unknown waypoints")
    return genomes


def _run_circling(cfg, mesh, grid, base_meta, cameras, params) -> RunOutput:
    t0 = time.perf_counter()
    result = plan_circling(mesh, grid, params.safety_buffer)
    elapsed = time.perf_counter() - t0
    ev = PlanEvaluator(mesh, grid, cameras, params)
    records, rows = [], []
    for plan in result.plans:
        details = ev.details(plan.waypoint_ids)
        meta = dict(base_meta, run_id=0, delta_z=plan.delta_z, loop_levels=list(plan.loop_levels))
        records.append(plan_record(mesh, "circling", grid.positions[list(plan.waypoint_ids)], details, meta, plan.waypoint_ids))
        rows.append([0, plan.delta_z, len(plan.waypoint_ids), details.fitness.coverage_score, details.fitness.energy])
    header = ["run_id", "delta_z", "length", "coverage_score", "energy"]
    return RunOutput(records, header, rows, {"circling": elapsed}, result.diagnostics)


def _run_sampling(cfg, mesh, grid, base_meta, cameras, params) -> RunOutput:
    opts = cfg.sampling_options()
    base: SamplingParams = opts["base"]
    records, rows, timings, diag = [], [], {}, []
    failures = 0
    spacing = snapshot_spacing(grid.wp_interval, cameras)
    for rep in range(cfg.repetitions):
        seed = cfg.rng_seed + rep
        q0 = tuple(float(x) for x in sample_start(mesh, np.random.default_rng(seed), base.buffer))
        for f in f_values(opts["f_min"], opts["f_max"], int(opts["steps"])):
            sp = SamplingParams(**{**asdict(base), "f": f, "q0": q0, "rng_seed": seed, "epsilon": min(base.epsilon, f / 2)})
            run = plan_sampling(mesh, sp, cameras, params, repetition=rep)
            timings[f"rep{rep}_f{f:.4f}"] = run.timings
            if not run.ok:
                failures += 1
                diag.append(f"repetition {rep}, f={f:.4f}: {run.error}")
                rows.append([rep, f, "", "", "", run.observed_fraction, run.graph_nodes, run.iterations, run.error])
                continue
            details = evaluate_path(mesh, run.positions, cameras, params, spacing=spacing)
            meta = dict(base_meta, run_id=rep, f=f, q0=list(q0), sampling=asdict(sp),
                        graph={"nodes": run.graph_nodes, "edges": run.graph_edges, "iterations": run.iterations,
                               "observed_fraction": run.observed_fraction})
            records.append(plan_record(mesh, "sampling", run.positions, details, meta))
            rows.append([rep, f, len(run.positions), details.fitness.coverage_score, details.fitness.energy,
                         run.observed_fraction, run.graph_nodes, run.iterations, ""])
    header = ["run_id", "f", "length", "coverage_score", "energy", "observed_fraction", "graph_nodes", "iterations", "error"]
    return RunOutput(records, header, rows, timings, diag, failures)


def _run_evolution(cfg, mesh, grid, base_meta, cameras, params) -> RunOutput:
    ev = PlanEvaluator(mesh, grid, cameras, params)
    seeds = _seed_pool(cfg, mesh, grid)
    records, rows, timings = [], [], {}
    for rep in range(cfg.repetitions):
        ea_cfg = cfg.ea_config(rep)
        t0 = time.perf_counter()
        if cfg.planner == "nsga2":
            result = evolve_nsga2(ev.evaluate, len(grid), seeds, ea_cfg)
        else:
            result = evolve_moead(ev.evaluate, len(grid), seeds, cfg.moead_config(), ea_cfg)
        timings[f"rep{rep}"] = {"total": time.perf_counter() - t0, "generations": result.generations}
        for i, ind in enumerate(result.population):
            details = ev.details(ind.genome)
            meta = dict(base_meta, run_id=rep, index=i, rng_seed=ea_cfg.rng_seed,
                        evaluations=result.evaluations, generations=result.generations)
            records.append(plan_record(mesh, cfg.planner, grid.positions[list(ind.genome)], details, meta, ind.genome))
        rows.extend([rep, r.generation, r.length, r.coverage_score, r.energy] for r in result.log)
    header = ["run_id", "generation", "length", "coverage_score", "energy"]
    return RunOutput(records, header, rows, timings)


_RUNNERS = {"circling": _run_circling, "sampling": _run_sampling, "nsga2": _run_evolution, "moead": _run_evolution}


def resolve_output_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def run_plan(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> Path:
    """Run the configured planner and write its outputs; returns the output directory.

    Invalid inputs raise before anything is written. A run in which every
    plan fails writes ``diagnostics.json`` and raises ``CoverPlanError``.
    """
    cfg.validate()
    mesh, target_info = build_target(cfg.target)
    disc = cfg.discretization_params()
    grid = generate_candidate_waypoints(mesh, **disc)
    cameras = cfg.camera_models()
    params = cfg.energy_params().resolved(mesh)
    out = resolve_output_dir(cfg, output_dir)
    spacing = snapshot_spacing(grid.wp_interval, cameras)
    base_meta = {
        "config_hash": cfg.config_hash(),
        "config": cfg.canonical(),
        "mesh_fingerprint": mesh.fingerprint(),
        "target": target_info,
        "grid": grid.params(),
        "evaluation": _evaluation_block(cameras, params, spacing),
        "package_version": __version__,
    }
    t0 = time.perf_counter()
    try:
        result = _RUNNERS[cfg.planner](cfg, mesh, grid, base_meta, cameras, params)
    except CoverPlanError as exc:
        atomic_write_text(out / "diagnostics.json", _dumps({"planner": cfg.planner, "error": str(exc)}))
        raise
    total = time.perf_counter() - t0
    for i, rec in enumerate(result.records):
        atomic_write_text(out / "plans" / f"{cfg.planner}_r{rec['metadata']['run_id']:02d}_{i:04d}.json", _dumps(rec))
    atomic_write_text(out / "log.csv", _csv_text(result.log_header, result.log_rows))
    meta = {
        "config_hash": cfg.config_hash(),
        "config": cfg.canonical(),
        "planner": cfg.planner,
        "n_plans": len(result.records),
        "failures": result.failures,
        "diagnostics": result.diagnostics,
        "timings": {"total": total, "phases": result.timings},
        "versions": {"coverplan": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    atomic_write_text(out / "run_meta.json", _dumps(meta))
    if result.diagnostics:
        atomic_write_text(out / "diagnostics.json", _dumps({"planner": cfg.planner, "diagnostics": result.diagnostics}))
    if not result.records:
        raise CoverPlanError(f"{cfg.planner} produced no plans; see {out / 'diagnostics.json'}")
    return out


def evaluate_plan_file(plan_file, mesh_spec: dict | None = None, colored_mesh=None) -> dict:
    """Re-evaluate a stored plan; optionally write the coverage-colored PLY."""
    record = read_plan_record(plan_file)
    spec = mesh_spec or record["metadata"]["config"]["target"]
    mesh, _ = build_target(spec)
    result = reevaluate_record(record, mesh)
    if colored_mesh is not None:
        export_coverage_mesh(colored_mesh, mesh, result.coverage.covered_ids)
    stored = record["fitness"]
    return {
        "coverage_score": result.fitness.coverage_score,
        "energy": result.fitness.energy,
        "stored_coverage_score": stored["coverage_score"],
        "stored_energy": stored["energy"],
        "covered": len(result.coverage.covered_ids),
        "triangles": mesh.n_triangles,
    }


def build_seed_pool(cfg: ExperimentConfig, path) -> dict:
    mesh, _ = build_target(cfg.target)
    grid = generate_candidate_waypoints(mesh, **cfg.discretization_params())
    result = plan_circling(mesh, grid, cfg.energy_params().safety_buffer)
    pool = {
        "schema_version": SCHEMA_VERSION,
        "mesh_fingerprint": mesh.fingerprint(),
        "grid": grid.params(),
        "delta_z": [p.delta_z for p in result.plans],
        "genomes": [list(p.waypoint_ids) for p in result.plans],
    }
    atomic_write_text(Path(path), _dumps(pool))
    return pool


# -- comparisons -------------------------------------------------------------


def load_run(run_dir) -> dict:
    """Plan records and evaluation log of one finished run directory."""
    run_dir = Path(run_dir)
    files = sorted((run_dir / "plans").glob("*.json"))
    if not files:
        raise InvalidInputError(f"no plan records in {run_dir}")
    records = [read_plan_record(f) for f in files]
    log = []
    log_path = run_dir / "log.csv"
    if log_path.exists():
        with open(log_path, newline="") as fh:
            log = list(csv.DictReader(fh))
    return {"dir": run_dir, "records": records, "planner": records[0]["planner"], "log": log}


class _LogRecord:
    __slots__ = ("generation", "coverage_score", "energy")

    def __init__(self, row):
        self.generation = int(row["generation"])
        self.coverage_score = float(row["coverage_score"])
        self.energy = float(row["energy"])


def compare_runs(run_dirs: Sequence, out_dir, labels: Sequence[str] | None = None) -> dict:
    """Merge finished runs on one mesh into fronts, hypervolumes and attainment surfaces.

    Writes ``fronts.csv``, ``hypervolume.csv``, ``surfaces.csv`` and, for
    evolutionary runs, ``hv_by_generation.csv`` (median and interquartile
    range of the cumulative-archive hypervolume per generation).
    """
    runs = [load_run(d) for d in run_dirs]
    labels = list(labels) if labels else [r["planner"] for r in runs]
    if len(labels) != len(runs):
        raise InvalidInputError("need one label per run directory")
    if len(set(labels)) != len(labels):
        labels = [f"{lab}#{i}" for i, lab in enumerate(labels)]
    keys = {(r["records"][0]["metadata"]["mesh_fingerprint"], json.dumps(r["records"][0]["metadata"]["evaluation"], sort_keys=True)) for r in runs}
    fingerprints = {k[0] for k in keys}
    if len(fingerprints) > 1:
        raise InvalidInputError(f"refusing to compare runs on different meshes: {sorted(fingerprints)}")
    if len(keys) > 1:
        raise InvalidInputError("refusing to compare runs with different evaluation parameters")

    points: dict[str, dict[int, list]] = {}
    for label, run in zip(labels, runs):
        per_run: dict[int, list] = {}
        for rec in run["records"]:
            per_run.setdefault(int(rec["metadata"]["run_id"]), []).append(
                (rec["fitness"]["coverage_score"], rec["fitness"]["energy"])
            )
        points[label] = per_run
    every = [p for per_run in points.values() for pts in per_run.values() for p in pts]
    logs = {label: [_LogRecord(row) for row in run["log"]] for label, run in zip(labels, runs) if run["log"] and "generation" in run["log"][0]}
    every += [(r.coverage_score, r.energy) for recs in logs.values() for r in recs]
    ref = choose_reference_point(every)

    out = Path(out_dir)
    front_rows, hv_rows, surface_rows = [], [], []
    summary = {"reference_point": list(ref), "planners": {}}
    for label, per_run in points.items():
        merged = [p for pts in per_run.values() for p in pts]
        front = pareto_filter(merged)
        front_rows.extend([label, "front", c, e] for c, e in front)
        for run_id, pts in sorted(per_run.items()):
            front_rows.extend([label, run_id, c, e] for c, e in pareto_filter(pts))
        run_hv = {run_id: hypervolume_2d(pts, ref) for run_id, pts in sorted(per_run.items())}
        hv_rows.append([label, "all", hypervolume_2d(front, ref)])
        hv_rows.extend([label, run_id, hv] for run_id, hv in run_hv.items())
        surf = attainment_surfaces(list(per_run.values()))
        surface_rows.extend(
            [label, t, b, m, w] for t, b, m, w in zip(surf["thresholds"], surf["best"], surf["median"], surf["worst"])
        )
        summary["planners"][label] = {"hypervolume": hypervolume_2d(front, ref), "runs": len(per_run), "front_size": len(front)}
    atomic_write_text(out / "fronts.csv", _csv_text(["planner", "run_id", "coverage_score", "energy"], front_rows))
    atomic_write_text(out / "hypervolume.csv", _csv_text(["planner", "run_id", "hypervolume"], hv_rows))
    atomic_write_text(out / "surfaces.csv", _csv_text(["planner", "threshold", "best", "median", "worst"], surface_rows))

    if logs:
        gen_rows = []
        for label, recs in logs.items():
            by_run: dict[str, list] = {}
            for row, rec in zip(runs[labels.index(label)]["log"], recs):
                by_run.setdefault(row["run_id"], []).append(rec)
            last = max(r.generation for r in recs)
            curves = np.array([archive_hypervolumes(v, ref, last) for _, v in sorted(by_run.items())])
            q1, med, q3 = np.percentile(curves, [25, 50, 75], axis=0)
            gen_rows.extend([label, g, med[g], q3[g] - q1[g]] for g in range(last + 1))
        atomic_write_text(out / "hv_by_generation.csv", _csv_text(["planner", "generation", "median_hv", "iqr_hv"], gen_rows))
    atomic_write_text(out / "summary.json", _dumps(summary))
    return summary

import csv
import json
import os

import numpy as np
import pytest

from coverplan import cli, harness
from coverplan.errors import InvalidInputError, SchemaVersionError
from coverplan.geometry import load_mesh, read_ply_face_colors

SMALL = {"generator": "sphere", "radius": 10.0, "triangles": 192}


def config(planner, **kw):
    data = {"target": SMALL, "planner": planner}
    data.update(kw)
    return harness.ExperimentConfig.from_dict(data)


def plan_files(out):
    return sorted((out / "plans").glob("*.json"))


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file() and p.name != "run_meta.json"}


@pytest.fixture(scope="module")
def circling_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("circ")
    harness.run_plan(config("circling"), out)
    return out


@pytest.fixture(scope="module")
def nsga_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("nsga")
    harness.run_plan(config("nsga2", ea={"num_generations": 5}), out)
    return out


# -- plan --------------------------------------------------------------------


def test_circling_writes_one_record_per_level(circling_run, tmp_path):
    files = plan_files(circling_run)
    levels = {lvl for f in files for lvl in json.loads(f.read_text())["metadata"]["loop_levels"]}
    assert len(files) == len(levels)
    meta = json.loads((circling_run / "run_meta.json").read_text())
    assert meta["n_plans"] == len(files)
    assert "total" in meta["timings"]


def test_nsga2_writes_population_and_log(nsga_run):
    assert len(plan_files(nsga_run)) == 40
    with open(nsga_run / "log.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {"run_id", "generation", "length", "coverage_score", "energy"}
    assert max(int(r["generation"]) for r in rows) == 5


def test_record_contents(nsga_run):
    rec = json.loads(plan_files(nsga_run)[0].read_text())
    assert rec["schema_version"] == harness.SCHEMA_VERSION
    plan = rec["plan"]
    assert len(plan["positions"]) == len(plan["waypoint_ids"])
    assert len(plan["headings"]) == max(len(plan["positions"]) - 1, 0)
    for key in ("config_hash", "mesh_fingerprint", "rng_seed", "evaluation", "package_version"):
        assert key in rec["metadata"]


def test_invalid_mesh_exit_code_and_no_outputs(tmp_path):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nf 1 2 3\n")
    out = tmp_path / "out"
    code = cli.main(["plan", "--mesh", str(bad), "--planner", "circling", "--output-dir", str(out)])
    assert code == 2
    assert not out.exists()


def test_missing_target_is_invalid(tmp_path, capsys):
    assert cli.main(["plan", "--planner", "circling", "--output-dir", str(tmp_path / "o")]) == 2
    assert "target" in capsys.readouterr().err


def test_bad_option_rejected_before_running(tmp_path):
    with pytest.raises(InvalidInputError):
        config("nsga2", ea={"p_mutation": 2.0})
    with pytest.raises(InvalidInputError):
        config("nsga2", ea={"popsize": 10})
    with pytest.raises(InvalidInputError):
        config("teleport")


def test_unreachable_sampling_exits_one(tmp_path):
    cfg = {
        "target": {"generator": "occluded", "style": "nested-box"},
        "planner": "sampling",
        "sampling": {"f_min": 0.99, "f_max": 0.99, "steps": 1, "max_stall_iterations": 50},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert cli.main(["plan", "--config", str(path), "--output-dir", str(out)]) == 1
    assert "diagnostics" in json.loads((out / "diagnostics.json").read_text())


# -- evaluate ----------------------------------------------------------------


def test_evaluate_reproduces_stored_fitness(nsga_run, circling_run):
    for f in plan_files(nsga_run)[:5] + plan_files(circling_run)[:2]:
        res = harness.evaluate_plan_file(f)
        assert res["coverage_score"] == pytest.approx(res["stored_coverage_score"], abs=1e-9)
        assert res["energy"] == pytest.approx(res["stored_energy"], abs=1e-9)


def test_empty_plan_is_all_uncovered(circling_run, tmp_path):
    rec = json.loads(plan_files(circling_run)[0].read_text())
    rec["plan"].update(waypoint_ids=[], positions=[], headings=[])
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(rec))
    ply = tmp_path / "cov.ply"
    res = harness.evaluate_plan_file(path, colored_mesh=ply)
    assert res["coverage_score"] == 1.0 and res["covered"] == 0
    colors = read_ply_face_colors(ply)
    assert np.all(colors == harness.UNCOVERED_RGB)


def test_delta_one_sphere_plan_is_nearly_all_red(circling_run, tmp_path):
    first = plan_files(circling_run)[0]
    assert json.loads(first.read_text())["metadata"]["delta_z"] == 1
    ply = tmp_path / "cov.ply"
    assert cli.main(["evaluate", str(first), "--colored-mesh", str(ply)]) == 0
    colors = read_ply_face_colors(ply)
    red = np.all(colors == harness.COVERED_RGB, axis=1)
    assert red.mean() >= 0.98


def test_schema_version_mismatch(circling_run, tmp_path):
    rec = json.loads(plan_files(circling_run)[0].read_text())
    rec["schema_version"] = 99
    path = tmp_path / "future.json"
    path.write_text(json.dumps(rec))
    with pytest.raises(SchemaVersionError, match="99"):
        harness.read_plan_record(path)
    assert cli.main(["evaluate", str(path)]) == 2


def test_evaluate_on_other_mesh_refused(circling_run):
    with pytest.raises(InvalidInputError):
        harness.evaluate_plan_file(plan_files(circling_run)[0], {"generator": "sphere", "triangles": 960})


# -- compare -----------------------------------------------------------------


def test_compare_writes_tables_with_one_reference(circling_run, nsga_run, tmp_path):
    summary = harness.compare_runs([circling_run, nsga_run], tmp_path)
    for name in ("fronts.csv", "hypervolume.csv", "surfaces.csv", "hv_by_generation.csv", "summary.json"):
        assert (tmp_path / name).is_file()
    ref = summary["reference_point"]
    assert ref[0] >= 1.01
    energies = [json.loads(f.read_text())["fitness"]["energy"] for f in plan_files(circling_run) + plan_files(nsga_run)]
    assert ref[1] >= max(energies)
    assert set(summary["planners"]) == {"circling", "nsga2"}


def test_compare_refuses_mixed_meshes(circling_run, tmp_path):
    other = tmp_path / "other"
    harness.run_plan(config("circling", target={"generator": "sphere", "radius": 8.0, "triangles": 192}), other)
    with pytest.raises(InvalidInputError, match="different meshes"):
        harness.compare_runs([circling_run, other], tmp_path / "cmp")
    assert cli.main(["compare", str(circling_run), str(other), "--out", str(tmp_path / "cmp2")]) == 2


# -- seed pool, reproducibility, IO ------------------------------------------


def test_seedpool_has_one_plan_per_level(circling_run, tmp_path):
    out = tmp_path / "pool.json"
    assert cli.main(["seedpool", "--target", "sphere", "--triangles", "192", "--out", str(out)]) == 0
    pool = json.loads(out.read_text())
    assert len(pool["genomes"]) == len(plan_files(circling_run))
    cfg = config("nsga2", seeds=str(out), ea={"num_generations": 1, "p_seeded": 1.0})
    harness.run_plan(cfg, tmp_path / "seeded")
    genomes = {tuple(json.loads(f.read_text())["plan"]["waypoint_ids"]) for f in plan_files(tmp_path / "seeded")}
    assert genomes & {tuple(g) for g in pool["genomes"]}


def test_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        harness.run_plan(config("moead", moead={"eval_budget": 120}), tmp_path / name)
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_output_dir_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(target))
    assert cli.main(["plan", "--target", "sphere", "--triangles", "192", "--planner", "circling"]) == 0
    assert plan_files(target)


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    path = tmp_path / "x.json"
    path.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        harness.atomic_write_text(path, "new")
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


def test_gen_target(tmp_path, capsys):
    out = tmp_path / "nested.stl"
    assert cli.main(["gen-target", "nested-box", "--out", str(out)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["hidden_area_fraction"] == pytest.approx(0.1538, abs=1e-3)
    assert load_mesh(out).n_triangles == info["triangles"]

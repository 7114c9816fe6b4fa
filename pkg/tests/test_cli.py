"""End-to-end runs of the command-line stages on the miniature config."""
import tempfile
from pathlib import Path

import pytest

from app.commands.base import CommandResult, RunContext
from app.commands.registry import CommandRegistry
from app.core.config import load_run_config
from app.core.engine import PipelineEngine, PipelineStep, default_pipeline
from app.core.workflow import Stage
from app.evaluation.report import read_report
from app.main import EXIT_FAILURE, EXIT_INVALID, EXIT_OK, run

SMOKE = str(Path(__file__).resolve().parents[1] / "configs" / "smoke.yaml")


def iah(*argv) -> int:
    return run([str(a) for a in argv[:1]] + ["--config", SMOKE] + [str(a) for a in argv[1:]])


@pytest.fixture(scope="module")
def workdir():
    """A generated dataset, a trained model and baseline, and their code directories."""
    with tempfile.TemporaryDirectory() as tmp:
        w = Path(tmp)
        assert iah("gen-data", "--out", w / "data") == EXIT_OK
        assert iah("train", "--data", w / "data", "--out", w / "model.ckpt") == EXIT_OK
        assert iah("train-baseline", "--data", w / "data", "--out", w / "baseline.ckpt") == EXIT_OK
        codes = w / "codes"
        assert iah("encode", "--ckpt", w / "model.ckpt", "--data", w / "data", "--out-codes", codes) == EXIT_OK
        assert iah("index", "--codes", w / "codes", "--out", w / "model.index") == EXIT_OK
        yield w


def evaluate(workdir, report) -> int:
    return iah("evaluate", "--codes", workdir / "codes", "--data", workdir / "data", "--report", report)


class TestStages:
    def test_artifacts_exist(self, workdir):
        for name in ("data/train.txt", "data/query.txt", "model.ckpt", "model.ckpt.trace.csv", "baseline.ckpt",
                     "codes/database.codes", "codes/query.codes", "model.index"):
            assert (workdir / name).exists(), name
        trace = (workdir / "model.ckpt.trace.csv").read_text(encoding="utf-8").splitlines()
        assert len(trace) == 1 + 3

    def test_gen_data_is_reproducible(self, workdir):
        with tempfile.TemporaryDirectory() as tmp:
            assert iah("gen-data", "--out", Path(tmp) / "data") == EXIT_OK
            for split in ("train", "database", "query"):
                again = (Path(tmp) / "data" / f"{split}.txt").read_bytes()
                assert again == (workdir / "data" / f"{split}.txt").read_bytes()

    def test_query_from_codes(self, workdir):
        out = workdir / "results.txt"
        assert iah("query", "--codes", workdir / "codes", "--index", workdir / "model.index", "--threshold", 0.0,
                   "--out", out) == EXIT_OK
        lines = out.read_text(encoding="ascii").splitlines()
        assert lines
        query_id, category, rank, image_id, distance = lines[0].split()
        assert rank == "1" and int(distance) >= 0

    def test_query_from_checkpoint_matches_codes(self, workdir):
        from_codes = workdir / "a.txt"
        from_ckpt = workdir / "b.txt"
        assert iah("query", "--codes", workdir / "codes", "--index", workdir / "model.index", "--out",
                   from_codes) == EXIT_OK
        assert iah("query", "--ckpt", workdir / "model.ckpt", "--data", workdir / "data", "--index",
                   workdir / "model.index", "--out", from_ckpt) == EXIT_OK
        assert from_codes.read_bytes() == from_ckpt.read_bytes()

    def test_threshold_one_retains_nothing(self, workdir):
        out = workdir / "empty.txt"
        assert iah("query", "--codes", workdir / "codes", "--index", workdir / "model.index", "--threshold", 1.0,
                   "--out", out) == EXIT_OK
        assert out.read_text(encoding="ascii") == ""

    def test_semantic_query(self, workdir):
        out = workdir / "semantic.txt"
        assert iah("query", "--codes", workdir / "codes", "--semantic", "--topk", 3, "--out", out) == EXIT_OK
        lines = out.read_text(encoding="ascii").splitlines()
        assert len(lines) == 4 * 3
        assert all(line.split()[1] == "-" for line in lines)

    def test_evaluate_is_deterministic(self, workdir):
        first, second = workdir / "r1.csv", workdir / "r2.csv"
        assert evaluate(workdir, first) == EXIT_OK
        assert evaluate(workdir, second) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()
        names = [row.metric for row in read_report(first)]
        assert names[:2] == ["ndcg@2", "ndcg@5"]
        assert "map" in names and "category_map_mean" in names and "random_map" in names and "auc_mean" in names

    def test_saliency(self, workdir):
        out = workdir / "saliency.pgm"
        assert iah("saliency", "--ckpt", workdir / "model.ckpt", "--data", workdir / "data", "--image-id", 0,
                   "--category", 1, "--out", out) == EXIT_OK
        data = out.read_bytes()
        assert data.startswith(b"P5\n16 16\n255\n")
        assert len(data) == len(b"P5\n16 16\n255\n") + 16 * 16

    def test_saliency_needs_instance_aware_checkpoint(self, workdir):
        assert iah("saliency", "--ckpt", workdir / "baseline.ckpt", "--data", workdir / "data", "--image-id", 0,
                   "--category", 0, "--out", workdir / "x.pgm") == EXIT_INVALID

    def test_mismatched_dataset(self, workdir):
        assert iah("train", "--data", workdir / "data", "--out", workdir / "other.ckpt",
                   "--set", "scene.categories=4") == EXIT_INVALID


class TestExitCodes:
    def test_invalid_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            assert iah("gen-data", "--out", tmp, "--set", "train.batch_size=1") == EXIT_INVALID

    def test_malformed_yaml_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            bad = Path(tmp) / "bad.yaml"
            bad.write_text("seed: [1\n", encoding="utf-8")
            assert run(["gen-data", "--out", tmp, "--config", str(bad)]) == EXIT_INVALID

    def test_malformed_yaml_override(self):
        with tempfile.TemporaryDirectory() as tmp:
            assert iah("gen-data", "--out", tmp, "--set", "seed=[1") == EXIT_INVALID

    def test_missing_dataset(self):
        with tempfile.TemporaryDirectory() as tmp:
            assert iah("train", "--data", Path(tmp) / "nothing", "--out", Path(tmp) / "m.ckpt") == EXIT_FAILURE

    def test_missing_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            assert run(["gen-data", "--out", tmp, "--config", str(Path(tmp) / "none.yaml")]) == EXIT_FAILURE


class TestPipeline:
    def test_run_all(self):
        with tempfile.TemporaryDirectory() as tmp:
            assert iah("run-all", "--workdir", tmp) == EXIT_OK
            for name in ("model", "baseline"):
                rows = read_report(Path(tmp) / "reports" / f"{name}.csv")
                assert any(row.metric == "category_map_mean" for row in rows)
                assert (Path(tmp) / f"{name}.index").exists()
            baseline = [row.metric for row in read_report(Path(tmp) / "reports" / "baseline.csv")]
            assert "map" not in baseline

    def test_run_all_is_byte_identical(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            assert iah("run-all", "--workdir", first) == EXIT_OK
            assert iah("run-all", "--workdir", second) == EXIT_OK
            files = sorted(p.relative_to(first) for p in Path(first).rglob("*") if p.is_file())
            assert files == sorted(p.relative_to(second) for p in Path(second).rglob("*") if p.is_file())
            for name in ("model.ckpt", "baseline.ckpt", "model.index", "reports/model.csv"):
                assert Path(name) in files
            for name in files:
                assert (Path(first) / name).read_bytes() == (Path(second) / name).read_bytes(), name

    def test_failed_stage_stops_the_pipeline(self):
        class Failing:
            def run(self, ctx):
                return CommandResult(Stage.TRAIN, False, "boom", {})

        registry = CommandRegistry.default()
        registry.mapping[Stage.GEN_DATA] = Failing()
        engine = PipelineEngine(RunContext(cfg=load_run_config(Path(SMOKE))), registry)
        with pytest.raises(RuntimeError, match="boom"):
            engine.run([PipelineStep(Stage.GEN_DATA), PipelineStep(Stage.TRAIN)])
        assert engine.stage == Stage.FAILED
        assert len(engine.results) == 1

    def test_default_pipeline_order(self):
        stages = [step.stage for step in default_pipeline(Path("w"))]
        assert stages[:3] == [Stage.GEN_DATA, Stage.TRAIN, Stage.TRAIN_BASELINE]
        assert stages[3:] == [Stage.ENCODE, Stage.INDEX, Stage.EVALUATE] * 2

import json
from pathlib import Path

import pytest
from click.testing import CliRunner
from PIL import Image

from emorecolor.cli import main, parse_emotion

from conftest import synthetic_image

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def source_png(tmp_path):
    path = tmp_path / "source.png"
    Image.fromarray(synthetic_image(seed=999, width=64, height=48)).save(path)
    return str(path)


class TestParseEmotion:
    def test_one_hot_preset(self):
        assert parse_emotion("joy").p == (0, 0, 0, 1.0, 0, 0, 0)

    def test_pairs_with_normalization(self):
        d = parse_emotion("anger=0.5,sadness=0.3,fear=0.2")
        assert d.p == (0.5, 0.0, 0.2, 0.0, 0.3, 0.0, 0.0)

    def test_pairs_renormalize_any_scale(self):
        d = parse_emotion("joy=3,fear=1")
        assert d.p[3] == pytest.approx(0.75)

    def test_unknown_channel(self):
        import click

        with pytest.raises(click.BadParameter):
            parse_emotion("bliss=1")
        with pytest.raises(click.BadParameter):
            parse_emotion("bliss")


class TestIngestCommand:
    def test_valid_manifest(self, runner, fixture_manifest):
        result = runner.invoke(main, ["ingest", str(fixture_manifest)])
        assert result.exit_code == 0
        assert "accepted:  12" in result.output
        assert "digest:" in result.output

    def test_missing_manifest(self, runner, tmp_path):
        missing = tmp_path / "nope.csv"
        result = runner.invoke(main, ["ingest", str(missing)])
        assert result.exit_code == 2
        assert "nope.csv" in result.output

    def test_bad_row_reported(self, runner, tmp_path, fixture_manifest):
        import shutil

        root = tmp_path / "db"
        shutil.copytree(fixture_manifest.parent / "images", root / "images")
        text = fixture_manifest.read_text().splitlines()
        text = text[:11]  # header + 10 rows
        text.append("broken,images/img_000.png,0.1,0.1,0.1,0.1,0.1,0,0")  # sums to 0.5
        manifest = root / "manifest.csv"
        manifest.write_text("\n".join(text) + "\n")
        result = runner.invoke(main, ["ingest", str(manifest)])
        assert result.exit_code == 0
        assert "accepted:  10" in result.output
        assert "broken: DistributionSumOutOfRange" in result.output


class TestTransformCommand:
    def test_writes_image_and_plan(self, runner, fixture_manifest, source_png, tmp_path):
        out = tmp_path / "out.png"
        result = runner.invoke(main, [
            "transform", source_png, "--db", str(fixture_manifest),
            "--emotion", "joy=1", "-o", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert out.exists()
        plan = json.loads((tmp_path / "out.png.plan.json").read_text())
        assert len(plan["targets"]) == min(10, plan["candidates"]["size"])
        assert "weight" in result.output and "bc" in result.output

    def test_repeat_runs_identical_plan(self, runner, fixture_manifest, source_png, tmp_path):
        plans = []
        for name in ("a.png", "b.png"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "transform", source_png, "--db", str(fixture_manifest),
                "--emotion", "sadness", "-o", str(out),
            ])
            assert result.exit_code == 0, result.output
            plans.append((tmp_path / f"{name}.plan.json").read_bytes())
        assert plans[0] == plans[1]

    def test_env_var_database(self, runner, fixture_manifest, source_png, tmp_path, monkeypatch):
        monkeypatch.setenv("EMORECOLOR_DB", str(fixture_manifest))
        out = tmp_path / "out.png"
        result = runner.invoke(main, [
            "transform", source_png, "--emotion", "joy", "-o", str(out),
        ])
        assert result.exit_code == 0, result.output

    def test_bad_emotion_exits_2(self, runner, fixture_manifest, source_png, tmp_path):
        result = runner.invoke(main, [
            "transform", source_png, "--db", str(fixture_manifest),
            "--emotion", "bliss=1", "-o", str(tmp_path / "o.png"),
        ])
        assert result.exit_code == 2

    def test_unloadable_db_exits_2(self, runner, source_png, tmp_path):
        result = runner.invoke(main, [
            "transform", source_png, "--db", str(tmp_path / "none.csv"),
            "--emotion", "joy", "-o", str(tmp_path / "o.png"),
        ])
        assert result.exit_code == 2


class TestAblateCommand:
    def test_two_signatures_report(self, runner, fixture_manifest, source_png, tmp_path):
        out_dir = tmp_path / "report"
        result = runner.invoke(main, [
            "ablate", source_png, "--db", str(fixture_manifest),
            "--emotion", "joy", "--signatures", "fallback:g4",
            "--signatures", "fallback:g2", "-o", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        plans = sorted(p.name for p in out_dir.glob("*.plan.json"))
        assert plans == ["source.png__fallback-g2.plan.json",
                        "source.png__fallback-g4.plan.json"]
        report = (out_dir / "report.txt").read_text()
        assert "fallback:g4" in report and "fallback:g2" in report

    def test_missing_signature_sidecars(self, runner, fixture_manifest, source_png, tmp_path):
        result = runner.invoke(main, [
            "ablate", source_png, "--db", str(fixture_manifest),
            "--emotion", "joy", "--signatures", "fallback:g8",
            "-o", str(tmp_path / "r"),
        ])
        assert result.exit_code == 2
        assert "fallback:g8" in result.output

    def test_duplicate_signature_identical_rows(self, runner, fixture_manifest, source_png, tmp_path):
        out_dir = tmp_path / "report"
        result = runner.invoke(main, [
            "ablate", source_png, "--db", str(fixture_manifest),
            "--emotion", "joy", "--signatures", "fallback:g4",
            "--signatures", "fallback:g4", "-o", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        rows = (out_dir / "report.txt").read_text().splitlines()[1:]
        assert len(rows) == 2 and rows[0] == rows[1]


class TestStatsCommand:
    def test_stats_output(self, runner, fixture_manifest, fixture_db):
        result = runner.invoke(main, ["stats", "--db", str(fixture_manifest)])
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["records"] == 12
        assert doc["digest"] == fixture_db.digest

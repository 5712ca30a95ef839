import json
from pathlib import Path

import pytest
from rich.console import Console

from mufasa.cli.main import main
from mufasa.log import LOG

from .. import TESTDATA

SMOKE = str(TESTDATA / "configs" / "smoke.toml")
CONTEXTS = TESTDATA / "contexts"


@pytest.fixture(autouse=True)
def reset_log(monkeypatch: pytest.MonkeyPatch):
    # wide enough that messages with long paths stay on one line
    monkeypatch.setattr(LOG, "console", Console(stderr=True, highlight=False, width=1000))
    LOG.reset()
    yield
    LOG.reset()
    LOG.debug_enabled = False


def _fail(argv: list[str], capsys: pytest.CaptureFixture[str]) -> str:
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1
    return capsys.readouterr().err


def test_ntk_single_context(capsys: pytest.CaptureFixture[str]):
    main(["ntk", str(CONTEXTS / "single.csv"), "--depth", "1"])
    out = capsys.readouterr().out
    assert "T = 1" in out
    assert "effective dimension = 1.3219" in out
    assert "1.5" in out
    assert "regret bound" not in out


def test_ntk_regret_bound(capsys: pytest.CaptureFixture[str]):
    main(["ntk", str(CONTEXTS / "orthonormal.csv"), "--bandits", "3", "--c-bar", "2"])
    out = capsys.readouterr().out
    assert "T = 3" in out
    assert "regret bound (3 bandits) = " in out


def test_ntk_parse_error(capsys: pytest.CaptureFixture[str]):
    err = _fail(["ntk", str(CONTEXTS / "ragged.csv")], capsys)
    assert "error:" in err
    assert "ragged.csv:3: expected 2 values, got 1" in err


def test_ntk_too_many_contexts(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = tmp_path / "many.csv"
    path.write_text("0.5,0.5\n" * 501, encoding="utf-8")
    err = _fail(["ntk", str(path)], capsys)
    assert "holds 501 contexts" in err


def test_run(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    main(["run", SMOKE, "--run.outdir", str(tmp_path), "--run.rounds", "3", "--agent.kind", "random"])
    out = capsys.readouterr().out
    assert "random" in out
    assert (tmp_path / "random_0.csv").is_file()
    assert (tmp_path / "random_1.csv").is_file()
    assert (tmp_path / "summary.csv").is_file()


def test_run_rejects_invalid_override(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    err = _fail(["run", SMOKE, "--run.outdir", str(tmp_path), "--run.rounds", "0"], capsys)
    assert "run.rounds: must be >= 1" in err
    assert not (tmp_path / "summary.csv").exists()


def test_run_rejects_wrong_type(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    err = _fail(["run", SMOKE, "--run.outdir", str(tmp_path), "--env.bandits", "two"], capsys)
    assert "env.bandits: wrong type (got str)" in err


def test_compare(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    main(
        [
            "compare",
            SMOKE,
            "--run.outdir",
            str(tmp_path),
            "--run.rounds",
            "4",
            "--run.agents",
            '["random", "linucb"]',
        ]
    )
    out = capsys.readouterr().out
    assert "linucb" in out
    assert len((tmp_path / "compare.csv").read_text(encoding="utf-8").splitlines()) == 1 + 2 * 4


def test_verbose_enables_debug(tmp_path: Path):
    main(["run", SMOKE, "-v", "--run.outdir", str(tmp_path), "--run.rounds", "2", "--agent.kind", "random"])
    assert LOG.debug_enabled


def test_config_show_json(capsys: pytest.CaptureFixture[str]):
    main(["config", "--config", SMOKE, "--show-format", "json", "--profile", "full"])
    shown = json.loads(capsys.readouterr().out)
    assert shown["profile"] == "full"
    assert shown["agent"]["sub_width"] == 8
    assert shown["agent"]["neuucb_width"] == 100
    assert shown["run"]["rounds"] == 20


def test_config_show_plain(capsys: pytest.CaptureFixture[str]):
    main(["config", "--show", "--env.bandits", "3"])
    lines = capsys.readouterr().out.splitlines()
    assert "profile=default" in lines
    assert "env.bandits=3" in lines


def test_config_check(capsys: pytest.CaptureFixture[str]):
    main(["config", "--config", SMOKE])
    captured = capsys.readouterr()
    assert not captured.out
    assert "config ok: profile default, 2 bandits" in captured.err
    assert "agents mufasa, 20 rounds x 2 seeds" in captured.err


def test_config_check_builds_the_environment(capsys: pytest.CaptureFixture[str]):
    dataset_config = str(TESTDATA / "configs" / "dataset.toml")
    err = _fail(["config", "--config", dataset_config, "--env.dataset", "../datasets/ragged.csv"], capsys)
    assert "ragged.csv:3: expected 3 cells, got 2" in err


def test_config_check_rejects_settings(capsys: pytest.CaptureFixture[str]):
    err = _fail(["config", "--config", SMOKE, "--env.bandits", "0"], capsys)
    assert "env.bandits: must be >= 1" in err


def test_config_gen_docs(tmp_path: Path):
    main(["config", "--gen-docs", str(tmp_path / "CONFIG.md")])
    content = (tmp_path / "CONFIG.md").read_text(encoding="utf-8")
    assert "`env.bandits`" in content
    assert "#### Profile `full`" in content


def test_missing_command():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2

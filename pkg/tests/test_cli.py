"""CLI and config tests: determinism, exit codes, file outputs, error paths."""

import json
import os

import numpy as np
import pytest

from fsdd.cli import main
from fsdd.codec import FormatError
from fsdd.config import merge, parse_config_file, run_config


def _read(path, mode="rb"):
    with open(path, mode) as fh:
        return fh.read()


TOY_CFG = """
# two-point toy experiment
kind = two_point
C = 6
M = 8
steps = 120
batch_size = 32
embed_dim = 16
num_layers = 1
num_heads = 2
ema_decay = 0.95
n_train = 256
seed = 5
"""


@pytest.fixture()
def toy_cfg(tmp_path):
    path = str(tmp_path / "toy.cfg")
    with open(path, "w") as fh:
        fh.write(TOY_CFG)
    return path


def test_config_parsing_and_merge(toy_cfg):
    values = parse_config_file(toy_cfg)
    cfg = merge(values, {"steps": 10, "seed": None})
    assert cfg["steps"] == 10  # flag overrides file
    assert cfg["seed"] == 5  # None override is ignored
    run = run_config(merge(values, {}))
    assert run.denoiser.codebook_size == 6
    assert run.train.steps == 120
    assert run.data_spec.kind == "two_point"


def test_config_rejects_unknown_key(tmp_path):
    path = str(tmp_path / "bad.cfg")
    with open(path, "w") as fh:
        fh.write("stepz = 5\n")
    with pytest.raises(FormatError, match="unknown config key"):
        parse_config_file(path)


def test_config_rejects_malformed_lines(tmp_path):
    path = str(tmp_path / "bad.cfg")
    with open(path, "w") as fh:
        fh.write("steps 5\n")
    with pytest.raises(FormatError, match=r"bad\.cfg:1"):
        parse_config_file(path)
    with open(path, "w") as fh:
        fh.write("steps = five\n")
    with pytest.raises(FormatError, match="cannot parse"):
        merge(parse_config_file(path), {})


def test_gen_data_deterministic(tmp_path):
    out1 = str(tmp_path / "a.txt")
    out2 = str(tmp_path / "b.txt")
    args = ["gen-data", "--kind", "two_point", "--C", "8", "--M", "16",
            "--n", "128", "--seed", "7"]
    assert main(args + ["--out", out1]) == 0
    assert main(args + ["--out", out2]) == 0
    assert _read(out1) == _read(out2)
    header = _read(out1, "r").splitlines()[0]
    assert header == "C=8 M=16"


def test_gen_data_token_format_and_labels(tmp_path):
    out = str(tmp_path / "tok.txt")
    rc = main(["gen-data", "--kind", "class_conditional_two_point", "--C", "6", "--M", "8",
               "--num-classes", "2", "--n", "50", "--seed", "3", "--format", "tokens",
               "--out", out])
    assert rc == 0
    lines = _read(out, "r").splitlines()
    assert lines[0] == "C=6 M=8"
    assert all(len(line.split()) == 8 for line in lines[1:])
    labels = _read(out + ".labels", "r").split()
    assert len(labels) == 50 and set(labels) <= {"0", "1"}


def test_roundtrip_exit_codes(tmp_path):
    out = str(tmp_path / "tok.txt")
    main(["gen-data", "--kind", "two_point", "--C", "5", "--M", "6", "--n", "20",
          "--seed", "1", "--format", "tokens", "--out", out])
    assert main(["roundtrip", "--in", out]) == 0
    bad = str(tmp_path / "bad.txt")
    with open(bad, "w") as fh:
        fh.write("C=5 M=6\n0 0 0\n")
    assert main(["roundtrip", "--in", bad]) == 1


def test_unknown_flag_and_missing_file_exit_codes(tmp_path, capsys):
    assert main(["gen-data", "--bogus", "1"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["roundtrip", "--in", str(tmp_path / "nope.txt")]) == 2


def test_malformed_config_rejected_before_work(tmp_path, capsys):
    cfg = str(tmp_path / "x.cfg")
    with open(cfg, "w") as fh:
        fh.write("bogus_key = 2\n")
    rc = main(["train", "--config", cfg, "--out", str(tmp_path / "m.ckpt")])
    assert rc == 1
    assert "unknown config key" in capsys.readouterr().err
    assert not os.path.exists(str(tmp_path / "m.ckpt"))


def test_end_to_end_pipeline(tmp_path, toy_cfg):
    ckpt = str(tmp_path / "m.ckpt")
    log = str(tmp_path / "m.csv")
    samples = str(tmp_path / "s.txt")
    report = str(tmp_path / "report")

    assert main(["train", "--config", toy_cfg, "--out", ckpt, "--log", log]) == 0
    assert os.path.exists(ckpt)
    assert os.path.exists(log + "_loss.png")

    assert main(["sample", "--ckpt", ckpt, "--n", "40", "--steps", "10",
                 "--seed", "2", "--out", samples]) == 0
    lines = _read(samples, "r").splitlines()
    assert lines[0] == "C=6 M=8"
    assert len(lines) == 41
    meta = [json.loads(l) for l in _read(samples + ".meta.jsonl", "r").splitlines()]
    assert len(meta) == 40
    assert meta[0]["steps"] == 10 and meta[0]["p"] == 0.95

    assert main(["eval", "--samples", samples, "--spec", toy_cfg, "--out", report]) == 0
    text = _read(report + ".txt", "r")
    assert "tv distance" in text
    csv_lines = _read(report + ".csv", "r").splitlines()
    assert csv_lines[0].startswith("n_samples,tv_distance")
    assert os.path.exists(report + "_support.png")
    assert os.path.exists(report + "_sums.png")


def test_sample_baseline_arm_and_eval(tmp_path, toy_cfg):
    ckpt = str(tmp_path / "m.ckpt")
    assert main(["train", "--config", toy_cfg, "--steps", "60", "--out", ckpt,
                 "--no-figures"]) == 0
    raw = str(tmp_path / "raw.txt")
    assert main(["sample", "--ckpt", ckpt, "--n", "30", "--steps", "8", "--seed", "4",
                 "--top-p", "1.0", "--baseline", "discrete_no_fixed_sum", "--out", raw]) == 0
    assert main(["eval", "--samples", raw, "--config", toy_cfg, "--no-figures",
                 "--out", str(tmp_path / "rep")]) == 0
    # token output is refused for the unconstrained arm
    assert main(["sample", "--ckpt", ckpt, "--n", "4", "--baseline", "discrete_no_fixed_sum",
                 "--format", "tokens", "--out", str(tmp_path / "t.txt")]) == 1


def test_inspect_checkpoint(tmp_path, toy_cfg, capsys):
    ckpt = str(tmp_path / "m.ckpt")
    main(["train", "--config", toy_cfg, "--steps", "30", "--out", ckpt, "--no-figures"])
    capsys.readouterr()
    assert main(["inspect-checkpoint", "--ckpt", ckpt]) == 0
    desc = json.loads(capsys.readouterr().out)
    assert desc["step"] == 30
    assert desc["config"]["codebook_size"] == 6
    assert "params/head_w" in desc["tensors"]


def test_pipeline_byte_identical_across_runs(tmp_path, toy_cfg):
    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        data = str(d / "data.txt")
        ckpt = str(d / "m.ckpt")
        samples = str(d / "s.txt")
        report = str(d / "rep")
        assert main(["gen-data", "--config", toy_cfg, "--n", "96", "--out", data]) == 0
        assert main(["train", "--config", toy_cfg, "--steps", "40", "--data", data,
                     "--out", ckpt, "--no-figures"]) == 0
        assert main(["sample", "--ckpt", ckpt, "--n", "25", "--steps", "6", "--seed", "9",
                     "--out", samples]) == 0
        assert main(["eval", "--samples", samples, "--config", toy_cfg,
                     "--out", report]) == 0
        return {
            "data": _read(data),
            "ckpt": _read(ckpt),
            "samples": _read(samples),
            "meta": _read(samples + ".meta.jsonl"),
            "txt": _read(report + ".txt"),
            "csv": _read(report + ".csv"),
            "fig_support": _read(report + "_support.png"),
            "fig_sums": _read(report + "_sums.png"),
        }

    first = run("one")
    second = run("two")
    for key in first:
        assert first[key] == second[key], f"artifact {key} differs between identical runs"

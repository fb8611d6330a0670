"""Figure-rendering smoke tests: files appear, are PNG, and are run-stable."""

import numpy as np

from fsdd.plots import plot_sum_histogram, plot_support_comparison, plot_training_log

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _is_png(path):
    with open(path, "rb") as fh:
        return fh.read(8) == PNG_MAGIC


def test_plot_training_log(tmp_path):
    log = tmp_path / "train.csv"
    log.write_text(
        "step,loss,ema_loss,wall_ms\n"
        + "\n".join(f"{s},{2.0 / (s + 1)},{2.2 / (s + 1)},5.0" for s in range(1, 40))
        + "\n"
    )
    out = str(tmp_path / "loss.png")
    assert plot_training_log(str(log), out) == out
    assert _is_png(out)


def test_plot_support_comparison_with_overflow_bucket(tmp_path):
    reference = {(2, 0): 0.5, (0, 2): 0.5}
    empirical = {(2, 0): 0.4, (0, 2): 0.35, (1, 1): 0.25}
    out = str(tmp_path / "support.png")
    plot_support_comparison(empirical, reference, out, max_atoms=2)
    assert _is_png(out)


def test_plot_sum_histogram_deterministic(tmp_path):
    sums = np.array([16] * 50 + [15, 17, 17])
    a = str(tmp_path / "a.png")
    b = str(tmp_path / "b.png")
    plot_sum_histogram(sums, 16, a)
    plot_sum_histogram(sums, 16, b)
    assert _is_png(a)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()

import os

import pytest

from tailrisk import cli


def _simulate(tmp_path, n=900, seed=7):
    out = tmp_path / "sim.csv"
    rc = cli.main(["simulate", "--out", str(out), "--n", str(n),
                   "--seed", str(seed)])
    assert rc == 0
    return out


class TestSimulate:
    def test_writes_price_file(self, tmp_path):
        out = _simulate(tmp_path)
        lines = out.read_text().splitlines()
        assert lines[0] == "date,price"
        assert len(lines) == 901
        assert lines[1].startswith("2008-01-02,")

    def test_deterministic(self, tmp_path):
        a = _simulate(tmp_path, seed=3).read_text()
        os.rename(tmp_path / "sim.csv", tmp_path / "a.csv")
        b = _simulate(tmp_path, seed=3).read_text()
        assert a == b

    def test_invalid_persistence(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--out", str(tmp_path / "x.csv"),
                       "--persistence", "1.2"])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestStats:
    def test_full_sample(self, tmp_path, capsys):
        out = _simulate(tmp_path)
        rc = cli.main(["stats", "--input", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "full sample" in text and "kurtosis" in text
        assert "Ljung-Box 10" in text and "Ljung-Box 20" in text

    def test_with_split(self, tmp_path, capsys):
        out = _simulate(tmp_path)
        rc = cli.main(["stats", "--input", str(out), "--split", "2009-09-01"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "in-sample" in text and "out-of-sample" in text

    def test_missing_file(self, tmp_path, capsys):
        rc = cli.main(["stats", "--input", str(tmp_path / "nope.csv")])
        assert rc == 1


class TestBacktest:
    def _config(self, tmp_path, price, **extra):
        lines = [f"price_file = {price}", "split_date = 2009-09-01",
                 "models = HS,EWQR", "un_sims = 2000",
                 f"out_dir = {tmp_path / 'out'}"]
        lines += [f"{k} = {v}" for k, v in extra.items()]
        p = tmp_path / "cfg.txt"
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_runs_and_writes_reports(self, tmp_path, capsys):
        price = _simulate(tmp_path)
        rc = cli.main(["backtest", "--config",
                       str(self._config(tmp_path, price))])
        assert rc == 0
        written = capsys.readouterr().out.splitlines()
        assert all(os.path.exists(p) for p in written)
        assert any("adequacy_var" in p for p in written)

    def test_model_override(self, tmp_path, capsys):
        price = _simulate(tmp_path)
        rc = cli.main(["backtest", "--config",
                       str(self._config(tmp_path, price)), "--models", "HS"])
        assert rc == 0
        detail = [p for p in capsys.readouterr().out.splitlines()
                  if "tests_detail" in p][0]
        text = open(detail).read()
        assert "HS" in text and "EWQR" not in text

    def test_bad_model_override(self, tmp_path, capsys):
        price = _simulate(tmp_path)
        rc = cli.main(["backtest", "--config",
                       str(self._config(tmp_path, price)),
                       "--models", "SVM"])
        assert rc == 1
        assert "unknown model" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        p = tmp_path / "bad.txt"
        p.write_text("nonsense\n")
        rc = cli.main(["backtest", "--config", str(p)])
        assert rc == 1

    def test_missing_config(self, tmp_path):
        rc = cli.main(["backtest", "--config", str(tmp_path / "nope.txt")])
        assert rc == 1


class TestTailIndex:
    def test_prints_comparison(self, tmp_path, capsys):
        price = _simulate(tmp_path, n=2000, seed=5)
        rc = cli.main(["tailindex", "--input", str(price)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "k_garch" in text and "0.95" in text

import numpy as np
import pytest

from tailrisk.garch import GarchParams, simulate


@pytest.fixture(scope="session")
def garch_path():
    """A moderately long simulated GARCH-t return path shared across tests."""
    params = GarchParams(0.0, 0.1, (1e-6, 0.90, 0.08), 6.0)
    return params, simulate(params, "GARCH", 4000, seed=42)


@pytest.fixture
def price_csv(tmp_path):
    """Synthetic price file factory: price_csv(n, seed) -> path."""
    def _make(n=900, seed=7, with_roll=False):
        params = GarchParams(0.0, 0.05, (8e-6, 0.89, 0.08), 6.0)
        r = simulate(params, "GARCH", n - 1, seed=seed)
        prices = 100.0 * np.exp(np.cumsum(np.concatenate([[0.0], r.values])))
        dates = np.datetime64("2008-01-02", "D") + np.arange(n)
        path = tmp_path / f"prices_{seed}.csv"
        with open(path, "w") as fh:
            if with_roll:
                fh.write("date,price,roll\n")
                for i, (d, p) in enumerate(zip(dates, prices)):
                    fh.write(f"{d},{p:.6f},{1 if i % 30 == 21 else 0}\n")
            else:
                fh.write("date,price\n")
                for d, p in zip(dates, prices):
                    fh.write(f"{d},{p:.6f}\n")
        return path
    return _make


@pytest.fixture
def fuel_csv(tmp_path):
    """Fuel price file aligned with a price file's dates."""
    def _make(price_path, seed=11):
        import pandas as pd
        pr = pd.read_csv(price_path)
        rng = np.random.default_rng(seed)
        n = len(pr)
        path = tmp_path / f"fuel_{seed}.csv"
        coal = 50.0 * np.exp(np.cumsum(rng.normal(0, 0.01, n)))
        gas = 20.0 * np.exp(np.cumsum(rng.normal(0, 0.015, n)))
        with open(path, "w") as fh:
            fh.write("date,coal,gas\n")
            for d, c, g in zip(pr["date"], coal, gas):
                fh.write(f"{d},{c:.6f},{g:.6f}\n")
        return path
    return _make

import numpy as np
import pytest
from scipy.special import expit

from predstab.dataset import Dataset, SimConfig, simulate_population
from predstab.engines import RiskModel
from predstab._random import derive_rng


class ConstantRisk(RiskModel):
    """Ignores the data; every prediction is ``risk``."""

    engine = "constant"

    def __init__(self, risk=0.3):
        self.risk = risk

    def fit(self, X, y):
        self._validate_fit(X, y)
        return self

    def predict_risk(self, X):
        X = self._validate_predict(X)
        return np.full(X.shape[0], self.risk)


class FixedExpit(RiskModel):
    """Ignores the data; risk is ``expit(first column)``."""

    engine = "fixed_expit"

    def fit(self, X, y):
        self._validate_fit(X, y)
        return self

    def predict_risk(self, X):
        X = self._validate_predict(X)
        return expit(X[:, 0])


class NoisyConstant(RiskModel):
    """Constant risk plus seeded noise: variability with a known distribution."""

    engine = "noisy_constant"

    def __init__(self, risk=0.3, sd=0.05, random_state=None):
        self.risk = risk
        self.sd = sd
        self.random_state = random_state

    def fit(self, X, y):
        self._validate_fit(X, y)
        self.shift_ = float(np.random.default_rng(self.random_state).normal(0.0, self.sd))
        return self

    def predict_risk(self, X):
        X = self._validate_predict(X)
        return np.full(X.shape[0], np.clip(self.risk + self.shift_, 1e-6, 1 - 1e-6))


class FailingOn(NoisyConstant):
    """NoisyConstant that raises FitError whenever its seed is a multiple of ``fail_every``."""

    engine = "failing"

    def __init__(self, risk=0.3, sd=0.05, fail_every=3, random_state=None):
        super().__init__(risk=risk, sd=sd, random_state=random_state)
        self.fail_every = fail_every

    def fit(self, X, y):
        from predstab.exceptions import FitError

        if self.random_state is not None and self.random_state % self.fail_every == 0:
            raise FitError("scheduled failure")
        return super().fit(X, y)


@pytest.fixture
def sim_ds():
    return simulate_population(SimConfig(n_noise=3), 200, derive_rng(11, 99))


@pytest.fixture
def small_ds():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(60, 2))
    y = (rng.random(60) < expit(x[:, 0])).astype(int)
    return Dataset(x, ("a", "b"), y, subgroup=np.where(x[:, 1] > 0, "f", "m"))


# ---- acceptance criterion reporting ----

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): test belongs to an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "status": [], "details": []})
    entry["status"].append("FAIL" if rep.failed else "SKIP" if rep.skipped else "PASS")
    entry["details"].extend(str(v) for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        st = e["status"]
        status = "FAIL" if "FAIL" in st else "PASS" if "PASS" in st else "SKIP"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {number:>2} {status}: {e['title']}" + (f" [{detail}]" if detail else ""))

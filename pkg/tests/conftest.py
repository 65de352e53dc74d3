import hypothesis
import pytest

hypothesis.settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def table1():
    """All parameter-sweep blocks of the reference experiment, 5 seeds each.

    Computed once per session; used by the acceptance gate and the trend
    tests.  Keys are the swept axis names.
    """
    from trajclass.experiments import ExperimentConfig, sweep

    base = ExperimentConfig()  # seed 0, Ts=0.1, N=10, L=50, Qv=1000
    return {
        "N": sweep(base, "N", [2, 5, 10, 50, 100], n_seeds=5),
        "L": sweep(base, "L", [10, 50, 100], n_seeds=5),
        "Ts": sweep(base, "Ts", [0.01, 0.05, 0.1, 0.5, 1.0], n_seeds=5),
    }

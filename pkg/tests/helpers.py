"""Random system / dataset generators shared across test modules."""

import numpy as np

from trajclass.sysmodel import LinearSystem, NotObservableError, feasibility_check
from trajclass.trajectories import Dataset, Trajectory, simulate


def random_observable_system(rng, n, m=1):
    """Random observable pair with spectral radius scaled into (0, 1.1]."""
    for _ in range(100):
        A = rng.normal(size=(n, n))
        radius = max(abs(np.linalg.eigvals(A)))
        if radius > 0:
            A = A * (rng.uniform(0.5, 1.1) / radius)
        C = rng.normal(size=(m, n))
        try:
            return LinearSystem(A, C)
        except NotObservableError:
            continue
    raise RuntimeError("could not draw an observable system")


def random_feasible_pair(rng, n_max=4, m=1, N=None, min_margin=1e-6):
    """Feasible system pair with separation margin above ``min_margin``.

    Returns (sys1, sys2, N); N defaults to n1 + n2 + 2.
    """
    for _ in range(200):
        n1 = int(rng.integers(1, n_max + 1))
        n2 = int(rng.integers(1, n_max + 1))
        horizon = N if N is not None else n1 + n2 + 2
        sys1 = random_observable_system(rng, n1, m)
        sys2 = random_observable_system(rng, n2, m)
        rep = feasibility_check(sys1, sys2, horizon)
        if rep.feasible and rep.smallest_singular_value > min_margin:
            return sys1, sys2, horizon
    raise RuntimeError("could not draw a feasible pair")


def labelled_dataset(rng, sys1, sys2, N, per_class, sigma=1.0):
    """Small dataset drawn directly through simulate (no dataset RNG plumbing)."""
    items = []
    for sys, label in ((sys1, 1), (sys2, -1)):
        for _ in range(per_class):
            t = simulate(sys, rng.normal(0.0, sigma, size=sys.n), N)
            while t.is_zero:
                t = simulate(sys, rng.normal(0.0, sigma, size=sys.n), N)
            items.append(Trajectory(Y=t.Y, N=N, m=sys.m, label=label))
    return Dataset(items=tuple(items))

"""Shared fixtures: finite-difference oracles and random obstacle factories."""

import numpy as np
import pytest

from navfield.geometry import Obstacle


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient with step scaled by coordinate magnitude."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(3)
    for i in range(3):
        hi = h * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += hi
        xm[i] -= hi
        g[i] = (f(xp) - f(xm)) / (2.0 * hi)
    return g


def fd_hessian(grad_f, x, h=1e-5):
    """Central differences of a gradient function; symmetrized."""
    x = np.asarray(x, dtype=float)
    H = np.zeros((3, 3))
    for i in range(3):
        hi = h * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += hi
        xm[i] -= hi
        H[:, i] = (grad_f(xp) - grad_f(xm)) / (2.0 * hi)
    return 0.5 * (H + H.T)


def rel_err(a, b, floor=1e-9):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), floor)


def grads_consistent(g_ana, g_fd, rtol=1e-5, h=1e-6, f_scale=1.0):
    """Analytic vs FD gradient check honoring the FD noise floor.

    Central differences carry absolute rounding noise ~ eps * |f| / h, so
    gradients near or below that floor are compared absolutely; everything
    else must match to ``rtol``.
    """
    noise = 8.0 * np.finfo(float).eps * (1.0 + abs(f_scale)) / (2.0 * h)
    if rel_err(g_ana, g_fd) <= rtol:
        return True
    return np.linalg.norm(np.asarray(g_ana) - np.asarray(g_fd)) <= 100.0 * noise


def random_obstacle(rng, kind=None):
    """One random primitive (not boundary); kinds: sphere, full, capped."""
    if kind is None:
        kind = rng.choice(["sphere", "full_cylinder", "capped_cylinder"])
    if kind == "sphere":
        return Obstacle.sphere(rng.uniform(-2, 2, 3), rng.uniform(0.3, 1.2))
    if kind == "full_cylinder":
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        return Obstacle.full_cylinder(rng.uniform(-2, 2, 3), axis,
                                      rng.uniform(0.3, 1.0))
    a = rng.uniform(-2, 2, 3)
    d = rng.normal(size=3)
    d *= rng.uniform(1.0, 3.0) / np.linalg.norm(d)
    return Obstacle.capped_cylinder(a, a + d, rng.uniform(0.3, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

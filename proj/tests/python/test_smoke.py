import json
import math

import numpy as np
import pytest

import chrflow


def test_resolve_config_fills_defaults():
    cfg = json.loads(chrflow.resolve_config("{}"))
    assert cfg["grid"]["nodes"] == [65]
    assert cfg["solver"]["kind"] == "weak"


def test_config_error_names_key():
    with pytest.raises(chrflow.ConfigError, match="grid.nodez"):
        chrflow.resolve_config('{"grid": {"nodez": [3]}}')
    with pytest.raises(ValueError):
        chrflow.resolve_config('{"elasticity": {"lambda": 1.0}}')


def test_weak_run_conserves_equilibrium():
    cfg = {
        "grid": {"dim": 1, "nodes": [17]},
        "free_energy": {"kind": "regular_solution", "omega": 3.0, "kt": 1.0},
        "rate": {"kind": "truncated_bv"},
        "time": {"T": 0.01, "steps": 10},
        "initial": {"kind": "equilibrium"},
    }
    out = chrflow.run(json.dumps(cfg))
    assert out["exit_code"] == 0
    states = np.asarray(out["states"])
    assert states.shape == (11, 17)
    assert np.max(np.abs(states - chrflow.reference_equilibrium())) < 1e-9


def test_energy_decreases_on_perturbed_run():
    cfg = {
        "grid": {"dim": 1, "nodes": [33]},
        "free_energy": {"kind": "regular_solution", "omega": 3.0, "kt": 1.0},
        "rate": {"kind": "truncated_bv"},
        "time": {"T": 0.01, "steps": 10},
        "initial": {"kind": "perturbation", "base": 0.5, "amplitude": 0.03, "seed": 1},
    }
    out = chrflow.run(json.dumps(cfg))
    assert out["exit_code"] == 0
    assert out["energy"][-1] <= out["energy0"] + 1e-12


def test_seminorm_of_linear_function():
    t = np.linspace(0.0, 1.0, 65)
    s = 0.5
    exact = math.sqrt(2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s)))
    assert chrflow.gagliardo_seminorm(t, 1.0, s) == pytest.approx(exact, rel=1e-12)
    lhs, rhs = chrflow.besov_bound(np.sin(3 * t), 1.0, 0.25)
    assert lhs <= rhs
    with pytest.raises(chrflow.InvalidArgument):
        chrflow.gagliardo_seminorm(t, 1.0, 1.0)


def test_verify_and_criterion():
    checks = chrflow.verify("physics", 3)
    assert checks and all(c["pass"] for c in checks)
    r = chrflow.run_criterion(4)
    assert r["pass"]


def test_manufactured_error_decreases():
    assert chrflow.manufactured_error(65, 1e-4, 0.05) < chrflow.manufactured_error(33, 1e-4, 0.05)

import math

import pytest

import mflab


def test_kernel_and_green():
    k = mflab.kernel_info("nn", 3)
    assert k["support_size"] == 6
    g = mflab.green("nn", 3, 1, 0.5)
    assert abs(g["chi"]["est"] * 0.5 - 1) < 1e-8
    assert abs(g["xi_sq"]["est"] * 0.5 - 1) < 1e-8


def test_green_identity():
    r = mflab.green_identity("nn", 3, 1, 0.1, 0.3)
    assert r["pass"]


def test_saw():
    t = mflab.saw_totals(2, "1", 4)
    assert t == ["1", "1", "3/4", "9/16", "25/64"]
    for r in mflab.saw_checks(2, "1/2", 5, "1/10", "1/4"):
        assert r["pass"]


def test_perc_and_ising():
    # Ring of 3 with edge probability beta/2: P[0 <-> 1] = p + p^2 - p^3.
    g = mflab.perc_torus_two_point(1, 3, 1.0)
    p = 0.5
    assert g[0] == 1.0
    assert abs(max(g[1:]) - (p + p * p - p**3)) < 1e-14
    assert abs(mflab.ising_two_point(1, "2", [1], 0.8) - math.tanh(0.4)) < 1e-12


def test_lattice_trees():
    assert mflab.lt_g_poly(1, 2) == ["1", "1", "3/4"]


def test_config_errors():
    cfg = mflab.parse_config({"schema": 1})
    assert cfg["saw"]["N"] == 6
    with pytest.raises(ValueError) as e:
        mflab.parse_config({"schema": 1, "green": {"beta": "x"}})
    assert "green.beta" in str(e.value)


def test_observe_and_verify():
    csv = mflab.observe("ising", points=4)
    assert csv.splitlines()[0].startswith("model,")
    assert len(csv.splitlines()) == 5
    out = mflab.verify("ising")
    assert out["pass"]
    assert len(out["entries"]) >= 9
    assert mflab.verify("none")["entries"] == []

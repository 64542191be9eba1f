import json

import numpy as np

from flatdimers import experiments as ex
from flatdimers.kasteleyn import TwistVector

from conftest import graph, kmatrix

SMALL = (("hex-torus", 1, None), ("square-pillow", 1, "pillow_g2"))


def test_oracle_small_graphs_pass():
    rep = ex.run_oracle_suite(SMALL)
    assert rep["passed"]
    for g in rep["graphs"]:
        assert g["formula_rel_error"] <= 1e-10
        assert g["calibration_unique"]
        assert g["first_failure"] is None


def test_corrupted_sign_is_caught():
    rep = ex.run_oracle_suite(SMALL, corrupt_edge=5)
    assert not rep["passed"]
    assert all(not g["passed"] for g in rep["graphs"])
    fail = [g for g in rep["graphs"] if "first_failure" in g and g["first_failure"]]
    assert fail and len(fail[0]["first_failure"]["period_vector"]) in (2, 4)


def test_oracle_generic_twists():
    K = kmatrix("hex-torus", 2)
    res = ex.oracle_check(K, extra_twists=[TwistVector.of([0.21], [-0.37])])
    assert res["passed"]
    assert len(res["twists"]) == 5


def test_report_is_deterministic_and_hashed():
    a = ex.run_oracle_suite(SMALL[:1])
    b = ex.run_oracle_suite(SMALL[:1])
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert a["config_hash"] == ex.config_hash(a["config"])
    assert a["format"] == ex.REPORT_FORMAT


def test_ratio_table_sum_rule():
    tab = ex.ratio_table(graph("square-pillow", 1, "pillow_g2"),
                         np.array([[0.27j, -0.02j], [-0.02j, 0.27j - 0.25]]))
    assert abs(tab["sum_rule"] - 1) < 1e-12
    assert len(tab["rows"]) == 16
    assert sum(r["even"] for r in tab["rows"]) == 10


def test_hex_control():
    rep = ex.run_hex_control(N=12, mesh=4)
    assert rep["passed"]
    assert rep["rel_error"] < 0.02


def test_sector_oracle():
    assert ex.sector_oracle("hex-torus", 2)["passed"]

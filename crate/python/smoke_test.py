"""Smoke test for the atomcov_py extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json
import math

import numpy as np

import atomcov_py as ac


def main():
    freqs = [0.2167, 0.8667, 1.5166, 2.1666, 2.8166, 3.4665]
    powers = [3, 4, 5, 6, 4, 4]
    truth = np.asarray(ac.line_spectrum_cov(6, freqs, powers, 1.0))
    assert truth.shape == (6, 6)
    assert np.allclose(truth, truth.conj().T)

    x = np.asarray(ac.sample_snapshots(truth.tolist(), 40, 3))
    assert x.shape == (6, 40)
    scm = np.asarray(ac.sample_covariance(x.tolist()))
    assert np.allclose(scm, x @ x.conj().T / 40)

    spec = ac.StructureSpec.toeplitz(6)
    assert spec.kind == "toeplitz" and spec.m == 6 and spec.theta_len == 11
    proj = np.asarray(spec.project(scm.tolist()))
    assert np.allclose(proj, np.asarray(spec.project(proj.tolist())))

    r1 = ac.atom1(x.tolist(), seed=1)
    r2 = ac.atom2(x.tolist(), spec=spec)
    for rep in (r1, r2):
        assert rep.converged, rep
        trace = rep.objective_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        assert np.linalg.eigvalsh(np.asarray(rep.r_hat)).min() > 0
    gap = abs(r1.final_neg_ll - r2.final_neg_ll) / abs(r2.final_neg_ll)
    assert gap < 5e-3, gap
    nll = ac.neg_log_likelihood(r2.r_hat, x.tolist())
    assert math.isclose(nll, r2.final_neg_ll, rel_tol=1e-9, abs_tol=1e-9)
    assert json.loads(r2.to_json())["exit_reason"] == r2.exit_reason

    banded = ac.atom2(x.tolist(), spec=ac.StructureSpec.banded(6, 2))
    assert np.allclose(np.asarray(banded.r_hat)[0, 3:], 0)

    c100 = ac.crb(truth.tolist(), 100)
    c200 = ac.crb(truth.tolist(), 200, spec)
    assert c100 > 0 and math.isclose(c100, 2 * c200, rel_tol=1e-12)

    try:
        ac.crb(truth.tolist(), 100, ac.StructureSpec.tbt(2, 2))
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch not reported")

    cfg = {
        "truth": [[[z.real, z.imag] for z in row] for row in truth.tolist()],
        "spec": {"kind": "toeplitz", "m": 6},
        "methods": [{"kind": "fb"}, {"kind": "atom2"}],
        "n_grid": [20],
        "trials": 2,
        "seed": 1,
    }
    res = json.loads(ac.mse_benchmark(json.dumps(cfg)))
    assert res["methods"] == ["fb", "atom2"] and res["crb"][0] > 0

    scenario = {"m": 6, "angles_deg": [9.8, -8.8], "powers_db": [30, 20]}
    table = json.loads(ac.sinr_experiment(json.dumps({
        "scenario": scenario,
        "methods": [{"kind": "oracle"}, {"kind": "atom2"}],
        "n": 18,
        "trials": 2,
        "theta_deg": [-30.0, 0.0, 30.0],
        "seed": 4,
    })))
    assert np.allclose(table["rows"][0]["sinr"], table["optimum"], rtol=1e-12)

    print("atomcov_py smoke test passed")


if __name__ == "__main__":
    main()

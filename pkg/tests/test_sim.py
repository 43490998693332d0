from math import comb, exp

import numpy as np
import pytest

from secvault.codec import CodeParams, Mode, encode_archive, retrieval_plan
from secvault.errors import InsufficientSamplesError
from secvault.resilience import FailureModel
from secvault.sim import (
    DEFAULT_GRID,
    SparsityPmf,
    TrialConfig,
    exact_mu,
    expected_io_latest,
    expected_io_pair,
    expected_io_rows,
    monte_carlo_mu,
    mu_rows,
    pmf_eval,
    scenario_l5,
    synthesize_versions,
)

N63 = CodeParams.cauchy(6, 3)
S63 = CodeParams.cauchy(6, 3, True)


def point_mass(gamma, k):
    return SparsityPmf.explicit({gamma: 1.0}, k)


def test_pmf_examples():
    u = SparsityPmf.explicit([1, 1, 1])
    assert [pmf_eval(u, g) for g in (1, 2, 3)] == pytest.approx([1 / 3] * 3)
    for a in (0.5, 2.0):
        e = SparsityPmf.trunc_exponential(a, 3)
        want = exp(-a) / (exp(-a) + exp(-2 * a) + exp(-3 * a))
        assert e(1) == pytest.approx(want, rel=1e-14)
        assert e.normalizer * exp(-a) == pytest.approx(want, rel=1e-12)
    p = SparsityPmf.trunc_poisson(4, 3)
    assert p(3) > p(2) > p(1)
    with pytest.raises(ValueError):
        pmf_eval(p, 0)
    with pytest.raises(ValueError):
        p(4)


def test_pmf_validation_and_parse(tmp_path):
    with pytest.raises(ValueError):
        SparsityPmf.trunc_exponential(0, 3)
    with pytest.raises(ValueError):
        SparsityPmf.trunc_poisson(-1, 3)
    with pytest.raises(ValueError):
        SparsityPmf.explicit([0, 0])
    with pytest.raises(ValueError):
        SparsityPmf.explicit({5: 1.0}, 3)
    assert SparsityPmf.parse("exp:2", 3) == SparsityPmf.trunc_exponential(2, 3)
    assert SparsityPmf.parse("poisson:0.5", 3) == SparsityPmf.trunc_poisson(0.5, 3)
    f = tmp_path / "t.txt"
    f.write_text("# gamma weight\n1 2\n3, 2\n")
    t = SparsityPmf.parse(f"table:{f}", 3)
    assert t.probs == pytest.approx((0.5, 0.0, 0.5))
    with pytest.raises(ValueError):
        SparsityPmf.parse("beta:1", 3)


def test_poisson_large_lambda_is_stable():
    p = SparsityPmf.trunc_poisson(500.0, 20)
    assert sum(p.probs) == pytest.approx(1, abs=1e-12)
    assert p(20) > p(1)


def test_expected_io_pair_examples():
    assert expected_io_pair(point_mass(3, 3), N63).expected == 6
    assert expected_io_pair(point_mass(3, 3), N63).reduction_pct == 0
    r = expected_io_pair(point_mass(1, 3), N63)
    assert r.expected == 5 and r.reduction_pct == pytest.approx(100 / 6)
    with pytest.raises(ValueError):
        expected_io_pair(point_mass(1, 4), N63)


def test_expected_io_latest_examples():
    r = expected_io_latest(point_mass(1, 3), N63, "basic")
    assert r.expected == 5 and r.increase_pct == pytest.approx(200 / 3)
    assert expected_io_latest(point_mass(2, 3), N63, "optimized").increase_pct == 0
    assert expected_io_latest(point_mass(1, 3), N63, "reversed").expected == 3
    for fam in (SparsityPmf.trunc_exponential, SparsityPmf.trunc_poisson):
        for v in DEFAULT_GRID:
            pmf = fam(v, 3)
            assert (expected_io_latest(pmf, N63, Mode.OPTIMIZED).increase_pct
                    <= expected_io_latest(pmf, N63, Mode.BASIC).increase_pct)


@pytest.mark.parametrize("systematic", [False, True])
def test_point_mass_matches_plan(systematic):
    P = CodeParams.cauchy(12, 8, systematic)
    for g in range(1, 9):
        vs = synthesize_versions(P, [g], seed=g)
        plan = retrieval_plan(encode_archive(vs, P), 2)
        assert expected_io_pair(point_mass(g, 8), P).expected == plan.total


def test_reduction_trends():
    lams = [0.5, 1, 2, 3, 4]
    red = [expected_io_pair(SparsityPmf.trunc_poisson(l, 3), N63).reduction_pct for l in lams]
    assert all(a > b for a, b in zip(red, red[1:]))
    alphas = [0.5, 1, 2, 4]
    red = [expected_io_pair(SparsityPmf.trunc_exponential(a, 3), N63).reduction_pct for a in alphas]
    assert all(a < b for a, b in zip(red, red[1:]))


def test_reduction_envelope_on_subgrid():
    # parameters for which every value falls in the 4-13% band
    vals = [expected_io_pair(SparsityPmf.trunc_poisson(l, 3), N63).reduction_pct for l in (0.5, 1, 2, 3)]
    vals += [expected_io_pair(SparsityPmf.trunc_exponential(a, 3), N63).reduction_pct for a in (0.5, 1, 1.5)]
    assert min(vals) == pytest.approx(4.17, abs=0.01)
    assert max(vals) == pytest.approx(13.1, abs=0.1)


def test_trial_config_validation():
    with pytest.raises(ValueError):
        TrialConfig(N63, FailureModel(0.1), 0)
    with pytest.raises(ValueError):
        TrialConfig(N63, FailureModel(0.1), 10, seed=-1)


def test_mu_nonsys_and_baseline():
    for p in (0.01, 0.3):
        cfg = TrialConfig(N63, FailureModel(p), 20000, seed=1)
        assert monte_carlo_mu(cfg, 1).mu == 2
        assert monte_carlo_mu(cfg, 1, differential=False).mu == 3
    with pytest.raises(ValueError):
        monte_carlo_mu(TrialConfig(N63, FailureModel(0.1), 10), 2)


def test_mu_sys_converges_to_exact():
    for p in (0.01, 0.1, 0.2):
        est = monte_carlo_mu(TrialConfig(S63, FailureModel(p), 100000, seed=11), 1)
        mu, ps = exact_mu(S63, 1, p)
        sigma = np.sqrt(ps * (1 - ps) / est.survivors)
        assert abs(est.p_sparse - ps) <= 3 * sigma + 1e-12
        assert float(est) == est.mu


def test_exact_mu_closed_form():
    # sparse read impossible iff fewer than 2 parity rows alive, given >= 3 alive
    p = 0.15
    q = 1 - p
    alive3 = sum(comb(6, a) * q ** a * p ** (6 - a) for a in range(3, 7))
    # >= 3 alive with at most one parity alive:
    # 3 identity + 0 parity, 3 identity + 1 parity, 2 identity + 1 parity
    bad = q ** 3 * p ** 3 + 3 * q ** 4 * p ** 2 + 9 * q ** 3 * p ** 3
    mu, ps = exact_mu(S63, 1, p)
    assert ps == pytest.approx(1 - bad / alive3, abs=1e-14)
    assert mu == pytest.approx(2 * ps + 3 * (1 - ps), abs=1e-14)


def test_mu_deterministic_and_worker_independent():
    cfg = TrialConfig(S63, FailureModel(0.2), 70000, seed=5)
    a = monte_carlo_mu(cfg, 1)
    assert a == monte_carlo_mu(cfg, 1)
    assert a == monte_carlo_mu(cfg, 1, workers=3)
    assert a != monte_carlo_mu(TrialConfig(S63, FailureModel(0.2), 70000, seed=6), 1)


def test_mu_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        monte_carlo_mu(TrialConfig(S63, FailureModel(1.0), 100), 1)


def test_mu_large_n_uses_memo():
    P = CodeParams.cauchy(26, 10, True)
    est = monte_carlo_mu(TrialConfig(P, FailureModel(0.05), 3000, seed=2), 2)
    assert 4 <= est.mu < 4.1


def test_scenario_l5():
    r = scenario_l5()
    for code in ("nonsys", "sys"):
        assert r.tables[(code, "basic")]["cumulative"] == [10, 16, 26, 32, 42]
        assert r.tables[(code, "basic")]["per_version"] == [10, 16, 26, 32, 42]
        assert r.tables[(code, "optimized")]["per_version"] == [10, 16, 10, 16, 10]
        assert r.tables[(code, "optimized")]["cumulative"] == [10, 16, 26, 32, 42]
        assert r.tables[(code, "optimized")]["pattern"] == ["x1", "z2", "x3", "z4", "x5"]
    assert r.baseline_cumulative == [10, 20, 30, 40, 50]
    assert r.saving_percent() == pytest.approx(16.0)
    assert len(r.rows()) == 4 * 5 * 2 + 5 * 2


def test_row_builders():
    rows = mu_rows(N63, 1, [0.05], 5000, 3)
    got = {r[2]: r[3] for r in rows}
    assert got["mu_nonsys"] == 2 and got["mu_nondiff"] == 3
    assert 2 <= got["mu_sys"] <= 3 and 2 <= got["mu_sys_exact"] <= 3
    rows = expected_io_rows(N63, [SparsityPmf.trunc_poisson(1, 3), SparsityPmf.explicit([1, 1, 1])])
    assert rows[0][:3] == ("lambda", 1.0, "expected_reads_pair")
    assert rows[-1][0] == "table"

import math

import pytest

import morl


def test_required_samples():
    assert morl.required_samples(1.0, 10.0, 1.0, 0.05, 10) == 2697


def test_projection():
    spec = morl.ConstraintSpec([0.0, 0.0, 0.0], cap=5.0)
    assert morl.project_lambda([3.0, 4.0, -1.0], spec) == pytest.approx([2.0, 3.0, 0.0])


def test_occupancy_mass():
    mdp = morl.random_tabular_mdp(3, 2, 4, 2, seed=5)
    d = morl.occupancy_of_policy(mdp, morl.TabularPolicy.uniform(3, 2, 4))
    assert sum(d.total) == pytest.approx(4.0, abs=1e-12)


def test_values_match_monte_carlo():
    mdp = morl.random_tabular_mdp(3, 2, 3, 2, seed=9)
    pi = morl.TabularPolicy.uniform(3, 2, 3)
    exact = morl.exact_values(mdp, pi)
    mean, se = morl.estimate_values(mdp, pi, 10000, 1)
    for e, m, s in zip(exact, mean, se):
        assert abs(e - m) <= 3 * s


def test_positive_part_and_reformulated():
    spec = morl.ConstraintSpec([5.0, 5.0], cap=10.0)
    assert morl.positive_part_violation([0.0, 3.0, 7.0], spec) == (2.0, 2.0)
    assert morl.reformulated_lagrangian(10.0, 2.0, 3.0) == 4.0


def test_frank_wolfe_fixture():
    g = morl.load_tabular_game("tests/fixtures/fw_1.game")
    res = morl.fw_best_response(g.mdp, g.lam, g.spec, 10000, 1e-3)
    assert res.gap <= 1e-3
    assert abs(res.value - morl.vertex_pair_oracle(g.mdp, g.lam, g.spec)) <= 1e-3


def test_minimax_and_extraction():
    g = morl.toy_game(2)
    run = morl.run_tabular_game(g, "lagrangian", 300)
    upper, lower, _ = run.gaps
    assert upper >= -1e-9 and lower >= -1e-9
    ref = morl.run_tabular_game(g, "reformulated", 5)
    n = morl.required_samples(ref.scalar_lambda_bar, 3.0, 0.5, 0.05, len(ref.policies))
    cert = morl.extraction_certificate(g.mdp, g.spec, ref.policies, ref.scalar_lambda_bar, n, 3)
    assert cert.holds
    assert cert.l_tstar >= cert.rhs()


def test_cancellation():
    signed, members = morl.left_right_cancellation(4)
    assert abs(signed) <= 1e-9
    assert all(m >= 1.0 for m in members)


def test_warehouse_episode():
    env = morl.WarehouseEnv("[sim]\nsteps_per_day = 20\n")
    obs = env.reset(3)
    assert len(obs) == 12
    steps = 0
    done = False
    while not done:
        obs, reward, done = env.step(steps % env.action_count)
        assert len(reward) == 5
        assert all(math.isfinite(r) for r in reward)
        steps += 1
    assert steps == env.horizon == 20


def test_config_errors():
    with pytest.raises(ValueError):
        morl.normalize_config("[game]\nbogus = 1\n")
    text = morl.default_config()
    assert morl.normalize_config(text) == text

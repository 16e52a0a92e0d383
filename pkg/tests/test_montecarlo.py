import numpy as np
import pytest

from arcert import (
    BoundInputs,
    CampaignConfig,
    ConfigError,
    CoverageReport,
    EventImplicationError,
    InfeasibleCertificateError,
    TrialOutcome,
    Trajectory,
    build_companion,
    build_regressors,
    check_boundary_event,
    check_cross_term_event,
    check_noise_energy_event,
    check_sandwich_event,
    check_self_normalized_event,
    covariance_certificate,
    deviation_radius,
    evaluate_trial,
    event_noise_window,
    event_threshold,
    resolve_direction,
    run_campaign,
    simulate_stationary,
    substream,
)


@pytest.fixture(scope="module")
def ar1_setup(ar1, ar1_stats):
    ss = build_companion(ar1)
    inputs = BoundInputs(process=ar1, stats=ar1_stats, epsilon=0.5, horizon=400)
    cert = covariance_certificate(inputs)
    dev = deviation_radius(cert, [1.0], ar1.noise_variance)
    return ss, inputs, cert, dev


def zero_trajectory(order, horizon):
    return Trajectory(samples=np.zeros(horizon + order), noise=np.zeros(horizon),
                      order=order, horizon=horizon, seed=0)


class TestEventCheckers:
    def test_boundary_zero_trajectory(self, ar1_setup):
        ss, inputs, _, _ = ar1_setup
        held, radius = check_boundary_event(zero_trajectory(1, 400), ss, inputs)
        assert held and radius == 0.0

    def test_threshold_scaling_never_flips_to_false(self, ar1, ar1_stats, ar1_setup):
        ss, inputs, _, _ = ar1_setup
        wide = BoundInputs(process=ar1, stats=ar1_stats, epsilon=1.0, horizon=400)
        for seed in range(20):
            traj = simulate_stationary(ar1, 400, seed)
            held, _ = check_boundary_event(traj, ss, inputs)
            held_wide, _ = check_boundary_event(traj, ss, wide)
            if held:
                assert held_wide
            noise = event_noise_window(traj)
            if check_noise_energy_event(noise, inputs)[0]:
                assert check_noise_energy_event(noise, wide)[0]
            if check_cross_term_event(traj, noise, ss, inputs)[0]:
                assert check_cross_term_event(traj, noise, ss, wide)[0]

    def test_noise_energy_constant_noise_is_exact(self, ar1, ar1_stats):
        inputs = BoundInputs(process=ar1, stats=ar1_stats, epsilon=0.01, horizon=400)
        window = np.full(399, 1.0)  # every e_t = sigma
        held, radius = check_noise_energy_event(window, inputs)
        assert held and radius == 0.0

    def test_cross_term_zero_noise(self, ar1, ar1_stats, ar1_setup):
        ss, inputs, _, _ = ar1_setup
        traj = simulate_stationary(ar1, 400, 11)
        held, radius = check_cross_term_event(traj, np.zeros(399), ss, inputs)
        assert held and radius == 0.0

    def test_cross_term_closed_form_matches_dense_eigensolve(self, ar2, ar2_stats):
        ss = build_companion(ar2)
        inputs = BoundInputs(process=ar2, stats=ar2_stats, epsilon=0.2, horizon=300)
        traj = simulate_stationary(ar2, 300, 21)
        window = event_noise_window(traj)
        _, radius = check_cross_term_event(traj, window, ss, inputs)
        # Dense oracle: materialise S B^T + B S^T and take its eigenvalues.
        images = np.array([
            np.concatenate(([ss.coeffs @ traj.lag_window(t)], traj.lag_window(t)))
            for t in range(1, 299)
        ])
        s_vec = window @ images
        dense = np.outer(s_vec, ss.b_vector) + np.outer(ss.b_vector, s_vec)
        oracle = np.max(np.abs(np.linalg.eigvalsh(dense)))
        assert radius == pytest.approx(oracle, rel=1e-10)

    def test_boundary_radius_matches_windows(self, ar2, ar2_stats):
        # The event uses the first and last lag windows through the companion map.
        ss = build_companion(ar2)
        inputs = BoundInputs(process=ar2, stats=ar2_stats, epsilon=0.2, horizon=50)
        traj = simulate_stationary(ar2, 50, 3)
        _, radius = check_boundary_event(traj, ss, inputs)
        u = np.concatenate(([ss.coeffs @ traj.lag_window(1)], traj.lag_window(1)))
        v = np.concatenate(([ss.coeffs @ traj.lag_window(49)], traj.lag_window(49)))
        oracle = np.max(np.abs(np.linalg.eigvalsh(np.outer(u, u) - np.outer(v, v))))
        assert radius == pytest.approx(oracle, rel=1e-12)

    def test_sandwich_requires_feasible(self, ar1, ar1_stats):
        infeasible = covariance_certificate(
            BoundInputs(process=ar1, stats=ar1_stats, epsilon=5.0, horizon=400))
        traj = simulate_stationary(ar1, 400, 2)
        with pytest.raises(InfeasibleCertificateError):
            check_sandwich_event(build_regressors(traj), infeasible)

    def test_self_normalized_zero_noise_holds(self, ar1, ar1_stats):
        # Zero residual noise gives a zero left side, so the event holds
        # whenever delta sits below the determinant term (true at this horizon).
        inputs = BoundInputs(process=ar1, stats=ar1_stats, epsilon=0.5, horizon=3000)
        cert = covariance_certificate(inputs)
        assert cert.delta < 1.0
        traj = simulate_stationary(ar1, 3000, 14)
        reg = build_regressors(traj)
        assert check_self_normalized_event(reg, np.zeros(reg.rows), cert, 1.0)

    def test_self_normalized_unsatisfiable_when_delta_dominates(self, ar1_setup):
        # At this short horizon delta exceeds the determinant term: the
        # threshold is imaginary, so even zero noise cannot satisfy the event.
        ss, inputs, cert, _ = ar1_setup
        assert cert.delta > 1.0
        traj = simulate_stationary(inputs.process, 400, 14)
        reg = build_regressors(traj)
        assert not check_self_normalized_event(reg, np.zeros(reg.rows), cert, 1.0)

    def test_event_threshold_value(self, ar1, ar1_stats):
        inputs = BoundInputs(process=ar1, stats=ar1_stats, epsilon=0.3, horizon=101)
        assert event_threshold(inputs) == pytest.approx(0.3 * 100 / 3.0)


class TestTrialOutcome:
    def good_kwargs(self):
        return dict(boundary_ok=True, noise_energy_ok=True, cross_term_ok=True,
                    sandwich_ok=True, self_normalized_ok=True, deviation_ok=True,
                    boundary_radius=0.1, noise_energy_radius=0.1,
                    cross_term_radius=0.1, deviation=0.01)

    def test_consistent_outcome_passes(self):
        TrialOutcome(**self.good_kwargs())

    def test_sandwich_chain_enforced(self):
        kwargs = self.good_kwargs()
        kwargs["sandwich_ok"] = False
        kwargs["self_normalized_ok"] = False
        kwargs["deviation_ok"] = None
        with pytest.raises(EventImplicationError):
            TrialOutcome(**kwargs)

    def test_deviation_chain_enforced(self):
        kwargs = self.good_kwargs()
        kwargs["boundary_ok"] = False
        kwargs["deviation_ok"] = False
        with pytest.raises(EventImplicationError):
            TrialOutcome(**kwargs)

    def test_vacuous_deviation_allowed(self):
        kwargs = self.good_kwargs()
        kwargs["deviation_ok"] = None
        TrialOutcome(**kwargs)


class TestResolveDirection:
    def test_basis_shorthand(self):
        label, w = resolve_direction("e2", 3)
        assert label == "e2"
        np.testing.assert_array_equal(w, [0.0, 1.0, 0.0])

    def test_uniform(self):
        label, w = resolve_direction("uniform", 4)
        assert label == "uniform"
        np.testing.assert_allclose(w, 0.5 * np.ones(4))

    def test_vector_normalised(self):
        label, w = resolve_direction([3.0, 4.0], 2, fallback_label="w1")
        assert label == "w1"
        np.testing.assert_allclose(w, [0.6, 0.8])

    def test_errors(self):
        with pytest.raises(ConfigError):
            resolve_direction("e5", 2)
        with pytest.raises(ConfigError):
            resolve_direction("sideways", 2)
        with pytest.raises(ConfigError):
            resolve_direction([0.0, 0.0], 2)


class TestCampaignConfigValidation:
    def test_zero_trials_rejected(self, ar1):
        with pytest.raises(ConfigError):
            CampaignConfig(process=ar1, horizon=400, epsilon=0.5, trials=0,
                           master_seed=1, directions=(("e1", np.array([1.0])),))

    def test_small_trial_counts_rejected(self, ar1):
        with pytest.raises(ConfigError):
            CampaignConfig(process=ar1, horizon=400, epsilon=0.5, trials=50,
                           master_seed=1, directions=(("e1", np.array([1.0])),))

    def test_duplicate_labels_rejected(self, ar1):
        with pytest.raises(ConfigError):
            CampaignConfig(process=ar1, horizon=400, epsilon=0.5, trials=200,
                           master_seed=1,
                           directions=(("e1", np.array([1.0])), ("e1", np.array([1.0]))))

    def test_infeasible_epsilon_rejected(self, ar1):
        config = CampaignConfig(process=ar1, horizon=400, epsilon=5.0, trials=200,
                                master_seed=1, directions=(("e1", np.array([1.0])),))
        with pytest.raises(ConfigError):
            run_campaign(config)

    def test_vacuous_delta_needs_flag(self, ar2):
        # Small horizon keeps delta above 1 even though epsilon is feasible.
        base = dict(process=ar2, horizon=50, epsilon=0.25, trials=100, master_seed=1,
                    directions=(("e1", np.array([1.0, 0.0])),))
        with pytest.raises(ConfigError):
            run_campaign(CampaignConfig(**base))
        report = run_campaign(CampaignConfig(**base, allow_vacuous=True))
        assert report.event("sandwich").verdict == "vacuous"


@pytest.fixture(scope="module")
def small_config(ar1):
    return CampaignConfig(process=ar1, horizon=3000, epsilon=0.5, trials=100,
                          master_seed=314,
                          directions=(("e1", np.array([1.0])),), batch_size=32)


@pytest.fixture(scope="module")
def small_report(small_config):
    return run_campaign(small_config)


class TestCampaign:
    def test_matches_single_trial_reference_path(self, ar1, ar1_stats, small_config,
                                                 small_report):
        # Re-run every trial through the scalar checkers and compare aggregates.
        ss = build_companion(ar1)
        inputs = BoundInputs(process=ar1, stats=ar1_stats, epsilon=0.5, horizon=3000)
        cert = covariance_certificate(inputs)
        dev_cert = deviation_radius(cert, [1.0], 1.0)
        fails = dict(boundary=0, noise_energy=0, cross_term=0, sandwich=0,
                     self_normalized=0, deviation=0)
        for i in range(small_config.trials):
            traj = simulate_stationary(ar1, 3000, substream(314, i))
            outcome = evaluate_trial(ar1, ss, inputs, cert, dev_cert, traj)
            fails["boundary"] += not outcome.boundary_ok
            fails["noise_energy"] += not outcome.noise_energy_ok
            fails["cross_term"] += not outcome.cross_term_ok
            fails["sandwich"] += not outcome.sandwich_ok
            fails["self_normalized"] += not outcome.self_normalized_ok
            fails["deviation"] += outcome.deviation_ok is False
        assert small_report.event("boundary").failures == fails["boundary"]
        assert small_report.event("noise_energy").failures == fails["noise_energy"]
        assert small_report.event("cross_term").failures == fails["cross_term"]
        assert small_report.event("sandwich").failures == fails["sandwich"]
        assert small_report.event("self_normalized").failures == fails["self_normalized"]
        assert small_report.event("deviation:e1").failures == fails["deviation"]

    def test_deterministic_across_runs_and_threads(self, small_config, small_report):
        rerun = run_campaign(small_config)
        assert rerun.to_dict() == small_report.to_dict()
        threaded = CampaignConfig(process=small_config.process, horizon=3000, epsilon=0.5,
                                  trials=100, master_seed=314,
                                  directions=small_config.directions,
                                  threads=2, batch_size=16)
        assert run_campaign(threaded).to_dict() == small_report.to_dict()

    def test_report_totals(self, small_report):
        for row in small_report.events:
            assert row.evaluated == small_report.trials - small_report.trial_errors
            if row.failures is not None:
                successes = row.evaluated - row.failures
                assert row.failures + successes + small_report.trial_errors \
                    == small_report.trials

    def test_chain_violations_zero(self, small_report):
        assert small_report.sandwich_chain_violations == 0
        assert small_report.deviation_chain_violations == {"e1": 0}

    def test_all_bounds_respected(self, small_report):
        # Includes the self-normalized event, whose failures must stay below
        # the same delta that bounds the sandwich.  The deviation bound 2*delta
        # exceeds 1 at this horizon, so that row is marked vacuous while its
        # frequency is still recorded.
        for row in small_report.events:
            if row.bound >= 1.0:
                assert row.verdict == "vacuous", row.event
            else:
                assert row.verdict == "respected", row.event
            if row.frequency is not None:
                assert row.frequency - 3.0 * row.stderr <= max(row.bound, 1.0)

    def test_report_round_trip(self, small_report):
        import json

        restored = CoverageReport.from_dict(json.loads(json.dumps(small_report.to_dict())))
        assert restored.to_dict() == small_report.to_dict()

    def test_csv_shape(self, small_report):
        lines = small_report.csv_text().splitlines()
        assert lines[0] == "event,bound,failures,evaluated,frequency,stderr,verdict"
        assert len(lines) == 1 + len(small_report.events)

    def test_near_ceiling_sandwich_rarely_fails(self, ar1):
        # With epsilon close to the ceiling the lower matrix is nearly zero and
        # the upper one is wide: the sandwich holds on essentially every trial,
        # so the empirical event frequency respects 1 - delta with huge margin.
        config = CampaignConfig(process=ar1, horizon=5000, epsilon=0.95, trials=200,
                                master_seed=909, directions=(("e1", np.array([1.0])),))
        report = run_campaign(config)
        row = report.event("sandwich")
        assert row.bound < 0.05
        assert row.failures == 0
        assert 1.0 - row.frequency >= 1.0 - row.bound

    def test_multiple_directions(self, ar2):
        config = CampaignConfig(
            process=ar2, horizon=600, epsilon=0.25, trials=100, master_seed=11,
            directions=(("e1", np.array([1.0, 0.0])), ("e2", np.array([0.0, 1.0])),
                        ("uniform", np.full(2, np.sqrt(0.5)))),
            allow_vacuous=True, batch_size=64,
        )
        report = run_campaign(config)
        names = [row.event for row in report.events]
        assert names[-3:] == ["deviation:e1", "deviation:e2", "deviation:uniform"]
        assert set(report.deviation_chain_violations) == {"e1", "e2", "uniform"}
        assert all(v == 0 for v in report.deviation_chain_violations.values())

import numpy as np
import pytest

from exposure_lens import (
    AggregationSpec,
    ExposureVector,
    SelectionProfile,
    aggregate,
    composite,
    compute_eta,
    compute_psi,
    compute_theta,
    platform_proxy,
    reweight,
    standardize,
    true_exposure,
)
from exposure_lens.errors import ValidationError, ZeroPlatformError
from exposure_lens.exposure import exposure_csv, load_exposure, weighted_mean_sd

from conftest import occ, outcome_table, random_task_matrix, share_table, task_matrix


def full_profile(tasks, psi):
    profile = compute_theta(tasks)
    profile = SelectionProfile(
        psi={occ(k): v for k, v in psi.items()}, theta=profile.theta,
        cell_flags=profile.cell_flags,
    )
    return compute_eta(profile, tasks)


class TestTrueExposure:
    def test_tau_one_everywhere(self, rng):
        m = random_task_matrix(rng)
        rows = [
            (o.code, t, float(m.bundles[o].q[i]), float(m.bundles[o].q_p[i]), 1.0)
            for o in m.occupations()
            for i, t in enumerate(m.bundles[o].task_ids)
        ]
        m1 = task_matrix("ones", rows)
        e = true_exposure(m1)
        assert all(v == pytest.approx(1.0, abs=1e-12) for v in e.values.values())

    def test_simple_two_task(self):
        m = task_matrix("x", [("151252", "a", 0.25, 0.5, 1.0), ("151252", "b", 0.75, 0.5, 0.0)])
        e = true_exposure(m)
        assert e.values[occ("151252")] == pytest.approx(0.25)

    def test_matches_brute_force_dot_product(self, rng):
        m = random_task_matrix(rng, n_occ=5, n_tasks=4)
        e = true_exposure(m)
        for o in m.occupations():
            b = m.bundles[o]
            oracle = sum(float(b.q[i]) * float(b.tau[i]) for i in range(len(b.task_ids)))
            assert e.values[o] == pytest.approx(oracle, abs=1e-12)


class TestPlatformProxy:
    def test_no_selection_recovers_true(self, rng):
        m = random_task_matrix(rng)
        rows = [
            (o.code, t, float(m.bundles[o].q[i]), float(m.bundles[o].q[i]), float(m.bundles[o].tau[i]))
            for o in m.occupations()
            for i, t in enumerate(m.bundles[o].task_ids)
        ]
        m_same = task_matrix("same", rows)
        profile = full_profile(m_same, {o.code: 1.0 for o in m_same.occupations()})
        proxy = platform_proxy(m_same, profile, noise_sd=0.0)
        truth = true_exposure(m_same)
        for o in m_same.occupations():
            assert proxy.values[o] == pytest.approx(truth.values[o], abs=1e-12)

    def test_additive_decomposition_hand_example(self):
        # psi=2, q=(0.25,0.75), tau=(1,0), q_p=(0.55,0.45):
        # proxy = psi * sum q_p tau = 1.1 must equal psi*E + eta = 0.5 + 0.6.
        m = task_matrix("x", [("151252", "a", 0.25, 0.55, 1.0), ("151252", "b", 0.75, 0.45, 0.0)])
        profile = full_profile(m, {"151252": 2.0})
        proxy = platform_proxy(m, profile, noise_sd=0.0)
        e = true_exposure(m)
        o = occ("151252")
        assert proxy.values[o] == pytest.approx(1.1, abs=1e-12)
        assert profile.eta[o] == pytest.approx(0.6, abs=1e-12)
        assert proxy.values[o] == pytest.approx(
            profile.psi[o] * e.values[o] + profile.eta[o], abs=1e-12
        )

    def test_decomposition_identity_random(self, rng):
        m = random_task_matrix(rng, n_occ=6, n_tasks=5)
        psi = {o.code: float(rng.uniform(0.2, 5.0)) for o in m.occupations()}
        profile = full_profile(m, psi)
        proxy = platform_proxy(m, profile, noise_sd=0.0)
        truth = true_exposure(m)
        for o in m.occupations():
            assert proxy.values[o] == pytest.approx(
                profile.psi[o] * truth.values[o] + profile.eta[o], abs=1e-12
            )

    def test_noise_reconstructable_from_seed(self, rng):
        m = random_task_matrix(rng)
        profile = full_profile(m, {o.code: 1.5 for o in m.occupations()})
        noisy = platform_proxy(m, profile, noise_sd=0.3, seed=77)
        clean = platform_proxy(m, profile, noise_sd=0.0)
        from exposure_lens.rng import make_rng

        u = make_rng(77).normal(0.0, 0.3, size=len(m.occupations()))
        for i, o in enumerate(m.occupations()):
            assert noisy.values[o] - clean.values[o] == pytest.approx(u[i], abs=1e-12)

    def test_same_seed_identical(self, rng):
        m = random_task_matrix(rng)
        profile = full_profile(m, {o.code: 1.0 for o in m.occupations()})
        a = platform_proxy(m, profile, noise_sd=0.5, seed=5)
        b = platform_proxy(m, profile, noise_sd=0.5, seed=5)
        assert a.values == b.values


class TestComposite:
    def test_density_equal_workforce(self, rng):
        m = random_task_matrix(rng, n_occ=3)
        codes = [o.code for o in m.occupations()]
        shares = dict(zip(codes, (0.2, 0.3, 0.5)))
        density = share_table("d", shares)
        workforce = share_table("f", shares)
        result = composite(m, density, workforce)
        for o in m.occupations():
            b = m.bundles[o]
            assert result.values[o] == pytest.approx(float(b.q_p @ b.tau), abs=1e-12)

    def test_matches_triple_sum_oracle(self, rng):
        m = random_task_matrix(rng, n_occ=3)
        codes = [o.code for o in m.occupations()]
        density = share_table("d", dict(zip(codes, (0.5, 0.25, 0.25))))
        workforce = share_table("f", dict(zip(codes, (0.3, 0.45, 0.25))))
        result = composite(m, density, workforce)
        for o in m.occupations():
            b = m.bundles[o]
            oracle = (density.entries[o] / workforce.entries[o]) * sum(
                float(b.q_p[i]) * float(b.tau[i]) for i in range(len(b.task_ids))
            )
            assert result.values[o] == pytest.approx(oracle, abs=1e-12)

    def test_equals_zero_noise_proxy(self, rng):
        m = random_task_matrix(rng, n_occ=4)
        codes = [o.code for o in m.occupations()]
        density = share_table("d", dict(zip(codes, (0.4, 0.3, 0.2, 0.1))))
        workforce = share_table("f", dict(zip(codes, (0.1, 0.2, 0.3, 0.4))))
        profile = compute_psi(density, workforce)
        assert composite(m, density, workforce).values == platform_proxy(m, profile).values

    def test_per_task_variant(self, rng):
        m = random_task_matrix(rng, n_occ=3, n_tasks=4)
        codes = [o.code for o in m.occupations()]
        density = share_table("d", dict(zip(codes, (0.5, 0.25, 0.25))))
        workforce = share_table("f", dict(zip(codes, (0.3, 0.45, 0.25))))
        raw = composite(m, density, workforce)
        per = composite(m, density, workforce, per_task=True)
        for o in m.occupations():
            assert per.values[o] == pytest.approx(raw.values[o] / 4)

    def test_scores_within_plausible_range(self, rng):
        m = random_task_matrix(rng, n_occ=5)
        codes = [o.code for o in m.occupations()]
        d = rng.dirichlet(np.ones(5))
        f = rng.dirichlet(np.ones(5))
        density = share_table("d", dict(zip(codes, map(float, d))), normalize=True)
        workforce = share_table("f", dict(zip(codes, map(float, f))), normalize=True)
        result = composite(m, density, workforce)
        psi_max = max(density.entries[o] / workforce.entries[o] for o in m.occupations())
        tau_max = max(float(m.bundles[o].tau.max()) for o in m.occupations())
        for v in result.values.values():
            assert 0.0 <= v <= psi_max * tau_max + 1e-12


class TestReweight:
    def test_unit_psi_identity(self, rng):
        m = random_task_matrix(rng)
        profile = full_profile(m, {o.code: 1.0 for o in m.occupations()})
        proxy = platform_proxy(m, profile)
        assert reweight(proxy, profile).values == proxy.values

    def test_exact_recovery_without_task_selection(self, rng):
        # theta == 1 and zero noise: reweighting inverts the proxy exactly.
        m = random_task_matrix(rng)
        rows = [
            (o.code, t, float(m.bundles[o].q[i]), float(m.bundles[o].q[i]), float(m.bundles[o].tau[i]))
            for o in m.occupations()
            for i, t in enumerate(m.bundles[o].task_ids)
        ]
        m_same = task_matrix("same", rows)
        psi = {o.code: float(np.exp(np.random.default_rng(3).normal())) for o in m_same.occupations()}
        profile = full_profile(m_same, psi)
        recovered = reweight(platform_proxy(m_same, profile), profile)
        truth = true_exposure(m_same)
        for o in m_same.occupations():
            assert recovered.values[o] == pytest.approx(truth.values[o], abs=1e-12)

    def test_simple_division(self):
        v = ExposureVector({occ("151252"): 0.5}, "proxy", "x")
        profile = SelectionProfile(psi={occ("151252"): 2.0})
        assert reweight(v, profile).values[occ("151252")] == pytest.approx(0.25)

    def test_zero_psi_refused(self):
        v = ExposureVector({occ("151252"): 0.5}, "proxy", "x")
        profile = SelectionProfile(psi={occ("151252"): 0.0})
        with pytest.raises(ZeroPlatformError):
            reweight(v, profile)


class TestStandardize:
    def test_hand_computed_population_convention(self):
        v = ExposureVector({occ("15"): 1.0, occ("35"): 2.0, occ("53"): 3.0}, "proxy", "x")
        w = outcome_table("w", {"15": 0.0, "35": 0.0, "53": 0.0})
        z = standardize(v, w)
        # population SD of {1,2,3} is sqrt(2/3)
        assert z.values[occ("15")] == pytest.approx(-1.224744871391589, abs=1e-12)
        assert z.values[occ("35")] == pytest.approx(0.0, abs=1e-12)
        assert z.values[occ("53")] == pytest.approx(1.224744871391589, abs=1e-12)

    def test_weighted_moments_zero_one(self, rng):
        codes = [f"15{1100 + i}" for i in range(9)]
        v = ExposureVector(
            {occ(c): float(x) for c, x in zip(codes, rng.normal(size=9))}, "proxy", "x"
        )
        w = outcome_table(
            "w", {c: 0.0 for c in codes}, {c: float(u) for c, u in zip(codes, rng.uniform(0.5, 4.0, 9))}
        )
        z = standardize(v, w)
        arr = z.array()
        wts = np.array([w.weights[o] for o in z.occupations()])
        mean, sd = weighted_mean_sd(arr, wts)
        assert mean == pytest.approx(0.0, abs=1e-9)
        assert sd == pytest.approx(1.0, abs=1e-9)

    def test_idempotent(self, rng):
        codes = [f"15{1100 + i}" for i in range(5)]
        v = ExposureVector(
            {occ(c): float(x) for c, x in zip(codes, rng.normal(size=5))}, "proxy", "x"
        )
        w = outcome_table("w", {c: 0.0 for c in codes})
        z1 = standardize(v, w)
        z2 = standardize(z1, w)
        for o in z1.occupations():
            assert z2.values[o] == pytest.approx(z1.values[o], abs=1e-12)

    def test_affine_invariance(self, rng):
        codes = [f"15{1100 + i}" for i in range(5)]
        x = rng.normal(size=5)
        w = outcome_table("w", {c: 0.0 for c in codes})
        v1 = ExposureVector({occ(c): float(u) for c, u in zip(codes, x)}, "proxy", "x")
        v2 = ExposureVector({occ(c): float(3.5 * u + 2.0) for c, u in zip(codes, x)}, "proxy", "x")
        z1, z2 = standardize(v1, w), standardize(v2, w)
        for o in z1.occupations():
            assert z2.values[o] == pytest.approx(z1.values[o], abs=1e-10)

    def test_negation_flips_sign(self, rng):
        codes = [f"15{1100 + i}" for i in range(5)]
        x = rng.normal(size=5)
        w = outcome_table("w", {c: 0.0 for c in codes})
        z1 = standardize(ExposureVector({occ(c): float(u) for c, u in zip(codes, x)}, "proxy", "x"), w)
        z2 = standardize(ExposureVector({occ(c): float(-u) for c, u in zip(codes, x)}, "proxy", "x"), w)
        for o in z1.occupations():
            assert z2.values[o] == pytest.approx(-z1.values[o], abs=1e-10)

    def test_ranking_preserved(self, rng):
        codes = [f"15{1100 + i}" for i in range(8)]
        x = rng.normal(size=8)
        v = ExposureVector({occ(c): float(u) for c, u in zip(codes, x)}, "proxy", "x")
        w = outcome_table("w", {c: 0.0 for c in codes})
        z = standardize(v, w)
        assert np.argsort(v.array()).tolist() == np.argsort(z.array()).tolist()

    def test_constant_vector_rejected(self):
        v = ExposureVector({occ("15"): 1.0, occ("35"): 1.0}, "proxy", "x")
        w = outcome_table("w", {"15": 0.0, "35": 0.0})
        with pytest.raises(ValidationError, match="constant"):
            standardize(v, w)


class TestAggregate:
    def _system(self, rng, n_occ=8, platforms=("a", "b", "c")):
        codes = [f"15{1100 + i}" for i in range(n_occ)]
        proxies, profiles = {}, {}
        for p in platforms:
            psi = {occ(c): float(np.exp(rng.normal(0, 0.4))) for c in codes}
            values = {occ(c): psi[occ(c)] * float(rng.uniform(0.1, 0.9)) for c in codes}
            proxies[p] = ExposureVector(values, "proxy", p)
            profiles[p] = SelectionProfile(psi=psi, eta={occ(c): 0.0 for c in codes})
        return proxies, profiles

    def test_single_platform_weight_one(self, rng):
        proxies, profiles = self._system(rng, platforms=("a",))
        spec = AggregationSpec({"a": 1.0})
        result = aggregate(proxies, profiles, spec)
        assert result.vector.values == proxies["a"].values

    def test_bilinear_identity(self, rng):
        proxies, profiles = self._system(rng)
        spec = AggregationSpec({"a": 0.5, "b": 0.3, "c": 0.2})
        result = aggregate(proxies, profiles, spec)
        assert result.var_delta_w == pytest.approx(result.var_delta_w_bilinear, abs=1e-10)

    def test_perfect_correlation_no_reduction(self):
        codes = [f"15{1100 + i}" for i in range(6)]
        base = np.linspace(0.5, 2.0, 6)
        proxies, profiles = {}, {}
        for p in ("a", "b"):
            psi = {occ(c): float(v) for c, v in zip(codes, base)}
            proxies[p] = ExposureVector({occ(c): 1.0 for c in codes}, "proxy", p)
            profiles[p] = SelectionProfile(psi=psi)
        result = aggregate(proxies, profiles, AggregationSpec({"a": 0.5, "b": 0.5}))
        assert result.var_delta_w == pytest.approx(result.single_platform_var_delta["a"], abs=1e-12)

    def test_uncorrelated_halves_variance(self):
        # Two platforms with Var(delta) = 1 each and zero covariance.
        codes = [f"15{1100 + i}" for i in range(4)]
        d1 = np.array([1.0, -1.0, 1.0, -1.0])
        d2 = np.array([1.0, 1.0, -1.0, -1.0])
        proxies, profiles = {}, {}
        for p, d in (("a", d1), ("b", d2)):
            profiles[p] = SelectionProfile(psi={occ(c): float(1 + v) for c, v in zip(codes, d)})
            proxies[p] = ExposureVector({occ(c): 1.0 for c in codes}, "proxy", p)
        result = aggregate(proxies, profiles, AggregationSpec({"a": 0.5, "b": 0.5}))
        assert result.single_platform_var_delta["a"] == pytest.approx(1.0)
        assert result.var_delta_w == pytest.approx(0.5, abs=1e-12)

    def test_weight_rescaling_invariance(self, rng):
        proxies, profiles = self._system(rng)
        spec1 = AggregationSpec.proportional({"a": 2.0, "b": 1.0, "c": 1.0})
        spec2 = AggregationSpec.proportional({"a": 20.0, "b": 10.0, "c": 10.0})
        r1 = aggregate(proxies, profiles, spec1)
        r2 = aggregate(proxies, profiles, spec2)
        for o in r1.vector.occupations():
            assert r1.vector.values[o] == pytest.approx(r2.vector.values[o], abs=1e-12)

    def test_weight_sum_enforced(self):
        with pytest.raises(ValidationError, match="sum"):
            AggregationSpec({"a": 0.5, "b": 0.4})


class TestExposureSerialization:
    def test_roundtrip(self, tmp_path, rng):
        codes = [f"15{1100 + i}" for i in range(5)]
        v = ExposureVector(
            {occ(c): float(x) for c, x in zip(codes, rng.normal(size=5))}, "proxy", "x"
        )
        path = tmp_path / "v.csv"
        path.write_text(exposure_csv(v))
        v2 = load_exposure(path, "x")
        assert v2.values == v.values
        assert v2.role == v.role

import numpy as np
import pytest

from nonmarkov import dephasing, measures, oracle


class TestIdentitySuite:
    def test_small_run_passes(self):
        report = oracle.identity_suite(seed=1, samples=40)
        assert report.all_passed, report.summary()

    def test_asserted_checks_present(self):
        report = oracle.identity_suite(seed=2, samples=5)
        names = {c.name for c in report.checks}
        for prefix in "abcdefgh":
            assert any(n.startswith(prefix + "_") for n in names)
        assert "negative_control_detected" in names
        assert "petz_racmi_bound" in names

    def test_recorded_entries_never_fail(self):
        report = oracle.identity_suite(seed=3, samples=5)
        for c in report.checks:
            if c.name.endswith("_recorded"):
                assert c.tolerance == np.inf and c.passed

    def test_deterministic_per_seed(self):
        a = oracle.identity_suite(seed=9, samples=8)
        b = oracle.identity_suite(seed=9, samples=8)
        assert a.to_dict() == b.to_dict()

    def test_seed_changes_violations(self):
        a = oracle.identity_suite(seed=1, samples=8)
        b = oracle.identity_suite(seed=2, samples=8)
        va = [c.max_violation for c in a.checks]
        vb = [c.max_violation for c in b.checks]
        assert va != vb

    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError):
            oracle.identity_suite(seed=0, samples=0)


class TestSpecialFunctionSuite:
    def test_passes(self):
        report = oracle.special_function_suite(seed=0)
        assert report.all_passed, report.summary()

    def test_check_names_and_tolerances(self):
        report = oracle.special_function_suite(seed=0)
        by_name = {c.name: c for c in report.checks}
        assert by_name["displaced_fock_overlap"].tolerance == 1e-8
        assert by_name["classical_char_factor_vs_sum"].tolerance == 1e-6
        assert by_name["entangled_char_factor_vs_tmsv"].tolerance == 1e-6

    def test_deterministic(self):
        assert (
            oracle.special_function_suite(seed=4).to_dict()
            == oracle.special_function_suite(seed=4).to_dict()
        )


def _small_model(kind: str, r: float = 0.5, n_max: int = 6):
    params = dephasing.DephasingParams(
        omega_c=0.25, r=r, env_kind=kind, t1s=0.0, t1f=2.5, t2s=2.5, t2f=5.0
    )
    return dephasing.build_discrete_model(params, n_modes=1, n_max=n_max)


class TestDenseDephasingCheck:
    def test_entangled_agreement(self):
        model = _small_model("entangled")
        report = oracle.dense_dephasing_check(model, measures.ops_state(), [0.0, 1.3, 2.5, 3.8, 5.0])
        assert report.all_passed, report.summary()

    def test_classical_agreement_and_modulus_symmetry(self):
        model = _small_model("classical", n_max=8)
        report = oracle.dense_dephasing_check(model, measures.ops_state(), [0.0, 1.3, 2.5, 3.8, 5.0])
        assert report.all_passed, report.summary()
        names = [c.name for c in report.checks]
        assert "classical_k12_lam12_modulus" in names

    def test_vacuum_environment_keeps_e2_empty(self):
        model = _small_model("entangled", r=0.0, n_max=3)
        series = dephasing.cmi_trajectory(model, measures.ops_state(), [0.0, 1.0, 2.5], "E2")
        assert np.max(series.values) <= 1e-9

    def test_budget_guard(self):
        model = _small_model("entangled")
        with pytest.raises(dephasing.BudgetError):
            oracle.dense_dephasing_check(model, measures.ops_state(), [0.0], budget=16)

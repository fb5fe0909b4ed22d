import math

import numpy as np
import pytest

from wsnrecover.data import SyntheticSpec, generate_fgn_field, nmse, simulate_missing
from wsnrecover.pipeline import (
    DEFAULT_METHODS,
    ExperimentConfig,
    RecoveryReport,
    ReportRow,
    db_improvement,
    emit_csv,
    parse_experiment_config,
    parse_report_csv,
    pci_mdr,
    run_sweep,
)
from wsnrecover.solvers import RegularizationWeights, SolverConfig, recover_cs
from wsnrecover.transforms import VectorizationOrder, dct_full, kronecker_dct

FAST = SolverConfig(max_iters=150, tolerance=1e-6)


def small_instance(seed=0, n=10, t=24, loss=0.4):
    X = generate_fgn_field(SyntheticSpec(hurst=0.8, n=n, t=t, seed=seed))
    part = simulate_missing(np.zeros(X.shape, bool), loss, seed=seed + 1)
    B = part.observed_mask
    return X, np.where(B, X, 0.0), B, part.m2_mask


class TestPciMdr:
    def test_stage_two_bypass_matches_recover_cs(self):
        X, Y, B, _ = small_instance()
        lam = 0.01
        weights = RegularizationWeights(lambda4=lam)
        ours, _ = pci_mdr(Y, B, weights, formulation="kron", denoise=False, config=FAST)
        theirs, _ = recover_cs(Y, B, kronecker_dct(*X.shape), lam, config=FAST)
        assert np.array_equal(ours, theirs)

    def test_snake_formulations_match_full_dct(self):
        X, Y, B, _ = small_instance(seed=3)
        lam = 0.01
        for formulation, order in (("temporal", VectorizationOrder.TEMPORAL_SNAKE),
                                   ("spatial", VectorizationOrder.SPATIAL_SNAKE)):
            ours, _ = pci_mdr(Y, B, RegularizationWeights(lambda3=lam),
                              formulation=formulation, config=FAST)
            theirs, _ = recover_cs(Y, B, dct_full(X.size), lam, order=order, config=FAST)
            assert np.array_equal(ours, theirs)

    def test_denoised_stage_changes_output(self):
        X, Y, B, _ = small_instance(seed=4)
        weights = RegularizationWeights(lambda4=0.01, lambda5=1.0)
        plain, _ = pci_mdr(Y, B, weights, formulation="kron", config=FAST)
        denoised, _ = pci_mdr(Y, B, weights, formulation="kron", denoise=True, config=FAST)
        assert not np.array_equal(plain, denoised)
        s_plain = np.linalg.svd(plain, compute_uv=False)
        s_den = np.linalg.svd(denoised, compute_uv=False)
        assert np.abs(s_den - np.maximum(s_plain - 0.5, 0)).max() < 1e-8

    def test_unknown_formulation_rejected(self):
        X, Y, B, _ = small_instance()
        with pytest.raises(ValueError, match="unknown formulation"):
            pci_mdr(Y, B, formulation="diagonal")


class TestExperimentConfig:
    def test_validation(self):
        spec = SyntheticSpec(hurst=0.8, n=4, t=8)
        with pytest.raises(ValueError):
            ExperimentConfig(dataset=spec, losses=(0.0,))
        with pytest.raises(ValueError):
            ExperimentConfig(dataset=spec, losses=(100.0,))
        with pytest.raises(ValueError):
            ExperimentConfig(dataset=spec, trials=0)
        with pytest.raises(ValueError, match="unknown method"):
            ExperimentConfig(dataset=spec, methods=("pci-mdr-flux",))

    def test_method_name_forms(self):
        spec = SyntheticSpec(hurst=0.8, n=4, t=8)
        cfg = ExperimentConfig(dataset=spec, methods=("mf(3)", "svt", "pci-mdr-row-dct"))
        assert cfg.methods == ("mf(3)", "svt", "pci-mdr-row-dct")


class TestRunSweep:
    def test_grid_complete_and_sorted(self):
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=8, t=16),
            methods=("pci-mdr-kron", "mf(1)"),
            losses=(30.0, 60.0), trials=2, seed=5, solver=FAST)
        report = run_sweep(cfg)
        assert len(report.rows) == 2 * 2 * 2
        keys = [(r.method, r.loss_pct, r.trial) for r in report.rows]
        assert keys == sorted(keys)
        assert all(math.isfinite(r.nmse) for r in report.rows)
        assert all(r.error is None for r in report.rows)

    def test_deterministic_replay(self):
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=8, t=16),
            methods=("pci-mdr-temporal",),
            losses=(40.0,), trials=2, seed=11, solver=FAST)
        a, b = run_sweep(cfg), run_sweep(cfg)
        for ra, rb in zip(a.rows, b.rows):
            assert ra.nmse == rb.nmse and ra.lambda_used == rb.lambda_used

    def test_single_missing_entry_boundary(self):
        # the smallest admissible loss leaves one simulated-missing cell
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=6, t=12),
            methods=("pci-mdr-kron",),
            losses=(100.0 / 72.0,), trials=1, seed=2, solver=FAST)
        report = run_sweep(cfg)
        assert len(report.rows) == 1
        assert math.isfinite(report.rows[0].nmse)

    def test_method_failure_recorded_and_sweep_continues(self):
        # a rank larger than min(n, t) cannot be factored
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=6, t=12),
            methods=("mf(10)", "mf(1)"),
            losses=(30.0,), trials=1, seed=3, solver=FAST)
        report = run_sweep(cfg)
        failed = [r for r in report.rows if r.method == "mf(10)"]
        fine = [r for r in report.rows if r.method == "mf(1)"]
        assert len(failed) == 1 and math.isnan(failed[0].nmse) and failed[0].error
        assert len(fine) == 1 and math.isfinite(fine[0].nmse)

    def test_noise_changes_scores(self):
        spec = SyntheticSpec(hurst=0.8, n=8, t=16)
        base = ExperimentConfig(dataset=spec, methods=("pci-mdr-kron",),
                                losses=(40.0,), trials=1, seed=7, solver=FAST)
        noisy = ExperimentConfig(dataset=spec, methods=("pci-mdr-kron",),
                                 losses=(40.0,), trials=1, seed=7, solver=FAST,
                                 snr_db=10.0)
        a, b = run_sweep(base), run_sweep(noisy)
        assert a.rows[0].nmse != b.rows[0].nmse

    def test_file_dataset_round_trip(self, tmp_path):
        from wsnrecover.data import write_matrix_csv
        X = generate_fgn_field(SyntheticSpec(hurst=0.8, n=8, t=16, seed=1))
        m1 = np.zeros(X.shape, bool)
        m1[0, :4] = True
        path = tmp_path / "field.csv"
        write_matrix_csv(path, X, missing=m1)
        cfg = ExperimentConfig(dataset=str(path), methods=("pci-mdr-kron",),
                               losses=(30.0,), trials=2, seed=4, solver=FAST)
        report = run_sweep(cfg)
        assert all(math.isfinite(r.nmse) for r in report.rows)

    def test_scores_are_m2_only(self):
        # scoring positions coincide with the simulated-missing mask: a
        # sweep evaluated on a one-cell m2 equals the hand-computed value
        X, Y, B, m2 = small_instance(seed=9, loss=0.3)
        weights = RegularizationWeights(lambda4=0.01)
        Xh, _ = pci_mdr(Y, B, weights, formulation="kron", config=FAST)
        direct = nmse(X, Xh, m2)
        perturbed = Xh.copy()
        perturbed[B] += 100.0  # observed cells must not affect the score
        assert nmse(X, perturbed, m2) == direct


class TestOrderingProperties:
    def test_kron_at_least_as_good_as_snakes_on_average(self):
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=16, t=64),
            methods=("pci-mdr-spatial", "pci-mdr-temporal", "pci-mdr-kron"),
            losses=(50.0,), trials=10, seed=42,
            solver=SolverConfig(max_iters=200, tolerance=1e-6))
        rep = run_sweep(cfg)
        kron = rep.mean_nmse("pci-mdr-kron")
        assert kron <= rep.mean_nmse("pci-mdr-spatial")
        assert kron <= rep.mean_nmse("pci-mdr-temporal")

    def test_degradation_monotone_in_loss(self):
        cfg = ExperimentConfig(
            dataset=SyntheticSpec(hurst=0.8, n=16, t=64),
            methods=("pci-mdr-kron", "mf(1)", "svt"),
            losses=(30.0, 70.0), trials=10, seed=7,
            solver=SolverConfig(max_iters=200, tolerance=1e-6))
        rep = run_sweep(cfg)
        for method in cfg.methods:
            assert rep.mean_nmse(method, 30.0) <= rep.mean_nmse(method, 70.0)


class TestDbImprovement:
    def test_reference_arithmetic(self):
        # the ratio 0.019348 / 4.0445e-5 is a ~26.8 dB gap
        assert db_improvement(0.019348, 4.0445e-5) == pytest.approx(26.798, abs=0.05)

    def test_sign_convention(self):
        assert db_improvement(1.0, 0.1) == pytest.approx(10.0)
        assert db_improvement(0.1, 1.0) == pytest.approx(-10.0)


class TestEmitCsv:
    def row(self, **kw):
        base = dict(method="svt", loss_pct=10.0, trial=0, nmse=0.5,
                    iterations=7, wall_time_s=1.25, lambda_used=math.nan)
        base.update(kw)
        return ReportRow(**base)

    def test_single_row_two_lines(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv(RecoveryReport(rows=[self.row()]), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == "method,loss_pct,trial,nmse,iterations,wall_time_s,lambda_used"

    def test_re_emission_identical_bytes(self, tmp_path):
        report = RecoveryReport(rows=[self.row(), self.row(trial=1, nmse=1e-7)])
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(report, p1)
        emit_csv(report, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_parse(self, tmp_path):
        rows = [self.row(), self.row(method="mf(1)", nmse=3.25e-6, lambda_used=0.5,
                                     trial=2, iterations=31)]
        path = tmp_path / "r.csv"
        emit_csv(RecoveryReport(rows=rows, timings=True), path)
        back = parse_report_csv(path)
        for orig, parsed in zip(sorted(rows, key=lambda r: (r.method, r.loss_pct, r.trial)),
                                back.rows):
            assert parsed.method == orig.method
            assert parsed.nmse == orig.nmse or (math.isnan(parsed.nmse) and math.isnan(orig.nmse))
            assert parsed.iterations == orig.iterations
            assert parsed.wall_time_s == orig.wall_time_s

    def test_wall_time_zeroed_without_timings(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_csv(RecoveryReport(rows=[self.row(wall_time_s=3.7)], timings=False), path)
        assert parse_report_csv(path).rows[0].wall_time_s == 0.0

    def test_empty_report_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv(RecoveryReport(rows=[]), tmp_path / "r.csv")


class TestParseExperimentConfig:
    def test_full_file(self):
        text = """
        # comment
        dataset = synth
        hurst = 0.7
        rows = 12
        cols = 30
        amplitude = 5.0
        methods = pci-mdr-kron, mf(1)
        losses = 20, 50
        snr_db = 10
        trials = 3
        seed = 99
        lambda = 0.01
        lambda5 = 0.5
        max_iters = 80
        tolerance = 1e-5
        timings = on
        out = report.csv
        """
        cfg, out = parse_experiment_config(text)
        assert out == "report.csv"
        assert cfg.dataset == SyntheticSpec(hurst=0.7, n=12, t=30, amplitude=5.0)
        assert cfg.methods == ("pci-mdr-kron", "mf(1)")
        assert cfg.losses == (20.0, 50.0)
        assert cfg.snr_db == 10.0
        assert cfg.trials == 3 and cfg.seed == 99
        assert cfg.weights.lambda4 == 0.01 and cfg.weights.lambda5 == 0.5
        assert cfg.solver.max_iters == 80 and cfg.solver.tolerance == 1e-5
        assert cfg.timings

    def test_defaults(self):
        cfg, out = parse_experiment_config("dataset = synth")
        assert out is None
        assert cfg.methods == DEFAULT_METHODS
        assert cfg.weights.lambda4 is None
        assert not cfg.timings

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_experiment_config("velocity = 3")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="key=value"):
            parse_experiment_config("just words")

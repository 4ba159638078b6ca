"""Acceptance suite: one test per criterion, each printing a pass line.

The training-based criteria share one desk-scale run: a 360-image synthetic
dataset with proportional noise, split by the temporal protocol, and the
four-variant comparison trained on it (module-scoped fixture).
"""

import time

import numpy as np
import pytest
import torch
from scipy import stats as scipy_stats

from magsr.cli import main as cli_main
from magsr.data import SyntheticSpec, generate_synthetic, make_pairs, make_temporal_split
from magsr.degrade import (
    block_average,
    default_degrade_config,
    degrade,
    make_gaussian_kernel,
    smooth,
)
from magsr.eval import (
    FULL_SCALE_REFERENCE_MSE,
    conditional_mapping,
    consistency_check,
    zero_predictor_mse,
)
from magsr.eval import run_table1
from magsr.inference import SampleSet, decompose, sample, streaming_decompose
from magsr.loss import heteroskedastic_nll, mse_loss, nll_terms
from magsr.model import ModelConfig, forward, predicted_variance
from magsr.train import TrainingBudget

from .oracles import (
    block_average_bruteforce,
    decompose_bruteforce,
    nll_bruteforce,
    smooth_bruteforce,
)


def report(criterion: int, detail: str) -> None:
    print(f"[PASS] criterion {criterion}: {detail}")


@pytest.fixture(scope="module")
def desk():
    """Shared desk-scale run: synthetic dataset, temporal split, 4 trained variants."""
    t0 = time.time()
    spec = SyntheticSpec(
        count=360,
        hr_size=32,
        seed=101,
        noise_model="proportional",
        noise_coefficient=0.05,
        field_amplitude=1000.0,
    )
    mags = generate_synthetic(spec)
    years = {}
    for m in mags:
        years.setdefault(m.timestamp.year, set()).add(m.timestamp.month)
    split = make_temporal_split({y: sorted(ms) for y, ms in years.items()}, seed=5)
    part_of = dict(split.entries)
    by_part = {
        part: [m for m in mags if part_of[(m.timestamp.year, m.timestamp.month)] == part]
        for part in ("train", "val", "test")
    }
    cfg_deg = default_degrade_config(2)
    pairs = {part: make_pairs(ms, 32, cfg_deg) for part, ms in by_part.items()}

    config = ModelConfig(base_channels=16, depth=2, dropout_p=0.2)
    stage1 = TrainingBudget(epochs=100, batch_size=32, learning_rate=2e-3, weight_decay=1e-4)
    stage2 = TrainingBudget(epochs=160, batch_size=32, learning_rate=1e-3, weight_decay=1e-4)
    outcome = run_table1(
        pairs["train"], pairs["test"], config, stage1, seed=9, stage2_budget=stage2, mc_samples=20
    )
    return {
        "mags": by_part,
        "pairs": pairs,
        "cfg_deg": cfg_deg,
        "outcome": outcome,
        "train_seconds": time.time() - t0,
    }


class TestCriterion1DecomposeOracle:
    def test_eq2_oracle_equivalence(self):
        t0 = time.time()
        rng = np.random.default_rng(1001)
        checked = 0
        for T in (1, 2, 50, 500):
            for _ in range(25):
                h = int(rng.integers(4, 33))
                w = int(rng.integers(4, 33))
                means = rng.uniform(-1500.0, 1500.0, size=(T, h, w))
                variances = rng.uniform(0.5, 2500.0, size=(T, h, w))
                ss = SampleSet(means=means, variances=variances, seeds=list(range(T)))
                maps = decompose(ss)
                pred, epi, ale = decompose_bruteforce(list(means), list(variances))
                np.testing.assert_allclose(maps.predictive_mean, pred, rtol=1e-10, atol=1e-9)
                np.testing.assert_allclose(maps.epistemic, epi, rtol=1e-10, atol=1e-8)
                np.testing.assert_allclose(maps.aleatoric, ale, rtol=1e-10, atol=1e-9)
                stream = streaming_decompose(zip(means, variances))
                np.testing.assert_allclose(stream.epistemic, maps.epistemic, rtol=1e-9, atol=1e-8)
                np.testing.assert_allclose(stream.aleatoric, maps.aleatoric, rtol=1e-9, atol=1e-9)
                checked += 1
        elapsed = time.time() - t0
        assert checked == 100
        assert elapsed < 60.0
        report(1, f"100 SampleSets match the brute-force oracle at 1e-10 ({elapsed:.1f}s)")


class TestCriterion2Nll:
    def test_eq1_correctness(self):
        t0 = time.time()
        rng = np.random.default_rng(1002)

        for _ in range(20):
            f = rng.normal(size=(4, 4))
            y = rng.normal(size=(4, 4))
            v = rng.uniform(0.3, 3.0, size=(4, 4))
            got = heteroskedastic_nll(f, v, y)
            total, res, logdet = nll_bruteforce(f, v, y)
            assert got.total == pytest.approx(total, rel=1e-10)
            assert got.per_pixel_residual_term == pytest.approx(res, rel=1e-10)
            assert got.per_pixel_logdet_term == pytest.approx(logdet, rel=1e-10)

        # autograd vs central finite differences through the scalar oracle
        h = 1e-4
        for _ in range(20):
            f0 = rng.normal(size=(4, 4))
            y0 = rng.normal(size=(4, 4))
            v0 = rng.uniform(0.5, 2.0, size=(4, 4))
            f = torch.tensor(f0, requires_grad=True)
            v = torch.tensor(v0, requires_grad=True)
            res, logdet = nll_terms(f, v, torch.tensor(y0))
            (res + logdet).backward()
            i, j = rng.integers(0, 4, size=2)
            fp, fm = f0.copy(), f0.copy()
            fp[i, j] += h
            fm[i, j] -= h
            fd = (nll_bruteforce(fp, v0, y0)[0] - nll_bruteforce(fm, v0, y0)[0]) / (2 * h)
            assert f.grad[i, j].item() == pytest.approx(fd, rel=1e-5, abs=1e-9)
            vp, vm = v0.copy(), v0.copy()
            vp[i, j] += h
            vm[i, j] -= h
            fd = (nll_bruteforce(f0, vp, y0)[0] - nll_bruteforce(f0, vm, y0)[0]) / (2 * h)
            assert v.grad[i, j].item() == pytest.approx(fd, rel=1e-5, abs=1e-9)

        # sigma^2 = 1 reduces to half the MSE
        for _ in range(5):
            f = rng.normal(scale=30.0, size=(6, 6))
            y = rng.normal(scale=30.0, size=(6, 6))
            nll = heteroskedastic_nll(f, np.ones_like(f), y)
            assert abs(nll.total - 0.5 * mse_loss(f, y)) <= 1e-12

        # grid search confirms the per-pixel minimizer at v = r^2
        for _ in range(20):
            r = rng.uniform(0.2, 12.0) * rng.choice([-1.0, 1.0])
            grid = np.geomspace(r**2 / 10.0, 10.0 * r**2, 801)
            totals = [
                heteroskedastic_nll(np.array([[0.0]]), np.array([[v]]), np.array([[r]])).total
                for v in grid
            ]
            best = grid[int(np.argmin(totals))]
            assert best == pytest.approx(r**2, rel=0.01)

        elapsed = time.time() - t0
        assert elapsed < 60.0
        report(2, f"NLL oracle, gradients, half-MSE identity and minimizer verified ({elapsed:.1f}s)")


class TestCriterion3Degradation:
    def test_degradation_operator(self):
        t0 = time.time()
        rng = np.random.default_rng(1003)
        for i in range(50):
            size = int(rng.integers(4, 9)) * 2  # even 8..16
            ksize = int(rng.choice([1, 3, 5]))
            sigma = float(rng.uniform(0.5, 2.0))
            kernel = make_gaussian_kernel(ksize, sigma)
            cfg = default_degrade_config(2)
            x = rng.uniform(-1500.0, 1500.0, size=(size, size))
            y = rng.uniform(-1500.0, 1500.0, size=(size, size))
            a, b = rng.uniform(-3.0, 3.0, size=2)

            # linearity within 1e-10
            np.testing.assert_allclose(
                degrade(a * x + b * y, cfg),
                a * degrade(x, cfg) + b * degrade(y, cfg),
                rtol=1e-10,
                atol=1e-8,
            )
            # constants within 1e-12
            c = float(rng.uniform(-1500.0, 1500.0))
            np.testing.assert_allclose(degrade(np.full((size, size), c), cfg), c, atol=1e-12 * max(1, abs(c)))
            # block-mean conservation
            factor = int(rng.choice([2, 4]))
            ba = block_average(x, factor)
            assert abs(ba.mean() - x.mean()) <= 1e-12 * max(1.0, abs(x.mean()))
            # double-loop oracles
            np.testing.assert_allclose(
                smooth(x, kernel), smooth_bruteforce(x, kernel.weights), rtol=1e-12, atol=1e-9
            )
            np.testing.assert_allclose(
                ba, block_average_bruteforce(x, factor), rtol=1e-12, atol=1e-12
            )
        elapsed = time.time() - t0
        assert elapsed < 60.0
        report(3, f"50 random instances: linearity, constants, conservation, oracles ({elapsed:.1f}s)")


class TestCriterion4DropoutInvariants:
    def test_dropout_invariants(self, desk):
        t0 = time.time()
        x = desk["pairs"]["test"][0].lr

        # p = 0: the trained aleatoric model is dropout-free with dual heads
        p0_model = desk["outcome"].trained["aleatoric"].model
        assert p0_model.config.dropout_p == 0.0
        outs = [forward(p0_model, x, stochastic=True, seed=s).mean for s in (1, 2, 3)]
        np.testing.assert_array_equal(outs[0], outs[1])
        np.testing.assert_array_equal(outs[0], outs[2])
        maps = decompose(sample(p0_model, x, T=10, base_seed=4))
        assert np.all(maps.epistemic == 0.0)

        # p = 0.2 trained model: epistemic strictly positive on > 50% of pixels
        drop_model = desk["outcome"].trained["both"].model
        assert drop_model.config.dropout_p == 0.2
        maps = decompose(sample(drop_model, x, T=10, base_seed=5))
        frac = float((maps.epistemic > 0).mean())
        assert frac > 0.5
        report(4, f"p=0 invariants exact; epistemic positive on {frac:.0%} of pixels ({time.time()-t0:.1f}s)")


class TestCriterion5AleatoricRecovery:
    def test_aleatoric_recovery(self, desk):
        res = desk["outcome"].trained["aleatoric"]
        cfg_deg = desk["cfg_deg"]
        pred_sigma, true_sigma = [], []
        for mag in desk["mags"]["test"]:
            pair = make_pairs([mag], 32, cfg_deg)[0]
            var = predicted_variance(forward(res.model, pair.lr), res.config)
            pred_sigma.append(np.sqrt(var).ravel())
            true_sigma.append((0.05 * np.abs(mag.meta["clean"]) + 1.0).ravel())
        corr = float(np.corrcoef(np.concatenate(pred_sigma), np.concatenate(true_sigma))[0, 1])
        assert corr > 0.8

        stats = conditional_mapping(desk["pairs"]["test"], bin_width=50.0)
        ok = stats.counts >= 30
        rho = float(
            scipy_stats.spearmanr(np.abs(stats.bin_centers[ok]), stats.hr_variance[ok]).statistic
        )
        assert rho > 0.9
        assert desk["train_seconds"] < 1200.0
        report(5, f"Pearson(pred sigma, true noise std) = {corr:.3f}; Spearman = {rho:.3f}")


class TestCriterion6Consistency:
    def test_degraded_consistency(self, desk):
        t0 = time.time()
        model = desk["outcome"].trained["both"].model
        pair = desk["pairs"]["test"][0]
        ss = sample(model, pair.lr, T=20, base_seed=33)
        rep = consistency_check(ss, pair.lr, desk["cfg_deg"])
        assert rep.hr_spread > 0
        assert rep.ratio < 1.0
        assert time.time() - t0 < 120.0
        report(6, f"LR/HR spread ratio = {rep.ratio:.3f} < 1 ({time.time()-t0:.1f}s)")


class TestCriterion7Table1Structure:
    def test_table1_structure(self, desk):
        outcome = desk["outcome"]
        assert [r.variant for r in outcome.reports] == ["baseline", "epistemic", "aleatoric", "both"]
        zero = zero_predictor_mse(desk["pairs"]["test"])
        for rep in outcome.reports:
            assert np.isfinite(rep.test_mse)
            assert rep.test_mse < zero
        # full-scale reference values are documentation constants, not assertions
        assert FULL_SCALE_REFERENCE_MSE == {
            "baseline": 88.45,
            "epistemic": 90.00,
            "aleatoric": 90.47,
            "both": 98.10,
        }
        assert desk["train_seconds"] < 2700.0
        mses = {r.variant: round(r.test_mse, 2) for r in outcome.reports}
        report(7, f"4 variants finite and beat zero predictor {round(zero, 1)}: {mses}")


class TestCriterion8TwoStageInitialization:
    def test_two_stage_floor(self, desk):
        for variant in ("aleatoric", "both"):
            res = desk["outcome"].trained[variant]
            assert res.variance_floor is not None and res.variance_floor > 0
            # independent route to the homoskedastic-stage training MSE
            preds = np.stack([forward(res.stage1_model, p.lr).mean for p in desk["pairs"]["train"]])
            targets = np.stack([p.hr for p in desk["pairs"]["train"]])
            independent = mse_loss(preds, targets)
            assert res.variance_floor == pytest.approx(independent, abs=1e-9)
            # second stage: sigma^2 >= sigma_bar^2 everywhere by construction
            var = predicted_variance(forward(res.model, desk["pairs"]["test"][0].lr), res.config)
            assert np.all(var >= res.variance_floor)
        report(8, "sigma_bar^2 equals stage-1 training MSE (1e-9) and floors the stage-2 variance")


class TestCriterion9DeterminismProvenance:
    def test_byte_identical_reruns_and_provenance(self, tmp_path):
        import json

        t0 = time.time()
        fast = [
            "--model.base_channels", "8", "--model.depth", "2",
            "--train.epochs", "3", "--train.stage2_epochs", "3",
            "--data.count", "26", "--data.hr_size", "32",
        ]

        def pipeline(root):
            root.mkdir()
            data = root / "data"
            split = root / "split.json"
            train = root / "train"
            maps = root / "maps"
            assert cli_main(["synth", "--out", str(data), "--seed", "3", *fast]) == 0
            assert cli_main(["split", "--dataset", str(data), "--out", str(split), "--seed", "4", *fast]) == 0
            assert cli_main([
                "train", "--dataset", str(data), "--split", str(split),
                "--out", str(train), "--train.variant", "both", *fast,
            ]) == 0
            assert cli_main([
                "infer", "--dataset", str(data), "--snapshot", str(train / "model.snap"),
                "--out", str(maps), "--infer.samples", "4", "--seed", "7", *fast,
            ]) == 0
            return root

        a = pipeline(tmp_path / "a")
        b = pipeline(tmp_path / "b")

        compared = 0
        for fa in sorted(a.rglob("*")):
            if fa.is_dir() or fa.suffix == ".png":  # plots excluded from byte equality
                continue
            fb = b / fa.relative_to(a)
            assert fb.exists(), f"missing {fb}"
            assert fa.read_bytes() == fb.read_bytes(), f"artifact differs: {fa.name}"
            compared += 1
        assert compared >= 10

        # provenance: every JSON artifact embeds the resolved config; consumers
        # of inputs embed content hashes
        for rel in ("data/manifest.json", "split.json", "train/train_meta.json", "maps/maps.json"):
            payload = json.loads((a / rel).read_text())
            assert payload["config"]["format_version"] == "1"
            assert "train.epochs" in payload["config"]
        assert json.loads((a / "split.json").read_text())["input_hashes"]["dataset_manifest"]
        assert json.loads((a / "train/train_meta.json").read_text())["input_hashes"]["split"]
        assert len(json.loads((a / "maps/maps.json").read_text())["model_snapshot_hash"]) == 64
        report(9, f"synth/split/train/infer byte-identical across reruns, {compared} artifacts ({time.time()-t0:.1f}s)")

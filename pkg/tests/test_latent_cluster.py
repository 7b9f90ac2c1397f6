import numpy as np
import pytest
import torch

from aspectsum.latent_cluster import (
    AETrainConfig,
    Autoencoder,
    ClusterModel,
    TrainingError,
    adversary_step,
    ae_forward,
    ae_losses,
    augment_labels,
    encode_latents,
    kmeans,
    load_autoencoder,
    main_step,
    save_autoencoder,
    train_autoencoder,
)
from aspectsum.subaspects import SentenceAspectLabel

from fdcheck import check_gradients


def zero_model(input_dim=3, hidden=4, latent=2):
    model = Autoencoder(input_dim, hidden_dim=hidden, latent_dim=latent, dropout=0.0)
    with torch.no_grad():
        for param in model.parameters():
            param.zero_()
    model.eval()
    return model


class TestForward:
    def test_zero_network(self):
        model = zero_model()
        latent, recon, adv = ae_forward(model, np.ones(3), np.ones(3))
        np.testing.assert_allclose(latent, 0.5)  # sigmoid(0)
        np.testing.assert_allclose(recon, 0.0)
        np.testing.assert_allclose(adv, 0.0)

    def test_hand_computed_chain(self):
        # d=2, hidden=2, latent=1 with hand-set weights, no dropout
        model = Autoencoder(2, hidden_dim=2, latent_dim=1, dropout=0.0)
        with torch.no_grad():
            model.enc_hidden.weight.copy_(torch.tensor([[1.0, 0.0, 1.0, 0.0], [0.0, -1.0, 0.0, 1.0]]))
            model.enc_hidden.bias.copy_(torch.tensor([0.5, -0.5]))
            model.enc_latent.weight.copy_(torch.tensor([[1.0, 2.0]]))
            model.enc_latent.bias.copy_(torch.tensor([0.25]))
            model.dec_hidden.weight.copy_(torch.tensor([[1.0, 1.0, 1.0], [0.0, 1.0, -1.0]]))
            model.dec_hidden.bias.copy_(torch.tensor([0.0, 0.0]))
            model.dec_out.weight.copy_(torch.tensor([[1.0, 0.0], [1.0, 1.0]]))
            model.dec_out.bias.copy_(torch.tensor([0.1, -0.1]))
            model.adv_out.weight.copy_(torch.tensor([[2.0], [-2.0]]))
            model.adv_out.bias.copy_(torch.tensor([0.0, 1.0]))
        model.eval()
        v_doc = np.array([1.0, 2.0])
        v_sen = np.array([-1.0, 0.5])

        def leaky(x):
            return np.where(x >= 0, x, 0.01 * x)

        h_enc = leaky(np.array([1.0 * 1 + 0 * 2 + 1 * -1 + 0 * 0.5 + 0.5, 0 * 1 + -1 * 2 + 0 * -1 + 1 * 0.5 - 0.5]))
        latent_pre = 1.0 * h_enc[0] + 2.0 * h_enc[1] + 0.25
        latent_exp = 1.0 / (1.0 + np.exp(-latent_pre))
        h_dec = leaky(np.array([1.0 + 2.0 + latent_exp, 2.0 - latent_exp]))
        recon_exp = np.array([h_dec[0] + 0.1, h_dec[0] + h_dec[1] - 0.1])
        adv_exp = np.array([2.0 * latent_exp, -2.0 * latent_exp + 1.0])

        latent, recon, adv = ae_forward(model, v_doc, v_sen)
        np.testing.assert_allclose(latent, [latent_exp], rtol=1e-6)
        np.testing.assert_allclose(recon, recon_exp, rtol=1e-6)
        np.testing.assert_allclose(adv, adv_exp, rtol=1e-6)

    def test_eval_mode_deterministic(self):
        torch.manual_seed(0)
        model = Autoencoder(4, hidden_dim=6, latent_dim=3, dropout=0.5)
        rng = np.random.default_rng(0)
        v_doc, v_sen = rng.normal(size=4), rng.normal(size=4)
        first = ae_forward(model, v_doc, v_sen)
        second = ae_forward(model, v_doc, v_sen)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_dimension_mismatch(self):
        model = zero_model(input_dim=3)
        with pytest.raises(ValueError, match="dim"):
            ae_forward(model, np.ones(2), np.ones(3))

    def test_latent_range(self):
        torch.manual_seed(1)
        model = Autoencoder(5, hidden_dim=8, latent_dim=4, dropout=0.1)
        rng = np.random.default_rng(1)
        latents = encode_latents(model, rng.normal(size=(20, 5)), rng.normal(size=(20, 5)))
        assert np.all(latents > 0.0) and np.all(latents < 1.0)


class TestLosses:
    def test_perfect_reconstruction(self):
        v = torch.tensor([1.0, 2.0, 3.0])
        loss_main, loss_adv = ae_losses(v, v, v, 0.2)
        assert float(loss_main) == 0.0
        assert float(loss_adv) == 0.0

    def test_paper_lambda_example(self):
        # recon MSE 0.5, adversary MSE 1.0, lambda 0.2 -> 0.5 - 0.2 = 0.3
        v_sen = torch.zeros(4)
        recon = torch.full((4,), np.sqrt(0.5))
        adv = torch.ones(4)
        loss_main, loss_adv = ae_losses(recon, adv, v_sen, 0.2)
        assert float(loss_adv) == pytest.approx(1.0)
        assert float(loss_main) == pytest.approx(0.3)

    def test_lambda_zero_is_plain_mse(self):
        v_sen = torch.zeros(3)
        recon = torch.ones(3) * 2.0
        loss_main, _ = ae_losses(recon, torch.ones(3), v_sen, 0.0)
        assert float(loss_main) == pytest.approx(4.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ae_losses(torch.ones(3), torch.ones(4), torch.ones(3), 0.2)


class TestGradients:
    def test_fd_check_both_losses(self):
        for seed in range(3):
            torch.manual_seed(seed)
            model = Autoencoder(6, hidden_dim=5, latent_dim=3, dropout=0.1).double()
            model.eval()
            rng = np.random.default_rng(seed)
            v_doc = torch.as_tensor(rng.normal(size=(4, 6)))
            v_sen = torch.as_tensor(rng.normal(size=(4, 6)))

            def loss_main():
                latent, recon, adv = model(v_doc, v_sen)
                return ae_losses(recon, adv, v_sen, 0.2)[0]

            def loss_adv():
                latent, recon, adv = model(v_doc, v_sen)
                return ae_losses(recon, adv, v_sen, 0.2)[1]

            assert check_gradients(model, loss_main) < 1e-4
            assert check_gradients(model, loss_adv) < 1e-4


class TestTwoStepIsolation:
    def setup_training(self, seed=0):
        torch.manual_seed(seed)
        model = Autoencoder(4, hidden_dim=6, latent_dim=2, dropout=0.0)
        opt_adv = torch.optim.Adam(model.adversary_parameters(), lr=1e-3)
        opt_main = torch.optim.Adam(model.main_parameters(), lr=1e-3)
        rng = np.random.default_rng(seed)
        x_doc = torch.as_tensor(rng.normal(size=(8, 4)), dtype=torch.float32)
        x_sen = torch.as_tensor(rng.normal(size=(8, 4)), dtype=torch.float32)
        return model, opt_adv, opt_main, x_doc, x_sen

    def test_step1_leaves_encoder_decoder_untouched(self):
        model, opt_adv, opt_main, x_doc, x_sen = self.setup_training()
        before = {n: p.detach().clone() for n, p in model.named_parameters() if not n.startswith("adv_out.")}
        adversary_step(model, opt_adv, x_doc, x_sen)
        for name, param in model.named_parameters():
            if not name.startswith("adv_out."):
                assert torch.equal(param, before[name]), name

    def test_step1_changes_adversary(self):
        model, opt_adv, opt_main, x_doc, x_sen = self.setup_training()
        before = {n: p.detach().clone() for n, p in model.named_parameters() if n.startswith("adv_out.")}
        adversary_step(model, opt_adv, x_doc, x_sen)
        assert any(not torch.equal(p, before[n]) for n, p in model.named_parameters() if n.startswith("adv_out."))

    def test_step2_leaves_adversary_untouched(self):
        model, opt_adv, opt_main, x_doc, x_sen = self.setup_training()
        before = {n: p.detach().clone() for n, p in model.named_parameters() if n.startswith("adv_out.")}
        main_step(model, opt_main, x_doc, x_sen, 0.2)
        for name, param in model.named_parameters():
            if name.startswith("adv_out."):
                assert torch.equal(param, before[name]), name

    def test_step2_changes_encoder_decoder(self):
        model, opt_adv, opt_main, x_doc, x_sen = self.setup_training()
        before = {n: p.detach().clone() for n, p in model.named_parameters() if not n.startswith("adv_out.")}
        main_step(model, opt_main, x_doc, x_sen, 0.2)
        changed = [n for n, p in model.named_parameters() if not n.startswith("adv_out.") and not torch.equal(p, before[n])]
        assert changed


class TestTraining:
    def linear_pairs(self, n=64, dim=8, seed=0):
        rng = np.random.default_rng(seed)
        mapping = rng.normal(size=(dim, dim)) * 0.3
        docs = rng.normal(size=(n, dim))
        sens = docs @ mapping.T + rng.normal(size=(n, dim)) * 0.05
        return docs, sens

    def test_loss_decreases_on_linear_data(self):
        docs, sens = self.linear_pairs()
        cfg = AETrainConfig(epochs=50, batch_size=16, seed=0, hidden_dim=16, latent_dim=4)
        result = train_autoencoder((docs, sens), cfg)
        assert result.train_loss_main[-1] < result.train_loss_main[0]

    def test_overfit_single_pair(self):
        docs, sens = self.linear_pairs(n=1)
        cfg = AETrainConfig(
            adv_weight=0.0, epochs=400, batch_size=1, seed=0, hidden_dim=16, latent_dim=4, dropout=0.0
        )
        result = train_autoencoder((docs, sens), cfg)
        assert result.train_loss_main[-1] < 1e-3

    def test_same_seed_identical_parameters(self):
        docs, sens = self.linear_pairs(n=32)
        cfg = AETrainConfig(epochs=10, batch_size=8, seed=5, hidden_dim=12, latent_dim=3)
        a = train_autoencoder((docs, sens), cfg)
        b = train_autoencoder((docs, sens), cfg)
        for pa, pb in zip(a.model.state_dict().values(), b.model.state_dict().values()):
            assert torch.equal(pa, pb)

    def test_early_stopping_uses_validation(self):
        docs, sens = self.linear_pairs(n=48)
        val = self.linear_pairs(n=16, seed=1)
        cfg = AETrainConfig(epochs=50, patience=3, batch_size=16, seed=0, hidden_dim=12, latent_dim=3)
        result = train_autoencoder((docs, sens), cfg, val)
        assert len(result.val_loss_main) <= 50
        assert result.best_epoch == int(np.argmin(result.val_loss_main))

    def test_empty_data_rejected(self):
        cfg = AETrainConfig(epochs=1)
        with pytest.raises(TrainingError, match="no training pairs"):
            train_autoencoder((np.zeros((0, 4)), np.zeros((0, 4))), cfg)

    def test_non_finite_loss_reported(self):
        docs = np.full((4, 4), np.inf)
        sens = np.ones((4, 4))
        cfg = AETrainConfig(epochs=1, batch_size=4, seed=0, hidden_dim=4, latent_dim=2)
        with pytest.raises(TrainingError, match="non-finite"):
            train_autoencoder((docs, sens), cfg)

    def test_checkpoint_roundtrip(self, tmp_path):
        docs, sens = self.linear_pairs(n=16)
        cfg = AETrainConfig(epochs=3, batch_size=8, seed=2, hidden_dim=8, latent_dim=3)
        result = train_autoencoder((docs, sens), cfg)
        path = tmp_path / "ae.ckpt"
        save_autoencoder(str(path), result.model, {"seed": 2})
        loaded, header = load_autoencoder(str(path))
        assert header["seed"] == 2
        out_a = ae_forward(result.model, docs[0], sens[0])
        out_b = ae_forward(loaded, docs[0], sens[0])
        for a, b in zip(out_a, out_b):
            np.testing.assert_array_equal(a, b)


class TestKMeans:
    def test_exact_fit_when_k_equals_n(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(5, 3))
        model = kmeans(points, k=5, seed=0)
        assert model.inertia == pytest.approx(0.0, abs=1e-24)
        assert sorted(model.assignments.tolist()) == sorted(range(5))

    def test_two_separated_blobs(self):
        rng = np.random.default_rng(1)
        blob_a = rng.normal(size=(5, 2)) * 0.1
        blob_b = rng.normal(size=(5, 2)) * 0.1 + 10.0
        points = np.vstack([blob_a, blob_b])
        model = kmeans(points, k=2, seed=3)
        first = set(model.assignments[:5].tolist())
        second = set(model.assignments[5:].tolist())
        assert len(first) == 1 and len(second) == 1 and first != second

    def test_beats_random_assignment_baselines(self):
        rng = np.random.default_rng(2)
        points = rng.normal(size=(12, 4))
        model = kmeans(points, k=3, seed=0)
        baseline_rng = np.random.default_rng(99)
        for _ in range(100):
            assign = baseline_rng.integers(0, 3, size=12)
            inertia = 0.0
            for cid in range(3):
                members = points[assign == cid]
                if len(members) == 0:
                    continue
                centroid = members.mean(axis=0)
                inertia += ((members - centroid) ** 2).sum()
            assert model.inertia <= inertia + 1e-9

    def test_inertia_non_increasing(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(40, 5))
        model = kmeans(points, k=4, seed=1)
        history = model.inertia_history
        assert all(history[i + 1] <= history[i] + 1e-9 for i in range(len(history) - 1))

    def test_assignment_fixed_point(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(30, 3))
        model = kmeans(points, k=4, seed=2)
        np.testing.assert_array_equal(model.predict(points), model.assignments)

    def test_duplicate_points_trigger_reseed_not_crash(self):
        points = np.array([[0.0, 0.0]] * 6 + [[5.0, 5.0]] * 2 + [[9.0, 0.0]])
        model = kmeans(points, k=3, seed=0)
        assert len(set(model.assignments.tolist())) == 3

    def test_fewer_points_than_k(self):
        with pytest.raises(ValueError, match="at least"):
            kmeans(np.ones((3, 2)), k=5, seed=0)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(5)
        points = rng.normal(size=(25, 6))
        a = kmeans(points, k=5, seed=11)
        b = kmeans(points, k=5, seed=11)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centroids, b.centroids)


def label(doc_id, index, aspects=(), origin="direct"):
    return SentenceAspectLabel(doc_id=doc_id, index=index, labels=frozenset(aspects), origin=origin)


def cluster_model(assignments, k):
    return ClusterModel(
        centroids=np.zeros((k, 2)),
        assignments=np.asarray(assignments, dtype=np.int64),
        inertia=0.0,
        n_iter=1,
    )


class TestAugmentLabels:
    def test_dominant_aspect_assigned(self):
        labels = [
            label("d", 0, ("diversity",)),
            label("d", 1, ("diversity",)),
            label("d", 2, ("diversity",)),
            label("d", 3, ("importance",)),
            label("d", 4),
            label("d", 5),
        ]
        model = cluster_model([0] * 6, k=1)
        augmented, report = augment_labels(model, labels)
        assert augmented[4].labels == frozenset({"diversity"})
        assert augmented[4].origin == "cluster-augmented"
        assert augmented[5].labels == frozenset({"diversity"})
        assert report.augmented_count == 2
        assert report.dominant == {0: "diversity"}

    def test_tie_means_no_augmentation(self):
        labels = [
            label("d", 0, ("importance",)),
            label("d", 1, ("importance",)),
            label("d", 2, ("diversity",)),
            label("d", 3, ("diversity",)),
            label("d", 4),
        ]
        model = cluster_model([0] * 5, k=1)
        augmented, report = augment_labels(model, labels)
        assert augmented[4].labels == frozenset()
        assert 0 in report.skipped

    def test_cluster_without_direct_labels_is_skipped(self):
        labels = [label("d", 0), label("d", 1)]
        model = cluster_model([0, 0], k=1)
        augmented, report = augment_labels(model, labels)
        assert report.skipped == {0: "no direct-labeled sentences"}
        assert report.augmented_count == 0

    def test_direct_labels_never_change(self):
        labels = [
            label("d", 0, ("importance", "position")),
            label("d", 1, ("diversity",)),
            label("d", 2, ("diversity",)),
            label("d", 3),
        ]
        model = cluster_model([0] * 4, k=1)
        augmented, _ = augment_labels(model, labels)
        for i in range(3):
            assert augmented[i] == labels[i]

    def test_augmented_labels_do_not_feed_dominance(self):
        # pre-augmented diversity labels must not count toward dominance
        labels = [
            label("d", 0, ("importance",)),
            label("d", 1, ("diversity",), origin="cluster-augmented"),
            label("d", 2, ("diversity",), origin="cluster-augmented"),
            label("d", 3),
        ]
        model = cluster_model([0] * 4, k=1)
        augmented, report = augment_labels(model, labels)
        assert report.dominant == {0: "importance"}
        assert augmented[3].labels == frozenset({"importance"})

    def test_refs_based_lookup(self):
        labels = [label("a", 0, ("position",)), label("a", 1), label("b", 0, ("diversity",)), label("b", 1)]
        model = ClusterModel(
            centroids=np.zeros((2, 2)),
            assignments=np.array([0, 0, 1, 1]),
            inertia=0.0,
            n_iter=1,
            refs=(("a", 0), ("a", 1), ("b", 0), ("b", 1)),
        )
        augmented, _ = augment_labels(model, labels)
        assert augmented[1].labels == frozenset({"position"})
        assert augmented[3].labels == frozenset({"diversity"})

    def test_missing_assignment_rejected(self):
        labels = [label("a", 0), label("zz", 9)]
        model = ClusterModel(
            centroids=np.zeros((1, 2)),
            assignments=np.array([0]),
            inertia=0.0,
            n_iter=1,
            refs=(("a", 0),),
        )
        with pytest.raises(ValueError, match="no cluster assignment"):
            augment_labels(model, labels)

import numpy as np
import pytest

import oracles
from cloudward.logfeat import (
    EmbeddingTable,
    SkipGramConfig,
    build_vocab,
    extract_pairs,
    featurize_all,
    featurize_vertex,
    load_table,
    save_table,
    sgns_pair_loss_grads,
    train_embeddings,
)


def community_corpus(seed=0, sents=120):
    """Token sequences where two disjoint vocabularies never co-occur."""
    rng = np.random.default_rng(seed)
    a = [f"alpha{i}" for i in range(6)]
    b = [f"beta{i}" for i in range(6)]
    seqs = []
    for k in range(sents):
        pool = a if k % 2 == 0 else b
        seqs.append([pool[int(rng.integers(len(pool)))] for _ in range(8)])
    return a, b, seqs


def test_build_vocab_min_count_threshold():
    vocab = build_vocab([["a", "a", "b"]], min_count=2)
    assert vocab.tokens == ("a", "<unk>")
    assert vocab.lookup("b") == vocab.unk_index


def test_build_vocab_keeps_all_at_min_count_one():
    vocab = build_vocab([["a", "b", "c", "b"]], min_count=1)
    assert set(vocab.tokens) == {"a", "b", "c", "<unk>"}


def test_build_vocab_ordering_count_desc_token_asc():
    vocab = build_vocab([["b"] * 3 + ["a"] * 3 + ["c"]], min_count=1)
    assert vocab.tokens[:3] == ("a", "b", "c")
    assert vocab.counts[:3] == (3, 3, 1)


def test_extract_pairs_window_one():
    assert extract_pairs(["a", "b", "c"], 1) == [
        ("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]


def test_extract_pairs_single_token_empty():
    assert extract_pairs(["a"], 3) == []


def test_extract_pairs_clamped_at_boundaries():
    assert extract_pairs(["a", "b"], 5) == [("a", "b"), ("b", "a")]


def test_pair_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    v_c = rng.normal(0, 0.5, 8)
    u_ctx = rng.normal(0, 0.5, 8)
    u_negs = rng.normal(0, 0.5, (3, 8))
    loss, g_c, g_ctx, g_negs = sgns_pair_loss_grads(v_c, u_ctx, u_negs)

    def loss_only(vc, uc, un):
        return sgns_pair_loss_grads(vc, uc, un)[0]

    eps = 1e-6
    for vec, grad in ((v_c, g_c), (u_ctx, g_ctx)):
        for i in range(len(vec)):
            orig = vec[i]
            vec[i] = orig + eps
            hi = loss_only(v_c, u_ctx, u_negs)
            vec[i] = orig - eps
            lo = loss_only(v_c, u_ctx, u_negs)
            vec[i] = orig
            fd = (hi - lo) / (2 * eps)
            assert abs(fd - grad[i]) <= 1e-6 * max(1.0, abs(fd))
    for idx in np.ndindex(*u_negs.shape):
        orig = u_negs[idx]
        u_negs[idx] = orig + eps
        hi = loss_only(v_c, u_ctx, u_negs)
        u_negs[idx] = orig - eps
        lo = loss_only(v_c, u_ctx, u_negs)
        u_negs[idx] = orig
        fd = (hi - lo) / (2 * eps)
        assert abs(fd - g_negs[idx]) <= 1e-6 * max(1.0, abs(fd))


def test_zero_epochs_returns_seeded_init():
    _, _, seqs = community_corpus()
    cfg = SkipGramConfig(dim=4, window=1, negatives=2, epochs=0, seed=5)
    a = train_embeddings(seqs, cfg)
    b = train_embeddings(seqs, cfg)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.train_losses == ()


def test_training_reduces_loss():
    _, _, seqs = community_corpus()
    cfg = SkipGramConfig(dim=8, window=2, negatives=3, epochs=10, seed=0)
    table = train_embeddings(seqs, cfg)
    assert len(table.train_losses) == 10
    assert table.train_losses[9] < table.train_losses[0]


def test_communities_separate():
    a, b, seqs = community_corpus()
    cfg = SkipGramConfig(dim=8, window=2, negatives=3, epochs=5, seed=1)
    table = train_embeddings(seqs, cfg)
    intra, inter = [], []
    for i, t1 in enumerate(a + b):
        for t2 in (a + b)[i + 1:]:
            c = oracles.cosine(table.vector(t1), table.vector(t2))
            same = (t1[0] == t2[0])
            (intra if same else inter).append(c)
    assert np.mean(intra) > np.mean(inter)


def test_training_deterministic():
    _, _, seqs = community_corpus()
    cfg = SkipGramConfig(dim=6, window=2, negatives=2, epochs=2, seed=9)
    a = train_embeddings(seqs, cfg)
    b = train_embeddings(seqs, cfg)
    assert np.array_equal(a.vectors, b.vectors)
    assert a.train_losses == b.train_losses


def test_vocab_too_small_rejected():
    with pytest.raises(ValueError, match="vocabulary too small"):
        train_embeddings([["solo", "solo"]], SkipGramConfig(dim=4, min_count=2))


def test_featurize_repeated_token_is_its_vector():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))
    r = featurize_vertex(["alpha0"] * 7, table)
    assert np.allclose(r, table.vector("alpha0"))


def test_featurize_two_tokens_mean():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))
    r = featurize_vertex(["alpha0", "beta1"], table)
    assert np.allclose(r, (table.vector("alpha0") + table.vector("beta1")) / 2)


def test_featurize_window_one_takes_last():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))
    r = featurize_vertex(["alpha0", "beta1"], table, window=1)
    assert np.allclose(r, table.vector("beta1"))


def test_featurize_permutation_invariant_and_bounded():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))
    toks = ["alpha0", "beta1", "alpha2", "beta3"]
    r1 = featurize_vertex(toks, table)
    r2 = featurize_vertex(list(reversed(toks)), table)
    assert np.allclose(r1, r2)
    max_norm = max(np.linalg.norm(table.vector(t)) for t in toks)
    assert np.linalg.norm(r1) <= max_norm + 1e-12


def test_featurize_empty_rejected():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))
    with pytest.raises(ValueError, match="no log tokens"):
        featurize_vertex([], table)


def test_featurize_all_shape_and_identical_rows():
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=4, epochs=1, seed=2))

    class TwoVertexCorpus:
        n = 2

        def tokens_for(self, v):
            return ["alpha0", "alpha1"]

    feats = featurize_all(TwoVertexCorpus(), table)
    assert feats.shape == (2, 4)
    assert np.allclose(feats[0], feats[1])


def test_table_roundtrip_exact(tmp_path):
    _, _, seqs = community_corpus()
    table = train_embeddings(seqs, SkipGramConfig(dim=5, epochs=1, seed=8))
    path = tmp_path / "emb.txt"
    save_table(table, path)
    again = load_table(path)
    assert again.vocab.tokens == table.vocab.tokens
    assert again.vocab.counts == table.vocab.counts
    assert np.array_equal(again.vectors, table.vectors)


def test_save_rejects_whitespace_token(tmp_path):
    vocab = build_vocab([["ok", "ok"]], min_count=1)
    table = EmbeddingTable(vocab=vocab, vectors=np.zeros((2, 3)))
    bad = EmbeddingTable(
        vocab=type(vocab)(tokens=("a b", "<unk>"), counts=(1, 0),
                          index={"a b": 0}, unk_index=1),
        vectors=np.zeros((2, 3)))
    save_table(table, tmp_path / "ok.txt")
    with pytest.raises(ValueError, match="whitespace"):
        save_table(bad, tmp_path / "bad.txt")

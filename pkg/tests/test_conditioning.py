import numpy as np
import pytest

from prosemph import conditioning, corpus, embeddings
from prosemph.errors import DimMismatchError, LengthMismatchError, MalformedFileError


def two_word_case(tagset):
    utt = corpus.Utterance(
        "c1", ("A", "B", "C"), ((0, 2), (2, 3)), (2, 1, 3),
        ((0, 0.1), (0.1, 0.2), (0.2, 0.3)),
    )
    ann = corpus.DepAnnotation(
        "c1", (tagset.pos["a"], tagset.pos["n"]), (1, None),
        (tagset.rel["ATT"], tagset.root_id),
    )
    return utt, ann


def tables(tagset, cond_dim=8, sem_dim=4, seed=0):
    rel = embeddings.init_table(tagset.num_relations, cond_dim, "rel", seed=seed)
    pos = embeddings.init_table(tagset.num_pos, cond_dim, "pos", seed=seed + 1)
    prov = embeddings.hash_provider(dim=sem_dim, seed=seed)
    proj = np.random.default_rng(seed + 2).normal(size=(sem_dim, cond_dim))
    return rel, pos, prov, proj


def test_build_linguistic_zero_tables_zero_output(tagset):
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    rel.matrix[:] = 0
    pos.matrix[:] = 0
    out = conditioning.build_linguistic(utt, ann, prov, rel, pos, proj * 0, tagset)
    assert out.shape == (utt.num_phones, 8)
    assert np.all(out == 0)


def test_build_linguistic_word_rows_repeat(tagset):
    # zero semantics: all phones of a word share one row
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    out = conditioning.build_linguistic(utt, ann, prov, rel, pos, proj * 0, tagset)
    # word 0 covers chars A,B -> phones 0..2; word 1 covers char C -> phones 3..5
    assert np.array_equal(out[0], out[1])
    assert np.array_equal(out[0], out[2])
    assert np.array_equal(out[3], out[4])
    assert np.array_equal(out[3], out[5])
    assert not np.array_equal(out[0], out[3])


def test_build_linguistic_is_sum_of_components(tagset):
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    zero_rel = embeddings.EmbeddingTable(np.zeros_like(rel.matrix), "rel0")
    zero_pos = embeddings.EmbeddingTable(np.zeros_like(pos.matrix), "pos0")
    full = conditioning.build_linguistic(utt, ann, prov, rel, pos, proj, tagset)
    only_rel = conditioning.build_linguistic(utt, ann, prov, rel, zero_pos,
                                             proj * 0, tagset)
    only_pos = conditioning.build_linguistic(utt, ann, prov, zero_rel, pos,
                                             proj * 0, tagset)
    only_sem = conditioning.build_linguistic(utt, ann, prov, zero_rel, zero_pos,
                                             proj, tagset)
    assert full == pytest.approx(only_rel + only_pos + only_sem)


def test_build_linguistic_rel_component_linearity(tagset):
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    zero_pos = embeddings.EmbeddingTable(np.zeros_like(pos.matrix), "pos0")
    once = conditioning.build_linguistic(utt, ann, prov, rel, zero_pos,
                                         proj * 0, tagset)
    doubled_rel = embeddings.EmbeddingTable(rel.matrix * 2, "rel2")
    twice = conditioning.build_linguistic(utt, ann, prov, doubled_rel, zero_pos,
                                          proj * 0, tagset)
    assert twice == pytest.approx(2 * once)


def test_build_linguistic_pos_locality(tagset):
    # changing only word 1's POS tag leaves word 0's phones untouched
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    a = conditioning.build_linguistic(utt, ann, prov, rel, pos, proj, tagset)
    ann2 = corpus.DepAnnotation(ann.utterance_id,
                                (ann.pos_tags[0], tagset.pos["v"]),
                                ann.heads, ann.relations)
    b = conditioning.build_linguistic(utt, ann2, prov, rel, pos, proj, tagset)
    assert np.array_equal(a[:3], b[:3])
    assert not np.array_equal(a[3:], b[3:])


def test_build_linguistic_dim_mismatch(tagset):
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset)
    bad_pos = embeddings.init_table(tagset.num_pos, 6, "pos6", seed=9)
    with pytest.raises(DimMismatchError):
        conditioning.build_linguistic(utt, ann, prov, rel, bad_pos, proj, tagset)
    with pytest.raises(DimMismatchError):
        conditioning.build_linguistic(utt, ann, prov, rel, pos,
                                      np.zeros((3, 8)), tagset)


def test_build_emphasis_selects_rows(tagset):
    utt, _ = two_word_case(tagset)
    table = embeddings.EmbeddingTable(np.array([[1.0, 0.0], [0.0, 1.0]]), "emph")
    lab = corpus.EmphasisLabels("c1", (0, 1, 0), (1.0,) * 3, "pseudo")
    out = conditioning.build_emphasis(lab, table, utt)
    # phones per char: 2,1,3
    assert out.tolist() == [[1, 0], [1, 0], [0, 1], [1, 0], [1, 0], [1, 0]]


def test_build_emphasis_rejects_non_binary_table(tagset):
    utt, _ = two_word_case(tagset)
    table = embeddings.init_table(3, 2, "bad", seed=0)
    lab = corpus.EmphasisLabels("c1", (0, 0, 0), (1.0,) * 3, "pseudo")
    with pytest.raises(DimMismatchError):
        conditioning.build_emphasis(lab, table, utt)


def test_build_emphasis_length_mismatch(tagset):
    utt, _ = two_word_case(tagset)
    table = embeddings.init_table(2, 4, "emph", seed=0)
    lab = corpus.EmphasisLabels("c1", (0, 1), (1.0,) * 2, "pseudo")
    with pytest.raises(LengthMismatchError):
        conditioning.build_emphasis(lab, table, utt)


def test_bundle_rejects_empty(tagset):
    with pytest.raises(DimMismatchError):
        conditioning.ConditioningBundle("x", np.zeros((0, 4)), np.zeros((0, 2)))


def test_bundle_roundtrip_bitwise(tmp_path, tagset, rng):
    b = conditioning.ConditioningBundle(
        "utt-42",
        rng.normal(size=(7, 16)).astype(np.float32),
        rng.normal(size=(7, 4)).astype(np.float32),
    )
    p = tmp_path / "b.pcnd"
    conditioning.export_bundle(b, p)
    back = conditioning.load_bundle(p)
    assert back.utterance_id == "utt-42"
    assert np.array_equal(back.linguistic, b.linguistic)
    assert np.array_equal(back.emphasis, b.emphasis)


def test_bundle_corrupt_magic(tmp_path):
    p = tmp_path / "bad.pcnd"
    p.write_bytes(b"NOPE" + b"\x00" * 30)
    with pytest.raises(MalformedFileError):
        conditioning.load_bundle(p)


def test_bundle_truncated(tmp_path, rng):
    b = conditioning.ConditioningBundle(
        "u", rng.normal(size=(3, 4)).astype(np.float32),
        rng.normal(size=(3, 2)).astype(np.float32),
    )
    p = tmp_path / "t.pcnd"
    conditioning.export_bundle(b, p)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(MalformedFileError):
        conditioning.load_bundle(p)


def test_end_to_end_shapes_and_determinism(tagset):
    utt, ann = two_word_case(tagset)
    rel, pos, prov, proj = tables(tagset, cond_dim=12, sem_dim=6)
    emph_table = embeddings.init_table(2, 4, "emph", seed=5)
    lab = corpus.EmphasisLabels("c1", (1, 0, 0), (1.0,) * 3, "pseudo")
    bundles = []
    for _ in range(2):
        ling = conditioning.build_linguistic(utt, ann, prov, rel, pos, proj, tagset)
        emph = conditioning.build_emphasis(lab, emph_table, utt)
        bundles.append(conditioning.ConditioningBundle(utt.id, ling, emph))
    assert bundles[0].num_phones == utt.num_phones == 6
    assert bundles[0].cond_dim == 12 and bundles[0].emph_dim == 4
    assert np.array_equal(bundles[0].linguistic, bundles[1].linguistic)
    assert np.array_equal(bundles[0].emphasis, bundles[1].emphasis)

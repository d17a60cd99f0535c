import itertools
import math

import numpy as np
import pytest

import mona


def test_ctc_matches_path_enumeration():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(4, 3))
    label = [1, 2]
    loss, grad = mona.ctc_loss(logits, label, 0)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    total = 0.0
    for path in itertools.product(range(3), repeat=4):
        collapsed = [k for i, k in enumerate(path) if k != 0 and (i == 0 or path[i - 1] != k)]
        if collapsed == label:
            total += math.exp(sum(logp[t, k] for t, k in enumerate(path)))
    assert loss == pytest.approx(-math.log(total), abs=1e-10)
    assert grad.shape == (4, 3)
    # gradient rows of a softmax-based loss sum to zero
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-10)


def test_crosscon_two_columns_is_zero():
    z = np.array([[1.0, 0.5], [0.0, 2.0]])
    loss, grad = mona.crosscon(z, ["emg", "audio"], [0, 0], [0, 0], 0.1)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_suptcon_identical_embeddings():
    z = np.ones((3, 4))
    loss, _ = mona.suptcon(z, [1, 1, 1, 1], ["emg"] * 4, [0, 0, 0, 0], [0, 1, 2, 3], 0.1)
    assert loss == pytest.approx(math.log(3), abs=1e-9)


def test_dtw_identity():
    z = np.arange(10.0).reshape(2, 5)
    cost, path = mona.dtw_align(z, z)
    assert cost == 0.0
    assert path == [(i, i) for i in range(5)]
    assert mona.warp_sources(path, 5, 5) == list(range(5))


def test_pack_bins_hold_a_silent_item():
    rng = np.random.default_rng(1)
    classes = rng.choice(["gaddy_silent", "gaddy_vocal", "librispeech"], size=200, p=[0.2, 0.4, 0.4]).tolist()
    lengths = rng.integers(5, 40, size=200).tolist()
    bins = mona.pack(lengths, classes, 200, seed=3)
    assert bins
    for b in bins:
        assert sum(lengths[i] for i in b) <= 200
        assert any(classes[i] == "gaddy_silent" for i in b)
    assert bins == mona.pack(lengths, classes, 200, seed=3)


def test_decoding_and_wer():
    alphabet = mona.Alphabet(" ab")
    logits = np.full((5, 4), -5.0)
    for t, k in enumerate([2, 0, 1, 3, 3]):
        logits[t, k] = 5.0
    assert mona.greedy_decode(logits, alphabet) == "a b"
    best = mona.beam_search(logits, alphabet, beam_width=8, nbest=3)
    assert best[0].transcript == "a b"
    assert len(best) <= 3
    assert mona.wer("the cat sat", "the cat sat on") == pytest.approx(0.25)


def test_spearman_table():
    val = [20.63, 20.79, 21.26, 21.32, 21.45, 21.45, 21.63, 21.69, 21.82, 22.27]
    test = [22.17, 21.69, 21.75, 21.87, 20.72, 20.90, 20.96, 22.54, 22.11, 21.87]
    rho, p, exact = mona.spearman(val, test)
    assert rho == pytest.approx(0.12195121951219515, abs=1e-12)
    assert exact
    assert 0.0 < p <= 1.0


def test_prompt_round_trip():
    prompt = mona.build_prompt("direct", ["a cat", "a hat"])
    assert prompt.endswith("a cat\na hat")
    assert mona.parse_response("direct", '  "A Hat."  ') == "a hat"
    assert mona.parse_response("direct", "") is None
    assert mona.rescore_oracle([["a cat", "a hat"]], ["a hat"]) == ["a hat"]


def test_corpus_and_short_training(tmp_path):
    cfg = mona.CorpusConfig()
    cfg.letters = 4
    cfg.vocabulary = 6
    cfg.silent, cfg.vocal, cfg.librispeech = 3, 5, 5
    cfg.val_silent, cfg.val_vocal, cfg.val_librispeech = 2, 2, 2
    corpus = mona.generate_corpus(cfg)
    silent = [u for u in corpus.utterances if u.cls == "gaddy_silent"]
    assert silent and silent[0].audio is None and silent[0].parallel is not None
    path = str(tmp_path / "corpus.txt")
    corpus.save(path)
    again = mona.Corpus.load(path)
    assert np.array_equal(again.utterances[0].emg, corpus.utterances[0].emg)

    settings = {"train.epochs": "2", "eval.every": "1", "eval.beam": "8", "eval.nbest": "2",
                "variants": "emg, crosscon_dtw", "seeds": "0"}
    runs = mona.run_experiment(corpus, settings)
    assert [r["run"] for r in runs] == ["emg/seed0", "crosscon_dtw/seed0"]
    assert len(runs[0]["records"]) == 2
    assert runs[1]["records"][0]["train_cross"] is not None
    model = runs[0]["model"]
    logits = model.logits("emg", silent[0].emg)
    assert logits.shape == (silent[0].emg.shape[1], corpus.alphabet.size)
    again_runs = mona.run_experiment(corpus, settings)
    assert again_runs[1]["records"] == runs[1]["records"]


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        mona.ctc_loss(np.zeros(3), [1])
    with pytest.raises(ValueError):
        mona.run_experiment(mona.generate_corpus(), {"train.epoch": "1"})

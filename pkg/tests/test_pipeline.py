import numpy as np
import pytest

from ssmzip.errors import CorruptArchiveError, IncompatibleTokenizerError
from ssmzip.model import ModelConfig
from ssmzip.pipeline import (
    PipelineConfig,
    Predictor,
    compress,
    decompress,
    variant_config,
)
from ssmzip.tokenizer import TokenizerDefinition


@pytest.fixture(scope="module")
def defn():
    return TokenizerDefinition(vocabulary=[bytes([i]) for i in range(256)], merges=[])


@pytest.fixture(scope="module")
def other_defn():
    vocab = [bytes([i]) for i in range(256)] + [b"th"]
    return TokenizerDefinition(vocabulary=vocab, merges=[(ord("t"), ord("h"), 256)])


SAMPLE = (b"A state space model compresses text by predicting it, "
          b"one token at a time, and re-learning as it goes. " * 12)


class TestRoundTrip:
    @pytest.mark.parametrize("data", [
        b"",
        b"x",
        b"ab" * 700,
        SAMPLE,
        bytes(range(256)) * 6,
    ], ids=["empty", "one-byte", "periodic", "text", "binary"])
    def test_round_trip(self, defn, data):
        archive = compress(data, defn)
        assert decompress(archive, defn) == data

    def test_empty_archive_is_header_only(self, defn):
        archive = compress(b"", defn)
        from ssmzip.container import read_header
        header, offset = read_header(archive)
        assert header.token_count == 0 and offset == len(archive)

    def test_deterministic_archives(self, defn):
        assert compress(SAMPLE, defn) == compress(SAMPLE, defn)

    def test_seed_changes_archive(self, defn):
        cfg = PipelineConfig()
        cfg.model.rng_seed = 99
        a = compress(SAMPLE, defn, cfg)
        b = compress(SAMPLE, defn)
        assert a != b
        assert decompress(a, defn) == SAMPLE  # seed travels in the header


class TestFaultDetection:
    def test_flipped_payload_byte_detected(self, defn):
        archive = bytearray(compress(SAMPLE, defn))
        archive[-3] ^= 0x40
        with pytest.raises(CorruptArchiveError):
            decompress(bytes(archive), defn)

    def test_wrong_tokenizer_rejected(self, defn, other_defn):
        archive = compress(SAMPLE, defn)
        with pytest.raises(IncompatibleTokenizerError):
            decompress(archive, other_defn)

    def test_truncated_payload_detected(self, defn):
        archive = compress(SAMPLE, defn)
        with pytest.raises(CorruptArchiveError):
            decompress(archive[:-10], defn)

    def test_update_divergence_desyncs(self, defn):
        # a decoder that skips match-table updates diverges and is caught
        archive = compress(SAMPLE, defn)
        bad = PipelineConfig(drop_lz_updates=True)
        with pytest.raises(CorruptArchiveError):
            decompress(archive, defn, bad)


class TestVariants:
    @pytest.mark.parametrize("variant", ["count-only", "ngram+count", "ssm+count", "full"])
    def test_variants_round_trip(self, defn, variant):
        cfg = variant_config(variant)
        archive = compress(SAMPLE, defn, cfg)
        assert decompress(archive, defn, variant_config(variant)) == SAMPLE


class TestReplayLaw:
    def test_predictor_replay_bitwise(self, defn):
        rng = np.random.default_rng(3)
        v_e = 40
        stream = rng.integers(0, v_e, size=32 * 6).tolist()
        cfg = PipelineConfig()

        enc_side = Predictor(cfg, v_e)
        dec_side = Predictor(PipelineConfig(), v_e)
        for i, tok in enumerate(stream):
            pe = enc_side.next_probs()
            pd = dec_side.next_probs()
            assert np.array_equal(pe, pd)
            enc_side.observe(tok)
            dec_side.observe(tok)
            if (i + 1) % 32 == 0:
                assert enc_side.chunk_count == dec_side.chunk_count == (i + 1) // 32
                for k in enc_side.params:
                    assert np.array_equal(enc_side.params[k], dec_side.params[k])
                assert np.array_equal(enc_side.state.hidden, dec_side.state.hidden)
                assert np.array_equal(enc_side.state.conv, dec_side.state.conv)

    def test_training_event_count(self, defn):
        cfg = PipelineConfig()
        v_e = 16
        pred = Predictor(cfg, v_e)
        n = 32 * 5 + 17
        for tok in np.random.default_rng(0).integers(0, v_e, size=n):
            pred.next_probs()
            pred.observe(int(tok))
        assert pred.chunk_count == n // 32


class TestTrace:
    def test_monotone_bits(self, defn):
        trace = []
        compress(SAMPLE, defn, trace_every=50, trace=trace)
        bits = [p.cumulative_bits for p in trace]
        assert all(b >= a for a, b in zip(bits, bits[1:]))
        assert all(p.interval_bpt >= 0 for p in trace)

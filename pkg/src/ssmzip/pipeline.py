"""The predict, encode, update loop and its mirror-image decode loop.

Both directions drive the same predictor object, so every mutable store
(model parameters, optimizer moments, recurrent state, count tables) is a
pure function of the seed, the config, and the token prefix. The decoder
feeds decoded tokens through the identical update path, which is what makes
the scheme lossless without ever serializing the model.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import coder, container, mixer, model, vocabmap
from .context import ContextState
from .errors import CorruptArchiveError, IncompatibleTokenizerError
from .tokenizer import TokenizerDefinition, bpe_decode, bpe_encode, tokenizer_fingerprint


@dataclass
class PipelineConfig:
    model: model.ModelConfig = field(default_factory=model.ModelConfig)
    mix: mixer.MixConfig = field(default_factory=mixer.MixConfig)
    use_ssm: bool = True
    use_ngram: bool = True
    # test hooks; must match on both sides or decompression fails the CRC
    logit_shift: float = 0.0
    drop_lz_updates: bool = False


VARIANTS = {
    "count-only": (False, False),
    "ngram+count": (False, True),
    "ssm+count": (True, False),
    "full": (True, True),
}


def variant_config(variant: str, seed: int = 0) -> PipelineConfig:
    use_ssm, use_ngram = VARIANTS[variant]
    cfg = PipelineConfig(use_ssm=use_ssm, use_ngram=use_ngram)
    cfg.model.rng_seed = seed
    return cfg


class Predictor:
    """Shared per-token prediction and update state machine.

    Call next_probs(), code one token against it, then observe() that token.
    The first prediction uses zero model logits and scale 1; afterwards the
    model forward for token i runs when token i is observed, producing the
    logits that predict token i+1.
    """

    def __init__(self, cfg: PipelineConfig, v_e: int):
        self.cfg = cfg
        self.v_e = v_e
        self.ctx = ContextState(v_e, use_ngram=cfg.use_ngram)
        if cfg.drop_lz_updates:
            self.ctx.lz = _InertLz()
        self.tokens_seen = 0
        self.chunk_count = 0
        self._pending_logits: np.ndarray | None = None
        if cfg.use_ssm and v_e > 0:
            self.params = model.init_params(cfg.model, v_e)
            self.adam = model.AdamState.zeros(self.params)
            self.state = model.SsmState.zeros(cfg.model)
            self.snapshot = self.state.copy()
            self._chunk: list[int] = []

    def next_probs(self) -> np.ndarray:
        if self._pending_logits is None:
            logits = np.zeros(self.v_e, dtype=np.float64)
            s = 1.0
        else:
            raw = self._pending_logits
            if self.cfg.logit_shift != 0.0:
                raw = raw.astype(np.float64) + self.cfg.logit_shift
            logits = mixer.canonical_logits(raw)
            _, s = mixer.entropy_and_scale(mixer.softmax(logits), self.cfg.mix)
        sparse, dense = self.ctx.biases(s)
        combined = mixer.combine_logits(logits, sparse, dense)
        return mixer.softmax(combined)

    def observe(self, token: int) -> None:
        self.ctx.update(token)
        self.tokens_seen += 1
        if self.cfg.use_ssm:
            self._chunk.append(token)
            c = self.cfg.model.chunk_size
            if len(self._chunk) == c:
                self.chunk_count += 1
                self.state, self._pending_logits = model.train_chunk(
                    self.params, self.adam, self.snapshot,
                    np.asarray(self._chunk), self.chunk_count, self.cfg.model,
                )
                self.snapshot = self.state.copy()
                self._chunk = []
            else:
                self._pending_logits = model.ssm_step_forward(
                    self.params, self.cfg.model, self.state, token,
                )


class _InertLz:
    def predict(self, t2, t1):
        return None

    def update(self, t2, t1, actual):
        pass


@dataclass
class ProgressPoint:
    tokens_seen: int
    cumulative_bits: int
    interval_bpt: float


def compress(
    data: bytes,
    definition: TokenizerDefinition,
    cfg: PipelineConfig | None = None,
    trace_every: int = 0,
    trace: list[ProgressPoint] | None = None,
) -> bytes:
    if cfg is None:
        cfg = PipelineConfig()
    tokens = bpe_encode(data, definition)
    vmap, remapped = vocabmap.build_vocab_map(tokens, len(definition.vocabulary))
    coded_map = vocabmap.rice_encode_map(vmap)
    v_e = vmap.v_e

    payload = b""
    if len(remapped):
        pred = Predictor(cfg, v_e)
        enc = coder.RangeEncoder()
        prev_bits = 0
        for i, tok in enumerate(remapped):
            p = pred.next_probs()
            freq = coder.quantize_cdf(p)
            cum = coder.cdf_from_freq(freq)
            coder.encode_symbol(enc, cum, int(tok))
            pred.observe(int(tok))
            if trace_every and trace is not None and (i + 1) % trace_every == 0:
                bits = enc.bits_emitted()
                trace.append(ProgressPoint(i + 1, bits, (bits - prev_bits) / trace_every))
                prev_bits = bits
        payload = enc.finish()

    header = container.ArchiveHeader(
        original_length=len(data),
        token_count=len(remapped),
        v_e=v_e,
        tokenizer_fingerprint=tokenizer_fingerprint(definition),
        rng_seed=cfg.model.rng_seed,
        rice_parameter=coded_map.rice_parameter,
        map_payload=coded_map.payload,
        crc32=zlib.crc32(data),
        payload_length=len(payload),
    )
    return container.write_header(header) + payload


def decompress(
    archive: bytes,
    definition: TokenizerDefinition,
    cfg: PipelineConfig | None = None,
) -> bytes:
    header, offset = container.read_header(archive)
    if header.tokenizer_fingerprint != tokenizer_fingerprint(definition):
        raise IncompatibleTokenizerError(
            "archive was written with a different tokenizer definition"
        )
    if cfg is None:
        cfg = PipelineConfig()
    cfg.model.rng_seed = header.rng_seed
    payload = archive[offset:offset + header.payload_length]
    if len(payload) != header.payload_length:
        raise CorruptArchiveError("payload shorter than header declares")

    if header.token_count == 0:
        data = b""
    else:
        coded = vocabmap.RiceCodedMap(header.rice_parameter, header.map_payload)
        vmap = vocabmap.rice_decode_map(coded, header.v_e, len(definition.vocabulary))
        pred = Predictor(cfg, header.v_e)
        dec = coder.RangeDecoder(payload)
        compact = np.empty(header.token_count, dtype=np.int64)
        for i in range(header.token_count):
            p = pred.next_probs()
            freq = coder.quantize_cdf(p)
            cum = coder.cdf_from_freq(freq)
            tok = coder.decode_symbol(dec, cum)
            compact[i] = tok
            pred.observe(tok)
        data = bpe_decode(vmap.compact_to_global[compact], definition)

    if len(data) != header.original_length or zlib.crc32(data) != header.crc32:
        raise CorruptArchiveError("decoded stream fails the integrity check")
    return data


def ablation_run(data: bytes, definition: TokenizerDefinition, variant: str) -> int:
    """Compressed archive size in bytes for one ablation variant."""
    return len(compress(data, definition, variant_config(variant)))

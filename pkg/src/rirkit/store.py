"""Embedding datastore with cosine retrieval and late-reverberation splicing.

Also holds the symmetric contrastive loss used to train image/RIR embedding
pairs, as a plain function of two embedding batches.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import log_softmax

from .acoustics import Rir

DEFAULT_DIM = 1024
DEFAULT_TEMPERATURE = 1.0 / 0.07
MANIFEST = "manifest.json"
EMBEDDINGS_BLOB = "embeddings.f32"
RIRS_BLOB = "rirs.f32"
STORE_FORMAT = 1


@dataclass(frozen=True)
class SpliceConfig:
    boundary: int = 2000
    end: int = 4000

    def __post_init__(self):
        if not 0 <= self.boundary < self.end:
            raise ValueError("need 0 <= boundary < end")


@dataclass(frozen=True)
class Match:
    id: str
    similarity: float
    rir: Rir


class EmbeddingStore:
    """Ordered collection of ``(id, embedding, rir)`` entries.

    Reads are safe from several threads; ``add_entry`` must not run
    concurrently with anything else.
    """

    def __init__(self, dim: int = DEFAULT_DIM, sample_rate: int | None = None):
        self.dim = dim
        self.sample_rate = sample_rate
        self.ids: list[str] = []
        self.rirs: list[Rir] = []
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None
        self._index: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def embeddings(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array(self._rows).reshape(len(self._rows), self.dim)
        return self._matrix

    def add_entry(self, id: str, embedding, rir: Rir) -> "EmbeddingStore":
        emb = np.asarray(embedding, dtype=np.float64).reshape(-1)
        if id in self._index:
            raise ValueError(f"duplicate id {id!r}")
        if emb.size != self.dim:
            raise ValueError(f"embedding has dim {emb.size}, store expects {self.dim}")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embedding must be finite")
        if self.sample_rate is None:
            self.sample_rate = rir.sample_rate
        elif rir.sample_rate != self.sample_rate:
            raise ValueError(f"RIR sample rate {rir.sample_rate} != store rate {self.sample_rate}")
        self._index[id] = len(self.ids)
        self.ids.append(id)
        self.rirs.append(rir)
        self._rows.append(emb)
        self._matrix = None
        return self

    def similarities(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.size != self.dim:
            raise ValueError(f"query has dim {q.size}, store expects {self.dim}")
        qn = np.linalg.norm(q)
        if qn == 0:
            raise ValueError("query embedding has zero norm")
        emb = self.embeddings
        norms = np.linalg.norm(emb, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = (emb @ q) / (norms * qn)
        sims[norms == 0] = 0.0
        return np.clip(sims, -1.0, 1.0)

    def retrieve(self, query, k: int = 1) -> list[Match]:
        """Top-``k`` entries by cosine similarity; equal scores are ordered by id."""
        if not self.ids:
            raise LookupError("store is empty")
        sims = self.similarities(query)
        order = sorted(range(len(self.ids)), key=lambda i: (-sims[i], self.ids[i]))
        return [Match(self.ids[i], float(sims[i]), self.rirs[i]) for i in order[:k]]

    def save(self, directory) -> None:
        """Write manifest JSON plus float32 little-endian embedding and RIR blobs."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        lengths = [len(r) for r in self.rirs]
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(int).tolist()
        manifest = {
            "format": STORE_FORMAT,
            "dim": self.dim,
            "sample_rate": self.sample_rate,
            "ids": self.ids,
            "rir_offsets": offsets[:-1],
            "rir_lengths": lengths,
            "boundaries": [r.early_late_boundary for r in self.rirs],
        }
        (out / MANIFEST).write_text(json.dumps(manifest, indent=1))
        (out / EMBEDDINGS_BLOB).write_bytes(self.embeddings.astype("<f4").tobytes())
        samples = np.concatenate([r.samples for r in self.rirs]) if self.rirs else np.zeros(0)
        (out / RIRS_BLOB).write_bytes(samples.astype("<f4").tobytes())

    @classmethod
    def load(cls, directory) -> "EmbeddingStore":
        root = Path(directory)
        if not (root / MANIFEST).exists():
            raise FileNotFoundError(f"no store manifest in {root}")
        manifest = json.loads((root / MANIFEST).read_text())
        if manifest.get("format") != STORE_FORMAT:
            raise ValueError(f"unsupported store format {manifest.get('format')}")
        dim = manifest["dim"]
        emb = np.frombuffer((root / EMBEDDINGS_BLOB).read_bytes(), dtype="<f4").astype(np.float64)
        samples = np.frombuffer((root / RIRS_BLOB).read_bytes(), dtype="<f4").astype(np.float64)
        ids = manifest["ids"]
        if emb.size != len(ids) * dim:
            raise ValueError("embedding blob does not match the manifest")
        store = cls(dim, manifest["sample_rate"])
        emb = emb.reshape(len(ids), dim)
        for i, id in enumerate(ids):
            off, n = manifest["rir_offsets"][i], manifest["rir_lengths"][i]
            rir = Rir(samples[off:off + n], manifest["sample_rate"], manifest["boundaries"][i])
            store.add_entry(id, emb[i], rir)
        return store


def contrastive_loss(image_batch, rir_batch, temperature: float = DEFAULT_TEMPERATURE):
    """Symmetric InfoNCE loss over matched rows.

    Returns ``(loss, c_r2i, c_i2r)`` where the two logit matrices are the
    temperature-scaled dot products in each direction. Each direction's loss
    is the mean negative log of the diagonal row-softmax.
    """
    img = np.atleast_2d(np.asarray(image_batch, dtype=np.float64))
    rir = np.atleast_2d(np.asarray(rir_batch, dtype=np.float64))
    if img.shape != rir.shape:
        raise ValueError(f"batch shapes differ: {img.shape} vs {rir.shape}")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    c_r2i = temperature * (rir @ img.T)
    c_i2r = temperature * (img @ rir.T)
    l_r2i = -np.mean(np.diag(log_softmax(c_r2i, axis=1)))
    l_i2r = -np.mean(np.diag(log_softmax(c_i2r, axis=1)))
    return float(0.5 * (l_r2i + l_i2r)), c_r2i, c_i2r


def splice_late(est: Rir, retrieved: Rir, cfg: SpliceConfig = SpliceConfig(),
                additive: bool = False) -> Rir:
    """Replace samples ``[boundary, end)`` of ``est`` with those of ``retrieved``.

    With ``additive=True`` the retrieved segment is added instead of replacing.
    """
    if est.sample_rate != retrieved.sample_rate:
        raise ValueError("sample rate mismatch")
    if len(est) < cfg.end or len(retrieved) < cfg.end:
        raise ValueError(f"both RIRs need at least {cfg.end} samples")
    out = np.array(est.samples)
    seg = retrieved.samples[cfg.boundary:cfg.end]
    if additive:
        out[cfg.boundary:cfg.end] += seg
    else:
        out[cfg.boundary:cfg.end] = seg
    return est.with_samples(out)


def assemble_estimate(early_est: Rir, store: EmbeddingStore, query,
                      cfg: SpliceConfig = SpliceConfig(), additive: bool = False) -> tuple[Rir, str]:
    """Splice the best-matching stored RIR into ``early_est``; returns ``(rir, retrieved_id)``."""
    if len(early_est) < cfg.end:
        raise ValueError(f"estimate needs at least {cfg.end} samples")
    best = store.retrieve(query, k=1)[0]
    return splice_late(early_est, best.rir, cfg, additive), best.id

"""Residual vector quantizer with EMA-updated codebooks.

Each layer quantizes the residual left by the previous layers with a greedy
nearest-neighbour search (ties go to the lowest index). Training follows the
usual EMA k-means update: per-entry assignment counts and vector sums are
tracked as exponential moving averages and the entries are their Laplace
smoothed ratio.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

LAPLACE_EPS = 1e-5
DEAD_COUNT = 1e-3

CKPT_MAGIC = b"RVQC"
CKPT_VERSION = 1
# magic, version, num_layers, codebook_size, dim, flags, ema_decay, beta, seed
CKPT_HEADER = struct.Struct("<4sIIIIIddq")
FLAG_PIN_ZERO = 1


@dataclass(frozen=True)
class RvqConfig:
    num_layers: int = 64
    codebook_size: int = 8192
    dim: int = 128
    ema_decay: float = 0.99
    commitment_beta: float = 0.25
    seed: int = 0
    # entry 0 of every layer after the first is held at the zero vector, so a
    # residual layer can always leave the error unchanged instead of growing it
    pin_zero_entry: bool = True

    def __post_init__(self):
        if self.num_layers < 1 or self.codebook_size < 1 or self.dim < 1:
            raise ValueError("num_layers, codebook_size and dim must be >= 1")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in (0, 1)")


@dataclass
class Encoding:
    codes: np.ndarray  # frames x num_layers
    recon: np.ndarray  # frames x dim
    residual_norms: np.ndarray  # frames x num_layers


def _as_batch(v, dim: int) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected vectors of dim {dim}, got shape {np.shape(v)}")
    return arr


def nearest(x: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the closest codebook row for every row of ``x`` (lowest index on ties)."""
    # ||x||^2 is constant per row and dropped
    d = (codebook ** 2).sum(axis=1)[None, :] - 2.0 * (x @ codebook.T)
    return np.argmin(d, axis=1)


class RvqCodec:
    def __init__(self, config: RvqConfig, codebooks: np.ndarray,
                 ema_counts: np.ndarray | None = None, ema_sums: np.ndarray | None = None):
        shape = (config.num_layers, config.codebook_size, config.dim)
        codebooks = np.array(codebooks, dtype=np.float64)
        if codebooks.shape != shape:
            raise ValueError(f"codebooks have shape {codebooks.shape}, expected {shape}")
        self.config = config
        self.codebooks = codebooks
        self.ema_counts = (np.ones(shape[:2]) if ema_counts is None
                           else np.array(ema_counts, dtype=np.float64))
        self.ema_sums = (codebooks * self.ema_counts[..., None] if ema_sums is None
                         else np.array(ema_sums, dtype=np.float64))
        self._pin()

    def _pin(self) -> None:
        if self.config.pin_zero_entry and self.config.num_layers > 1:
            self.codebooks[1:, 0] = 0.0
            self.ema_sums[1:, 0] = 0.0

    def encode(self, v, num_layers: int | None = None) -> Encoding:
        """Greedy residual quantization of one vector or a batch of them."""
        x = _as_batch(v, self.config.dim)
        n_layers = self.config.num_layers if num_layers is None else num_layers
        residual = x.copy()
        recon = np.zeros_like(x)
        codes = np.empty((x.shape[0], n_layers), dtype=np.int64)
        norms = np.empty((x.shape[0], n_layers))
        for i in range(n_layers):
            book = self.codebooks[i]
            idx = nearest(residual, book)
            codes[:, i] = idx
            recon += book[idx]
            residual = x - recon
            norms[:, i] = np.linalg.norm(residual, axis=1)
        return Encoding(codes, recon, norms)

    def decode(self, codes) -> np.ndarray:
        """Sum the indexed entries of each layer. Fewer columns decode fewer layers."""
        codes = np.asarray(codes)
        if codes.ndim == 1:
            codes = codes[None, :]
        if codes.shape[1] > self.config.num_layers:
            raise ValueError(f"{codes.shape[1]} code layers but codec has {self.config.num_layers}")
        if codes.size and (codes.min() < 0 or codes.max() >= self.config.codebook_size):
            raise ValueError(f"codes must lie in [0, {self.config.codebook_size})")
        out = np.zeros((codes.shape[0], self.config.dim))
        for i in range(codes.shape[1]):
            out += self.codebooks[i][codes[:, i]]
        return out

    def train_step(self, batch) -> tuple[float, float]:
        """One EMA update of every layer on ``batch``.

        Returns ``(vq_loss, commitment_loss)``: the mean squared quantization
        error of the batch under the pre-update codebooks, and that error
        scaled by the commitment weight.
        """
        x = _as_batch(batch, self.config.dim)
        if x.shape[0] == 0:
            raise ValueError("empty training batch")
        d = self.config.ema_decay
        k = self.config.codebook_size
        residual = x.copy()
        for i in range(self.config.num_layers):
            book = self.codebooks[i]
            idx = nearest(residual, book)
            quant = book[idx]
            counts = np.bincount(idx, minlength=k).astype(np.float64)
            sums = np.zeros_like(book)
            np.add.at(sums, idx, residual)

            self.ema_counts[i] = d * self.ema_counts[i] + (1.0 - d) * counts
            self.ema_sums[i] = d * self.ema_sums[i] + (1.0 - d) * sums
            n = self.ema_counts[i].sum()
            smoothed = (self.ema_counts[i] + LAPLACE_EPS) / (n + k * LAPLACE_EPS) * n
            self.codebooks[i] = self.ema_sums[i] / smoothed[:, None]
            if i > 0 and self.config.pin_zero_entry:
                self.codebooks[i, 0] = 0.0
                self.ema_sums[i, 0] = 0.0

            next_residual = residual - quant
            self._reseed_dead(i, next_residual, residual)
            residual = next_residual
        vq_loss = float(np.mean(residual ** 2))
        return vq_loss, self.config.commitment_beta * vq_loss

    def _reseed_dead(self, layer: int, leftover: np.ndarray, layer_input: np.ndarray) -> None:
        dead = np.flatnonzero(self.ema_counts[layer] < DEAD_COUNT)
        if layer > 0 and self.config.pin_zero_entry:
            dead = dead[dead != 0]
        if dead.size == 0:
            return
        # largest leftover error first; stable sort keeps batch order on ties
        order = np.argsort(-np.linalg.norm(leftover, axis=1), kind="stable")
        for j, entry in enumerate(dead[:order.size]):
            vec = layer_input[order[j]]
            self.codebooks[layer, entry] = vec
            self.ema_counts[layer, entry] = 1.0
            self.ema_sums[layer, entry] = vec

    def reconstruction_mse(self, vectors) -> float:
        x = _as_batch(vectors, self.config.dim)
        return float(np.mean((x - self.encode(x).recon) ** 2))

    def save(self, path) -> None:
        """Write the checkpoint: header, then float32 codebooks, counts and sums."""
        c = self.config
        with open(path, "wb") as fh:
            flags = FLAG_PIN_ZERO if c.pin_zero_entry else 0
            fh.write(CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, c.num_layers, c.codebook_size,
                                      c.dim, flags, c.ema_decay, c.commitment_beta, c.seed))
            for arr in (self.codebooks, self.ema_counts, self.ema_sums):
                fh.write(arr.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "RvqCodec":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < CKPT_HEADER.size:
            raise ValueError(f"{path}: truncated checkpoint")
        magic, version, layers, size, dim, flags, decay, beta, seed = CKPT_HEADER.unpack_from(raw)
        if magic != CKPT_MAGIC or version != CKPT_VERSION:
            raise ValueError(f"{path}: not an RVQ checkpoint (magic {magic!r}, version {version})")
        cfg = RvqConfig(layers, size, dim, decay, beta, seed, bool(flags & FLAG_PIN_ZERO))
        n_book = layers * size * dim
        n_count = layers * size
        body = np.frombuffer(raw, dtype="<f4", offset=CKPT_HEADER.size)
        if body.size != 2 * n_book + n_count:
            raise ValueError(f"{path}: checkpoint body has the wrong size")
        books = body[:n_book].reshape(layers, size, dim)
        counts = body[n_book:n_book + n_count].reshape(layers, size)
        sums = body[n_book + n_count:].reshape(layers, size, dim)
        return cls(cfg, books, counts, sums)


def new_codec(cfg: RvqConfig, init_batch) -> RvqCodec:
    """Codec seeded from ``init_batch``.

    Layer 0 entries are rows of ``init_batch`` drawn with replacement. Every
    later layer draws (with the same seeded generator) from the residuals the
    batch leaves after the layers before it, so each layer starts on the
    distribution it will quantize.
    """
    x = np.asarray(init_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("init_batch must be a non-empty 2-D array")
    if x.shape[1] != cfg.dim:
        raise ValueError(f"init_batch has dim {x.shape[1]}, config expects {cfg.dim}")
    rng = np.random.default_rng(cfg.seed)
    books = np.empty((cfg.num_layers, cfg.codebook_size, cfg.dim))
    residual = x.copy()
    for i in range(cfg.num_layers):
        books[i] = residual[rng.integers(0, x.shape[0], size=cfg.codebook_size)]
        if i > 0 and cfg.pin_zero_entry:
            books[i, 0] = 0.0
        residual = residual - books[i][nearest(residual, books[i])]
    return RvqCodec(cfg, books)


def bitrate(cfg: RvqConfig, frames_per_second: float) -> float:
    """Bits per second: layers x ceil(log2(codebook_size)) x frame rate."""
    if frames_per_second <= 0:
        raise ValueError("frames_per_second must be positive")
    bits = math.ceil(math.log2(cfg.codebook_size)) if cfg.codebook_size > 1 else 0
    return cfg.num_layers * bits * frames_per_second

"""Datasets: synthetic generators, CSV windowing, normalization and sample files."""
from __future__ import annotations

import csv
import os
import tempfile
import warnings
from dataclasses import dataclass, replace

import numpy as np

SAMPLES_FORMAT = "specdiff-samples v1"
STD_FLOOR = 1e-8


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Uniform (n, L, D) windows plus whatever is needed to undo normalization.

    ``channel_mean``/``channel_std`` are the dataset z-score statistics and
    ``sample_means`` the per-sample per-channel means removed afterwards (in
    z-scored units). All three are None for raw data.
    """

    samples: np.ndarray
    channel_mean: np.ndarray | None = None
    channel_std: np.ndarray | None = None
    sample_means: np.ndarray | None = None

    def __post_init__(self):
        if np.ndim(self.samples) != 3:
            raise ValueError(f"samples must be (n, L, D), got shape {np.shape(self.samples)}")

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def L(self):
        return self.samples.shape[1]

    @property
    def D(self):
        return self.samples.shape[2]

    @property
    def centered(self) -> bool:
        return self.sample_means is not None


def _check_sizes(**kw):
    for k, v in kw.items():
        if int(v) <= 0:
            raise ValueError(f"{k} must be positive, got {v}")


def gen_sines(n_samples: int, L: int, D: int, rng) -> Dataset:
    """x_d[n] = sin(2 pi f_d n + phi_d), f_d ~ U(0.02, 0.1), phi_d ~ U(0, 2 pi), per sample and channel."""
    _check_sizes(n_samples=n_samples, L=L, D=D)
    f = rng.uniform(0.02, 0.1, (n_samples, 1, D))
    phi = rng.uniform(0, 2 * np.pi, (n_samples, 1, D))
    n = np.arange(L)[None, :, None]
    return Dataset(np.sin(2 * np.pi * f * n + phi))


def gen_single_frequency(n_samples: int, L: int, D: int, k: int, rng) -> Dataset:
    """Every channel is sin(2 pi k n / L + phi) with random phase: all energy in DFT bin k."""
    _check_sizes(n_samples=n_samples, L=L, D=D, k=k)
    if k > L // 2:
        raise ValueError(f"bin {k} exceeds the Nyquist bin {L // 2}")
    phi = rng.uniform(0, 2 * np.pi, (n_samples, 1, D))
    n = np.arange(L)[None, :, None]
    return Dataset(np.sin(2 * np.pi * k * n / L + phi))


def dominant_bin(series) -> np.ndarray:
    """Index in 1..floor(L/2) of the largest non-DC power, summed over channels, per sample."""
    x = np.asarray(series, dtype=float)
    power = (np.abs(np.fft.rfft(x, axis=-2)) ** 2).sum(-1)
    return 1 + np.argmax(power[..., 1 : x.shape[-2] // 2 + 1], axis=-1)


# --------------------------------------------------------------------- csv


def _data_rows(path, comment="#"):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith(comment)):
                continue
            yield lineno, row


def read_table(path, header: bool = False) -> tuple[list[str] | None, np.ndarray]:
    """Numeric comma-separated table; '#' lines are comments."""
    names, rows, width = None, [], None
    for lineno, row in _data_rows(path):
        if header and names is None:
            names = [c.strip() for c in row]
            width = len(names)
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataFormatError(f"{path}: line {lineno} has {len(row)} columns, expected {width}")
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            bad = next(c for c in row if not _is_float(c))
            raise DataFormatError(f"{path}: line {lineno} has non-numeric cell {bad!r}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return names, np.array(rows)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def ingest_csv(path, L: int, stride: int = 1, header: bool = False) -> Dataset:
    """Sliding windows of length L (step ``stride``) over a multichannel series."""
    _check_sizes(L=L, stride=stride)
    _, table = read_table(path, header)
    if table.shape[0] < L:
        raise DataFormatError(f"{path}: {table.shape[0]} rows is fewer than the window length {L}")
    starts = range(0, table.shape[0] - L + 1, stride)
    return Dataset(np.stack([table[s : s + L] for s in starts]))


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_samples_csv(path, samples, command: str = "", notes=()):
    """One file, rows of (sample, t, ch0..): every sample contributes L rows."""
    x = np.asarray(samples, dtype=float)
    n, L, D = x.shape
    lines = [f"# format: {SAMPLES_FORMAT}", f"# command: {command}"]
    lines += [f"# {note}" for note in notes]
    lines.append(",".join(["sample", "t"] + [f"ch{d}" for d in range(D)]))
    for i in range(n):
        for t in range(L):
            lines.append(",".join([str(i), str(t)] + [repr(float(v)) for v in x[i, t]]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_samples_csv(path) -> Dataset:
    _, table = read_table(path, header=True)
    if table.shape[1] < 3:
        raise DataFormatError(f"{path}: expected columns sample,t,ch0,...")
    idx = table[:, 0].astype(int)
    ids = np.unique(idx)
    counts = np.array([(idx == i).sum() for i in ids])
    if np.any(counts != counts[0]):
        raise DataFormatError(f"{path}: samples have unequal lengths {sorted(set(counts.tolist()))}")
    out = np.stack([table[idx == i][np.argsort(table[idx == i, 1]), 2:] for i in ids])
    return Dataset(out)


def load_any(path, L: int | None = None, stride: int = 1, header: bool = False) -> Dataset:
    """A samples file if it carries the samples header, else a raw table windowed by L."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if SAMPLES_FORMAT in first:
        return read_samples_csv(path)
    if L is None:
        raise DataFormatError(f"{path} is a raw table; a window length L is required")
    return ingest_csv(path, L, stride, header)


# ----------------------------------------------------------- normalization


def normalize(dataset: Dataset, std_floor: float = STD_FLOOR) -> Dataset:
    """Per-channel z-score over the whole set, then per-sample per-channel centering.

    Afterwards every sample has an exactly zero DC bin up to round-off.
    """
    x = dataset.samples
    mean = x.mean(axis=(0, 1))
    std = x.std(axis=(0, 1))
    if np.any(std < std_floor):
        warnings.warn(f"channels {np.flatnonzero(std < std_floor).tolist()} are constant; std floored at {std_floor}")
        std = np.maximum(std, std_floor)
    z = (x - mean) / std
    sample_means = z.mean(axis=1)
    z = z - sample_means[:, None, :]
    return Dataset(z, mean, std, sample_means)


def denormalize(samples, reference: Dataset, rng=None, sample_means=None) -> np.ndarray:
    """Invert :func:`normalize`.

    Generated series live on the zero-mean manifold, so unless ``sample_means``
    is given their per-sample means are drawn (with replacement) from the
    reference set's empirical means.
    """
    if reference.channel_mean is None:
        raise ValueError("reference dataset carries no normalization record")
    z = np.asarray(samples, dtype=float)
    if sample_means is None:
        if rng is None:
            raise ValueError("rng is required to resample per-sample means")
        pick = rng.integers(0, reference.sample_means.shape[0], z.shape[0])
        sample_means = reference.sample_means[pick]
    return (z + sample_means[:, None, :]) * reference.channel_std + reference.channel_mean


def with_samples(dataset: Dataset, samples) -> Dataset:
    return replace(dataset, samples=np.asarray(samples, dtype=float))

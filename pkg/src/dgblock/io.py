"""File formats: the DGB1 binary matrix container, FCIDUMP-style integrals,
CSV tables and JSON documents. All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"DGB1"
_HEADER = struct.Struct("<4siiI")  # magic, rows, cols, reserved


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- DGB1 ---------------------------------------------------------------------

def encode_matrices(mats) -> bytes:
    """Concatenated records: 16-byte header then rows*cols little-endian f64."""
    buf = io.BytesIO()
    for m in mats:
        m = np.asarray(m, dtype="<f8")
        if m.ndim == 1:
            m = m.reshape(1, -1)
        if m.ndim != 2:
            raise FormatError("DGB1 records are 2-D")
        buf.write(_HEADER.pack(MAGIC, m.shape[0], m.shape[1], 0))
        buf.write(np.ascontiguousarray(m).tobytes())
    return buf.getvalue()


def decode_matrices(data: bytes) -> list[np.ndarray]:
    out, pos = [], 0
    while pos < len(data):
        if len(data) - pos < _HEADER.size:
            raise FormatError("truncated DGB1 header")
        magic, rows, cols, _ = _HEADER.unpack_from(data, pos)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if rows < 0 or cols < 0:
            raise FormatError("negative matrix dimension")
        pos += _HEADER.size
        n = rows * cols * 8
        if len(data) - pos < n:
            raise FormatError("truncated DGB1 payload")
        out.append(np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos)
                   .reshape(rows, cols).astype(float))
        pos += n
    return out


def write_matrices(path, mats) -> None:
    atomic_write(path, encode_matrices(mats))


def read_matrices(path) -> list[np.ndarray]:
    return decode_matrices(Path(path).read_bytes())


# -- FCIDUMP ------------------------------------------------------------------

def fcidump_text(h: np.ndarray, v: np.ndarray, core: float, n_electrons: int,
                 ms2: int = 0, threshold: float = 1e-12) -> str:
    """Chemist-notation (ij|kl) = v[i, k, l, j] with 8-fold symmetry, 1-based."""
    n = h.shape[0]
    lines = [f" &FCI NORB={n},NELEC={n_electrons},MS2={ms2},",
             "  ORBSYM=" + ",".join(["1"] * n) + ",", "  ISYM=1,", " &END"]
    chem = v.transpose(0, 3, 1, 2)  # [i, j, k, l] = v[i, k, l, j]
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        continue
                    x = chem[i, j, k, l]
                    if abs(x) > threshold:
                        lines.append(f"{x: .16e} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}")
    for i in range(n):
        for j in range(i + 1):
            if abs(h[i, j]) > threshold:
                lines.append(f"{h[i, j]: .16e} {i + 1:4d} {j + 1:4d}    0    0")
    lines.append(f"{core: .16e}    0    0    0    0")
    return "\n".join(lines) + "\n"


def write_fcidump(path, h, v, core, n_electrons, ms2=0, threshold=1e-12) -> None:
    atomic_write(path, fcidump_text(h, v, core, n_electrons, ms2, threshold))


def read_fcidump(path) -> dict:
    return parse_fcidump(Path(path).read_text())


def parse_fcidump(text: str) -> dict:
    head, sep, body = text.partition("&END")
    if not sep:
        raise FormatError("missing &END")
    fields = {}
    for tok in head.replace("&FCI", "").replace("\n", " ").split(","):
        if "=" in tok:
            key, val = tok.split("=", 1)
            fields[key.strip().upper()] = val.strip()
    n = int(fields["NORB"])
    h = np.zeros((n, n))
    chem = np.zeros((n, n, n, n))
    core = 0.0
    for line in body.splitlines():
        parts = line.split()
        if not parts:
            continue
        x = float(parts[0])
        i, j, k, l = (int(p) for p in parts[1:5])
        if i == j == k == l == 0:
            core = x
        elif k == l == 0:
            h[i - 1, j - 1] = h[j - 1, i - 1] = x
        else:
            i, j, k, l = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)):
                chem[a, b, c, d] = chem[c, d, a, b] = x
    v = chem.transpose(0, 2, 3, 1)  # back to [p, q, r, s] = (ps|qr)
    return {"h": h, "v": np.ascontiguousarray(v), "core": core, "norb": n,
            "nelec": int(fields.get("NELEC", 0)), "ms2": int(fields.get("MS2", 0))}


# -- CSV / JSON ---------------------------------------------------------------

def csv_text(header, rows, note: str | None = None) -> str:
    buf = io.StringIO()
    if note:
        buf.write(f"# {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def json_text(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_json(path, doc: dict) -> None:
    atomic_write(path, json_text(doc))


def fmt(x: float) -> str:
    """Fixed float formatting for byte-stable tables."""
    return f"{x:.10e}"

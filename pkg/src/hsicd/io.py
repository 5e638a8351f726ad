"""File formats: hyperspectral cube container, PGM masks and maps, model
checkpoints and the superpixel graph sidecar. Byte layouts are documented in
FORMATS.md at the repository root."""
import json
import struct

import numpy as np

HSI_MAGIC = b"HSIC"
MODEL_MAGIC = b"HSIM"
GRAPH_MAGIC = b"SPXG"
FORMAT_VERSION = 1

# overlay grey levels for change-map export
OVERLAY = {"TP": 255, "TN": 0, "FP": 170, "FN": 85}


class FormatError(ValueError):
    """Malformed file; ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def _pack_header(magic, header):
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return magic + struct.pack("<BI", FORMAT_VERSION, len(text)) + text


def _read_header(buf, magic, what):
    if len(buf) < 9:
        raise FormatError(f"{what}: file too short for the preamble", len(buf))
    if buf[:4] != magic:
        raise FormatError(f"{what}: bad magic {buf[:4]!r}, expected {magic!r}", 0)
    version, hlen = struct.unpack_from("<BI", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{what}: unsupported version {version}", 4)
    end = 9 + hlen
    if len(buf) < end:
        raise FormatError(f"{what}: header declares {hlen} bytes, only {len(buf) - 9} present", 9)
    try:
        header = json.loads(buf[9:end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{what}: header is not valid JSON ({exc})", 9) from exc
    return header, end


# -- hyperspectral cubes ------------------------------------------------------

def save_cube(path, cube):
    """Write an (H, W, C) cube as little-endian float32, band-interleaved-by-pixel."""
    cube = np.asarray(cube)
    if cube.ndim != 3:
        raise ValueError(f"expected an (H, W, C) cube, got shape {cube.shape}")
    h, w, c = cube.shape
    header = {"height": h, "width": w, "bands": c, "dtype": "f32le", "layout": "bip"}
    with open(path, "wb") as fh:
        fh.write(_pack_header(HSI_MAGIC, header))
        fh.write(np.ascontiguousarray(cube, dtype="<f4").tobytes())


def load_cube(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    header, start = _read_header(buf, HSI_MAGIC, "cube")
    try:
        h, w, c = int(header["height"]), int(header["width"]), int(header["bands"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"cube: header lacks integer height/width/bands ({exc})", 9) from exc
    if header.get("dtype") != "f32le" or header.get("layout") != "bip":
        raise FormatError("cube: only dtype f32le with layout bip is supported", 9)
    expected = h * w * c * 4
    actual = len(buf) - start
    if actual != expected:
        raise FormatError(
            f"cube: header declares {h}x{w}x{c} needing {expected} payload bytes, found {actual}",
            start + min(actual, expected),
        )
    return np.frombuffer(buf, dtype="<f4", offset=start).reshape(h, w, c).astype(np.float32)


# -- PGM ----------------------------------------------------------------------

def save_pgm(path, image, maxval=None):
    """Binary PGM (P5); 16-bit big-endian samples when maxval > 255."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if maxval is None:
        maxval = 255 if image.max(initial=0) <= 255 else 65535
    if image.min(initial=0) < 0 or image.max(initial=0) > maxval:
        raise ValueError(f"pixel values must lie in [0, {maxval}]")
    h, w = image.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        fh.write(np.ascontiguousarray(image, dtype=dtype).tobytes())


def _pgm_tokens(buf):
    """Yield (token, end offset) over the PGM header, skipping comments."""
    pos = 0
    while True:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("PGM: truncated header", pos)
        yield buf[start:pos], pos


def load_pgm(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    tokens = _pgm_tokens(buf)
    magic, _ = next(tokens)
    if magic != b"P5":
        raise FormatError(f"PGM: expected P5 magic, got {magic!r}", 0)
    try:
        w = int(next(tokens)[0])
        h = int(next(tokens)[0])
        tok, end = next(tokens)
        maxval = int(tok)
    except ValueError as exc:
        raise FormatError(f"PGM: non-integer header field ({exc})") from exc
    start = end + 1
    dtype = ">u2" if maxval > 255 else "u1"
    need = h * w * np.dtype(dtype).itemsize
    if len(buf) - start != need:
        raise FormatError(f"PGM: expected {need} pixel bytes, found {len(buf) - start}", start)
    return np.frombuffer(buf, dtype=dtype, offset=start).reshape(h, w).astype(np.int64)


def save_mask(path, mask):
    """0 = unchanged, 255 = changed."""
    save_pgm(path, np.where(np.asarray(mask).astype(bool), 255, 0).astype(np.uint8), 255)


def load_mask(path):
    img = load_pgm(path)
    values = set(np.unique(img).tolist())
    if not values <= {0, 255}:
        raise FormatError(f"mask PGM may only hold 0 and 255, found {sorted(values)[:6]}")
    return (img == 255).astype(np.uint8)


def overlay_map(pred, gt):
    """Grey-level map marking TP/TN/FP/FN with the levels in ``OVERLAY``."""
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    out = np.zeros(pred.shape, dtype=np.uint8)
    out[pred & gt] = OVERLAY["TP"]
    out[~pred & ~gt] = OVERLAY["TN"]
    out[pred & ~gt] = OVERLAY["FP"]
    out[~pred & gt] = OVERLAY["FN"]
    return out


# -- model checkpoints --------------------------------------------------------

def save_model(path, arrays, meta):
    """Named float64 arrays in sorted-name order plus a JSON ``meta`` block."""
    names = sorted(arrays)
    entries = []
    offset = 0
    for name in names:
        a = np.asarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size * 8
    header = {"dtype": "f8le", "tensors": entries, "payload_bytes": offset, "meta": meta}
    with open(path, "wb") as fh:
        fh.write(_pack_header(MODEL_MAGIC, header))
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_model(path):
    """Return ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    header, start = _read_header(buf, MODEL_MAGIC, "model")
    actual = len(buf) - start
    if actual != header.get("payload_bytes"):
        raise FormatError(
            f"model: header declares {header.get('payload_bytes')} payload bytes, found {actual}", start
        )
    arrays = {}
    for e in header["tensors"]:
        shape = tuple(e["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        arrays[e["name"]] = np.frombuffer(buf, "<f8", n, start + e["offset"]).reshape(shape).astype(float)
    return arrays, header["meta"]


# -- superpixel graph sidecar -------------------------------------------------

def save_graph(path, graph):
    """Label per pixel (u32) followed by the upper-triangle edge list (u32 pairs)."""
    h, w = graph.labels.shape
    ii, jj = np.nonzero(np.triu(graph.A, 1))
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC + struct.pack("<BIIII", FORMAT_VERSION, h, w, graph.K, len(ii)))
        fh.write(np.ascontiguousarray(graph.labels, dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(np.stack([ii, jj], 1), dtype="<u4").tobytes())


def load_graph(path):
    from .preprocess import build_graph

    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != GRAPH_MAGIC:
        raise FormatError(f"graph: bad magic {buf[:4]!r}", 0)
    if len(buf) < 21:
        raise FormatError("graph: file too short for the preamble", len(buf))
    version, h, w, k, n_edges = struct.unpack_from("<BIIII", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"graph: unsupported version {version}", 4)
    need = 21 + 4 * h * w + 8 * n_edges
    if len(buf) != need:
        raise FormatError(f"graph: expected {need} bytes, found {len(buf)}", min(len(buf), need))
    labels = np.frombuffer(buf, "<u4", h * w, 21).reshape(h, w).astype(np.int64)
    graph = build_graph(labels)
    edges = np.frombuffer(buf, "<u4", 2 * n_edges, 21 + 4 * h * w).reshape(-1, 2)
    if edges.size and edges.max() >= k:
        raise FormatError(f"graph: edge endpoint {int(edges.max())} exceeds K={k}", 21 + 4 * h * w)
    stored = np.zeros((k, k))
    stored[edges[:, 0], edges[:, 1]] = 1
    stored = np.maximum(stored, stored.T)
    if graph.K != k or not np.array_equal(stored, graph.A):
        raise FormatError("graph: edge list disagrees with the label map", 21 + 4 * h * w)
    return graph

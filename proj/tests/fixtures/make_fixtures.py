#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the checkpoint, raw-matrix and vocabulary fixtures under tests/data.

This writer is deliberately independent of the C++ loader: it lays out the
container bytes by hand with struct/json/numpy. Re-run it only when a fixture
has to change, then commit the regenerated files.

    python3 tests/fixtures/make_fixtures.py [out_dir]
"""
import json
import os
import struct
import sys

import numpy as np

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(os.path.abspath(__file__)), "..", "data")

WIDTH = {"F32": 4, "F16": 2, "BF16": 2}


def encode(dtype, values):
    a = np.asarray(values, dtype=np.float32)
    if dtype == "F32":
        return a.astype("<f4").tobytes()
    if dtype == "F16":
        return a.astype("<f2").tobytes()
    if dtype == "BF16":
        bits = a.view(np.uint32)
        assert np.all((bits & 0xFFFF) == 0), "BF16 fixture values must be exact"
        return (bits >> 16).astype("<u2").tobytes()
    raise ValueError(dtype)


def container(tensors, metadata=None, header_override=None, offsets_override=None):
    """tensors: list of (name, dtype, shape, payload-bytes)."""
    header = {}
    if metadata is not None:
        header["__metadata__"] = metadata
    blob = b""
    for name, dtype, shape, payload in tensors:
        begin = len(blob)
        blob += payload
        header[name] = {"dtype": dtype, "shape": list(shape),
                        "data_offsets": [begin, len(blob)]}
    if offsets_override:
        for name, rng in offsets_override.items():
            header[name]["data_offsets"] = list(rng)
    text = header_override if header_override is not None else json.dumps(header)
    raw = text.encode("utf-8")
    raw += b" " * ((8 - len(raw) % 8) % 8)
    return struct.pack("<Q", len(raw)) + raw + blob


def write(name, data):
    with open(os.path.join(OUT, name), "wb") as f:
        f.write(data)


def planted_matrix():
    """90 unit rows around three cluster directions plus 10 orphan rows of norm 1e-6."""
    rng = np.random.default_rng(20260101)
    d = 8
    centers = np.linalg.qr(rng.standard_normal((d, d)))[0][:, :3].T
    rows = []
    for c in range(3):
        for _ in range(30):
            r = centers[c] + 0.3 * rng.standard_normal(d)
            rows.append(r / np.linalg.norm(r))
    orphans = []
    for _ in range(10):
        r = rng.standard_normal(d)
        orphans.append(1e-6 * r / np.linalg.norm(r))
    w = np.vstack(rows + orphans).astype(np.float32)
    # interleave the orphans so they are not a contiguous tail
    order = rng.permutation(100)
    w = w[order]
    orphan_ids = sorted(int(np.where(order == 90 + j)[0][0]) for j in range(10))
    return w, orphan_ids


def planted_vocab():
    special = {0: "", 1: "\u0001", 2: "�", 3: "Ġthe", 4: "▁of",
               5: "漢字", 6: "itſtelf", 7: "a|b", 8: "\u0000", 9: "\u0085"}
    return [special.get(i, "tok%02d" % i) for i in range(100)]


def main():
    os.makedirs(OUT, exist_ok=True)

    # accepted containers
    write("f32_lm_head.safetensors", container(
        [("lm_head.weight", "F32", [2, 2], encode("F32", [1.0, 2.0, 3.0, 4.0]))],
        metadata={"format": "pt"}))
    f16_vals = [1.0, -2.0, 0.5, 65504.0, 2.0 ** -24, -0.0]
    write("f16_lm_head.safetensors", container(
        [("lm_head.weight", "F16", [3, 2], encode("F16", f16_vals))]))
    write("bf16_lm_head.safetensors", container(
        [("lm_head.weight", "BF16", [2, 2], struct.pack("<4H", *[0x3F80] * 4))]))
    write("tied_embed.safetensors", container(
        [("model.norm.weight", "F32", [2], encode("F32", [1.0, 1.0])),
         ("model.embed_tokens.weight", "F32", [4, 2],
          encode("F32", [1, 0, 0, 1, 1, 1, -1, 2]))]))
    write("output_weight.safetensors", container(
        [("model.embed_tokens.weight", "F32", [3, 2], encode("F32", [9] * 6)),
         ("output.weight", "F32", [3, 2], encode("F32", [1, 2, 3, 4, 5, 6]))]))
    write("wide.safetensors", container(
        [("lm_head.weight", "F32", [2, 3], encode("F32", [1, 2, 3, 4, 5, 6]))]))

    # rejected containers
    write("empty.safetensors", b"")
    write("header_overrun.safetensors", struct.pack("<Q", 64) + b'{"lm_head.weight"')
    write("short.safetensors", b"\x01\x02\x03")
    write("malformed_json.safetensors", container([], header_override='{"a": [1, 2'))
    write("not_object.safetensors", container([], header_override='[1, 2, 3]'))
    write("overlap.safetensors", container(
        [("a.weight", "F32", [2, 2], encode("F32", [1, 2, 3, 4])),
         ("lm_head.weight", "F32", [2, 2], encode("F32", [5, 6, 7, 8]))],
        offsets_override={"lm_head.weight": [8, 24]}))
    write("nan_payload.safetensors", container(
        [("lm_head.weight", "F32", [2, 2], encode("F32", [1.0, float("nan"), 0.0, 1.0]))]))
    write("wrong_length.safetensors", container(
        [("lm_head.weight", "F32", [2, 2], encode("F32", [1, 2, 3, 4]))],
        offsets_override={"lm_head.weight": [0, 12]}))
    write("one_d.safetensors", container(
        [("lm_head.weight", "F32", [4], encode("F32", [1, 2, 3, 4]))]))
    write("int8.safetensors", container(
        [("lm_head.weight", "I8", [2, 2], b"\x01\x02\x03\x04")]))
    write("no_candidate.safetensors", container(
        [("model.norm.weight", "F32", [2], encode("F32", [1.0, 1.0]))]))

    # raw + sidecar
    def raw(stem, dtype, rows, cols, payload):
        write(stem + ".bin", payload)
        write(stem + ".json", json.dumps({"rows": rows, "cols": cols, "dtype": dtype}).encode())

    raw("raw_identity", "F32", 2, 2, encode("F32", [1, 0, 0, 1]))
    raw("raw_f16_ones", "F16", 2, 2, struct.pack("<4H", *[0x3C00] * 4))
    raw("raw_bad_length", "F32", 2, 2, encode("F32", [1, 0, 0]))
    raw("raw_bad_dtype", "I32", 2, 2, b"\x00" * 16)

    # planted audit fixture
    w, orphans = planted_matrix()
    write("planted.safetensors", container(
        [("lm_head.weight", "F32", list(w.shape), encode("F32", w.ravel()))]))
    write("planted_vocab.json", json.dumps(planted_vocab(), ensure_ascii=False).encode("utf-8"))
    write("planted_orphans.json", json.dumps(orphans).encode())

    # byte-identical payload under the tied-embedding name, for diff checks
    write("planted_tied.safetensors", container(
        [("model.embed_tokens.weight", "F32", list(w.shape), encode("F32", w.ravel()))]))

    # vocabularies
    write("vocab_array.json", b'["a","b","c"]')
    write("vocab_pair.json", b'["x","y"]')
    write("vocab_object.json", b'{"x":0,"y":2}')
    write("vocab_dup.json", b'{"x":0,"y":0}')
    write("vocab_negative.json", b'{"x":-1}')
    write("vocab_fraction.json", b'{"x":1.5}')
    write("vocab_malformed.json", b'["a",')
    write("vocab_surrogate.json", b'["\\ud800"]')


if __name__ == "__main__":
    main()

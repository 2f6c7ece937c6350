"""Flat binary container for trained model parameters.

Layout: magic ``TS3RA-SN`` (8 bytes), version (u32 LE), section count
(u32 LE); per section a 4-byte tag, a shape table (tensor count, then per
tensor a name and its dimensions, all little-endian), then the tensors'
float64 payloads in declaration order.  The slice-selection model uses
section ``SNET``; the allocator's weight matrix uses section ``HOPF``.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"TS3RA-SN"
VERSION = 1
SNET_TAG = b"SNET"
HOPF_TAG = b"HOPF"

Sections = dict[bytes, dict[str, np.ndarray]]


class ContainerFormatError(ValueError):
    """The file is not a valid parameter container."""


def write_container(path: Union[str, Path], sections: Sections) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(sections)))
        for tag, tensors in sections.items():
            if len(tag) != 4:
                raise ValueError("section tags are exactly 4 bytes")
            fh.write(tag)
            fh.write(struct.pack("<I", len(tensors)))
            for name, arr in tensors.items():
                encoded = name.encode("utf-8")
                fh.write(struct.pack("<H", len(encoded)))
                fh.write(encoded)
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            for arr in tensors.values():
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path: Union[str, Path]) -> Sections:
    data = Path(path).read_bytes()
    view = memoryview(data)
    if bytes(view[:8]) != MAGIC:
        raise ContainerFormatError(f"{path}: bad magic")
    version, n_sections = struct.unpack_from("<II", view, 8)
    if version != VERSION:
        raise ContainerFormatError(f"{path}: unsupported version {version}")
    off = 16
    sections: Sections = {}
    for _ in range(n_sections):
        tag = bytes(view[off : off + 4])
        off += 4
        (n_tensors,) = struct.unpack_from("<I", view, off)
        off += 4
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<H", view, off)
            off += 2
            name = bytes(view[off : off + name_len]).decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<I", view, off)
            off += 4
            shape = struct.unpack_from(f"<{ndim}I", view, off)
            off += 4 * ndim
            shapes.append((name, shape))
        tensors: dict[str, np.ndarray] = {}
        for name, shape in shapes:
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(view, dtype="<f8", count=count, offset=off).reshape(shape)
            tensors[name] = arr.astype(np.float64)
            off += 8 * count
        sections[tag] = tensors
    return sections


def save_slicenet(model, path: Union[str, Path]) -> None:
    write_container(path, {SNET_TAG: model.parameters()})


def load_slicenet(path: Union[str, Path]):
    from .slicenet import SliceNetModel

    sections = read_container(path)
    if SNET_TAG not in sections:
        raise ContainerFormatError(f"{path}: no slice-selection section")
    tensors = sections[SNET_TAG]
    n_features, d_model = tensors["lift_w"].shape
    model = SliceNetModel(n_features=n_features, d_model=d_model)
    for name in model.parameters():
        if name not in tensors:
            raise ContainerFormatError(f"{path}: missing tensor {name}")
        model.set_parameter(name, tensors[name])
    return model


def save_hopfield(we: np.ndarray, thresholds: np.ndarray, path: Union[str, Path]) -> None:
    write_container(path, {HOPF_TAG: {"we": we, "thresholds": thresholds}})


def load_hopfield(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    sections = read_container(path)
    if HOPF_TAG not in sections:
        raise ContainerFormatError(f"{path}: no allocator section")
    tensors = sections[HOPF_TAG]
    return tensors["we"], tensors["thresholds"]

"""Boundary packets: the only data that crosses a subdomain interface.

Wire layout (little endian)::

    u32 sender id | u8 side | u16 rank | u32 interface cells | u32 n_phi
    float64 K_slice (row-major) | float64 V (column-major)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = ["SIDES", "PHYSICAL", "BoundaryPacket", "encode_packet", "decode_packet"]

SIDES = ("left", "right", "bottom", "top")
PHYSICAL = 0xFFFFFFFF  # sender id of synthetic packets built from boundary data

_HEADER = struct.Struct("<IBHII")


@dataclass(frozen=True)
class BoundaryPacket:
    """Interface slice ``K_slice @ V.T`` of a sender's distribution function.

    Attributes
    ----------
    sender : int
        Subdomain id of the sender, or ``PHYSICAL``.
    side : str
        Side of the *sender* the slice was taken from.
    K_slice : (n_line, r) ndarray
        ``U @ S`` restricted to the cells along that side.
    V : (n_phi, r) ndarray
        Sender angular basis, orthonormal columns.
    """

    sender: int
    side: str
    K_slice: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    def dense(self) -> np.ndarray:
        return self.K_slice @ self.V.T


def encode_packet(packet: BoundaryPacket) -> bytes:
    n_line, r = packet.K_slice.shape
    n_phi = packet.V.shape[0]
    if packet.V.shape[1] != r:
        raise ValueError("K_slice and V disagree on rank")
    head = _HEADER.pack(packet.sender, SIDES.index(packet.side), r, n_line, n_phi)
    K = np.ascontiguousarray(packet.K_slice, dtype="<f8")
    V = np.asfortranarray(packet.V, dtype="<f8")
    return head + K.tobytes(order="C") + V.tobytes(order="F")


def decode_packet(buf: bytes) -> BoundaryPacket:
    sender, side, r, n_line, n_phi = _HEADER.unpack_from(buf, 0)
    off = _HEADER.size
    nk, nv = n_line * r, n_phi * r
    expected = off + 8 * (nk + nv)
    if len(buf) != expected:
        raise ValueError(f"packet length {len(buf)} != expected {expected}")
    K = np.frombuffer(buf, dtype="<f8", count=nk, offset=off).reshape(n_line, r)
    V = np.frombuffer(buf, dtype="<f8", count=nv, offset=off + 8 * nk)
    V = V.reshape((n_phi, r), order="F")
    return BoundaryPacket(int(sender), SIDES[side], np.array(K, dtype=float, order="C"),
                          np.array(V, dtype=float, order="C"))

"""Address kinds, decided purely by the textual prefix."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class AddressKind(str, Enum):
    P2PKH = "P2PKH"
    P2SH = "P2SH"
    SEGWIT = "SegWit"
    UNKNOWN = "Unknown"


def classify_address_type(text: str) -> AddressKind:
    if text.startswith("1"):
        return AddressKind.P2PKH
    if text.startswith("3"):
        return AddressKind.P2SH
    # bech32 may be written all-uppercase
    if text[:4].lower() == "bc1q":
        return AddressKind.SEGWIT
    return AddressKind.UNKNOWN


@dataclass(frozen=True, slots=True)
class Address:
    text: str
    kind: AddressKind

    @classmethod
    def of(cls, text: str) -> "Address":
        if not text:
            raise ValueError("address text must be non-empty")
        return cls(text, classify_address_type(text))

    def __str__(self) -> str:
        return self.text

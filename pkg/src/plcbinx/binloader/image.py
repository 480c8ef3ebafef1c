from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class BinaryFormat(str, Enum):
    ELF = "ELF"
    PE = "PE"
    APP = "APP"


class LoaderError(Exception):
    """Base class; batch callers skip the file and log a diagnostic."""


class MalformedHeader(LoaderError):
    pass


class UnsupportedClass(LoaderError):
    pass


class UnsupportedMachine(LoaderError):
    pass


class NoPeers(LoaderError):
    pass


class NoCodeFound(LoaderError):
    pass


@dataclass(frozen=True, order=True)
class Region:
    offset: int
    length: int
    vaddr: int

    @property
    def end(self) -> int:
        return self.offset + self.length

    def contains_vaddr(self, addr: int) -> bool:
        return self.vaddr <= addr < self.vaddr + self.length


@dataclass(frozen=True)
class Symbol:
    name: str
    address: int
    raw_offset: int
    in_code: bool = True


@dataclass(frozen=True)
class MetadataRecord:
    name: str
    code_pointer: int
    raw_offset: int


@dataclass
class LoadedImage:
    format: BinaryFormat
    data: bytes = field(repr=False)
    code_regions: list[Region] = field(default_factory=list)
    base_address: int = 0
    symbols: list[Symbol] = field(default_factory=list)
    metadata_records: list[MetadataRecord] = field(default_factory=list)
    source_path: str = ""
    machine: int | None = None

    def region_bytes(self, region: Region) -> bytes:
        return self.data[region.offset:region.end]

    def in_code(self, addr: int) -> bool:
        return any(r.contains_vaddr(addr) for r in self.code_regions)

    def named_addresses(self) -> list[tuple[str, int, int]]:
        """(name, address, raw_offset) for every code-pointing symbol or record."""
        out = [(s.name, s.address, s.raw_offset) for s in self.symbols if s.in_code]
        out += [(r.name, r.code_pointer, r.raw_offset) for r in self.metadata_records]
        return out


def check_regions(regions: list[Region], size: int) -> list[Region]:
    regions = sorted(regions)
    prev_end = 0
    for r in regions:
        if r.offset < 0 or r.length < 0 or r.end > size:
            raise MalformedHeader(f"region {r} exceeds file size {size}")
        if r.offset < prev_end:
            raise MalformedHeader(f"overlapping code regions at {r.offset:#x}")
        prev_end = r.end
    return regions

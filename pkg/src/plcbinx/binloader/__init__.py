"""Format detection and loading of ELF, PE and opaque container binaries."""

from __future__ import annotations

import logging

from .container import (ProbeConfig, candidate_runs, looks_like_code, probe_container,
                        scan_metadata_records, whole_file_image)
from .elf import load_elf
from .image import (BinaryFormat, LoadedImage, LoaderError, MalformedHeader, MetadataRecord, NoCodeFound,
                    NoPeers, Region, Symbol, UnsupportedClass, UnsupportedMachine)
from .pe import load_pe

log = logging.getLogger(__name__)


def detect_format(data: bytes) -> BinaryFormat:
    if data[:4] == b"\x7fELF":
        return BinaryFormat.ELF
    if data[:2] == b"MZ":
        return BinaryFormat.PE
    return BinaryFormat.APP


def load_binary(data: bytes, source_path: str = "", peers: list[bytes] | None = None,
                fmt: BinaryFormat | str | None = None, probe: ProbeConfig = ProbeConfig()) -> LoadedImage:
    """Load any supported form; containers fall back to a whole-file scan when probing fails."""
    fmt = BinaryFormat(fmt) if fmt else detect_format(data)
    if fmt is BinaryFormat.ELF:
        return load_elf(data, source_path)
    if fmt is BinaryFormat.PE:
        return load_pe(data, source_path)
    try:
        image = probe_container(data, list(peers or []), probe, source_path)
    except (NoPeers, NoCodeFound) as exc:
        log.warning("%s: %s; falling back to whole-file scan", source_path or "<bytes>", exc)
        image = whole_file_image(data, source_path)
    image.metadata_records = scan_metadata_records(image, probe)
    return image


__all__ = [
    "BinaryFormat", "LoadedImage", "LoaderError", "MalformedHeader", "MetadataRecord", "NoCodeFound",
    "NoPeers", "ProbeConfig", "Region", "Symbol", "UnsupportedClass", "UnsupportedMachine",
    "candidate_runs", "detect_format", "load_binary", "load_elf", "load_pe", "looks_like_code",
    "probe_container", "scan_metadata_records", "whole_file_image",
]

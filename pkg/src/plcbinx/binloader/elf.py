"""Minimal ELF32 little-endian reader: executable sections and function symbols."""

from __future__ import annotations

import struct

from .image import (BinaryFormat, LoadedImage, MalformedHeader, Region, Symbol, UnsupportedClass,
                    UnsupportedMachine, check_regions)

ELF_MAGIC = b"\x7fELF"
ELFCLASS32 = 1
ELFDATA2LSB = 1
EM_ARM = 40

PT_LOAD = 1
SHT_SYMTAB = 2
SHT_NOBITS = 8
SHF_EXECINSTR = 0x4
STT_FUNC = 2

EHDR = struct.Struct("<16sHHIIIIIHHHHHH")
PHDR = struct.Struct("<IIIIIIII")
SHDR = struct.Struct("<IIIIIIIIII")
SYM = struct.Struct("<IIIBBH")


def _cstring(data: bytes, offset: int) -> str:
    if not 0 <= offset < len(data):
        raise MalformedHeader(f"string offset {offset:#x} out of range")
    end = data.find(b"\0", offset)
    if end < 0:
        raise MalformedHeader("unterminated string")
    return data[offset:end].decode("latin-1")


def load_elf(data: bytes, source_path: str = "") -> LoadedImage:
    if data[:4] != ELF_MAGIC:
        raise MalformedHeader("missing ELF magic")
    if len(data) < EHDR.size:
        raise MalformedHeader("truncated ELF header")
    if data[4] != ELFCLASS32 or data[5] != ELFDATA2LSB:
        raise UnsupportedClass(f"ELF class {data[4]} / data encoding {data[5]} not supported")
    (_, _etype, machine, _ver, _entry, phoff, shoff, _flags, _ehsize,
     phentsize, phnum, shentsize, shnum, shstrndx) = EHDR.unpack_from(data)
    if machine != EM_ARM:
        raise UnsupportedMachine(f"ELF machine {machine}")

    base = 0
    if phnum:
        if phentsize != PHDR.size or phoff + phnum * PHDR.size > len(data):
            raise MalformedHeader("program header table out of range")
        for i in range(phnum):
            p_type, p_offset, p_vaddr, *_ = PHDR.unpack_from(data, phoff + i * PHDR.size)
            if p_type == PT_LOAD:
                base = (p_vaddr - p_offset) & 0xFFFFFFFF
                break

    sections = []
    if shnum:
        if shentsize != SHDR.size or shoff + shnum * SHDR.size > len(data):
            raise MalformedHeader("section header table out of range")
        sections = [SHDR.unpack_from(data, shoff + i * SHDR.size) for i in range(shnum)]
        for s in sections:
            if s[1] != SHT_NOBITS and s[4] + s[5] > len(data):
                raise MalformedHeader("section contents out of range")

    regions = []
    for (_name, stype, flags, addr, offset, size, *_rest) in sections:
        if flags & SHF_EXECINSTR and stype != SHT_NOBITS and size > 0:
            regions.append(Region(offset, size - size % 4, addr or base + offset))
    regions = check_regions(regions, len(data))

    symbols = []
    for (_name, stype, _flags, _addr, offset, size, link, _info, _align, entsize) in sections:
        if stype != SHT_SYMTAB:
            continue
        if entsize != SYM.size or link >= len(sections):
            raise MalformedHeader("bad symbol table header")
        strtab_off = sections[link][4]
        for i in range(size // SYM.size):
            raw = offset + i * SYM.size
            st_name, value, _size, info, _other, _shndx = SYM.unpack_from(data, raw)
            if info & 0xF != STT_FUNC or st_name == 0:
                continue
            name = _cstring(data, strtab_off + st_name)
            inside = any(r.contains_vaddr(value) for r in regions)
            symbols.append(Symbol(name, value, raw, inside))

    return LoadedImage(BinaryFormat.ELF, data, regions, base, symbols, [], source_path, machine)

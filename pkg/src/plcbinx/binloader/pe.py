"""Minimal PE32 reader: executable sections plus COFF or export-table names."""

from __future__ import annotations

import struct

from .image import (BinaryFormat, LoadedImage, MalformedHeader, Region, Symbol, UnsupportedMachine,
                    check_regions)

IMAGE_FILE_MACHINE_ARM = 0x01C0
PE32_MAGIC = 0x10B
IMAGE_SCN_MEM_EXECUTE = 0x20000000

COFF = struct.Struct("<HHIIIHH")
SECTION = struct.Struct("<8sIIIIIIHHI")
COFF_SYM = struct.Struct("<8sIhHBB")
EXPORT_DIR = struct.Struct("<IIHHIIIIIII")


def _u32(data: bytes, off: int) -> int:
    if off < 0 or off + 4 > len(data):
        raise MalformedHeader(f"read past end at {off:#x}")
    return struct.unpack_from("<I", data, off)[0]


def _cstring(data: bytes, off: int) -> str:
    end = data.find(b"\0", off)
    if off < 0 or off >= len(data) or end < 0:
        raise MalformedHeader(f"bad string offset {off:#x}")
    return data[off:end].decode("latin-1")


def load_pe(data: bytes, source_path: str = "") -> LoadedImage:
    if data[:2] != b"MZ":
        raise MalformedHeader("missing MZ signature")
    if len(data) < 0x40:
        raise MalformedHeader("truncated DOS header")
    pe_off = _u32(data, 0x3C)
    if data[pe_off:pe_off + 4] != b"PE\0\0":
        raise MalformedHeader("PE signature not found")
    if pe_off + 4 + COFF.size > len(data):
        raise MalformedHeader("truncated COFF header")
    machine, nsec, _ts, sym_ptr, nsyms, opt_size, _chars = COFF.unpack_from(data, pe_off + 4)
    if machine != IMAGE_FILE_MACHINE_ARM:
        raise UnsupportedMachine(f"PE machine {machine:#06x}")

    opt = pe_off + 24
    if opt + opt_size > len(data) or opt_size < 96:
        raise MalformedHeader("truncated optional header")
    if struct.unpack_from("<H", data, opt)[0] != PE32_MAGIC:
        raise MalformedHeader("not a PE32 optional header")
    image_base = _u32(data, opt + 28)
    n_dirs = _u32(data, opt + 92)
    export_rva = export_size = 0
    if n_dirs >= 1 and opt_size >= 104:
        export_rva, export_size = struct.unpack_from("<II", data, opt + 96)

    sec_table = opt + opt_size
    if sec_table + nsec * SECTION.size > len(data):
        raise MalformedHeader("section table out of range")
    sections = []
    for i in range(nsec):
        (name, vsize, vaddr, raw_size, raw_ptr, *_r, chars) = SECTION.unpack_from(data, sec_table + i * SECTION.size)
        if raw_size and raw_ptr + raw_size > len(data):
            raise MalformedHeader(f"section {name!r} out of range")
        sections.append((name.rstrip(b"\0").decode("latin-1"), vsize, vaddr, raw_size, raw_ptr, chars))

    regions = []
    for _name, vsize, vaddr, raw_size, raw_ptr, chars in sections:
        if chars & IMAGE_SCN_MEM_EXECUTE:
            length = min(vsize or raw_size, raw_size)
            if length:
                regions.append(Region(raw_ptr, length - length % 4, image_base + vaddr))
    regions = check_regions(regions, len(data))

    def in_code(addr: int) -> bool:
        return any(r.contains_vaddr(addr) for r in regions)

    def rva_to_offset(rva: int) -> int:
        for _n, vsize, vaddr, raw_size, raw_ptr, _c in sections:
            if vaddr <= rva < vaddr + max(vsize, raw_size):
                return raw_ptr + (rva - vaddr)
        raise MalformedHeader(f"RVA {rva:#x} not mapped")

    symbols: list[Symbol] = []
    if sym_ptr and nsyms:
        symbols = _coff_symbols(data, sym_ptr, nsyms, sections, image_base)
    elif export_rva and export_size:
        symbols = _export_symbols(data, rva_to_offset(export_rva), rva_to_offset, image_base)
    symbols = [s for s in symbols if in_code(s.address)]
    return LoadedImage(BinaryFormat.PE, data, regions, image_base, symbols, [], source_path, machine)


def _coff_symbols(data: bytes, sym_ptr: int, nsyms: int, sections: list, image_base: int) -> list[Symbol]:
    strtab = sym_ptr + nsyms * COFF_SYM.size
    if strtab > len(data):
        raise MalformedHeader("COFF symbol table out of range")
    out = []
    i = 0
    while i < nsyms:
        raw = sym_ptr + i * COFF_SYM.size
        short, value, secnum, stype, _sclass, naux = COFF_SYM.unpack_from(data, raw)
        i += 1 + naux
        if secnum <= 0 or secnum > len(sections) or stype != 0x20:
            continue
        if short[:4] == b"\0\0\0\0":
            name = _cstring(data, strtab + struct.unpack_from("<I", short, 4)[0])
        else:
            name = short.rstrip(b"\0").decode("latin-1")
        vaddr = sections[secnum - 1][2]
        out.append(Symbol(name, image_base + vaddr + value, raw, True))
    return out


def _export_symbols(data: bytes, off: int, rva_to_offset, image_base: int) -> list[Symbol]:
    if off + EXPORT_DIR.size > len(data):
        raise MalformedHeader("export directory out of range")
    (_c, _ts, _maj, _min, _name, _base, nfuncs, nnames,
     funcs_rva, names_rva, ords_rva) = EXPORT_DIR.unpack_from(data, off)
    funcs_off = rva_to_offset(funcs_rva) if nfuncs else 0
    names_off = rva_to_offset(names_rva) if nnames else 0
    ords_off = rva_to_offset(ords_rva) if nnames else 0
    out = []
    for i in range(nnames):
        name_ptr = names_off + 4 * i
        name = _cstring(data, rva_to_offset(_u32(data, name_ptr)))
        ordinal = struct.unpack_from("<H", data, ords_off + 2 * i)[0]
        if ordinal >= nfuncs:
            raise MalformedHeader(f"export ordinal {ordinal} out of range")
        func_rva = _u32(data, funcs_off + 4 * ordinal)
        out.append(Symbol(name, image_base + func_rva, name_ptr, True))
    return out

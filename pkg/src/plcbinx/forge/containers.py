"""Writers for the three binary forms: ELF32 (ARM), PE32 (ARM) and the stand-in .app container.

Stand-in container layout (all offsets are file offsets, code pointers too):

    0x0000  header      magic + (tag, value) words; tags have the top byte set
    0x0100  tables      platform-constant words, each with the top bit set
    0x0B00  metadata    (name_offset, code_pointer) records, a zero pair, the
                        string pool, then 0xFF filler up to 0x0F00
    0x0F00  separator   256 constant bytes
    0x1000  code        ARM32 little-endian, padded to a 256-byte multiple
                        with per-file undecodable words

The header records where things are, but nothing in the analysis reads it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..hashing import fnv1a64

# ---------------------------------------------------------------- ELF

ELF_BASE = 0x10000
ELF_TEXT_OFFSET = 0x100
EM_ARM = 40


def _align(n: int, a: int) -> int:
    return (n + a - 1) // a * a


class _StrTab:
    def __init__(self):
        self.data = bytearray(b"\0")
        self.index: dict[str, int] = {}

    def add(self, s: str) -> int:
        if s not in self.index:
            self.index[s] = len(self.data)
            self.data += s.encode() + b"\0"
        return self.index[s]


def elf_code_base() -> int:
    return ELF_BASE + ELF_TEXT_OFFSET


def write_elf(code: bytes, symbols: list[tuple[str, int, int]], rodata: bytes = b"",
              data_symbols: list[tuple[str, int]] = (), exec_sections: bool = True) -> bytes:
    """``symbols``: (name, vaddr, size) function symbols; ``data_symbols``: (name, rodata offset)."""
    text_off = ELF_TEXT_OFFSET
    ro_off = _align(text_off + len(code), 16)
    shstr = _StrTab()
    strtab = _StrTab()
    syms = [struct.pack("<IIIBBH", 0, 0, 0, 0, 0, 0)]
    for name, addr, size in symbols:
        syms.append(struct.pack("<IIIBBH", strtab.add(name), addr, size, 0x12, 0, 1))
    for name, off in data_symbols:
        syms.append(struct.pack("<IIIBBH", strtab.add(name), ELF_BASE + ro_off + off, 4, 0x11, 0, 2))
    symtab = b"".join(syms)
    sym_off = _align(ro_off + len(rodata), 4)
    str_off = sym_off + len(symtab)
    names = [shstr.add(n) for n in (".text", ".rodata", ".symtab", ".strtab", ".shstrtab")]
    shstr_off = str_off + len(strtab.data)
    sh_off = _align(shstr_off + len(shstr.data), 4)

    load_end = ro_off + len(rodata)
    out = bytearray(sh_off + 6 * 40)
    ident = b"\x7fELF" + bytes([1, 1, 1, 0]) + bytes(8)
    struct.pack_into("<16sHHIIIIIHHHHHH", out, 0, ident, 2, EM_ARM, 1, elf_code_base(), 52, sh_off, 0x05000000,
                     52, 32, 1, 40, 6, 5)
    struct.pack_into("<IIIIIIII", out, 52, 1, 0, ELF_BASE, ELF_BASE, load_end, load_end, 5, 0x10000)
    out[text_off:text_off + len(code)] = code
    out[ro_off:ro_off + len(rodata)] = rodata
    out[sym_off:sym_off + len(symtab)] = symtab
    out[str_off:str_off + len(strtab.data)] = strtab.data
    out[shstr_off:shstr_off + len(shstr.data)] = shstr.data
    text_flags = 0x6 if exec_sections else 0x2
    headers = [
        (0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
        (names[0], 1, text_flags, ELF_BASE + text_off, text_off, len(code), 0, 0, 4, 0),
        (names[1], 1, 0x2, ELF_BASE + ro_off, ro_off, len(rodata), 0, 0, 4, 0),
        (names[2], 2, 0, 0, sym_off, len(symtab), 4, 1, 4, 16),
        (names[3], 3, 0, 0, str_off, len(strtab.data), 0, 0, 1, 0),
        (names[4], 3, 0, 0, shstr_off, len(shstr.data), 0, 0, 1, 0),
    ]
    for i, h in enumerate(headers):
        struct.pack_into("<IIIIIIIIII", out, sh_off + 40 * i, *h)
    return bytes(out)


# ---------------------------------------------------------------- PE

PE_IMAGE_BASE = 0x400000
PE_HEADERS = 0x400
PE_FILE_ALIGN = 0x200
PE_SECT_ALIGN = 0x1000
PE_TEXT_RVA = 0x1000
MACHINE_ARM = 0x01C0


def pe_section_rvas(code_sizes: list[int]) -> list[int]:
    rvas, rva = [], PE_TEXT_RVA
    for size in code_sizes:
        rvas.append(rva)
        rva = _align(rva + max(size, 1), PE_SECT_ALIGN)
    return rvas


def write_pe(code_sections: list[bytes], symbols: list[tuple[str, int]], use_coff: bool,
             data_exports: list[str] = ()) -> bytes:
    """``symbols``: (name, vaddr) of functions; names go to a COFF table or the export directory."""
    rvas = pe_section_rvas([len(c) for c in code_sections])
    rdata_rva = _align(rvas[-1] + max(len(code_sections[-1]), 1), PE_SECT_ALIGN)
    raw_ptrs, pos = [], PE_HEADERS
    for c in code_sections:
        raw_ptrs.append(pos)
        pos += _align(len(c), PE_FILE_ALIGN)
    rdata_ptr = pos

    # .rdata: a small data blob, then the export directory when names are exported
    blob = bytes(range(64))
    rdata = bytearray(blob)
    export_rva = export_size = 0
    if not use_coff:
        exports = sorted([(n, a - PE_IMAGE_BASE) for n, a in symbols]
                         + [(n, rdata_rva + 4 * i) for i, n in enumerate(data_exports)])
        dir_off = len(rdata)
        n = len(exports)
        funcs_off = dir_off + 40
        names_off = funcs_off + 4 * n
        ords_off = names_off + 4 * n
        str_off = _align(ords_off + 2 * n, 4)
        strings = bytearray(b"forge.dll\0")
        name_rvas = []
        for name, _ in exports:
            name_rvas.append(rdata_rva + str_off + len(strings))
            strings += name.encode() + b"\0"
        rdata += bytes(str_off - len(rdata)) + strings
        struct.pack_into("<IIHHIIIIIII", rdata, dir_off, 0, 0, 0, 0, rdata_rva + str_off, 1, n, n,
                         rdata_rva + funcs_off, rdata_rva + names_off, rdata_rva + ords_off)
        for i, (_name, rva) in enumerate(exports):
            struct.pack_into("<I", rdata, funcs_off + 4 * i, rva)
            struct.pack_into("<I", rdata, names_off + 4 * i, name_rvas[i])
            struct.pack_into("<H", rdata, ords_off + 2 * i, i)
        export_rva, export_size = rdata_rva + dir_off, len(rdata) - dir_off
    rdata = bytes(rdata)
    end = rdata_ptr + _align(len(rdata), PE_FILE_ALIGN)

    coff = b""
    nsyms = 0
    if use_coff:
        table = bytearray()
        strings = bytearray(4)
        for name, addr in symbols:
            rva = addr - PE_IMAGE_BASE
            sec = next(i for i in range(len(rvas) - 1, -1, -1) if rva >= rvas[i])
            raw = name.encode()
            if len(raw) <= 8:
                short = raw.ljust(8, b"\0")
            else:
                short = struct.pack("<II", 0, len(strings))
                strings += raw + b"\0"
            table += struct.pack("<8sIhHBB", short, rva - rvas[sec], sec + 1, 0x20, 2, 0)
            nsyms += 1
        struct.pack_into("<I", strings, 0, len(strings))
        coff = bytes(table + strings)

    out = bytearray(end + len(coff))
    out[0:2] = b"MZ"
    struct.pack_into("<I", out, 0x3C, 0x80)
    out[0x40:0x40 + 39] = b"This program cannot be run in DOS mode."
    out[0x80:0x84] = b"PE\0\0"
    nsec = len(code_sections) + 1
    struct.pack_into("<HHIIIHH", out, 0x84, MACHINE_ARM, nsec, 0, end if use_coff else 0, nsyms, 224, 0x0102)
    opt = 0x98
    image_size = _align(rdata_rva + len(rdata), PE_SECT_ALIGN)
    struct.pack_into("<HBBIIIIII", out, opt, 0x10B, 1, 0, sum(len(c) for c in code_sections), len(rdata), 0,
                     rvas[0], rvas[0], rdata_rva)
    struct.pack_into("<IIIHHHHHHIIIIHHIIIIII", out, opt + 28, PE_IMAGE_BASE, PE_SECT_ALIGN, PE_FILE_ALIGN,
                     4, 0, 0, 0, 4, 0, 0, image_size, PE_HEADERS, 0, 9, 0, 0x100000, 0x1000, 0x100000, 0x1000,
                     0, 16)
    struct.pack_into("<II", out, opt + 96, export_rva, export_size)
    sec_table = opt + 224
    sections = [(f".text{i or ''}".encode(), len(c), rvas[i], _align(len(c), PE_FILE_ALIGN), raw_ptrs[i],
                 0x60000020) for i, c in enumerate(code_sections)]
    sections.append((b".rdata", len(rdata), rdata_rva, _align(len(rdata), PE_FILE_ALIGN), rdata_ptr, 0x40000040))
    for i, (name, vsize, rva, raw_size, raw_ptr, chars) in enumerate(sections):
        struct.pack_into("<8sIIIIIIHHI", out, sec_table + 40 * i, name, vsize, rva, raw_size, raw_ptr, 0, 0, 0, 0,
                         chars)
    for c, ptr in zip(code_sections, raw_ptrs):
        out[ptr:ptr + len(c)] = c
    out[rdata_ptr:rdata_ptr + len(rdata)] = rdata
    out[end:] = coff
    return bytes(out)


# ---------------------------------------------------------------- stand-in container

APP_HEADER = 0x0000
APP_TABLES = 0x0100
APP_META = 0x0B00
APP_SEPARATOR = 0x0F00
APP_CODE = 0x1000
APP_WINDOW = 0x100
APP_MAGIC = b"PLCAPPv3"


@dataclass
class AppRecord:
    name: str
    pointer: int  # file offset; into code for functions, into the tables for data


@dataclass
class AppLayout:
    records: list[AppRecord] = field(default_factory=list)


def _stable_words(tag: str, count: int) -> np.ndarray:
    rng = np.random.default_rng(fnv1a64("app:" + tag))
    return (rng.integers(0, 1 << 31, count, dtype=np.uint64) | 0x80000000).astype("<u4")


def app_code_base() -> int:
    return APP_CODE


def write_app(code: bytes, records: list[AppRecord], platform_tag: str, pad_seed: int) -> tuple[bytes, int]:
    """Return (file bytes, recorded code length). Record name strings live in the metadata slot."""
    padded = _align(len(code), APP_WINDOW)
    out = bytearray(APP_CODE + padded)
    out[APP_TABLES:APP_META] = _stable_words("tables:" + platform_tag, (APP_META - APP_TABLES) // 4).tobytes()
    out[APP_SEPARATOR:APP_CODE] = _stable_words("separator", APP_WINDOW // 4).tobytes()
    out[APP_HEADER:APP_TABLES] = _stable_words("header:" + platform_tag, APP_TABLES // 4).tobytes()

    meta = bytearray()
    table_len = 8 * (len(records) + 1)
    pool = bytearray()
    for r in records:
        meta += struct.pack("<II", APP_META + table_len + len(pool), r.pointer)
        pool += r.name.encode("ascii") + b"\0"
    meta += bytes(8) + pool
    if len(meta) > APP_SEPARATOR - APP_META:
        raise ValueError("metadata records do not fit the metadata slot")
    slot = bytearray(b"\xff" * (APP_SEPARATOR - APP_META))
    slot[:len(meta)] = meta
    out[APP_META:APP_SEPARATOR] = slot

    out[0:8] = APP_MAGIC
    fields = [(0xA1000001, APP_CODE), (0xA1000002, len(code)), (0xA1000003, len(records)),
              (0xA1000004, fnv1a64(bytes(code)) & 0xFFFFFFFF), (0xA1000005, fnv1a64(platform_tag) & 0xFFFF)]
    for i, (tag, value) in enumerate(fields):
        struct.pack_into("<II", out, 8 + 8 * i, tag, value)

    out[APP_CODE:APP_CODE + len(code)] = code
    if padded > len(code):
        rng = np.random.default_rng(pad_seed)
        pad = (rng.integers(0, 1 << 28, (padded - len(code)) // 4, dtype=np.uint64) | 0xF0000000).astype("<u4")
        out[APP_CODE + len(code):] = pad.tobytes()
    return bytes(out), len(code)

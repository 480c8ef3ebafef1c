"""Platform code styles and the per-platform runtime function pools."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..hashing import fnv1a64
from .codegen import FunctionIR

POOL_SIZE = 150
LEAVES = 36  # the last LEAVES pool entries have no prologue

# Words outside the decoder subset (mul, ldrb, shifted mov, register-offset ldr, mla).
UNSUPPORTED_WORDS = (0xE0000291, 0xE5D10000, 0xE1A00100, 0xE7910002, 0xE0010392)


@dataclass(frozen=True)
class PlatformStyle:
    platform: str
    fmt: str  # ELF | PE | APP
    prologue: tuple[str, ...]
    ret: str  # epilogue instruction that returns
    before_ret: tuple[str, ...]
    restore: tuple[str, ...]  # undo the frame without returning (before tail calls)
    frame: str  # base register for locals
    negative_frame: bool
    leaf_rets: tuple[str, ...]
    mix: tuple[float, ...]  # runtime instruction mix over MIX classes
    mean_len: float  # runtime body filler scale
    idioms: tuple[str, ...] = ()  # compiler-specific conditional forms sprinkled into runtime code


STYLES = {
    "CODESYSv3": PlatformStyle("CODESYSv3", "APP", ("push {r4, r5, r6, lr}", "mov r4, r0"), "pop {r4, r5, r6, pc}",
                               (), ("pop {r4, r5, r6, lr}",), "r4", False, ("bx lr", "mov pc, lr"),
                               (0.25, 0.10, 0.25, 0.30, 0.10), 7.0,
                               ("addgt {rd}, {rd}, #{imm}", "suble {rd}, {rd}, #{imm}")),
    "GEB": PlatformStyle("GEB", "ELF", ("push {r4, fp, lr}", "add fp, sp, #8"), "pop {r4, fp, pc}", (),
                         ("pop {r4, fp, lr}",), "fp", True, ("bx lr",), (0.20, 0.20, 0.30, 0.20, 0.10), 4.5,
                         ("moveq {rd}, #{imm}", "orrne {rd}, {rd}, #{imm}")),
    "OpenPLCv2": PlatformStyle("OpenPLCv2", "PE", ("push {fp, lr}", "add fp, sp, #4", "sub sp, sp, #16"),
                               "pop {fp, pc}", ("sub sp, fp, #4",), ("sub sp, fp, #4", "pop {fp, lr}"), "fp", True,
                               ("bx lr",), (0.20, 0.15, 0.25, 0.30, 0.10), 3.0,
                               ("andhs {rd}, {rd}, #{imm}", "movlo {rd}, #{imm}")),
    "OpenPLCv3": PlatformStyle("OpenPLCv3", "PE", ("push {fp, lr}", "add fp, sp, #4", "sub sp, sp, #16"),
                               "pop {fp, pc}", ("sub sp, fp, #4",), ("sub sp, fp, #4", "pop {fp, lr}"), "fp", True,
                               ("bx lr",), (0.20, 0.15, 0.25, 0.30, 0.10), 3.0,
                               ("andhs {rd}, {rd}, #{imm}", "movlo {rd}, #{imm}")),
}

_GEB_HEADS = ["memcpy", "memset", "memmove", "memcmp"]
_GEB_STEMS = ["io", "timer", "task", "sched", "comm", "log", "cfg", "diag", "wdog", "event", "queue", "var",
              "retain", "clock", "heap"]
_GEB_VERBS = ["init", "read", "write", "get", "set", "start", "stop", "update", "check", "reset"]

_V2_HEADS = ["wiringPiSetup", "wiringPiSetupGpio", "wiringPiSetupSys", "pinMode", "digitalRead", "digitalWrite",
             "pwmWrite", "analogRead", "analogWrite", "delay", "delayMicroseconds", "millis", "micros",
             "piHiPri", "pullUpDnControl", "pwmSetMode", "pwmSetRange", "pwmSetClock", "softPwmCreate",
             "softPwmWrite", "wiringPiI2CSetup", "wiringPiI2CRead", "wiringPiI2CWrite", "wiringPiSPISetup",
             "wiringPiSPIDataRW", "serialOpen", "serialClose", "serialPutchar", "serialGetchar", "serialDataAvail",
             "piBoardRev", "wpiPinToGpio", "__aeabi_idiv", "__aeabi_uidiv", "__aeabi_idivmod", "__aeabi_uidivmod",
             "__aeabi_lmul", "__aeabi_memcpy", "__aeabi_memset", "initializeHardware", "updateBuffersIn",
             "updateBuffersOut", "glueVars", "updateTime", "setupCycleDelay"]
_V2_STEMS = ["Gpio", "Pin", "Pwm", "Adc", "Dac", "Spi", "I2c", "Uart", "Board", "Pi"]
_V2_VERBS = ["Init", "Read", "Write", "Mode", "Setup", "Poll", "Flush", "Clear", "Config", "Sync", "Scan"]

_V3_HEADS = ["_ZdlPv", "_Znwj", "_ZNSt6vectorIiSaIiEE9push_backERKi", "_ZNSsC1EPKcRKSaIcE", "__divsi3", "__modsi3",
             "__udivsi3", "__umodsi3", "processModbusMessage", "readCoils", "readDiscreteInputs",
             "readHoldingRegisters", "readInputRegisters", "writeCoil", "writeRegister", "writeMultipleCoils",
             "writeMultipleRegisters", "processEnipMessage", "registerSession", "unregisterSession", "sendRRData",
             "sendUnitData", "processPCCCMessage", "parsePCCCRequest", "startServer", "handleConnections",
             "createSocket", "waitForClient", "listenToClient", "persistentStorage", "sqlite3_exec_hook",
             "dnp3StartServer", "enipConnectionTimeout", "pcccFileRead", "modbusReplyBuilder"]
_V3_STEMS = ["Modbus", "Enip", "Pccc", "Server", "Socket", "Session", "Persist", "Dnp3", "Buffer", "Interactive"]
_V3_VERBS = ["Open", "Close", "Accept", "Parse", "Reply", "Handle", "Encode", "Decode", "Queue", "Timeout", "Log", "Init"]


def _pool_names(platform: str) -> list[str]:
    if platform == "CODESYSv3":
        return [f"cds_rt_{i:03d}" for i in range(POOL_SIZE)]
    if platform == "GEB":
        heads, gen = _GEB_HEADS, [f"geb_{s}_{v}" for s in _GEB_STEMS for v in _GEB_VERBS]
    elif platform == "OpenPLCv2":
        heads, gen = _V2_HEADS, [f"hw{s}{v}" for s in _V2_STEMS for v in _V2_VERBS]
    else:
        heads, gen = _V3_HEADS, [f"rt{s}{v}" for s in _V3_STEMS for v in _V3_VERBS]
    return (heads + gen)[:POOL_SIZE]


POOL_NAMES = {p: _pool_names(p) for p in STYLES}

# Pool entries that core routines may call; all match the OpenPLC exclude rules.
CORE_HELPERS = {
    "CODESYSv3": ["cds_rt_000", "cds_rt_001", "cds_rt_002", "cds_rt_003"],
    "GEB": ["memcpy", "memset", "memmove", "memcmp"],
    "OpenPLCv2": ["__aeabi_idiv", "__aeabi_uidiv", "digitalRead", "digitalWrite", "delay"],
    "OpenPLCv3": ["__divsi3", "__modsi3", "_ZdlPv", "_Znwj"],
}


def is_leaf(index: int) -> bool:
    return index >= POOL_SIZE - LEAVES


def filler(rng: np.random.Generator, cls: str, style: PlatformStyle, imm_ratio: float) -> str:
    regs = ("r0", "r1", "r2", "r3")
    rd, rn, rm = (regs[i] for i in rng.integers(0, 4, 3))
    op2 = f"#{int(rng.integers(0, 256))}" if rng.random() < imm_ratio else rm
    if cls == "arith":
        return f"{('add', 'sub')[int(rng.integers(2))]} {rd}, {rn}, {op2}"
    if cls == "logic":
        return f"{('and', 'orr', 'eor')[int(rng.integers(3))]} {rd}, {rn}, {op2}"
    if cls == "move":
        return f"mov {rd}, {op2}"
    if cls == "compare":
        return f"cmp {rn}, {op2}"
    off = 4 * int(rng.integers(1, 16))
    mem = f"[{style.frame}, #-{off}]" if style.negative_frame else f"[{style.frame}, #{off}]"
    if rng.random() < 0.3:
        mem = f"[{rn}, #{off}]"
    return f"{('ldr', 'str')[int(rng.integers(2))]} {rd}, {mem}"


MIX_CLASSES = ("arith", "logic", "move", "mem", "compare")


def fill(f: FunctionIR, rng: np.random.Generator, n: int, style: PlatformStyle, mix, imm_ratio: float) -> None:
    for cls in rng.choice(MIX_CLASSES, size=n, p=np.asarray(mix) / np.sum(mix)):
        f.ins(filler(rng, str(cls), style, imm_ratio))


def runtime_fill(f: FunctionIR, rng: np.random.Generator, n: int, style: PlatformStyle) -> None:
    """Filler for runtime code, which also carries the toolchain's conditional idioms."""
    fill(f, rng, n, style, style.mix, 0.5)
    if style.idioms and rng.random() < 0.6:
        idiom = style.idioms[int(rng.integers(len(style.idioms)))]
        f.ins(idiom.format(rd=f"r{int(rng.integers(4))}", imm=int(rng.integers(256))))


@lru_cache(maxsize=None)
def pool_callees(platform: str, index: int) -> tuple[tuple[str, ...], str | None]:
    """(bl callees, optional tail-call target) of a pool entry; all point further down the pool."""
    if is_leaf(index):
        return (), None
    rng = np.random.default_rng(fnv1a64(f"pooldag:{platform}:{index}"))
    names = POOL_NAMES[platform]
    n_calls = int(rng.choice([0, 1, 1, 2, 2, 3]))
    calls = tuple(names[int(j)] for j in rng.integers(index + 1, POOL_SIZE, n_calls))
    tail = None
    non_leaf_after = [j for j in range(index + 1, POOL_SIZE - LEAVES)]
    if non_leaf_after and rng.random() < 0.12:
        tail = names[int(rng.choice(non_leaf_after))]
    return calls, tail


def runtime_function(platform: str, index: int) -> FunctionIR:
    """Deterministic body of pool entry ``index``; identical in every binary that includes it."""
    style = STYLES[platform]
    name = POOL_NAMES[platform][index]
    rng = np.random.default_rng(fnv1a64(f"pool:{platform}:{name}"))
    f = FunctionIR(name, category="runtime", pool_index=index)
    n = lambda: max(1, int(rng.poisson(style.mean_len)))  # noqa: E731
    if is_leaf(index):
        runtime_fill(f, rng, n(), style)
        if rng.random() < 0.4:
            loop = f.new_label()
            f.label(loop)
            runtime_fill(f, rng, max(1, n() // 2), style)
            f.ins("sub r2, r2, #1").ins("cmp r2, #0").br("ne", loop)
        f.ret(style.leaf_rets[int(rng.integers(len(style.leaf_rets)))])
        return f

    calls, tail = pool_callees(platform, index)
    for text in style.prologue:
        f.ins(text)
    runtime_fill(f, rng, n(), style)
    if rng.random() < 0.15:
        f.raw(UNSUPPORTED_WORDS[int(rng.integers(len(UNSUPPORTED_WORDS)))])
    for callee in calls:
        if rng.random() < 0.35:
            skip = f.new_label()
            f.ins(f"cmp r0, #{int(rng.integers(0, 16))}").br("eq", skip)
            runtime_fill(f, rng, max(1, n() // 2), style)
            f.label(skip)
        f.call(callee)
        runtime_fill(f, rng, n(), style)
    ending = rng.random()
    if tail is not None:
        for text in style.restore:
            f.ins(text)
        f.tail("", tail)
    elif ending < 0.08:
        f.ins(f"ldr r3, [r0, #{4 * int(rng.integers(1, 8))}]")
        for text in style.restore:
            f.ins(text)
        f.ind("bx r3")
    elif ending < 0.12:
        f.ins("mov r6, r0")
        for text in style.restore:
            f.ins(text)
        f.ind("mov pc, r6")
    else:
        for text in style.before_ret:
            f.ins(text)
        f.ret(style.ret)
    return f


@lru_cache(maxsize=None)
def closure(platform: str, roots: tuple[str, ...]) -> frozenset[str]:
    index = {n: i for i, n in enumerate(POOL_NAMES[platform])}
    seen: set[str] = set()
    stack = list(roots)
    while stack:
        name = stack.pop()
        if name in seen:
            continue
        seen.add(name)
        calls, tail = pool_callees(platform, index[name])
        stack.extend(calls)
        if tail:
            stack.append(tail)
    return frozenset(seen)


def select_runtime(platform: str, rng: np.random.Generator, helpers: list[str], lo: int = 20,
                   hi: int = 80) -> list[str]:
    """Closed subset of the pool with size in [lo, hi], always containing ``helpers``."""
    names = POOL_NAMES[platform]
    target = int(rng.integers(lo, hi + 1))
    chosen = set(closure(platform, tuple(sorted(helpers))))
    roots = [names[i] for i in rng.permutation(POOL_SIZE - LEAVES)]
    for root in roots:
        if len(chosen) >= target:
            break
        extra = closure(platform, (root,)) - chosen
        if len(chosen) + len(extra) <= target:
            chosen |= extra
    if len(chosen) < lo:
        raise AssertionError(f"runtime selection for {platform} too small ({len(chosen)})")
    order = {n: i for i, n in enumerate(names)}
    return sorted(chosen, key=order.__getitem__)

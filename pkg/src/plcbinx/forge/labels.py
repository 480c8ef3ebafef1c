"""Functionality labels and the per-label motif distributions the forge samples from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hashing import fnv1a64

LABELS = (
    "Actuators_HVAC", "Arithmetic_Func", "Array_Buffer_Mem_List", "Basic_Dev_Drivers", "Basic_Other_Func",
    "Building_Other_Func", "Calculations", "Complex_Math", "Ctrl_Mods", "Latches_FlipFlop_ShiftReg",
    "Logic_Mods", "Mathematics", "Measure_Mods", "Network_1", "Network_2", "Pulse_Gen", "Sensors",
    "Signal_Gen", "Signal_Proc", "Str_Func", "Time_and_Date", "Vector_Math",
)

MOTIFS = ("loop", "diamond", "straight", "chain", "select")
MIX = ("arith", "logic", "move", "mem", "compare")

# Keyword families pick which motif dominates; the hashed component keeps every label distinct.
_FAMILY_BIAS = {
    "loop": ("Array", "Vector", "Str_", "Buffer", "Signal_Proc", "Network"),
    "diamond": ("Logic", "Latches", "Ctrl", "Basic_Other", "Building", "Actuators"),
    "straight": ("Math", "Arithmetic", "Calculations", "Complex", "Measure"),
    "chain": ("Time", "Pulse", "Signal_Gen", "Sensors", "Basic_Dev", "Network_2"),
}


@dataclass(frozen=True)
class LabelProfile:
    label: str
    motif_rates: tuple[float, ...]  # expected motif count per routine, in MOTIFS order
    mix: tuple[float, ...]  # instruction class weights, in MIX order
    block_len: float  # mean filler instructions per motif block
    imm_ratio: float  # share of immediate operands in data-processing
    routines: tuple[float, ...]  # probabilities of 1, 2, 3 extra routines besides main


def profile_for(label: str) -> LabelProfile:
    rng = np.random.default_rng(fnv1a64("label:" + label))
    rates = rng.uniform(0.2, 1.0, len(MOTIFS))
    for k, (motif, keys) in enumerate(_FAMILY_BIAS.items()):
        if any(key in label for key in keys):
            rates[MOTIFS.index(motif)] += 1.6
    mix = rng.dirichlet(np.full(len(MIX), 1.2))
    return LabelProfile(
        label=label,
        motif_rates=tuple(float(x) for x in np.round(rates, 3)),
        mix=tuple(float(x) for x in np.round(mix, 3)),
        block_len=float(np.round(rng.uniform(2.0, 7.0), 2)),
        imm_ratio=float(np.round(rng.uniform(0.15, 0.85), 2)),
        routines=tuple(float(x) for x in np.round(rng.dirichlet(np.ones(3) * 2), 3)),
    )


PROFILES = {label: profile_for(label) for label in LABELS}

"""plcbinx: cross-platform PLC binary recovery, core-function extraction and
function-level semantic representations, with the two downstream learning
tasks (toolchain and functionality prediction) and a ground-truthed forge."""

__version__ = "0.1.0"

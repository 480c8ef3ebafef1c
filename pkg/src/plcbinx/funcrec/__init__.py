"""Function recovery and the FLIF record format."""

from .flif import FLIF_VERSION, SchemaViolation, export_flif, import_flif, record_from_dict, record_to_dict, validate_function
from .recover import (DanglingEntry, assign_names, build_cfg, build_record, find_entries, recover_function,
                      recover_functions, sweep_image)
from .types import (FAMILIES, PLATFORMS, BasicBlock, CallKind, CallSite, Category, EdgeKind,
                    FunctionProgramRecord, RecoveredFunction, Terminator, derive_terminator, family_of)


def analyze_image(image, binary_id: str, program_id: str, platform_label: str | None = None,
                  functionality_label: str | None = None) -> FunctionProgramRecord:
    """Full recovery of one loaded image into a record."""
    return build_record(image, recover_functions(image), binary_id, program_id, platform_label, functionality_label)


__all__ = [
    "FAMILIES", "FLIF_VERSION", "PLATFORMS", "BasicBlock", "CallKind", "CallSite", "Category", "DanglingEntry",
    "EdgeKind", "FunctionProgramRecord", "RecoveredFunction", "SchemaViolation", "Terminator", "analyze_image",
    "assign_names", "build_cfg", "build_record", "derive_terminator", "export_flif", "family_of", "find_entries",
    "import_flif", "record_from_dict", "record_to_dict", "recover_function", "recover_functions", "sweep_image",
    "validate_function",
]

from ._core import (
    ParseError,
    __version__,
    canonical,
    export_provenance,
    known_versions,
    plan,
    run,
    validate,
)

__all__ = [
    "ParseError",
    "__version__",
    "canonical",
    "export_provenance",
    "known_versions",
    "plan",
    "run",
    "validate",
]

"""irdb: interpreter and source-level debugger for a textual LLVM-IR subset."""

__version__ = "0.1.0"

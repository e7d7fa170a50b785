"""Built-in pipeline components."""

from .builtin import BUILTIN_KINDS, builtin_registry, register_builtins

__all__ = ["BUILTIN_KINDS", "builtin_registry", "register_builtins"]

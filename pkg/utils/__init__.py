"""utils package."""

from .async_file_utils import file_exists, read_text, write_text
from .suggest import closest_name, with_suggestion

__all__ = [
    "closest_name",
    "file_exists",
    "read_text",
    "with_suggestion",
    "write_text",
]

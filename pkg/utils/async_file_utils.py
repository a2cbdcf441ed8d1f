"""Utilities for reading sources and writing artifacts asynchronously."""

import logging
from pathlib import Path

import aiofiles
import aiofiles.os as aios
import aiofiles.tempfile

from config import ENCODING
from core.exceptions import OutputWriteError

logger = logging.getLogger(__name__)


async def read_text(file_path: Path) -> str:
    """Read a whole text file asynchronously.

    :param file_path: The path to the file to read.
    :type file_path: Path
    :return: File contents decoded as UTF-8.
    :rtype: str
    """
    async with aiofiles.open(file_path, encoding=ENCODING) as f:
        return await f.read()


async def write_text(file_path: Path, text: str) -> None:
    """Write a text file atomically.

    The text goes to a temporary file in the target directory first, which
    then replaces the target, so readers never see a partial file.

    :param Path file_path: The path to the file to write to.
    :param str text: The text to write.
    :raises OutputWriteError: If the directory is missing or not writable.
    """
    directory = file_path.parent if str(file_path.parent) else Path()
    temporary: Path | None = None
    try:
        async with aiofiles.tempfile.NamedTemporaryFile(
            "w",
            encoding=ENCODING,
            dir=directory,
            prefix=f".{file_path.name}.",
            delete=False,
        ) as f:
            await f.write(text)
            temporary = Path(str(f.name))
        await aios.replace(temporary, file_path)
    except OSError as e:
        if temporary is not None and await aios.path.exists(temporary):
            await aios.remove(temporary)
        raise OutputWriteError(file_path, e) from e
    logger.info("wrote %s (%s bytes)", file_path, len(text.encode(ENCODING)))


async def file_exists(file_path: Path) -> bool:
    """Check if the file exists asynchronously.

    :param file_path: The path to the file to check.
    :type file_path: Path
    :return: True if the file exists, False otherwise.
    :rtype: bool
    """
    return await aios.path.exists(file_path)

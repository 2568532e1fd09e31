import os
import tempfile
from contextlib import contextmanager
from typing import IO, Iterator


@contextmanager
def atomic_write(path: str, prefix: str = ".stiffmap_") -> Iterator[IO[str]]:
    """Write a text file through a temp file in the same directory, then rename over path.

    Readers never observe a half-written file; on error the temp file is removed
    and the original path is left untouched.
    """
    parent_dir = os.path.dirname(path)
    if parent_dir:
        os.makedirs(parent_dir, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=parent_dir or '.', prefix=prefix, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            yield f
        # Atomic rename (on POSIX systems)
        os.replace(temp_path, path)
    except BaseException:
        try:
            os.remove(temp_path)
        except OSError:
            pass
        raise


def format_float(value: float) -> str:
    """17 significant digits: enough to read back the identical double."""
    return f"{value:.17g}"

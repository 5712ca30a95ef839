import threading
from collections import Counter

from rich.console import Console


class Logger:
    """
    Console logger for library and CLI messages.

    Everything goes to stderr so that stdout stays reserved for command
    output (tables, printed diagnostics).
    """

    debug_enabled: bool = False
    counters: Counter[str]

    def __init__(self, console: Console | None = None):
        self.console = console or Console(stderr=True, highlight=False)
        self.counters = Counter()
        self._lock = threading.Lock()

    def info(self, msg: str):
        self.console.print(msg)

    def debug(self, msg: str):
        if self.debug_enabled:
            self.console.print(f"[dim]{msg}[/dim]")

    def warn(self, counter: str, msg: str):
        """log a warning and bump the named counter"""

        with self._lock:
            self.counters[counter] += 1
            seen = self.counters[counter]

        # repeated warnings of one kind only show up in debug mode
        if seen == 1 or self.debug_enabled:
            self.console.print(f"[yellow]warning[/yellow] ({counter}): {msg}")

    def count(self, counter: str) -> int:
        with self._lock:
            return self.counters[counter]

    def reset(self):
        with self._lock:
            self.counters.clear()


LOG = Logger()

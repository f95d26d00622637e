import logging
from typing import List


class TraceLogHandler(logging.Handler):
    """
    Log handler that keeps every trace record in memory.
    The collected lines become the run's trace.txt.
    """

    def __init__(self, level=logging.NOTSET):
        super().__init__(level)
        self.setFormatter(logging.Formatter('%(message)s'))
        self.lines: List[str] = []

    def emit(self, record):
        """Store a formatted trace line"""
        try:
            self.lines.append(self.format(record))
        except Exception:
            self.handleError(record)

    def clear(self):
        """Drop all collected lines"""
        self.lines.clear()

    def render(self) -> str:
        """Trace text, one line per record"""
        return "".join(f"{line}\n" for line in self.lines)


def attach_trace_handler(logger: logging.Logger) -> TraceLogHandler:
    """
    Attach a fresh TraceLogHandler to the trace logger.

    Args:
        logger: Trace logger (child of the application logger)

    Returns:
        The attached handler; detach it with logger.removeHandler when the run ends
    """
    handler = TraceLogHandler()
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    # Trace lines stay out of the console and the log files
    logger.propagate = False
    return handler

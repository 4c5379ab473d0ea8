from colorama import Fore, Style
import emoji
import sys
import logging
from pathlib import Path


def platform_safe_emojis(emoji_str=""):
    """Return emoji-safe version of the string."""
    return emoji.emojize(emoji_str, language="alias")


class ColorLogger(logging.Formatter):
    """
    Formatter that prefixes every record with a level emoji and colors non-INFO levels.
    """

    # No color for INFO
    COLORS = {
        "DEBUG": Fore.BLUE,
        "WARNING": Fore.YELLOW,
        "ERROR": Fore.RED,
        "CRITICAL": Fore.MAGENTA,
    }

    EMOJIS = {
        "DEBUG": "🐛",
        "INFO": "🛈",
        "WARNING": "⚠️",
        "ERROR": "❌",
        "CRITICAL": "🔥",
    }

    def format(self, record):
        levelname = record.levelname
        message = super().format(record)
        color = self.COLORS.get(levelname, Style.RESET_ALL)
        emoji_symbol = platform_safe_emojis(self.EMOJIS.get(levelname, ""))
        return f"{color}{emoji_symbol} {message}{Style.RESET_ALL}"


def add_separator_method(logger, width=85):
    """
    Attach a ``separator(text)`` method that logs a fixed-width banner.

    :param logger: The logger instance
    :param width: Total width of the banner
    :return: The logger with added separator method
    """

    def separator(text, char="-"):
        text_with_spaces = f" {text} " if text else ""
        padding_length = (width - len(text_with_spaces)) // 2
        line = char * padding_length + text_with_spaces + char * padding_length
        logger.info(line[:width].ljust(width, char))

    logger.separator = separator
    return logger


def configure_logger(name="layoutflow", verbose=True):
    """
    Configure a logger with color and emoji formatting.

    :param name: Name of the logger
    :param verbose: INFO level when True, ERROR otherwise
    """
    level = logging.INFO if verbose else logging.ERROR

    logger = logging.getLogger(name)
    logger.setLevel(level)
    # Re-configuring the same name must not stack handlers
    if not any(getattr(h, "_layoutflow", False) for h in logger.handlers):
        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(ColorLogger("%(message)s"))
        stream_handler._layoutflow = True
        logger.addHandler(stream_handler)
    for handler in logger.handlers:
        if getattr(handler, "_layoutflow", False):
            handler.setLevel(level)
    logger.propagate = False

    return logger


def set_verbosity(verbose: bool):
    configure_logger(LOGGER.name, verbose=verbose)


def attach_file_handler(path, logger=None) -> logging.FileHandler:
    """Mirror ``logger`` (default ``LOGGER``) into a plain-text file, without colors or emojis."""
    logger = logger or LOGGER
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)-8s %(message)s"))
    logger.addHandler(handler)
    return handler


def detach_file_handler(handler: logging.Handler, logger=None) -> None:
    (logger or LOGGER).removeHandler(handler)
    handler.close()


LOGGER = add_separator_method(configure_logger())

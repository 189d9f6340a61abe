"""Tests for logging setup."""

import json
import sys
import logging

from rich.logging import RichHandler

from ellipsoidpack.utils.logging import JSONFormatter, setup_logger


def make_record(**extra):
    record = logging.LogRecord(
        name="ellipsoidpack",
        level=logging.INFO,
        pathname=__file__,
        lineno=10,
        msg="Trajectory %d uses stream %s",
        args=(3, "7:3"),
        exc_info=None,
    )
    for key, value in extra.items():
        setattr(record, key, value)
    return record


def test_json_formatter_basic_fields():
    data = json.loads(JSONFormatter().format(make_record()))
    assert data["level"] == "INFO"
    assert data["logger"] == "ellipsoidpack"
    assert data["message"] == "Trajectory 3 uses stream 7:3"
    assert data["line"] == 10
    assert data["timestamp"].endswith("Z")


def test_json_formatter_context_fields():
    record = make_record(trajectory=3, stream_id="7:3", seed=7, duration=125)
    data = json.loads(JSONFormatter().format(record))
    assert data["trajectory"] == 3
    assert data["stream_id"] == "7:3"
    assert data["seed"] == 7
    assert data["duration_ms"] == 125
    assert "duration" not in data


def test_json_formatter_arbitrary_extra():
    data = json.loads(JSONFormatter().format(make_record(contacts=6)))
    assert data["contacts"] == 6


def test_json_formatter_exception():
    try:
        raise ArithmeticError("non-finite increment")
    except ArithmeticError:
        record = make_record()
        record.exc_info = sys.exc_info()
    data = json.loads(JSONFormatter().format(record))
    assert "non-finite increment" in data["exception"]


def test_setup_logger_json():
    logger = setup_logger("ellipsoidpack.test_json", json_format=True)
    assert len(logger.handlers) == 1
    assert isinstance(logger.handlers[0].formatter, JSONFormatter)
    assert logger.level == logging.INFO
    assert logger.propagate is False


def test_setup_logger_rich_verbose():
    logger = setup_logger("ellipsoidpack.test_rich", verbose=True)
    assert isinstance(logger.handlers[0], RichHandler)
    assert logger.level == logging.DEBUG


def test_setup_logger_replaces_handlers():
    setup_logger("ellipsoidpack.test_repeat")
    logger = setup_logger("ellipsoidpack.test_repeat", json_format=True)
    assert len(logger.handlers) == 1

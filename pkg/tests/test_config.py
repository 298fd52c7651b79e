import logging
import sys

from core import config
from core.logger import _get_log_level, setup_logger


def test_integer_keys_fall_back_on_bad_values(monkeypatch):
    monkeypatch.setenv("PROBE_SIZE", "lots")
    assert config._int_env("PROBE_SIZE", 4) == 4
    monkeypatch.setenv("PROBE_SIZE", " ")
    assert config._int_env("PROBE_SIZE", 4) == 4
    monkeypatch.setenv("PROBE_SIZE", "7")
    assert config._int_env("PROBE_SIZE", 4) == 7


def test_log_level_from_environment(monkeypatch):
    monkeypatch.delenv("LOG_LEVEL", raising=False)
    monkeypatch.setenv("ENV", "dev")
    assert _get_log_level() == logging.DEBUG
    monkeypatch.setenv("ENV", "prod")
    assert _get_log_level() == logging.INFO
    monkeypatch.setenv("LOG_LEVEL", "warning")
    assert _get_log_level() == logging.WARNING
    monkeypatch.setenv("LOG_LEVEL", "chatty")
    assert _get_log_level() == logging.INFO


def test_logs_go_to_stderr():
    logger = setup_logger("tests.stderr-check", logging.INFO)
    (handler,) = logger.handlers
    assert handler.stream is sys.stderr
    assert logger.propagate is False

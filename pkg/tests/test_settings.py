"""Tests for the settings module."""

from unittest.mock import patch

import pytest

from desitter_kg.src.core.exceptions.exceptions import AppException
from desitter_kg.src.settings import Settings, validate_config


class TestSettings:
    """Test cases for Settings class."""

    @patch.dict("os.environ", {}, clear=True)
    def test_settings_default_values(self):
        """Test Settings has correct default values."""
        settings = Settings()
        assert settings.PYTHON_LOG_LEVEL == "INFO"
        assert settings.DSKG_THREADS == 1
        assert settings.DSKG_HYP2F1_TERM_BUDGET == 4000
        assert settings.DSKG_CACHE_MB == 512
        assert settings.DSKG_OUTPUT_DIR == "results"

    def test_settings_from_environment(self):
        """Test Settings reads values from the environment."""
        with patch.dict(
            "os.environ",
            {
                "DSKG_THREADS": "4",
                "DSKG_HYP2F1_TERM_BUDGET": "800",
                "DSKG_CACHE_MB": "0",
                "DSKG_OUTPUT_DIR": "/tmp/dskg",
                "PYTHON_LOG_LEVEL": "DEBUG",
            },
        ):
            settings = Settings()
            assert settings.DSKG_THREADS == 4
            assert settings.DSKG_HYP2F1_TERM_BUDGET == 800
            assert settings.DSKG_CACHE_MB == 0
            assert settings.DSKG_OUTPUT_DIR == "/tmp/dskg"
            assert settings.PYTHON_LOG_LEVEL == "DEBUG"


class TestValidateConfig:
    """Test cases for validate_config function."""

    @patch.dict("os.environ", {}, clear=True)
    def test_validate_config_valid_settings(self):
        """Test validate_config with valid settings."""
        settings = Settings()
        # Should not raise any exceptions
        validate_config(settings)

    def test_validate_config_invalid_log_level(self):
        """Test validate_config with invalid log level."""
        settings = Settings()
        settings.PYTHON_LOG_LEVEL = "INVALID"

        with pytest.raises(AppException) as exc_info:
            validate_config(settings)

        assert "PYTHON_LOG_LEVEL must be one of" in exc_info.value.detail_message
        assert exc_info.value.error_code == "E_001"

    def test_validate_config_zero_threads(self):
        """Test validate_config rejects a thread cap below one."""
        settings = Settings()
        settings.DSKG_THREADS = 0

        with pytest.raises(AppException) as exc_info:
            validate_config(settings)

        assert "DSKG_THREADS" in exc_info.value.detail_message
        assert exc_info.value.exit_code == 2

    def test_validate_config_small_term_budget(self):
        """Test validate_config rejects a series budget below 100 terms."""
        settings = Settings()
        settings.DSKG_HYP2F1_TERM_BUDGET = 50

        with pytest.raises(AppException, match="DSKG_HYP2F1_TERM_BUDGET"):
            validate_config(settings)

    def test_validate_config_negative_cache(self):
        """Test validate_config rejects a negative cache size."""
        settings = Settings()
        settings.DSKG_CACHE_MB = -1

        with pytest.raises(AppException, match="DSKG_CACHE_MB"):
            validate_config(settings)

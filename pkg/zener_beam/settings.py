"""
Django settings for zener_beam project.

Проект используется только как консольный инструмент: расчёт балки
Эйлера-Бернулли на дробном вязкоупругом основании Зинера, проверки
энергетических оценок и ε-асимптотик. HTTP-слоя нет.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Секретный ключ Django не используется для подписи данных в CLI-режиме
SECRET_KEY = str(os.getenv("SECRET_KEY", "zener-beam-cli-only"))

DEBUG = False

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "apps.services.apps.ServicesConfig",
    "apps.kernels.apps.KernelsConfig",
    "apps.coefficients.apps.CoefficientsConfig",
    "apps.beam.apps.BeamConfig",
    "apps.dynamics.apps.DynamicsConfig",
    "apps.energy.apps.EnergyConfig",
    "apps.harness.apps.HarnessConfig",
]

# Database
# https://docs.djangoproject.com/en/5.1/ref/settings/#databases
# Журнал запусков (RunRecord) хранится в SQLite рядом с проектом

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

# Internationalization

LANGUAGE_CODE = "ru"
TIME_ZONE = "Europe/Moscow"

USE_I18N = True

USE_TZ = True

# Default primary key field type

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": os.getenv("ZENER_BEAM_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}

# Параметры расчётного ядра

ZENER_BEAM = {
    "WORKERS": int(os.getenv("ZENER_BEAM_WORKERS", "1")),
    "OUTPUT_DIR": Path(os.getenv("ZENER_BEAM_OUTPUT_DIR", BASE_DIR / "runs")),
    # Ряд Миттаг-Леффлера: радиус применимости и число членов
    "ML_SERIES_RADIUS": 1.0,
    "ML_SERIES_TERMS": 250,
    "ML_SERIES_TOL": 1e-16,
    "ML_INTEGRAL_TOL": 1e-12,
    "GAUSS_POINTS": 4,
    "MOLLIFIER_GAUSS_POINTS": 64,
    "ENERGY_SLACK": 1e-8,
    "DEFAULT_EPS_EXPONENTS": list(range(3, 13)),
    "NEWMARK_BETA": 0.25,
    "NEWMARK_GAMMA": 0.5,
    "CSV_DIGITS": 17,
}

from pathlib import Path

import numpy as np
from django.conf import settings
from pytils.translit import slugify
from scipy import stats

DEFAULTS = {
    "WORKERS": 1,
    "OUTPUT_DIR": Path("runs"),
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


def solver_setting(name: str):
    """
    Значение параметра расчётного ядра из settings.ZENER_BEAM (или по умолчанию)
    """
    overrides = getattr(settings, "ZENER_BEAM", {}) if settings.configured else {}
    return overrides.get(name, DEFAULTS[name])


def run_slug(scenario: str, **params) -> str:
    """
    Детерминированное имя каталога запуска: сценарий + параметры
    """
    parts = [scenario] + [f"{key}-{params[key]:g}" for key in sorted(params)]
    return slugify("_".join(parts).replace(".", "p"))


def unique_run_dir(root: Path, slug: str) -> Path:
    """
    Каталог запуска; при повторном запуске с тем же именем файлы перезаписываются
    """
    path = Path(root) / slug
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_float(value: float) -> str:
    digits = solver_setting("CSV_DIGITS")
    return f"{float(value):.{digits}g}"


def default_eps_grid() -> np.ndarray:
    return np.array([2.0**-k for k in solver_setting("DEFAULT_EPS_EXPONENTS")])


def loglog_fit(eps: np.ndarray, values: np.ndarray):
    """
    Наклон log(values) относительно log(1/eps) и коэффициент корреляции
    """
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if np.ptp(y) == 0.0:
        return 0.0, 1.0
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.rvalue)

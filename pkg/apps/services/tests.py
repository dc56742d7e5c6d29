import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from .exceptions import ConfigError, ProbeError, StepFailure, ZenerBeamError
from .utils import (
    default_eps_grid,
    format_float,
    loglog_fit,
    run_slug,
    solver_setting,
    unique_run_dir,
)


class UtilsTests(SimpleTestCase):
    def test_run_slug_is_deterministic(self):
        first = run_slug("moving_load", c=0.5, alpha=0.5)
        self.assertEqual(first, run_slug("moving_load", alpha=0.5, c=0.5))
        self.assertNotIn(".", first)
        self.assertNotEqual(first, run_slug("moving_load", c=1.0, alpha=0.5))

    def test_unique_run_dir_reuses_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = unique_run_dir(Path(tmp), "run")
            second = unique_run_dir(Path(tmp), "run")
            self.assertEqual(first, second)
            self.assertTrue(first.is_dir())

    def test_format_float_round_trips(self):
        for value in (0.1, 1.0 / 3.0, math.pi * 1e-300, -2.5e17):
            self.assertEqual(float(format_float(value)), value)

    def test_loglog_fit(self):
        eps = np.array([2.0**-k for k in range(3, 9)])
        slope, rvalue = loglog_fit(eps, 3.0 * eps**-1.5)
        self.assertAlmostEqual(slope, 1.5, places=12)
        self.assertAlmostEqual(rvalue, 1.0, places=12)
        self.assertEqual(loglog_fit(eps, np.ones_like(eps)), (0.0, 1.0))

    def test_default_eps_grid(self):
        grid = default_eps_grid()
        self.assertEqual(grid[0], 0.125)
        self.assertEqual(grid[-1], 2.0**-12)
        self.assertTrue(np.all(np.diff(grid) < 0.0))

    @override_settings(ZENER_BEAM={"GAUSS_POINTS": 6})
    def test_setting_override(self):
        self.assertEqual(solver_setting("GAUSS_POINTS"), 6)
        self.assertEqual(solver_setting("ENERGY_SLACK"), 1e-8)


class ExceptionTests(SimpleTestCase):
    def test_hierarchy_carries_context(self):
        error = StepFailure(12, "singular")
        self.assertIsInstance(error, ZenerBeamError)
        self.assertEqual(error.step, 12)
        self.assertEqual(ProbeError(0.25, "nan").eps, 0.25)
        config = ConfigError("bad", field="theta")
        self.assertEqual((config.field, config.line), ("theta", None))

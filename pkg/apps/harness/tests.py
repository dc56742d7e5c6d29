import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from apps.kernels.kernel import build_kernel, kernel_constants, mollify_kernel
from apps.services.exceptions import ConfigError, PicardNonConvergence
from apps.services.utils import run_slug

from .config import build_config, load_config
from .models import RunRecord
from .scenarios import compare_modes, run_scenario

SMALL = """
[scenario]
name = "{scenario}"

[kernel]
alpha = {alpha}
theta = {theta}
foundation = {foundation}

[time]
T = 0.5
dt = {dt}

[mesh]
n_elems = 8
"""


def small_config(
    scenario="free_vibration", alpha=0.5, theta=0.5, foundation="true", dt=0.5 / 128, extra=""
):
    return SMALL.format(
        scenario=scenario, alpha=alpha, theta=theta, foundation=foundation, dt=dt
    ) + extra


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()

    def write(self, text: str, name: str = "run.toml") -> Path:
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path

    def config(self, text: str):
        return load_config(self.write(text)).with_output(self.tmp / "out")


def read_csv(path: Path) -> list:
    with Path(path).open() as handle:
        return list(csv.reader(handle))


class ConfigTests(TempDirMixin, SimpleTestCase):
    def test_minimal_config_gets_defaults(self):
        config = load_config(
            self.write('[scenario]\nname = "free_vibration"\n[kernel]\nalpha = 0.5\ntheta = 0.5\n')
        )
        self.assertEqual(config.horizon, 1.0)
        self.assertEqual(config.dt, 1.0 / 2048)
        self.assertEqual(config.n_elems, 64)
        self.assertEqual(config.mode, "direct")
        self.assertTrue(config.foundation)
        self.assertEqual(len(config.digest), 64)

    def test_theta_out_of_range(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config({"scenario": {"name": "free_vibration"}, "kernel": {"alpha": 0.5, "theta": 1.5}})
        self.assertIn("theta must lie in (0,1]", str(ctx.exception))
        self.assertEqual(ctx.exception.field, "theta")

    def test_eps_sorted_descending(self):
        grid = [2.0**-k for k in range(3, 13)]
        config = build_config(
            {
                "scenario": {"name": "eps_sweep"},
                "kernel": {"alpha": 0.5, "theta": 0.5},
                "regularization": {"eps": grid[::-1]},
            }
        )
        self.assertEqual(list(config.eps), grid)
        self.assertEqual(config.eps_grid[0], 0.125)

    def test_eps_outside_unit_interval(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config(
                {
                    "scenario": {"name": "eps_sweep"},
                    "kernel": {"alpha": 0.5, "theta": 0.5},
                    "regularization": {"eps": [0.5, 2.0]},
                }
            )
        self.assertEqual(ctx.exception.field, "eps")

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config(
                {"scenario": {"name": "free_vibration"}, "kernel": {"alpha": 0.5, "theta": 0.5, "beta": 1}}
            )
        self.assertEqual(ctx.exception.field, "beta")

    def test_unknown_table(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config({"scenario": {"name": "free_vibration"}, "plot": {}})
        self.assertEqual(ctx.exception.field, "plot")

    def test_parse_error_reports_line(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(self.write('[scenario]\nname = "free_vibration"\n[kernel]\nalpha = = 0.5\n'))
        self.assertEqual(ctx.exception.line, 4)

    def test_unknown_scenario(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config({"scenario": {"name": "plate"}, "kernel": {"alpha": 0.5, "theta": 0.5}})
        self.assertEqual(ctx.exception.field, "name")

    def test_preset_defaults_and_overrides(self):
        config = build_config({"scenario": {"name": "axial_impulse"}, "kernel": {"alpha": 0.5, "theta": 0.5}})
        self.assertEqual(config.material.P1, 0.1)
        self.assertEqual(config.material.EI2, 1.0)
        config = build_config(
            {
                "scenario": {"name": "axial_impulse"},
                "kernel": {"alpha": 0.5, "theta": 0.5},
                "material": {"P1": 2.0},
            }
        )
        self.assertEqual(config.material.P1, 2.0)
        picard = build_config({"scenario": {"name": "picard"}, "kernel": {"alpha": 0.5, "theta": 0.5}})
        self.assertEqual(picard.mode, "picard")

    def test_impulse_time_outside_horizon(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config(
                {
                    "scenario": {"name": "axial_impulse"},
                    "kernel": {"alpha": 0.5, "theta": 0.5},
                    "time": {"T": 0.25},
                }
            )
        self.assertEqual(ctx.exception.field, "t1")

    def test_shipped_configs_are_valid(self):
        paths = sorted(Path(settings.BASE_DIR, "configs").glob("*.toml"))
        self.assertTrue(paths)
        for path in paths:
            with self.subTest(path=path.name):
                config = load_config(path)
                self.assertEqual(config.eps, tuple(sorted(config.eps, reverse=True)))

    def test_sweep_mollifies_kernel_for_small_alpha(self):
        def config(scenario, alpha, foundation=True):
            return build_config(
                {
                    "scenario": {"name": scenario},
                    "kernel": {"alpha": alpha, "theta": 0.5, "foundation": foundation},
                }
            )

        self.assertTrue(config("eps_sweep", 0.5).mollified_kernel)
        self.assertFalse(config("eps_sweep", 0.6).mollified_kernel)
        self.assertFalse(config("eps_sweep", 0.3, foundation=False).mollified_kernel)
        self.assertFalse(config("free_vibration", 0.3).mollified_kernel)

    def test_initial_table(self):
        base = {"scenario": {"name": "free_vibration"}, "kernel": {"alpha": 0.5, "theta": 0.5}}
        config = build_config(base)
        self.assertEqual((config.velocity, config.initial_eps_power), (0.0, 0.0))
        config = build_config({**base, "initial": {"velocity": 0.2, "eps_power": 1.5}})
        self.assertEqual((config.velocity, config.initial_eps_power), (0.2, 1.5))
        with self.assertRaises(ConfigError) as ctx:
            build_config({**base, "initial": {"eps_power": -1.0}})
        self.assertEqual(ctx.exception.field, "eps_power")
        with self.assertRaises(ConfigError) as ctx:
            build_config({**base, "initial": {"displacement": 1.0}})
        self.assertEqual(ctx.exception.field, "displacement")

    def test_material_validation_names_field(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config(
                {
                    "scenario": {"name": "free_vibration"},
                    "kernel": {"alpha": 0.5, "theta": 0.5},
                    "material": {"EI1": -1.0},
                }
            )
        self.assertEqual(ctx.exception.field, "EI1")


class ScenarioTests(TempDirMixin, SimpleTestCase):
    def test_free_vibration(self):
        outcome = run_scenario(self.config(small_config(foundation="false")))
        self.assertTrue(outcome.holds)
        names = {path.name for path in outcome.files}
        self.assertEqual(names, {"trajectory.csv", "ledger.csv", "midpoint.csv", "summary.json"})
        rows = read_csv(outcome.directory / "midpoint.csv")
        self.assertEqual(rows[0], ["t", "u_mid"])
        self.assertEqual(len(rows), 130)
        summary = json.loads((outcome.directory / "summary.json").read_text())
        self.assertGreater(summary["members"][0]["dominant_frequency"], 0.0)

    def test_trajectory_stride(self):
        config = self.config(small_config(extra="\n[output]\nstride = 4\n"))
        outcome = run_scenario(config)
        self.assertEqual(len(read_csv(outcome.directory / "trajectory.csv")), 1 + 129 // 4 + 1)

    def test_output_is_deterministic(self):
        text = small_config(scenario="stepped_stiffness")
        first = run_scenario(load_config(self.write(text)).with_output(self.tmp / "a"))
        second = run_scenario(load_config(self.write(text)).with_output(self.tmp / "b"))
        for name in ("trajectory.csv", "ledger.csv", "summary.json"):
            self.assertEqual(
                (first.directory / name).read_bytes(), (second.directory / name).read_bytes()
            )

    def test_moving_load_speeds(self):
        config = self.config(
            small_config(scenario="moving_load").replace(
                '[kernel]', "speeds = [0.5, 1.0]\n\n[kernel]"
            )
        )
        outcome = run_scenario(config)
        self.assertTrue(outcome.holds)
        for speed in (0.5, 1.0):
            name = run_slug("speed", c=speed)
            self.assertTrue((outcome.directory / f"trajectory_{name}.csv").exists())
            self.assertTrue((outcome.directory / f"ledger_{name}.csv").exists())
        slow = read_csv(outcome.directory / f"trajectory_{run_slug('speed', c=0.5)}.csv")
        fast = read_csv(outcome.directory / f"trajectory_{run_slug('speed', c=1.0)}.csv")
        self.assertNotEqual(slow[-1], fast[-1])

    def test_axial_impulse(self):
        config = self.config(
            small_config(scenario="axial_impulse", extra="\n[material]\nt1 = 0.25\n")
        )
        outcome = run_scenario(config)
        self.assertTrue(outcome.holds)
        self.assertGreater(outcome.worst_margin, 0.0)

    def test_snapshots_are_written_on_request(self):
        config = self.config(
            small_config(
                scenario="axial_impulse", extra="\n[material]\nt1 = 0.25\n\n[output]\nsnapshots = true\n"
            )
        )
        outcome = run_scenario(config)
        names = {path.name for path in outcome.files}
        self.assertTrue({"stiffness.csv", "axial.csv", "K0.csv", "M.csv"} <= names)
        stiffness = read_csv(outcome.directory / "stiffness.csv")
        self.assertEqual(stiffness[0], ["x", "c_eps"])
        self.assertEqual(len(stiffness), 514)
        self.assertEqual(float(stiffness[1][1]), 1.0)
        self.assertEqual(float(stiffness[-1][1]), 2.0)
        axial = read_csv(outcome.directory / "axial.csv")
        self.assertEqual(axial[0], ["t", "b_eps_at_x"])
        self.assertGreater(max(float(row[1]) for row in axial[1:]), 0.0)
        matrix = read_csv(outcome.directory / "K0.csv")
        self.assertEqual(matrix[0], ["row", "col", "value"])
        size = config.n_elems * 2 - 2
        self.assertTrue(all(0 <= int(row[0]) < size and 0 <= int(row[1]) < size for row in matrix[1:]))

    def test_snapshots_are_off_by_default(self):
        outcome = run_scenario(self.config(small_config(foundation="false")))
        self.assertFalse((outcome.directory / "K0.csv").exists())

    def test_eps_sweep_report(self):
        config = self.config(
            small_config(
                scenario="eps_sweep",
                alpha=0.6,
                dt=0.5 / 64,
                extra="\n[material]\nt1 = 0.25\n\n[regularization]\neps = ["
                + ", ".join(str(2.0**-k) for k in range(3, 13))
                + "]\n",
            )
        )
        outcome = run_scenario(config)
        rows = read_csv(outcome.directory / "report.csv")
        self.assertEqual(rows[0], ["eps", "measured_norm", "log_bound", "fitted_power"])
        self.assertEqual(len(rows), 11)
        self.assertEqual([float(row[0]) for row in rows[1:]], list(config.eps))
        summary = outcome.summary
        self.assertTrue(math.isfinite(summary["fitted_power"]))
        self.assertGreaterEqual(summary["bound_rvalue"], 0.99)
        self.assertTrue(summary["bracketed"])
        self.assertFalse(summary["super_polynomial"])
        self.assertTrue(outcome.holds)

    def test_power_scaled_axial_force_is_flagged(self):
        config = self.config(
            small_config(
                scenario="eps_sweep",
                dt=0.5 / 64,
                extra='\n[material]\nt1 = 0.25\n\n[regularization]\naxial_rule = "power"\n'
                "eps = [0.125, 0.0625, 0.03125, 0.015625]\n",
            )
        )
        outcome = run_scenario(config)
        self.assertTrue(outcome.summary["super_polynomial"])
        self.assertEqual(outcome.exit_code, 4)

    def test_mollified_kernel_run(self):
        text = small_config(alpha=0.3).replace("foundation = true", "foundation = true\nmollified = true")
        config = self.config(text)
        outcome = run_scenario(config)
        self.assertTrue(outcome.holds)
        self.assertGreater(outcome.worst_margin, 0.0)
        kernel = mollify_kernel(
            build_kernel(0.3, 0.5, config.horizon, config.dt), config.kernel_spec, config.eps_grid[0]
        )
        self.assertTrue(outcome.summary["mollified"])
        self.assertEqual(outcome.summary["energy"]["C_L"], kernel_constants(kernel).lemma)

    def test_sweep_with_small_alpha_uses_mollified_kernel(self):
        config = self.config(
            small_config(
                scenario="eps_sweep",
                alpha=0.3,
                dt=0.5 / 64,
                extra="\n[material]\nt1 = 0.25\n\n[regularization]\n"
                "eps = [0.125, 0.0625, 0.03125, 0.015625]\n",
            )
        )
        outcome = run_scenario(config)
        self.assertTrue(outcome.summary["mollified"])
        self.assertGreater(outcome.worst_margin, 0.0)
        self.assertTrue(outcome.summary["bracketed"])
        self.assertEqual(len(read_csv(outcome.directory / "report.csv")), 5)

    def test_zero_data_is_bitwise_zero(self):
        for mode in ("direct", "picard"):
            text = small_config().replace("[kernel]", "amplitude = 0.0\n\n[kernel]")
            text += f'\n[solver]\nmode = "{mode}"\n[output]\ndirectory = "{(self.tmp / mode).as_posix()}"\n'
            outcome = run_scenario(load_config(self.write(text)))
            rows = read_csv(outcome.directory / "trajectory.csv")
            self.assertTrue(all(float(value) == 0.0 for row in rows[1:] for value in row[1:]))

    def test_zero_data_sweep_is_bitwise_zero(self):
        text = small_config(scenario="eps_sweep", dt=0.5 / 64).replace(
            "[kernel]", "amplitude = 0.0\n\n[kernel]"
        )
        text += "\n[material]\nt1 = 0.25\n\n[regularization]\neps = [0.125, 0.0625, 0.03125]\n"
        outcome = run_scenario(self.config(text))
        self.assertTrue(outcome.summary["bracketed"])
        self.assertEqual(outcome.summary["fitted_power"], 0.0)
        for index in range(3):
            with self.subTest(index=index):
                rows = read_csv(outcome.directory / f"ledger_{index:02d}.csv")
                self.assertTrue(all(float(row[1]) == 0.0 and float(row[2]) == 0.0 for row in rows[1:]))
        rows = read_csv(outcome.directory / "report.csv")
        self.assertTrue(all(float(row[1]) == 0.0 for row in rows[1:]))

    def test_zero_data_picard_matches_direct_exactly(self):
        text = small_config().replace("[kernel]", "amplitude = 0.0\n\n[kernel]")
        report = compare_modes(self.config(text))
        self.assertTrue(report.converged)
        self.assertEqual(report.distance, 0.0)
        self.assertEqual(report.size, 0.0)
        self.assertTrue(report.passes)

    def test_light_density_without_foundation_holds(self):
        config = self.config(
            small_config(
                foundation="false",
                extra="\n[material]\ndensity_enabled = true\nR0 = 0.01\n",
            )
        )
        outcome = run_scenario(config)
        self.assertTrue(outcome.holds)
        self.assertEqual(outcome.exit_code, 0)
        self.assertAlmostEqual(outcome.summary["energy"]["rho"], 100.0, places=10)

    def test_initial_velocity_alone_drives_motion(self):
        text = small_config(foundation="false").replace("[kernel]", "amplitude = 0.0\n\n[kernel]")
        outcome = run_scenario(self.config(text + "\n[initial]\nvelocity = 0.01\n"))
        self.assertTrue(outcome.holds)
        ledger = read_csv(outcome.directory / "ledger.csv")
        self.assertEqual(float(ledger[1][1]), 0.0)
        self.assertGreater(float(ledger[1][2]), 0.0)
        self.assertGreater(float(ledger[-1][1]), 0.0)

    def test_eps_dependent_initial_data_shifts_power(self):
        def sweep(extra, name):
            text = small_config(
                scenario="eps_sweep",
                alpha=0.6,
                dt=0.5 / 64,
                extra="\n[material]\nt1 = 0.25\n\n[regularization]\neps = [0.125, 0.0625, 0.03125]\n"
                + extra,
            )
            return run_scenario(load_config(self.write(text)).with_output(self.tmp / name))

        plain = sweep("", "plain")
        scaled = sweep("\n[initial]\neps_power = 0.5\n", "scaled")
        self.assertAlmostEqual(
            scaled.summary["fitted_power"] - plain.summary["fitted_power"], 0.5, places=8
        )
        first = read_csv(scaled.directory / "ledger_00.csv")
        last = read_csv(scaled.directory / "ledger_02.csv")
        self.assertAlmostEqual(float(last[1][1]) / float(first[1][1]), 2.0, places=10)

    def test_solver_failure_record(self):
        config = self.config(small_config(extra='\n[solver]\nmode = "picard"\nmax_iter = 1\n'))
        with self.assertRaises(PicardNonConvergence):
            run_scenario(config)
        record = json.loads((config.output / config.slug / "failure.json").read_text())
        self.assertEqual(record["error"], "PicardNonConvergence")
        self.assertIn("ratios", record)


class CompareTests(TempDirMixin, SimpleTestCase):
    def test_modes_agree_without_foundation(self):
        report = compare_modes(self.config(small_config(foundation="false")))
        self.assertTrue(report.passes)
        self.assertEqual(report.distance, 0.0)

    def test_modes_agree_with_foundation(self):
        report = compare_modes(self.config(small_config(alpha=0.6, theta=0.5)))
        self.assertTrue(report.converged)
        self.assertLess(report.distance, 1e-6)
        self.assertTrue(report.passes)

    def test_non_convergence_is_reported(self):
        report = compare_modes(
            self.config(
                small_config(extra="\n[solver]\ntol = 1e-14\nmax_iter = 2\nrestart = false\n")
            )
        )
        self.assertFalse(report.converged)
        self.assertFalse(report.passes)
        self.assertEqual(report.exit_code, 4)


class CommandTests(TempDirMixin, TestCase):
    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out)
        return out.getvalue()

    def test_run_command_records_run(self):
        path = self.write(small_config(foundation="false"))
        self.call("run", str(path), "--out", str(self.tmp / "out"))
        record = RunRecord.objects.get()
        self.assertEqual(record.scenario, "free_vibration")
        self.assertEqual(record.exit_code, 0)
        self.assertTrue(record.verdict)
        self.assertTrue(Path(record.output_dir, "trajectory.csv").exists())
        self.assertEqual(record.mode, "direct")
        self.assertEqual(record.eps, 0.125)

    def test_config_error_exit_code(self):
        path = self.write(small_config(theta=1.5))
        with self.assertRaises(CommandError) as ctx:
            self.call("run", str(path))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse(RunRecord.objects.exists())

    def test_solver_failure_exit_code(self):
        path = self.write(small_config(extra='\n[solver]\nmode = "picard"\nmax_iter = 1\n'))
        with self.assertRaises(CommandError) as ctx:
            self.call("run", str(path), "--out", str(self.tmp / "out"))
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertEqual(RunRecord.objects.get().exit_code, 3)

    def test_verdict_failure_exit_code(self):
        path = self.write(
            small_config(extra="\n[solver]\ntol = 1e-14\nmax_iter = 2\nrestart = false\n")
        )
        with self.assertRaises(CommandError) as ctx:
            self.call("compare", str(path), "--out", str(self.tmp / "out"))
        self.assertEqual(ctx.exception.returncode, 4)
        self.assertFalse(RunRecord.objects.get().verdict)

    def test_sweep_command(self):
        path = self.write(
            small_config(
                scenario="stepped_stiffness",
                dt=0.5 / 32,
                extra="\n[regularization]\neps = [0.125, 0.0625, 0.03125, 0.015625]\n",
            )
        )
        output = self.call("sweep", str(path), "--out", str(self.tmp / "out"))
        self.assertIn("fitted power", output)
        record = RunRecord.objects.get()
        self.assertEqual(len(read_csv(Path(record.output_dir, "report.csv"))), 5)

    def test_sweep_failure_records_sweep_run(self):
        path = self.write(
            small_config(
                dt=0.5 / 32,
                extra='\n[solver]\nmode = "picard"\nmax_iter = 1\nrestart = false\n\n[regularization]\n'
                "eps = [0.125, 0.0625, 0.03125]\n",
            )
        )
        with self.assertRaises(CommandError) as ctx:
            self.call("sweep", str(path), "--out", str(self.tmp / "out"))
        self.assertEqual(ctx.exception.returncode, 3)
        record = RunRecord.objects.get()
        self.assertEqual(record.scenario, "eps_sweep")
        self.assertEqual(record.slug, run_slug("eps_sweep", alpha=0.5, theta=0.5, T=0.5, n=8))
        self.assertEqual(record.mode, "picard")
        self.assertEqual(record.eps, 0.125)
        failure = json.loads(Path(record.output_dir, "failure.json").read_text())
        self.assertEqual(failure["eps"], 0.125)

    def test_compare_records_compare_run(self):
        path = self.write(small_config(foundation="false"))
        self.call("compare", str(path), "--out", str(self.tmp / "out"))
        record = RunRecord.objects.get()
        self.assertEqual(record.mode, "compare")
        self.assertEqual(record.slug, run_slug("compare", alpha=0.5, theta=0.5, T=0.5, n=8))
        self.assertEqual(record.eps, 0.125)
        self.assertTrue(Path(record.output_dir, "summary.json").exists())

    def test_kernel_table(self):
        self.call("kernel_table", "0.5", "0.5", "1", "0.0625", "--out", str(self.tmp))
        (path,) = self.tmp.glob("*.csv")
        rows = read_csv(path)
        self.assertEqual(rows[0], ["t", "l_alpha"])
        self.assertEqual(len(rows), 18)

    def test_kernel_table_rejects_theta(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("kernel_table", "0.5", "1.5", "1", "0.0625")
        self.assertEqual(ctx.exception.returncode, 2)

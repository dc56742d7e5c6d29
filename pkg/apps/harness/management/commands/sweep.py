from dataclasses import replace

from apps.harness.management.base import ScenarioCommand
from apps.harness.scenarios import run_sweep


class Command(ScenarioCommand):
    help = "Серия расчётов по сетке ε и вердикт умеренности"

    def prepare(self, config):
        return replace(config, scenario="eps_sweep")

    def execute_scenario(self, config):
        outcome = run_sweep(config)
        self.record(
            config,
            outcome.exit_code,
            outcome.slug,
            outcome.directory,
            outcome.holds,
            outcome.worst_margin,
        )
        summary = outcome.summary
        self.stdout.write(
            f"fitted power {summary['fitted_power']:.6g} (r={summary['rvalue']:.4f}), "
            f"bound power {summary['bound_power']:.6g} (r={summary['bound_rvalue']:.4f})"
        )
        return outcome

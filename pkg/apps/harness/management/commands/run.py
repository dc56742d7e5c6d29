import math

from apps.harness.management.base import ScenarioCommand
from apps.harness.scenarios import run_scenario


class Command(ScenarioCommand):
    help = "Расчёт сценария из файла конфигурации"

    def execute_scenario(self, config):
        outcome = run_scenario(config)
        self.record(
            config,
            outcome.exit_code,
            outcome.slug,
            outcome.directory,
            outcome.holds,
            outcome.worst_margin if math.isfinite(outcome.worst_margin) else None,
            eps=self.run_eps(config),
        )
        for path in outcome.files:
            self.stdout.write(str(path))
        return outcome

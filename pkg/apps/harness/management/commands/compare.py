from apps.harness.management.base import ScenarioCommand
from apps.harness.scenarios import compare_modes, compare_slug


class Command(ScenarioCommand):
    help = "Сравнение прямого расчёта и итераций Пикара"
    record_mode = "compare"

    def run_slug(self, config) -> str:
        return compare_slug(config)

    def execute_scenario(self, config):
        report = compare_modes(config)
        self.record(
            config,
            report.exit_code,
            self.run_slug(config),
            report.directory,
            report.passes,
            eps=self.run_eps(config),
        )
        if report.converged:
            self.stdout.write(
                f"E_V distance {report.distance:.3e}, iterations {report.diagnostics.iterations}"
            )
        else:
            self.stdout.write(
                self.style.WARNING(f"Picard did not converge, ratios {report.diagnostics.ratios}")
            )
        return report

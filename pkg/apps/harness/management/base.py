from django.core.management.base import BaseCommand, CommandError

from apps.harness.config import load_config
from apps.harness.models import RunRecord
from apps.harness.scenarios import EXIT_CONFIG, EXIT_SOLVER, EXIT_VERDICT
from apps.services.exceptions import ConfigError, ZenerBeamError


class ScenarioCommand(BaseCommand):
    """
    Общая часть команд, принимающих файл конфигурации запуска.

    Коды завершения: 2 - ошибка конфигурации, 3 - сбой решателя,
    4 - нарушена проверяемая оценка.
    """

    record_mode = None

    def add_arguments(self, parser):
        parser.add_argument("config", help="TOML-файл конфигурации запуска")
        parser.add_argument("--out", help="Каталог результатов")

    def prepare(self, config):
        """
        Конфигурация, с которой команда фактически запускает расчёт
        """
        return config

    def run_slug(self, config) -> str:
        return config.slug

    def run_eps(self, config) -> float | None:
        if config.scenario == "eps_sweep":
            return None
        return config.eps_grid[0]

    def execute_scenario(self, config):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            config = load_config(options["config"])
        except ConfigError as exc:
            raise CommandError(f"configuration error: {exc}", returncode=EXIT_CONFIG)
        if options["out"]:
            config = config.with_output(options["out"])
        config = self.prepare(config)
        try:
            result = self.execute_scenario(config)
        except ConfigError as exc:
            raise CommandError(f"configuration error: {exc}", returncode=EXIT_CONFIG)
        except ZenerBeamError as exc:
            slug = self.run_slug(config)
            eps = getattr(exc, "eps", None)
            self.record(
                config,
                EXIT_SOLVER,
                slug,
                config.output / slug,
                eps=self.run_eps(config) if eps is None else eps,
            )
            raise CommandError(f"solver failure: {exc}", returncode=EXIT_SOLVER)
        if result.exit_code:
            raise CommandError(f"check failed, results in {result.directory}", returncode=EXIT_VERDICT)
        self.stdout.write(self.style.SUCCESS(f"Результаты записаны в {result.directory}"))

    def record(self, config, exit_code, slug, directory, verdict=None, worst_margin=None, eps=None):
        return RunRecord.objects.create(
            scenario=config.scenario,
            slug=slug,
            digest=config.digest,
            mode=self.record_mode or config.mode,
            eps=eps,
            verdict=verdict,
            worst_margin=worst_margin,
            exit_code=exit_code,
            output_dir=str(directory),
        )
